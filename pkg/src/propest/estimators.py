"""Property estimators: plug-in baselines and the two-stream amplified estimator.

The amplified estimator splits symbols by their count in a second, independent
stream.  Frequently seen symbols are handled by the plug-in rule on the first
stream.  Rarely seen symbols are handled by a linear estimator whose weight
for a symbol observed ``v`` times emulates the expected plug-in value under a
``t``-fold larger sample: the weights come from expanding a smoothed version
of that expectation as a power series in the unknown per-symbol mean, so that
``weight[v] = h_v * v!`` makes the series unbiased term by term.  A Poisson
tail factor of level ``r`` attenuates high orders, and the orders themselves
are truncated at ``u_max``.  All weights are evaluated in signed log space and
clamped to an analytic envelope, since the raw terms overflow doubles long
before the weights themselves become relevant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .distributions import Histogram, SplitSample
from .numerics import (
    integrate_poisson_kernel_bessel,
    log_poisson_tail,
    log_poisson_tail_table,
    signed_log_sum_arrays,
)
from .properties import PropertySpec, eval_fx_grid, eval_fx_many, lipschitz

__all__ = [
    "AmplifiedEstimate",
    "CoefficientTable",
    "CoefficientTables",
    "EstimatorParams",
    "ParameterError",
    "PRESETS",
    "amplified_estimate",
    "amplified_estimate_detailed",
    "build_coefficient_table",
    "build_coefficient_tables",
    "coefficient",
    "derive_params",
    "empirical",
    "modified_empirical",
    "smoothed_h_hat",
]

_LOG_DECAY = math.log(1.5)
_DECAY_FLOOR = 1.5

#: Per-property preset tuning: (t_coefficient, t_exponent, s0_multiplier),
#: giving t = c * log(n)^e + 1 and s0 = round(m * log(n)^0.2).
PRESETS = {
    "entropy": (2.0, 0.8, 16.0),
    "support_size": (1.0, 0.7, 16.0),
    "support_coverage": (1.0, 0.8, 8.0),
    "power_sum": (1.0, 1.0, 4.0),
    "dist_to_uniform": (1.0, 0.7, 4.0),
}

MIN_TOTAL_N = 150.0
MIN_T = 2.5


class ParameterError(ValueError):
    """Estimator parameters out of their admissible range."""


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class EstimatorParams:
    """Tuning of the amplified estimator.

    ``rate`` is the per-stream Poisson rate entering every count ratio.
    ``u_max`` and ``r`` are derived from ``t`` and ``s0`` and validated, so
    construct instances through :meth:`from_t_s0` or :func:`derive_params`.
    ``v_max`` caps the coefficient table; counts beyond it contribute zero.
    """

    rate: float
    t: float
    s0: int
    u_max: int
    r: int
    t_decay: bool = True
    v_max: int | None = None
    clamp_ceiling: float = 1e100

    def __post_init__(self) -> None:
        if not self.rate > 0:
            raise ParameterError(f"rate must be positive, got {self.rate!r}")
        if not self.t > MIN_T:
            raise ParameterError(f"amplification t must exceed {MIN_T}, got {self.t!r}")
        if self.s0 < 1 or self.s0 != int(self.s0):
            raise ParameterError(f"s0 must be a positive integer, got {self.s0!r}")
        expected_u = _round_half_up(2 * self.s0 * self.t + 2 * self.s0 - 1)
        expected_r = _round_half_up(10 * self.s0 * self.t + 10 * self.s0)
        if self.u_max != expected_u:
            raise ParameterError(f"u_max must be {expected_u} for t={self.t}, s0={self.s0}")
        if self.r != expected_r:
            raise ParameterError(f"r must be {expected_r} for t={self.t}, s0={self.s0}")
        if self.v_max is None:
            object.__setattr__(self, "v_max", max(4 * self.r, 200))
        if self.v_max < 1 or self.v_max != int(self.v_max):
            raise ParameterError(f"v_max must be a positive integer, got {self.v_max!r}")
        if not self.clamp_ceiling > 0:
            raise ParameterError("clamp_ceiling must be positive")

    @classmethod
    def from_t_s0(
        cls,
        rate: float,
        t: float,
        s0: int,
        t_decay: bool = True,
        v_max: int | None = None,
        clamp_ceiling: float = 1e100,
    ) -> "EstimatorParams":
        return cls(
            rate=float(rate),
            t=float(t),
            s0=int(s0),
            u_max=_round_half_up(2 * s0 * t + 2 * s0 - 1),
            r=_round_half_up(10 * s0 * t + 10 * s0),
            t_decay=t_decay,
            v_max=v_max,
            clamp_ceiling=clamp_ceiling,
        )

    def t_at(self, v: int) -> float:
        """Effective amplification used for the coefficient at count ``v``.

        With decay on, ``t`` shrinks by a factor 1.5 per unit of ``v`` down
        to a floor of 1.5, taming the growth of high-order weights.
        """
        if not self.t_decay:
            return self.t
        damp = self.t * math.exp(-(v - 1) * _LOG_DECAY)
        return damp if damp > _DECAY_FLOOR else _DECAY_FLOOR


def derive_params(
    total_n: float,
    spec: PropertySpec,
    preset: bool = True,
    alpha: float | None = None,
    s0_mult: float | None = None,
    split_mode: str = "two_stream",
    t_decay: bool = True,
    v_max: int | None = None,
    clamp_ceiling: float = 1e100,
) -> EstimatorParams:
    """Tune the amplified estimator for a total sampling budget ``total_n``.

    Preset mode looks up the per-property tuning in :data:`PRESETS`; manual
    mode (``preset=False``) uses ``t = log(n)^(1-alpha) + 1`` and
    ``s0 = round(s0_mult * log(n)^0.2)``.  The per-stream rate follows the
    split mode: ``total_n`` for two_stream and shared, ``total_n / 2`` for
    thinned.
    """
    if not total_n >= MIN_TOTAL_N:
        raise ParameterError(f"need total_n >= {MIN_TOTAL_N:g}, got {total_n!r}")
    if split_mode not in ("two_stream", "thinned", "shared"):
        raise ParameterError(f"unknown split mode {split_mode!r}")
    log_n = math.log(total_n)
    if preset:
        if spec.kind not in PRESETS:
            raise ParameterError(
                f"no preset tuning for {spec.kind}; pass preset=False with "
                "explicit alpha and s0_mult"
            )
        coeff, expo, mult = PRESETS[spec.kind]
    else:
        if alpha is None or s0_mult is None:
            raise ParameterError("manual tuning requires both alpha and s0_mult")
        if not 0.0 <= alpha <= 1.0:
            raise ParameterError(f"alpha must be in [0, 1], got {alpha!r}")
        if not s0_mult > 0:
            raise ParameterError(f"s0_mult must be positive, got {s0_mult!r}")
        coeff, expo, mult = 1.0, 1.0 - alpha, s0_mult
    t = coeff * log_n**expo + 1.0
    if not t > MIN_T:
        raise ParameterError(
            f"derived amplification t={t:.4g} must exceed {MIN_T}; "
            "increase total_n or lower alpha"
        )
    s0 = max(1, _round_half_up(mult * log_n**0.2))
    rate = total_n / 2.0 if split_mode == "thinned" else float(total_n)
    return EstimatorParams.from_t_s0(
        rate, t, s0, t_decay=t_decay, v_max=v_max, clamp_ceiling=clamp_ceiling
    )


# ---------------------------------------------------------------------------
# coefficient machinery
# ---------------------------------------------------------------------------


@lru_cache(maxsize=16)
def _cached_log_tail(r: int, j_max: int) -> np.ndarray:
    table = log_poisson_tail_table(float(r), j_max)
    table.flags.writeable = False
    return table


@lru_cache(maxsize=16)
def _cached_log_factorials(j_max: int) -> np.ndarray:
    table = gammaln(np.arange(j_max + 1, dtype=np.float64) + 1.0)
    table.flags.writeable = False
    return table


def _log_clamp_bound(spec: PropertySpec, params: EstimatorParams) -> float:
    """Log of the analytic weight envelope, capped at the configured ceiling."""
    nt = params.rate * params.t
    lip = lipschitz(spec, min(1.0, 1.0 / nt))
    if lip == 0.0:
        return -math.inf
    bound = math.log(lip) + math.log(params.u_max) - math.log(nt) + 2.0 * params.r * (
        params.t - 1.0
    )
    return min(bound, math.log(params.clamp_ceiling))


def _coefficient_signed_log(
    spec: PropertySpec,
    v: int,
    params: EstimatorParams,
    qx: float | None,
    log_tail: np.ndarray,
    log_fact: np.ndarray,
) -> tuple[int, float, bool]:
    """Signed-log weight ``h_v * v!`` before clamping, plus cancellation flag."""
    t = params.t_at(v)
    u = np.arange(1, min(params.u_max, v) + 1)
    f = eval_fx_grid(spec, u / (params.rate * t), qx)
    with np.errstate(divide="ignore"):
        log_mag = (
            np.log(np.abs(f))
            + u * math.log(t / (t - 1.0))
            + v * math.log(t - 1.0)
            + log_fact[v]
            - log_fact[v - u]
            - log_fact[u]
            + log_tail[v + u]
        )
    parity = np.where((v - u) % 2 == 0, 1, -1)
    signs = np.sign(f).astype(np.int64) * parity
    return signed_log_sum_arrays(signs, log_mag)


@dataclass(frozen=True)
class CoefficientTable:
    """Precomputed small-branch weights ``h_v * v!`` for counts ``1..v_max``.

    ``values[0]`` is 0 (an unseen symbol contributes nothing).  ``clamped``
    and ``cancelled`` mark counts whose weight hit the envelope or lost all
    significance to cancellation.
    """

    values: np.ndarray
    clamped: np.ndarray
    cancelled: np.ndarray
    log_clamp_bound: float
    spec: PropertySpec
    params: EstimatorParams
    q_x: float | None = None

    def __post_init__(self) -> None:
        for name in ("values", "clamped", "cancelled"):
            arr = getattr(self, name)
            arr.flags.writeable = False

    @property
    def v_max(self) -> int:
        return len(self.values) - 1

    @property
    def clamp_bound(self) -> float:
        if self.log_clamp_bound == -math.inf:
            return 0.0
        if self.log_clamp_bound > math.log(np.finfo(np.float64).max):
            return math.inf
        return math.exp(self.log_clamp_bound)

    @property
    def n_clamped(self) -> int:
        return int(self.clamped.sum())

    @property
    def n_cancelled(self) -> int:
        return int(self.cancelled.sum())


def _resolve_context(spec: PropertySpec, q_x: float | None) -> float | None:
    if spec.q is None:
        return None
    if q_x is None:
        raise ValueError(f"{spec.kind} weights depend on the reference mass q_x")
    return float(q_x)


def coefficient(
    spec: PropertySpec, v: int, params: EstimatorParams, q_x: float | None = None
) -> float:
    """Small-branch weight ``h_v * v!`` for a symbol observed ``v`` times.

    Shares its arithmetic with :func:`build_coefficient_table`, so the two
    agree bit for bit.
    """
    if v < 1 or v != int(v):
        raise ValueError(f"v must be a positive integer, got {v!r}")
    if v > params.v_max:
        raise ValueError(f"v={v} exceeds the table range v_max={params.v_max}")
    qx = _resolve_context(spec, q_x)
    log_tail = _cached_log_tail(params.r, params.v_max + params.u_max)
    log_fact = _cached_log_factorials(params.v_max + params.u_max)
    sign, log_mag, _ = _coefficient_signed_log(spec, v, params, qx, log_tail, log_fact)
    if sign == 0:
        return 0.0
    log_mag = min(log_mag, _log_clamp_bound(spec, params))
    return sign * math.exp(log_mag)


def build_coefficient_table(
    spec: PropertySpec,
    params: EstimatorParams,
    v_max: int | None = None,
    q_x: float | None = None,
) -> CoefficientTable:
    """Tabulate ``h_v * v!`` for ``v = 1..v_max`` (default ``params.v_max``)."""
    if v_max is None:
        v_max = params.v_max
    if v_max < 1 or v_max > params.v_max:
        raise ValueError(f"v_max must be in 1..{params.v_max}, got {v_max!r}")
    qx = _resolve_context(spec, q_x)
    log_tail = _cached_log_tail(params.r, params.v_max + params.u_max)
    log_fact = _cached_log_factorials(params.v_max + params.u_max)
    log_clamp = _log_clamp_bound(spec, params)

    values = np.zeros(v_max + 1)
    clamped = np.zeros(v_max + 1, dtype=bool)
    cancelled = np.zeros(v_max + 1, dtype=bool)
    for v in range(1, v_max + 1):
        sign, log_mag, cancel = _coefficient_signed_log(
            spec, v, params, qx, log_tail, log_fact
        )
        cancelled[v] = cancel
        if sign == 0:
            continue
        if log_mag > log_clamp:
            log_mag = log_clamp
            clamped[v] = True
        values[v] = sign * math.exp(log_mag)
    return CoefficientTable(
        values=values,
        clamped=clamped,
        cancelled=cancelled,
        log_clamp_bound=log_clamp,
        spec=spec,
        params=params,
        q_x=qx,
    )


@dataclass(frozen=True)
class CoefficientTables:
    """Weight tables for every distinct reference mass of a property.

    Symmetric properties share a single table.  For l1/kl one table is built
    per distinct value of ``q``, deduplicated.
    """

    spec: PropertySpec
    params: EstimatorParams
    tables: tuple[CoefficientTable, ...]
    unique_q: np.ndarray | None = None

    def table_for_symbols(self, symbols: np.ndarray) -> np.ndarray:
        """Index of the table owning each symbol."""
        if self.unique_q is None:
            return np.zeros(len(symbols), dtype=np.int64)
        return np.searchsorted(self.unique_q, self.spec.q[symbols])

    @property
    def n_clamped(self) -> int:
        return sum(t.n_clamped for t in self.tables)

    @property
    def n_cancelled(self) -> int:
        return sum(t.n_cancelled for t in self.tables)


def build_coefficient_tables(
    spec: PropertySpec, params: EstimatorParams, v_max: int | None = None
) -> CoefficientTables:
    """Build the full table set an amplified estimate needs."""
    if spec.q is None:
        return CoefficientTables(
            spec=spec,
            params=params,
            tables=(build_coefficient_table(spec, params, v_max),),
        )
    unique_q = np.unique(spec.q)
    tables = tuple(
        build_coefficient_table(spec, params, v_max, q_x=float(qx)) for qx in unique_q
    )
    return CoefficientTables(spec=spec, params=params, tables=tables, unique_q=unique_q)


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------


def _symbol_indices(spec: PropertySpec, symbols: list) -> np.ndarray:
    if spec.q is None:
        return np.zeros(len(symbols), dtype=np.int64)
    try:
        idx = np.array([int(s) for s in symbols], dtype=np.int64)
    except (TypeError, ValueError) as exc:
        raise ValueError(
            f"{spec.kind} requires integer symbol ids indexing q"
        ) from exc
    return idx


def empirical(hist: Histogram, spec: PropertySpec) -> float:
    """Plug-in estimate at the empirical frequencies ``N_x / N``.

    The empty histogram reports the offset alone (the estimate of the
    offset-form sum is zero).
    """
    if hist.total == 0:
        return spec.report_offset
    syms, counts = hist.as_arrays()
    idx = _symbol_indices(spec, syms)
    values = eval_fx_many(spec, idx, counts / hist.total)
    return float(values.sum()) + spec.report_offset


def modified_empirical(hist: Histogram, rate: float, spec: PropertySpec) -> float:
    """Plug-in estimate at ``N_x / rate`` with ratios above 1 clamped."""
    if not rate > 0:
        raise ValueError(f"rate must be positive, got {rate!r}")
    if hist.total == 0:
        return spec.report_offset
    syms, counts = hist.as_arrays()
    idx = _symbol_indices(spec, syms)
    values = eval_fx_many(spec, idx, counts / rate)
    return float(values.sum()) + spec.report_offset


@dataclass(frozen=True)
class AmplifiedEstimate:
    """An amplified estimate with its branch decomposition and diagnostics."""

    value: float
    small_sum: float
    large_sum: float
    report_offset: float
    n_small: int
    n_large: int
    n_overflow: int
    n_clamped: int
    n_cancelled: int


def amplified_estimate_detailed(
    sample: SplitSample,
    spec: PropertySpec,
    params: EstimatorParams,
    tables: CoefficientTables | CoefficientTable | None = None,
) -> AmplifiedEstimate:
    """Amplified estimate of ``f(p)`` from a split sample, with diagnostics.

    Symbols whose second-stream count is at most ``s0`` contribute their
    table weight at the first-stream count (zero for unseen symbols, and
    zero with an overflow tick for counts beyond the table).  The remaining
    symbols contribute the plug-in value ``f_x(N_x / rate)``.
    """
    if abs(params.rate - sample.rate) > 1e-9 * max(1.0, params.rate):
        raise ValueError(
            f"params.rate={params.rate!r} does not match sample.rate={sample.rate!r}"
        )
    if tables is None:
        tables = build_coefficient_tables(spec, params)
    if isinstance(tables, CoefficientTable):
        if spec.q is not None:
            raise ValueError("non-symmetric properties need the full table set")
        tables = CoefficientTables(spec=spec, params=params, tables=(tables,))

    symbols = list(sample.first.counts.keys())
    seen = set(symbols)
    for sym in sample.second.counts:
        if sym not in seen:
            symbols.append(sym)
    if not symbols:
        return AmplifiedEstimate(
            value=spec.report_offset,
            small_sum=0.0,
            large_sum=0.0,
            report_offset=spec.report_offset,
            n_small=0,
            n_large=0,
            n_overflow=0,
            n_clamped=tables.n_clamped,
            n_cancelled=tables.n_cancelled,
        )

    n1 = np.array([sample.first.get(s) for s in symbols], dtype=np.int64)
    n2 = np.array([sample.second.get(s) for s in symbols], dtype=np.int64)
    idx = _symbol_indices(spec, symbols)

    small = n2 <= params.s0
    v_small = n1[small]
    v_max = tables.tables[0].v_max
    in_range = (v_small >= 1) & (v_small <= v_max)
    overflow = int(np.count_nonzero(v_small > v_max))

    weights = np.zeros(len(v_small))
    owner = tables.table_for_symbols(idx[small])
    for j, table in enumerate(tables.tables):
        pick = in_range & (owner == j)
        weights[pick] = table.values[v_small[pick]]
    small_sum = float(weights.sum())

    large_idx = idx[~small]
    large_counts = n1[~small]
    large_sum = float(
        eval_fx_many(spec, large_idx, large_counts / params.rate).sum()
    )

    return AmplifiedEstimate(
        value=small_sum + large_sum + spec.report_offset,
        small_sum=small_sum,
        large_sum=large_sum,
        report_offset=spec.report_offset,
        n_small=int(np.count_nonzero(small)),
        n_large=int(np.count_nonzero(~small)),
        n_overflow=overflow,
        n_clamped=tables.n_clamped,
        n_cancelled=tables.n_cancelled,
    )


def amplified_estimate(
    sample: SplitSample,
    spec: PropertySpec,
    params: EstimatorParams,
    tables: CoefficientTables | CoefficientTable | None = None,
) -> float:
    """Amplified estimate of ``f(p)`` from a split sample."""
    return amplified_estimate_detailed(sample, spec, params, tables).value


# ---------------------------------------------------------------------------
# smoothed-expectation oracle
# ---------------------------------------------------------------------------

_HHAT_TAIL_TOL = 1e-9


def smoothed_h_hat(
    spec: PropertySpec,
    lam: float,
    params: EstimatorParams,
    q_x: float | None = None,
) -> tuple[float, float]:
    """Two independent evaluations of the smoothed per-symbol expectation.

    Returns ``(series, quadrature)``: the weight power series
    ``e^(-lam) * sum_v h_v lam^v`` truncated once its envelope tail drops
    below 1e-9, and the order-by-order quadrature of the smoothed integral
    on ``[0, r]``.  The two agree for exact arithmetic; comparing them
    cross-checks the entire coefficient pipeline.  Only meaningful with
    ``t_decay`` off and practical for small parameter settings.
    """
    if params.t_decay:
        raise ValueError(
            "smoothed expectation identity requires params with t_decay=False"
        )
    if lam < 0:
        raise ValueError(f"lam must be nonnegative, got {lam!r}")
    if lam == 0.0:
        return 0.0, 0.0
    qx = _resolve_context(spec, q_x)

    log_bound = _log_clamp_bound(spec, params)
    v_stop = max(16, 4 * params.s0)
    while (
        log_bound + log_poisson_tail(lam, v_stop) >= math.log(_HHAT_TAIL_TOL)
        and v_stop < params.v_max
    ):
        v_stop = min(2 * v_stop, params.v_max)
    if log_bound + log_poisson_tail(lam, v_stop) >= math.log(_HHAT_TAIL_TOL):
        raise ValueError(
            "params.v_max too small to truncate the series below the tail bound"
        )

    table = build_coefficient_table(spec, params, q_x=qx)
    v = np.arange(1, v_stop + 1)
    log_fact = _cached_log_factorials(params.v_max + params.u_max)
    log_weight = v * math.log(lam) - lam - log_fact[v]
    series = float(np.sum(table.values[v] * np.exp(log_weight)))

    t = params.t
    y = lam * (t - 1.0)
    total = 0.0
    for u in range(1, params.u_max + 1):
        f = float(eval_fx_grid(spec, np.array([u / (params.rate * t)]), qx)[0])
        if f == 0.0:
            continue
        integral = integrate_exp_poly_bessel(u, y, upper=float(params.r))
        if integral == 0.0:
            continue
        log_scale = u * math.log(t / (t - 1.0)) - log_fact[u]
        total += math.copysign(
            math.exp(math.log(abs(f)) + log_scale + math.log(abs(integral))),
            f * integral,
        )
    quadrature = math.exp(-lam) * total
    return series, quadrature
