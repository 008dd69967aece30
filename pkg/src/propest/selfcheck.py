"""Built-in numerical validation of the coefficient pipeline.

Each check pits an implementation path against an independent route to the
same quantity: closed forms for the Bessel-weighted integrals, quadrature
against the coefficient power series, the term-by-term unbiasedness identity,
and the analytic envelope on the coefficient magnitudes.  A corrupted build
fails loudly here before it can corrupt benchmark numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numerics
from .estimators import (
    EstimatorParams,
    _log_clamp_bound,
    build_coefficient_table,
    smoothed_h_hat,
)
from .properties import entropy, support_coverage

__all__ = ["CheckResult", "run_selfcheck"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _small_params(rate: float = 150.0, t: float = 3.0, s0: int = 1) -> EstimatorParams:
    return EstimatorParams.from_t_s0(rate, t, s0, t_decay=False)


def check_quadrature_identity(deep: bool = False) -> CheckResult:
    """Integral of e^(-a) a^u J_{2u}(2 sqrt(a y)) over [0, inf) equals e^(-y) y^u."""
    us = range(1, 9) if deep else range(1, 6)
    ys = (0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0) if deep else (0.1, 1.0, 5.0, 20.0)
    worst = 0.0
    for u in us:
        for y in ys:
            target = math.exp(-y) * y**u
            value = numerics.integrate_exp_poly_bessel(u, y)
            worst = max(worst, abs(value - target) / max(1.0, target))
    return CheckResult(
        name="quadrature_identity",
        passed=worst < 1e-6,
        detail=f"worst relative deviation {worst:.3e} (tolerance 1e-6)",
    )


def check_series_quadrature(deep: bool = False) -> CheckResult:
    """Coefficient power series matches direct quadrature of the smoothed sum."""
    lams = (0.1, 0.5, 1.0, 2.0, 3.0, 5.0) if deep else (0.1, 0.5, 1.0, 2.0)
    cases = [(entropy(), _small_params())]
    if deep:
        cases.append((support_coverage(m=500.0), _small_params(rate=200.0, t=3.5, s0=2)))
    worst = 0.0
    for spec, params in cases:
        for lam in lams:
            series, quadrature = smoothed_h_hat(spec, lam, params)
            worst = max(worst, abs(series - quadrature))
    return CheckResult(
        name="series_quadrature_consistency",
        passed=worst < 1e-5,
        detail=f"worst |series - quadrature| {worst:.3e} (tolerance 1e-5)",
    )


def check_unbiasedness(deep: bool = False) -> CheckResult:
    """Poisson-weighted table sums reproduce the truncated series exactly."""
    lams = (0.1, 0.5, 1.0, 2.0)
    spec, params = entropy(), _small_params()
    table = build_coefficient_table(spec, params)
    v_stop = 170  # factorials stay exactly representable below this
    worst = 0.0
    for lam in lams:
        pmf_weighted = 0.0
        series = 0.0
        lam_pow = 1.0
        for v in range(1, v_stop + 1):
            pmf = math.exp(v * math.log(lam) - lam - math.lgamma(v + 1.0))
            pmf_weighted += table.values[v] * pmf
            lam_pow *= lam
            series += table.values[v] / math.factorial(v) * lam_pow
        series *= math.exp(-lam)
        denom = max(abs(series), 1e-300)
        worst = max(worst, abs(pmf_weighted - series) / denom)
    return CheckResult(
        name="unbiasedness_identity",
        passed=worst < 1e-10,
        detail=f"worst relative gap {worst:.3e} (tolerance 1e-10)",
    )


def check_coefficient_bound(deep: bool = False) -> CheckResult:
    """Every tabulated weight respects the analytic envelope, unclamped."""
    cases = [(entropy(), _small_params())]
    if deep:
        cases.append((entropy(), _small_params(rate=500.0, t=4.0, s0=2)))
    worst_ratio = 0.0
    clamped = 0
    for spec, params in cases:
        table = build_coefficient_table(spec, params)
        bound = math.exp(_log_clamp_bound(spec, params))
        top = float(np.max(np.abs(table.values)))
        worst_ratio = max(worst_ratio, top / bound)
        clamped += table.n_clamped
    return CheckResult(
        name="coefficient_bound",
        passed=worst_ratio <= 1.0 and clamped == 0,
        detail=(
            f"largest |weight|/envelope {worst_ratio:.3e}, "
            f"{clamped} clamping events (expect 0 at these settings)"
        ),
    )


def run_selfcheck(deep: bool = False) -> list[CheckResult]:
    """Run all checks; every result carries a one-line diagnostic."""
    return [
        check_quadrature_identity(deep),
        check_series_quadrature(deep),
        check_unbiasedness(deep),
        check_coefficient_bound(deep),
    ]
