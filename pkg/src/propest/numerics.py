"""Numerically robust primitives shared by the estimators and their self-checks.

Factorials, Poisson tail probabilities, and series terms routinely leave the
range of double precision, so every quantity here is carried as a
``(sign, log magnitude)`` pair and only converted to linear scale at the last
moment.  The Bessel-series evaluator and the adaptive quadrature exist to
cross-validate the coefficient machinery in :mod:`propest.estimators`; the
estimators themselves never integrate anything.
"""

from __future__ import annotations

import math
import sys
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate as _integrate
from scipy import special as _special

__all__ = [
    "CancellationWarning",
    "ConvergenceError",
    "SignedLogValue",
    "alternating_sum",
    "bessel_f",
    "integrate_exp_poly_bessel",
    "integrate_poisson_kernel_bessel",
    "log_factorial",
    "log_poisson_tail",
    "log_poisson_tail_table",
    "poisson_tail",
    "signed_log_sum",
    "signed_log_sum_arrays",
]

LOG_DOUBLE_MAX = math.log(sys.float_info.max)

#: An alternating sum whose result is below this fraction of its largest term
#: has lost essentially all significance.
CANCELLATION_RTOL = 1e-10

# Above this argument the ascending series for J_{2u}(2*sqrt(y)) cancels away
# more digits than a double holds (largest term grows like exp(4*sqrt(y))),
# so we switch to scipy's Bessel evaluation.
_BESSEL_SERIES_MAX_Y = 50.0
_BESSEL_MAX_TERMS = 500

_QUAD_ABS_TOL = 1e-9


class ConvergenceError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class CancellationWarning(RuntimeWarning):
    """An alternating sum cancelled down to numerical noise."""


@dataclass(frozen=True)
class SignedLogValue:
    """A real number stored as a sign and the natural log of its magnitude.

    ``sign`` is -1, 0, or +1; a zero value always carries
    ``log_magnitude == -inf`` so that equal values compare equal.
    """

    sign: int
    log_magnitude: float

    def __post_init__(self) -> None:
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0, or +1, got {self.sign!r}")
        if self.sign == 0:
            object.__setattr__(self, "log_magnitude", -math.inf)

    @classmethod
    def from_value(cls, x: float) -> "SignedLogValue":
        if x == 0.0:
            return cls(0, -math.inf)
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    def value(self) -> float:
        """Convert back to a plain float (``inf`` if out of double range)."""
        if self.sign == 0:
            return 0.0
        if self.log_magnitude > LOG_DOUBLE_MAX:
            return math.inf * self.sign
        return self.sign * math.exp(self.log_magnitude)


def log_factorial(v: int) -> float:
    """Natural log of ``v!`` for a nonnegative integer ``v``."""
    if v < 0 or v != int(v):
        raise ValueError(f"v must be a nonnegative integer, got {v!r}")
    return math.lgamma(v + 1.0)


def poisson_tail(r: float, j: int) -> float:
    """Tail probability ``P(Poisson(r) > j)``.

    ``j = -1`` returns 1 by convention.  Evaluated through the regularized
    incomplete gamma function, which stays accurate when the tail is tiny.
    """
    if r < 0:
        raise ValueError(f"rate must be nonnegative, got {r!r}")
    if j < -1 or j != int(j):
        raise ValueError(f"j must be an integer >= -1, got {j!r}")
    if j < 0:
        return 1.0
    if r == 0.0:
        return 0.0
    return float(_special.gammainc(j + 1.0, r))


def log_poisson_tail(r: float, j: int) -> float:
    """Natural log of ``poisson_tail(r, j)``, robust deep into the tail."""
    if r < 0:
        raise ValueError(f"rate must be nonnegative, got {r!r}")
    if j < 0:
        return 0.0
    if r == 0.0:
        return -math.inf
    sf = float(_special.gammainc(j + 1.0, r))
    if sf > 1e-290:
        return math.log(sf)
    # gammainc only underflows when j is far above r, where the term ratio
    # r/(j+2) < 1 makes the remaining series geometric-fast.
    m = j + 1
    lead = m * math.log(r) - r - math.lgamma(m + 1.0)
    total = 1.0
    term = 1.0
    i = m + 1
    while True:
        term *= r / i
        total += term
        if term <= 1e-18 * total:
            break
        i += 1
    return lead + math.log(total)


def log_poisson_tail_table(r: float, j_max: int) -> np.ndarray:
    """``log P(Poisson(r) > j)`` for every ``j`` in ``0..j_max`` at once.

    Computed as a backward running log-sum-exp over the log pmf, truncated
    far enough past ``max(2r, j_max)`` that the discarded mass is negligible
    relative to every returned tail.
    """
    if r < 0:
        raise ValueError(f"rate must be nonnegative, got {r!r}")
    if j_max < 0:
        raise ValueError(f"j_max must be nonnegative, got {j_max!r}")
    if r == 0.0:
        return np.full(j_max + 1, -math.inf)
    top = int(max(2 * math.ceil(r), j_max)) + 200
    i = np.arange(top + 1, dtype=np.float64)
    log_pmf = i * math.log(r) - r - _special.gammaln(i + 1.0)
    running = np.logaddexp.accumulate(log_pmf[::-1])[::-1]
    return running[1 : j_max + 2].copy()


def bessel_f(u: int, y: float) -> float:
    """Bessel function of the first kind ``J_{2u}(2*sqrt(y))``.

    Uses the ascending series ``sum_i (-1)^i y^(i+u) / (i! (i+2u)!)`` while
    it is numerically trustworthy and scipy's evaluation beyond that.
    """
    if u < 1 or u != int(u):
        raise ValueError(f"u must be a positive integer, got {u!r}")
    if y < 0:
        raise ValueError(f"y must be nonnegative, got {y!r}")
    if y == 0.0:
        return 0.0
    if y > _BESSEL_SERIES_MAX_Y:
        return float(_special.jv(2 * u, 2.0 * math.sqrt(y)))
    log_t0 = u * math.log(y) - math.lgamma(2 * u + 1.0)
    if log_t0 < -745.0:
        # Leading term already underflows and the terms only shrink from
        # there for y in the series regime.
        return 0.0
    term = math.exp(log_t0)
    total = term
    largest = abs(term)
    for i in range(1, _BESSEL_MAX_TERMS):
        term *= -y / (i * (i + 2 * u))
        total += term
        largest = max(largest, abs(term))
        if abs(term) < 1e-16 * largest:
            break
    return total


def _exp_poly(u: int, a: float) -> float:
    # e^{-a} a^u without overflowing a**u first.
    if a <= 0.0:
        return 0.0
    return math.exp(u * math.log(a) - a)


def integrate_exp_poly_bessel(u: int, y: float, upper: float = math.inf) -> float:
    """Integral of ``e^(-a) a^u J_{2u}(2*sqrt(a*y))`` over ``[0, upper]``.

    With ``upper = inf`` the integrand is cut at ``u + y + 50`` and the
    remainder is bounded analytically by the incomplete-gamma tail (the
    Bessel factor has magnitude at most 1).  Raises
    :class:`ConvergenceError` when the absolute error estimate exceeds 1e-9.
    """
    if u < 1 or u != int(u):
        raise ValueError(f"u must be a positive integer, got {u!r}")
    if y < 0:
        raise ValueError(f"y must be nonnegative, got {y!r}")
    if not upper > 0:
        raise ValueError(f"upper must be positive, got {upper!r}")

    cut = u + y + 50.0 if math.isinf(upper) else float(upper)

    def integrand(a: float) -> float:
        return _exp_poly(u, a) * bessel_f(u, a * y)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", _integrate.IntegrationWarning)
        value, err = _integrate.quad(
            integrand, 0.0, cut, epsabs=_QUAD_ABS_TOL / 100.0, epsrel=1e-11, limit=400
        )
    if math.isinf(upper):
        err += math.exp(
            math.lgamma(u + 1.0) + math.log(float(_special.gammaincc(u + 1.0, cut)))
        )
    if not err <= _QUAD_ABS_TOL:
        raise ConvergenceError(
            f"quadrature error estimate {err:.3e} exceeds {_QUAD_ABS_TOL:.1e} "
            f"for u={u}, y={y}, upper={upper}"
        )
    return value


def integrate_poisson_kernel_bessel(u: int, y: float, upper: float) -> float:
    """Same integral as :func:`integrate_exp_poly_bessel` scaled by ``1/u!``.

    The scaled integrand ``e^(-a) a^u / u! * J_{2u}(2*sqrt(a*y))`` never
    exceeds 1 in magnitude, so an absolute tolerance stays meaningful at
    orders ``u`` where the unscaled integral reaches ``u!``.
    """
    if u < 1 or u != int(u):
        raise ValueError(f"u must be a positive integer, got {u!r}")
    if y < 0:
        raise ValueError(f"y must be nonnegative, got {y!r}")
    if not upper > 0:
        raise ValueError(f"upper must be positive, got {upper!r}")
    log_fact = math.lgamma(u + 1.0)

    def integrand(a: float) -> float:
        if a <= 0.0:
            return 0.0
        return math.exp(u * math.log(a) - a - log_fact) * bessel_f(u, a * y)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", _integrate.IntegrationWarning)
        value, err = _integrate.quad(
            integrand, 0.0, float(upper), epsabs=1e-12, epsrel=1e-12, limit=400
        )
    if not err <= _QUAD_ABS_TOL:
        raise ConvergenceError(
            f"quadrature error estimate {err:.3e} exceeds {_QUAD_ABS_TOL:.1e} "
            f"for u={u}, y={y}, upper={upper}"
        )
    return value


def signed_log_sum_arrays(
    signs: np.ndarray, log_mags: np.ndarray
) -> tuple[int, float, bool]:
    """Sum of terms given as sign/log-magnitude arrays.

    Positive and negative groups are combined after shifting by the largest
    magnitude, so the result is exact up to one rounding of the grouped sums.
    Returns ``(sign, log_magnitude, cancelled)`` where ``cancelled`` reports a
    result below ``CANCELLATION_RTOL`` times the largest term.
    """
    signs = np.asarray(signs)
    log_mags = np.asarray(log_mags, dtype=np.float64)
    live = signs != 0
    if not live.any():
        return 0, -math.inf, False
    shift = float(log_mags[live].max())
    scaled = np.zeros(len(log_mags))
    scaled[live] = np.exp(log_mags[live] - shift)
    pos = float(np.sum(np.where(signs > 0, scaled, 0.0)))
    neg = float(np.sum(np.where(signs < 0, scaled, 0.0)))
    diff = pos - neg
    cancelled = abs(diff) < CANCELLATION_RTOL
    if diff == 0.0:
        return 0, -math.inf, cancelled
    return (1 if diff > 0 else -1), shift + math.log(abs(diff)), cancelled


def signed_log_sum(
    terms: Iterable[SignedLogValue],
) -> tuple[SignedLogValue, bool]:
    """Sum a sequence of :class:`SignedLogValue`, reporting cancellation."""
    terms = list(terms)
    signs = np.array([t.sign for t in terms], dtype=np.int64)
    mags = np.array([t.log_magnitude for t in terms], dtype=np.float64)
    sign, log_mag, cancelled = signed_log_sum_arrays(signs, mags)
    return SignedLogValue(sign, log_mag), cancelled


def alternating_sum(terms: Sequence[SignedLogValue]) -> float:
    """Evaluate a finite signed sum, stable against intermediate overflow.

    Emits :class:`CancellationWarning` when the result is smaller than
    ``CANCELLATION_RTOL`` times the largest term, i.e. when the returned
    digits are mostly rounding noise.  The empty sum is exactly 0.
    """
    result, cancelled = signed_log_sum(terms)
    if cancelled:
        warnings.warn(
            "alternating sum cancelled below 1e-10 of its largest term",
            CancellationWarning,
            stacklevel=2,
        )
    return result.value()
