"""
Theoretical Bounds
Closed-form finite-sample bounds for kNN regression, extrema estimation and
the label-noise-robust classifier. Natural logarithms throughout.

Values above 1 are returned as-is: they are valid (vacuous) bounds and callers
decide how to display them.
"""
import math
import logging
import warnings
from dataclasses import dataclass, asdict
from typing import Dict, Any, Tuple

import pandas as pd

logger = logging.getLogger(__name__)


class InvalidBoundParams(ValueError):
    """Raised when bound parameters are outside their domain"""


class TheoryWindowWarning(UserWarning):
    """k or n lies outside the range a guarantee is stated for"""


@dataclass(frozen=True)
class BoundParams:
    """
    Parameter bundle shared by every bound

    lam is the smoothness exponent (lambda), omega the smoothness constant,
    alpha / c_alpha the margin exponent and constant, p0 / p1 the true noise rates.
    """
    n: int
    k: int
    delta: float = 0.05
    lam: float = 1.0
    omega: float = 1.0
    alpha: float = 0.0
    c_alpha: float = 1.0
    p0: float = 0.0
    p1: float = 0.0

    def __post_init__(self):
        _check_count('n', self.n)
        _check_count('k', self.k)
        if self.k > self.n:
            raise InvalidBoundParams(f"k={self.k} exceeds n={self.n}")
        _check_delta(self.delta)
        if not math.isfinite(self.lam) or self.lam <= 0:
            raise InvalidBoundParams(f"lambda must be > 0, got {self.lam}")
        if not math.isfinite(self.omega) or self.omega < 0:
            raise InvalidBoundParams(f"omega must be >= 0, got {self.omega}")
        if not math.isfinite(self.alpha) or self.alpha < 0:
            raise InvalidBoundParams(f"alpha must be >= 0, got {self.alpha}")
        if not math.isfinite(self.c_alpha) or self.c_alpha < 1:
            raise InvalidBoundParams(f"c_alpha must be >= 1, got {self.c_alpha}")
        for name, rate in (('p0', self.p0), ('p1', self.p1)):
            if not math.isfinite(rate) or rate < 0 or rate >= 1:
                raise InvalidBoundParams(f"{name} must be in [0, 1), got {rate}")

    @property
    def noise_denominator(self) -> float:
        return 1.0 - self.p0 - self.p1

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['lambda'] = data.pop('lam')
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'BoundParams':
        data = dict(data)
        if 'lambda' in data:
            data['lam'] = data.pop('lambda')
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidBoundParams(f"Unknown bound parameters: {sorted(unknown)}")
        return cls(**data)


def _check_count(name: str, value) -> None:
    if isinstance(value, bool) or int(value) != value or value < 1:
        raise InvalidBoundParams(f"{name} must be a positive integer, got {value!r}")


def _check_delta(delta: float) -> None:
    if not (0.0 < delta < 1.0):
        raise InvalidBoundParams(f"delta must be in (0, 1), got {delta}")


# ============================================================================
# THEORY WINDOWS
# ============================================================================

def theory_window(n: int, delta: float) -> Tuple[float, float]:
    """Range [4*log(3/delta) + 1, n/2] of k covered by the pointwise guarantee"""
    _check_delta(delta)
    return 4.0 * math.log(3.0 / delta) + 1.0, n / 2.0


def warn_if_outside_window(n: int, k: int, delta: float, stacklevel: int = 3) -> bool:
    """Emit a TheoryWindowWarning when k is outside theory_window; returns True if warned"""
    low, high = theory_window(n, delta)
    if low <= k <= high:
        return False
    warnings.warn(
        f"k={k} is outside the theory window [{low:.2f}, {high:.1f}] for n={n}, delta={delta}",
        TheoryWindowWarning,
        stacklevel=stacklevel
    )
    return True


def optimal_k_sample_floor(delta: float, lam: float, omega: float, n: int) -> float:
    """Smallest n, as 5*(10*omega^2)^(1/(2*lam))*log(18n/delta), for which the optimal-k guarantee applies"""
    return 5.0 * (10.0 * omega ** 2) ** (1.0 / (2.0 * lam)) * math.log(18.0 * n / delta)


# ============================================================================
# BALL MEASURE
# ============================================================================

def ball_measure_tail(k: int, zeta: float, data_point_centre: bool = False) -> float:
    """
    Tail bound on the marginal measure of the k-th nearest neighbour ball

    P(mu(B) > (1 + zeta) * k / n) <= exp(-k * (zeta - log(1 + zeta))). When the
    centre is itself a data point the exponent uses k - 1.

    Args:
        k: Neighbour count (>= 1)
        zeta: Relative excess (>= 0)
        data_point_centre: Centre is one of the sample points

    Returns:
        Probability bound in (0, 1]
    """
    _check_count('k', k)
    if not math.isfinite(zeta) or zeta < 0:
        raise InvalidBoundParams(f"zeta must be >= 0, got {zeta}")

    exponent = k - 1 if data_point_centre else k
    return math.exp(-exponent * (zeta - math.log1p(zeta)))


# ============================================================================
# ESTIMATION BOUNDS
# ============================================================================

def _bias(params: BoundParams) -> float:
    return params.omega * (2.0 * params.k / params.n) ** params.lam


def pointwise_bound(params: BoundParams) -> float:
    """
    Pointwise kNN regression error bound at a fixed query (or a fixed training point)

    sqrt(log(3/delta) / (2k)) + omega * (2k/n)^lambda
    """
    warn_if_outside_window(params.n, params.k, params.delta)
    return math.sqrt(math.log(3.0 / params.delta) / (2.0 * params.k)) + _bias(params)


def max_bound(params: BoundParams) -> float:
    """
    Error bound for the empirical maximum (or minimum) of the kNN regression estimate

    sqrt(log(6n/delta) / (2k)) + 2 * omega * (2k/n)^lambda
    """
    warn_if_outside_window(params.n, params.k, params.delta)
    return math.sqrt(math.log(6.0 * params.n / params.delta) / (2.0 * params.k)) + 2.0 * _bias(params)


def xi_error_term(n: int, k: int, delta: float, lam: float, omega: float) -> float:
    """Joint error level for the corrupted regression and both rate estimates: sqrt(log(18n/delta)/k) + 2*omega*(2k/n)^lambda"""
    params = BoundParams(n=n, k=k, delta=delta, lam=lam, omega=omega)
    return math.sqrt(math.log(18.0 * n / delta) / k) + 2.0 * _bias(params)


def xi_closed_form(n: int, delta: float, lam: float, omega: float) -> float:
    """
    Closed form for xi at k = optimal_k

    4^(lambda+1) * omega^(1/(2*lambda+1)) * (log(18n/delta)/n)^(lambda/(2*lambda+1)).
    This dominates xi_error_term(n, optimal_k(n), ...) when n is above
    optimal_k_sample_floor, usually by a wide margin.
    """
    BoundParams(n=n, k=1, delta=delta, lam=lam, omega=omega)
    ratio = math.log(18.0 * n / delta) / n
    return 4.0 ** (lam + 1.0) * omega ** (1.0 / (2.0 * lam + 1.0)) * ratio ** (lam / (2.0 * lam + 1.0))


def correction_error_bound(eta_err: float, p0_err: float, p1_err: float, p0: float, p1: float) -> float:
    """
    Error bound for the ratio-corrected regression estimate

    8 * max(eta_err, p0_err, p1_err) / (1 - p0 - p1), valid when both rate errors
    are at most (1 - p0 - p1) / 4 (inclusive).

    Raises:
        InvalidBoundParams: Negative errors, p0 + p1 >= 1 or rate errors too large
    """
    for name, value in (('eta_err', eta_err), ('p0_err', p0_err), ('p1_err', p1_err)):
        if not math.isfinite(value) or value < 0:
            raise InvalidBoundParams(f"{name} must be >= 0, got {value}")
    if p0 < 0 or p1 < 0 or p0 + p1 >= 1:
        raise InvalidBoundParams(f"need p0, p1 >= 0 and p0 + p1 < 1, got ({p0}, {p1})")

    denominator = 1.0 - p0 - p1
    if max(p0_err, p1_err) > denominator / 4.0:
        raise InvalidBoundParams(
            f"rate errors ({p0_err}, {p1_err}) exceed (1 - p0 - p1)/4 = {denominator / 4.0}"
        )
    return 8.0 * max(eta_err, p0_err, p1_err) / denominator


# ============================================================================
# CLASSIFICATION RISK
# ============================================================================

def _require_noise_rates(params: BoundParams) -> float:
    denominator = params.noise_denominator
    if denominator <= 0:
        raise InvalidBoundParams(f"risk bounds need p0 + p1 < 1, got ({params.p0}, {params.p1})")
    return denominator


def risk_bound(params: BoundParams) -> float:
    """
    Excess-risk bound (over the Bayes risk) for the robust kNN classifier

    C_alpha * (8/(1-p0-p1))^(alpha+1) * xi(n, k, delta)^(alpha+1) + delta
    """
    denominator = _require_noise_rates(params)
    xi = xi_error_term(params.n, params.k, params.delta, params.lam, params.omega)
    power = params.alpha + 1.0
    return params.c_alpha * (8.0 / denominator) ** power * xi ** power + params.delta


def risk_rate_bound(params: BoundParams) -> float:
    """
    Excess-risk bound at k = optimal_k in rate form (k in params is ignored)

    C_alpha * (2^(2*lambda+5) * omega^(1/(2*lambda+1)) / (1-p0-p1))^(alpha+1)
            * (log(18n/delta)/n)^(lambda*(alpha+1)/(2*lambda+1)) + delta
    """
    denominator = _require_noise_rates(params)
    lam = params.lam
    power = params.alpha + 1.0
    constant = 2.0 ** (2.0 * lam + 5.0) * params.omega ** (1.0 / (2.0 * lam + 1.0)) / denominator
    ratio = math.log(18.0 * params.n / params.delta) / params.n
    return params.c_alpha * constant ** power * ratio ** (lam * power / (2.0 * lam + 1.0)) + params.delta


def optimal_k(n: int, delta: float, lam: float, omega: float) -> int:
    """
    Neighbour count balancing the variance and bias terms of xi

    ceil((log(18n/delta) / (2*omega^2))^(1/(2*lambda+1)) * n^(2*lambda/(2*lambda+1))), clipped to [1, n]

    Warns (TheoryWindowWarning) when n is below optimal_k_sample_floor.
    """
    _check_count('n', n)
    _check_delta(delta)
    if not math.isfinite(lam) or lam <= 0:
        raise InvalidBoundParams(f"lambda must be > 0, got {lam}")
    if not math.isfinite(omega) or omega <= 0:
        raise InvalidBoundParams(f"omega must be > 0 for optimal_k, got {omega}")

    floor = optimal_k_sample_floor(delta, lam, omega, n)
    if n < floor:
        warnings.warn(
            f"n={n} is below the optimal-k sample floor {floor:.1f}",
            TheoryWindowWarning,
            stacklevel=2
        )

    log_term = math.log(18.0 * n / delta)
    raw = (log_term / (2.0 * omega ** 2)) ** (1.0 / (2.0 * lam + 1.0)) * n ** (2.0 * lam / (2.0 * lam + 1.0))
    return int(min(max(math.ceil(raw), 1), n))


# ============================================================================
# TABLE
# ============================================================================

def bounds_table(params: BoundParams) -> pd.DataFrame:
    """
    Every bound evaluated at params, one row per quantity

    Returns:
        DataFrame with columns ['quantity', 'value']
    """
    rows = [
        ('n', params.n),
        ('k', params.k),
        ('delta', params.delta),
        ('pointwise_bound', pointwise_bound(params)),
        ('max_bound', max_bound(params)),
        ('xi_error_term', xi_error_term(params.n, params.k, params.delta, params.lam, params.omega)),
    ]

    if params.omega > 0:
        rows.append(('optimal_k', optimal_k(params.n, params.delta, params.lam, params.omega)))
        rows.append(('xi_closed_form', xi_closed_form(params.n, params.delta, params.lam, params.omega)))

    if params.noise_denominator > 0:
        rows.append(('risk_bound', risk_bound(params)))
        if params.omega > 0:
            rows.append(('risk_rate_bound', risk_rate_bound(params)))

    return pd.DataFrame(rows, columns=['quantity', 'value'])
