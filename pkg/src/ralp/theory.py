"""Closed-form performance of the type-1 correlator detector.

Under the three hypotheses the energy statistic ``Z = ||g||**2`` is Gamma
with integer shape ``M`` (the antenna count) and scale ``I2`` (idle),
``P1 + I2`` (single device) or ``K*P1 + I2`` (collision of ``K`` devices).
For integer shape the Gamma CDF equals a Poisson tail, which is what is
evaluated here.
"""

import math
from dataclasses import dataclass

from ._validation import check_int, check_positive, check_probability, check_thresholds

_TAIL_STOP = 1e-300


def _poisson_log_pmf(k, nu):
    return k * math.log(nu) - nu - math.lgamma(k + 1)


def poisson_tail(nu, m):
    """``P(X >= m)`` for ``X ~ Poisson(nu)``."""
    if nu <= 0.0:
        return 1.0 if m <= 0 else 0.0
    if m <= 0:
        return 1.0
    if nu < m:
        # upper tail directly: terms k >= m decrease monotonically here
        terms = []
        k = m
        while True:
            t = math.exp(_poisson_log_pmf(k, nu))
            terms.append(t)
            if t < _TAIL_STOP or (len(terms) > 1 and t < 1e-18 * terms[0]):
                break
            k += 1
        return min(1.0, math.fsum(terms))
    head = [math.exp(_poisson_log_pmf(k, nu)) for k in range(m - 1, -1, -1)]
    return max(0.0, 1.0 - math.fsum(head))


def gamma_cdf(z, shape_m, scale):
    """CDF of ``Gamma(shape_m, scale)`` at ``z`` for integer ``shape_m``.

    Parameters
    ----------
    z : float
        Evaluation point, ``z >= 0``.
    shape_m : int
        Shape parameter (number of antennas), ``>= 1``.
    scale : float
        Scale parameter, ``> 0``.
    """
    shape_m = check_int(shape_m, "shape_m", min_value=1)
    scale = check_positive(scale, "scale")
    z = float(z)
    if z < 0:
        raise ValueError(f"z must be >= 0, got {z}")
    if math.isinf(z):
        return 1.0
    return poisson_tail(z / scale, shape_m)


def gamma_sf(z, shape_m, scale):
    """Survival function ``1 - gamma_cdf``, accurate in the far upper tail."""
    shape_m = check_int(shape_m, "shape_m", min_value=1)
    scale = check_positive(scale, "scale")
    z = float(z)
    if z < 0:
        raise ValueError(f"z must be >= 0, got {z}")
    if math.isinf(z):
        return 0.0
    nu = z / scale
    if nu <= 0.0:
        return 1.0
    if nu < shape_m:
        return 1.0 - poisson_tail(nu, shape_m)
    return math.fsum(math.exp(_poisson_log_pmf(k, nu)) for k in range(shape_m - 1, -1, -1))


def interference_power(k2, p2, n, n0):
    """Per-antenna variance of type-2 leakage plus noise at a type-1 correlator."""
    check_int(k2, "k2", min_value=0)
    check_int(n, "n", min_value=1)
    check_positive(p2, "p2")
    check_positive(n0, "n0", allow_zero=True)
    return k2 * p2 / n + n0


def invert_nu1(m, eps, rtol=1e-10, max_iter=500):
    """Poisson mean ``nu`` with ``P(Poisson(nu) >= m) = eps``.

    Bisection on the strictly increasing Poisson tail.
    """
    m = check_int(m, "m", min_value=1)
    eps = check_probability(eps, "eps")
    lo, hi = 0.0, float(m)
    while poisson_tail(hi, m) < eps:
        lo, hi = hi, 2.0 * hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if poisson_tail(mid, m) < eps:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            return 0.5 * (lo + hi)
    raise RuntimeError(f"nu1 inversion did not converge for m={m}, eps={eps}")


def _invert_upper(m, eps, rtol=1e-10, max_iter=500):
    """Poisson mean ``nu`` with ``P(Poisson(nu) < m) = eps`` (upper Gamma tail)."""
    lo, hi = 0.0, 2.0 * m + 10.0
    while gamma_sf(hi, m, 1.0) > eps:
        lo, hi = hi, 2.0 * hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if gamma_sf(mid, m, 1.0) > eps:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            return 0.5 * (lo + hi)
    raise RuntimeError(f"upper-tail inversion did not converge for m={m}, eps={eps}")


def calibrate_tau1(m, eps, p1, i2):
    """Lower threshold giving a single-device miss probability of exactly ``eps``."""
    check_positive(p1, "p1")
    check_positive(i2, "i2", allow_zero=True)
    return invert_nu1(m, eps) * (p1 + i2)


def calibrate_tau2(m, eps_c, p1, i2):
    """Upper threshold leaving upper-tail mass ``eps_c`` of the single-device law."""
    m = check_int(m, "m", min_value=1)
    eps_c = check_probability(eps_c, "eps_c")
    check_positive(p1, "p1")
    check_positive(i2, "i2", allow_zero=True)
    return _invert_upper(m, eps_c) * (p1 + i2)


@dataclass(frozen=True)
class TheoryParams:
    m: int
    p1: float
    p2: float
    n0: float
    k2: int
    k1l: int = 2

    def __post_init__(self):
        check_int(self.m, "m", min_value=1)
        check_int(self.k2, "k2", min_value=0)
        check_int(self.k1l, "k1l", min_value=2)
        check_positive(self.p1, "p1")
        check_positive(self.p2, "p2")
        check_positive(self.n0, "n0")


@dataclass(frozen=True)
class ErrorBudget:
    """Error probabilities of the three-way type-1 test.

    ``p_md`` misses a single device (declared idle), ``p_c_md`` declares a
    single device a collision, ``p_1_md`` declares a collision a single device
    and ``p_fa`` declares an idle preamble active.
    """

    p_md: float
    p_c_md: float
    p_1_md: float
    p_fa: float


def error_budget(tau1, tau2, params, n):
    tau1, tau2 = check_thresholds(tau1, tau2)
    i2 = interference_power(params.k2, params.p2, n, params.n0)
    m = params.m
    s1 = params.p1 + i2
    sc = params.k1l * params.p1 + i2
    return ErrorBudget(
        p_md=gamma_cdf(tau1, m, s1),
        p_c_md=gamma_sf(tau2, m, s1),
        p_1_md=max(0.0, gamma_cdf(tau2, m, sc) - gamma_cdf(tau1, m, sc)),
        p_fa=gamma_sf(tau1, m, i2),
    )


def kl_distance(p1, i2):
    """KL divergence between the single-antenna active and idle energy laws."""
    x = check_positive(p1, "p1") / check_positive(i2, "i2")
    # log1p keeps x - log(1 + x) accurate as x -> 0
    return x - math.log1p(x)
