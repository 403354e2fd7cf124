"""Type-2 activity detection after type-1 cancellation.

Projecting the cancelled signal onto the type-1 directions that were *not*
removed gives a multiple-measurement-vector problem ``Z = Phi A + U`` whose
row support is the set of active type-2 preambles.  Each column of ``Z`` is
zero-mean Gaussian with covariance ``alpha * Phi diag(b) Phi^H + n0 I`` given
the activity vector ``b``; the detector runs coordinate-ascent variational
inference over independent Bernoulli factors for ``b``.

In the coordinate update the other activities enter the covariance through
their current posterior means.  The inverse covariance is kept up to date
with rank-one corrections and rebuilt from scratch at the start of every
sweep.
"""

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_index_set, check_int, check_positive

# breakdown guard for the rank-one downdate denominator
_MIN_DENOM = 1e-12


class NumericalBreakdown(RuntimeError):
    """The mean-field covariance lost positive definiteness."""


@dataclass(frozen=True)
class MmvProblem:
    """Row-sparse recovery problem built from the cancelled signal.

    Attributes
    ----------
    phi : ndarray of shape (n_u, L2)
        Type-2 preambles seen through the remaining type-1 directions.
    z : ndarray of shape (n_u, M)
        One observation column per antenna.
    alpha : float
        Prior signal power of an active row.
    n0 : float
        Noise power.
    undetected : tuple of int
        Type-1 indices spanning the observation space (rows of ``phi``).
    """

    phi: np.ndarray
    z: np.ndarray
    alpha: float
    n0: float
    undetected: tuple = ()


@dataclass
class CaviState:
    mu: np.ndarray
    log_odds: np.ndarray
    sigma_inv: np.ndarray
    log_det: np.ndarray
    iteration: int = 0


@dataclass(frozen=True)
class Type2Decision:
    detected: list
    posteriors: np.ndarray
    log_odds: np.ndarray = None


def sigma_s_sq(lambda2, l2_size):
    """Mean number of devices on a type-2 preamble given that it is used.

    Poisson traffic with mean ``lambda2`` spread uniformly over ``l2_size``
    preambles; tends to 1 as the load vanishes.
    """
    l2_size = check_int(l2_size, "l2_size", min_value=1)
    x = check_positive(lambda2, "lambda2", allow_zero=True) / l2_size
    if x < 1e-8:
        return 1.0 + x / 2.0
    return x / -math.expm1(-x)


def default_prior(lambda2, l2_size):
    """Probability that a given type-2 preamble carries at least one device."""
    l2_size = check_int(l2_size, "l2_size", min_value=1)
    return -math.expm1(-check_positive(lambda2, "lambda2", allow_zero=True) / l2_size)


def build_mmv(residual, pool, detected, sigma_s_sq, p2, n0):
    """Form the MMV problem from a type-1 cancellation report.

    Parameters
    ----------
    residual : ProjectionReport
    pool : PreamblePool
    detected : iterable of int
        The type-1 indices that were projected out.
    sigma_s_sq : float
        Variance of an active row's fading coefficient.
    p2 : float
        Type-2 receive power.
    n0 : float
        Noise power.
    """
    detected = check_index_set(detected, pool.l1_size, "detected")
    if tuple(detected) != tuple(residual.detected_set):
        raise ValueError("detected set does not match the cancellation report")
    ybar = residual.residual
    if ybar.ndim != 2 or ybar.shape[1] != pool.n:
        raise ValueError(f"residual has shape {ybar.shape}, expected (M, {pool.n})")
    undetected = [l for l in range(pool.l1_size) if l not in set(detected)]
    if not undetected:
        raise ValueError("every type-1 direction was removed; no observation space left")
    cu_h = pool.l1[undetected].conj()
    phi = cu_h @ pool.l2.T
    z = cu_h @ ybar.conj().T
    return MmvProblem(
        phi=phi,
        z=z,
        alpha=check_positive(p2, "p2") * check_positive(sigma_s_sq, "sigma_s_sq"),
        n0=check_positive(n0, "n0"),
        undetected=tuple(undetected),
    )


def _covariance(phi, mu, alpha, n0):
    n = phi.shape[-2]
    return alpha * (phi * mu[:, None, :]) @ np.conj(np.swapaxes(phi, -1, -2)) + n0 * np.eye(n)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def cavi_posteriors(phi, z, alpha, n0, prior, n_runs=5, order=None):
    """Run CAVI on a stack of MMV problems of equal shape.

    Parameters
    ----------
    phi : ndarray of shape (T, n_u, L2)
    z : ndarray of shape (T, n_u, M)
    alpha, n0 : float
    prior : float or ndarray broadcastable to (T, L2)
        Prior activity probability of each column.
    n_runs : int
        Number of full sweeps over the columns.
    order : sequence of int, optional
        Column visiting order within a sweep; defaults to ``0..L2-1``.

    Returns
    -------
    CaviState
        Batched state; ``mu`` and ``log_odds`` have shape (T, L2).
    """
    phi = np.asarray(phi, dtype=np.complex128)
    z = np.asarray(z, dtype=np.complex128)
    if phi.ndim != 3 or z.ndim != 3 or phi.shape[:2] != z.shape[:2]:
        raise ValueError(f"incompatible shapes phi={phi.shape}, z={z.shape}")
    n_runs = check_int(n_runs, "n_runs", min_value=1)
    alpha = check_positive(alpha, "alpha")
    n0 = check_positive(n0, "n0")
    t, n, l2 = phi.shape
    m = z.shape[2]
    prior = np.broadcast_to(np.asarray(prior, dtype=float), (t, l2))
    if np.any(prior <= 0) or np.any(prior >= 1):
        raise ValueError("prior activity probabilities must lie in (0, 1)")
    prior_logit = np.log(prior) - np.log1p(-prior)
    order = range(l2) if order is None else [int(i) for i in order]
    if sorted(order) != list(range(l2)):
        raise ValueError("order must be a permutation of the column indices")

    mu = prior.copy()
    log_odds = prior_logit.copy()
    rows = np.arange(t)
    sigma_inv = log_det = None
    for sweep in range(n_runs):
        sigma = _covariance(phi, mu, alpha, n0)
        low = np.linalg.eigvalsh(sigma)[:, 0]
        if np.any(low < n0 / 2):
            bad = int(np.argmin(low))
            raise NumericalBreakdown(
                f"covariance of problem {bad} has eigenvalue {low[bad]:.3e} < n0/2 at sweep {sweep}"
            )
        sigma_inv = np.linalg.inv(sigma)
        log_det = np.linalg.slogdet(sigma)[1]
        for l in order:
            f = phi[:, :, l]
            w = np.einsum("tij,tj->ti", sigma_inv, f)
            q_full = np.einsum("ti,ti->t", f.conj(), w).real
            c = alpha * mu[:, l]
            denom = 1.0 - c * q_full
            if np.any(denom < _MIN_DENOM):
                raise NumericalBreakdown(f"rank-one downdate of column {l} is ill-conditioned")
            # quantities with column l removed from the covariance
            w_minus = w / denom[:, None]
            q = q_full / denom
            proj = np.einsum("ti,tim->tm", w_minus.conj(), z)
            r = np.einsum("tm,tm->t", proj.real, proj.real) + np.einsum("tm,tm->t", proj.imag, proj.imag)
            gain = 1.0 + alpha * q
            lam = prior_logit[:, l] - m * np.log(gain) + alpha * r / gain
            mu_new = _sigmoid(lam)
            c_new = alpha * mu_new
            coef = c / denom - c_new / ((1.0 + c_new * q) * denom**2)
            sigma_inv = sigma_inv + coef[:, None, None] * np.einsum("ti,tj->tij", w, w.conj())
            log_det = log_det + np.log(denom) + np.log1p(c_new * q)
            mu[rows, l] = mu_new
            log_odds[rows, l] = lam
    return CaviState(mu=mu, log_odds=log_odds, sigma_inv=sigma_inv, log_det=log_det, iteration=n_runs)


def select_support(log_odds, k2=None):
    """Top-``k2`` columns by posterior log-odds, or those above one half."""
    log_odds = np.asarray(log_odds)
    if k2 is None:
        return [int(i) for i in np.flatnonzero(log_odds > 0)]
    k2 = check_int(k2, "k2", min_value=0, max_value=log_odds.shape[-1])
    idx = np.argsort(-log_odds, kind="stable")[:k2]
    return sorted(int(i) for i in idx)


def cavi_detect(problem, prior_active, n_runs=5, k2=None, order=None):
    """Detect active type-2 preambles of one MMV problem.

    Parameters
    ----------
    problem : MmvProblem
    prior_active : float or ndarray of shape (L2,)
    n_runs : int
    k2 : int, optional
        Known number of active type-2 devices; selects the ``k2`` largest
        posteriors.  Without it columns with posterior above 1/2 are kept.
    order : sequence of int, optional
        Column visiting order.

    Returns
    -------
    Type2Decision
    """
    state = cavi_posteriors(
        problem.phi[None], problem.z[None], problem.alpha, problem.n0,
        np.asarray(prior_active, dtype=float)[None], n_runs=n_runs, order=order,
    )
    return Type2Decision(
        detected=select_support(state.log_odds[0], k2),
        posteriors=state.mu[0],
        log_odds=state.log_odds[0],
    )


class CaviDetector(BaseEstimator):
    """Estimator wrapper around :func:`cavi_detect`.

    ``fit`` stores the sensing matrix; ``predict_proba`` and ``predict``
    take the observation matrix ``Z`` of shape (n_u, M) or a stack of them.
    """

    def __init__(self, alpha=1.0, n0=1.0, prior_active=0.1, n_runs=5, k2=None):
        self.alpha = alpha
        self.n0 = n0
        self.prior_active = prior_active
        self.n_runs = n_runs
        self.k2 = k2

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.complex128)
        if X.ndim != 2:
            raise ValueError(f"sensing matrix must be 2-D, got shape {X.shape}")
        self.phi_ = X
        self.n_features_in_ = X.shape[1]
        return self

    def _state(self, Z):
        check_is_fitted(self, "phi_")
        Z = np.asarray(Z, dtype=np.complex128)
        single = Z.ndim == 2
        Z = Z[None] if single else Z
        if Z.shape[1] != self.phi_.shape[0]:
            raise ValueError(f"Z has {Z.shape[1]} rows, sensing matrix has {self.phi_.shape[0]}")
        phi = np.broadcast_to(self.phi_, (Z.shape[0],) + self.phi_.shape)
        return single, cavi_posteriors(phi, Z, self.alpha, self.n0, self.prior_active, self.n_runs)

    def predict_proba(self, Z):
        single, state = self._state(Z)
        return state.mu[0] if single else state.mu

    def predict(self, Z):
        """Boolean activity mask over the columns of the sensing matrix."""
        single, state = self._state(Z)
        masks = np.zeros(state.mu.shape, dtype=bool)
        for i, lo in enumerate(state.log_odds):
            masks[i, select_support(lo, self.k2)] = True
        return masks[0] if single else masks
