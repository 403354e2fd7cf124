"""Correlator bank and three-way energy test for the orthogonal sub-pool."""

import enum
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_received, check_thresholds
from .theory import calibrate_tau1, calibrate_tau2


class Verdict(enum.IntEnum):
    IDLE = 0
    SINGLE = 1
    COLLISION = 2


@dataclass(frozen=True)
class Type1Decision:
    """Per-preamble outcome of the type-1 test for one received matrix."""

    statistics: np.ndarray
    verdicts: np.ndarray
    thresholds: tuple

    @property
    def detected_set(self):
        return [int(i) for i in np.flatnonzero(self.verdicts != Verdict.IDLE)]


def correlate(signal, pool):
    """Correlate the received matrix with every type-1 preamble.

    Parameters
    ----------
    signal : ReceivedSignal or array_like of shape (..., M, N)
    pool : PreamblePool

    Returns
    -------
    ndarray of shape (..., L1, M)
        Row ``l`` is ``Y @ c_l``.
    """
    y = getattr(signal, "y", signal)
    y = check_received(y, pool.n)
    return np.swapaxes(y @ pool.l1.T, -1, -2)


def energy(g):
    """Energy statistic ``||g_l||**2`` over the antenna axis."""
    g = np.asarray(g)
    return np.einsum("...m,...m->...", g.real, g.real) + np.einsum("...m,...m->...", g.imag, g.imag)


def label_statistics(z, tau1, tau2):
    """Map energy statistics to ``Verdict`` codes (vectorised)."""
    tau1, tau2 = check_thresholds(tau1, tau2)
    z = np.asarray(z, dtype=float)
    return (z > tau1).astype(np.int8) + (z > tau2).astype(np.int8)


def classify(g, tau1, tau2):
    """Three-way test on the correlator outputs of one received matrix.

    ``Z <= tau1`` is idle, ``tau1 < Z <= tau2`` a single device and
    ``Z > tau2`` a collision.
    """
    tau1, tau2 = check_thresholds(tau1, tau2)
    z = energy(g)
    if z.ndim != 1:
        raise ValueError(f"expected correlator outputs of shape (L1, M), got {np.shape(g)}")
    return Type1Decision(statistics=z, verdicts=label_statistics(z, tau1, tau2), thresholds=(tau1, tau2))


class Type1Detector(BaseEstimator):
    """Type-1 preamble detector with model-calibrated thresholds.

    ``fit`` reads the antenna count from the received data and sets the
    lower threshold so that a lone active device is missed with probability
    ``eps``; the upper threshold leaves mass ``eps_c`` of the same law above it.

    Parameters
    ----------
    pool : PreamblePool
    p1 : float
        Type-1 receive power (linear).
    i2 : float
        Interference-plus-noise power seen by each correlator.
    eps : float
        Target single-device miss probability.
    eps_c : float
        Single-device mass above the collision threshold.
    """

    def __init__(self, pool, p1, i2, eps=1e-2, eps_c=1e-3):
        self.pool = pool
        self.p1 = p1
        self.i2 = i2
        self.eps = eps
        self.eps_c = eps_c

    def fit(self, X, y=None):
        X = check_received(X, self.pool.n)
        m = X.shape[-2]
        self.n_antennas_ = m
        self.thresholds_ = (
            calibrate_tau1(m, self.eps, self.p1, self.i2),
            calibrate_tau2(m, self.eps_c, self.p1, self.i2),
        )
        return self

    def _check_input(self, X):
        check_is_fitted(self, "thresholds_")
        X = check_received(X, self.pool.n)
        if X.shape[-2] != self.n_antennas_:
            raise ValueError(f"fitted for M={self.n_antennas_}, got M={X.shape[-2]}")
        return X

    def transform(self, X):
        """Energy statistics, shape (..., L1)."""
        return energy(correlate(self._check_input(X), self.pool))

    def predict(self, X):
        """``Verdict`` codes, shape (..., L1)."""
        return label_statistics(self.transform(X), *self.thresholds_)

    def decide(self, X):
        X = self._check_input(X)
        if X.ndim != 2:
            raise ValueError("decide expects a single received matrix")
        return classify(correlate(X, self.pool), *self.thresholds_)
