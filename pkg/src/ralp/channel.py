"""Device activity, Rayleigh fading and the multi-antenna received signal.

Power control is assumed to equalise path loss, so every active type-1 device
arrives with average power ``p1`` and every type-2 device with ``p2``; only
i.i.d. CN(0, 1) small-scale fading remains.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_int, check_positive


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def complex_normal(rng, shape, variance=1.0):
    """Draw circularly symmetric complex Gaussian samples of total variance ``variance``."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass(frozen=True)
class ChannelConfig:
    """Receiver and traffic parameters for one access slot.

    Powers are linear.  ``n0 = 0`` is accepted for noise-free checks.
    """

    m: int
    p1: float
    p2: float
    n0: float
    k1: int
    k2: int

    def __post_init__(self):
        check_int(self.m, "m", min_value=1)
        check_int(self.k1, "k1", min_value=0)
        check_int(self.k2, "k2", min_value=0)
        check_positive(self.p1, "p1")
        check_positive(self.p2, "p2")
        check_positive(self.n0, "n0", allow_zero=True)
        if not self.p1 > self.p2:
            raise ValueError(f"type-1 power must exceed type-2 power, got p1={self.p1}, p2={self.p2}")

    @classmethod
    def from_db(cls, *, m, p1_db, p2_db, k1, k2, n0_db=0.0):
        return cls(
            m=m,
            p1=float(db_to_linear(p1_db)),
            p2=float(db_to_linear(p2_db)),
            n0=float(db_to_linear(n0_db)),
            k1=k1,
            k2=k2,
        )


@dataclass(frozen=True)
class ActivityMap:
    """Which preambles are active and the fading of each active device.

    ``type1_choices`` index the type-1 sub-pool (0..L1-1); ``type2_choices``
    index the type-2 sub-pool (0..L2-1).  Fading arrays have one row of
    length ``M`` per active device, aligned with the choices.
    """

    type1_choices: np.ndarray
    type2_choices: np.ndarray
    type1_fading: np.ndarray
    type2_fading: np.ndarray

    @property
    def k1(self):
        return len(self.type1_choices)

    @property
    def k2(self):
        return len(self.type2_choices)


@dataclass(frozen=True)
class ReceivedSignal:
    """The ``M x N`` matrix observed at the base station."""

    y: np.ndarray
    noise: np.ndarray = field(default=None, repr=False)

    @property
    def shape(self):
        return self.y.shape


def _check_fits(pool, config):
    if config.k1 > pool.l1_size:
        raise ValueError(f"k1={config.k1} exceeds the type-1 pool size {pool.l1_size}")
    if config.k2 > pool.l2_size:
        raise ValueError(f"k2={config.k2} exceeds the type-2 pool size {pool.l2_size}")


def draw_activity(pool, config, rng):
    """Pick distinct preambles for the active devices and draw their fading.

    Parameters
    ----------
    pool : PreamblePool
    config : ChannelConfig
    rng : numpy.random.Generator

    Returns
    -------
    ActivityMap
    """
    _check_fits(pool, config)
    ch1 = np.sort(rng.choice(pool.l1_size, size=config.k1, replace=False))
    ch2 = np.sort(rng.choice(pool.l2_size, size=config.k2, replace=False))
    v1 = complex_normal(rng, (config.k1, config.m))
    v2 = complex_normal(rng, (config.k2, config.m))
    return ActivityMap(ch1, ch2, v1, v2)


def noiseless_signal(pool, activity, config):
    """Sum of the preamble contributions without background noise."""
    m = config.m
    for name, fad in (("type1_fading", activity.type1_fading), ("type2_fading", activity.type2_fading)):
        if fad.ndim != 2 or (fad.shape[0] and fad.shape[1] != m):
            raise ValueError(f"{name} has shape {fad.shape}, expected (K, {m})")
    c1 = pool.l1[activity.type1_choices]
    c2 = pool.l2[activity.type2_choices]
    y = np.sqrt(config.p1) * (activity.type1_fading.T @ c1.conj())
    y = y + np.sqrt(config.p2) * (activity.type2_fading.T @ c2.conj())
    return y.reshape(m, pool.n)


def synthesize(pool, activity, config, rng):
    """Build the received matrix for one access slot.

    Row ``m`` holds the superposition at antenna ``m``; each device
    contributes its scaled fading coefficient times the conjugated preamble.
    """
    if np.any(activity.type1_choices >= pool.l1_size) or np.any(activity.type2_choices >= pool.l2_size):
        raise ValueError("activity refers to preambles outside the pool")
    y = noiseless_signal(pool, activity, config)
    noise = complex_normal(rng, y.shape, config.n0)
    return ReceivedSignal(y=y + noise, noise=noise)


def _random_subsets(rng, n_trials, population, k):
    if k == 0:
        return np.zeros((n_trials, 0), dtype=np.int64)
    keys = rng.random((n_trials, population))
    return np.sort(np.argpartition(keys, k - 1, axis=1)[:, :k], axis=1)


def synthesize_batch(pool, config, rng, n_trials):
    """Draw ``n_trials`` independent slots at once.

    Returns
    -------
    y : ndarray of shape (n_trials, M, N)
    type1_choices : ndarray of shape (n_trials, K1)
    type2_choices : ndarray of shape (n_trials, K2)
    """
    _check_fits(pool, config)
    m, n = config.m, pool.n
    ch1 = _random_subsets(rng, n_trials, pool.l1_size, config.k1)
    ch2 = _random_subsets(rng, n_trials, pool.l2_size, config.k2)
    v1 = complex_normal(rng, (n_trials, config.k1, m))
    v2 = complex_normal(rng, (n_trials, config.k2, m))
    y = complex_normal(rng, (n_trials, m, n), config.n0)
    if config.k1:
        y += np.sqrt(config.p1) * np.einsum("tkm,tkn->tmn", v1, pool.l1[ch1].conj())
    if config.k2:
        y += np.sqrt(config.p2) * np.einsum("tkm,tkn->tmn", v2, pool.l2[ch2].conj())
    return y, ch1, ch2
