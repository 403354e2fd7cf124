"""Cancellation of detected type-1 preambles and controlled error injection."""

import enum
from dataclasses import dataclass

import numpy as np

from ._validation import check_index_set, check_received


class ErrorInjection(str, enum.Enum):
    NONE = "none"
    FORCED_FA = "forced_fa"
    FORCED_MD = "forced_md"


@dataclass(frozen=True)
class ProjectionReport:
    residual: np.ndarray
    detected_set: tuple

    @property
    def projector_rank_removed(self):
        return len(self.detected_set)


def project_out(signal, detected, pool):
    """Remove the detected type-1 directions from the received matrix.

    Equivalent to right-multiplying by ``I - sum_l c_l c_l^H``; since the
    type-1 preambles are orthonormal this is done by subtracting the rank-one
    terms ``(Y c_l) c_l^H``.
    """
    y = check_received(getattr(signal, "y", signal), pool.n, allow_batch=False)
    detected = check_index_set(detected, pool.l1_size, "detected")
    residual = y.copy()
    for l in detected:
        c = pool.l1[l]
        residual -= np.outer(y @ c, c.conj())
    return ProjectionReport(residual=residual, detected_set=tuple(detected))


def inject_detection_error(detected, mode, truth, rng, l1_size):
    """Perturb a type-1 detected set by one forced error.

    Parameters
    ----------
    detected : iterable of int
        Type-1 indices declared active.
    mode : ErrorInjection or str
        ``forced_fa`` adds one idle preamble chosen uniformly at random;
        ``forced_md`` drops one truly active, detected preamble.
    truth : ActivityMap
        Ground-truth activity, used to tell idle from active preambles.
    rng : numpy.random.Generator
    l1_size : int
        Size of the type-1 sub-pool.

    Returns
    -------
    list of int
        Sorted perturbed detected set.
    """
    mode = ErrorInjection(mode)
    detected = check_index_set(detected, l1_size, "detected")
    active = {int(i) for i in truth.type1_choices}
    if mode is ErrorInjection.NONE:
        return detected
    if mode is ErrorInjection.FORCED_FA:
        idle = [l for l in range(l1_size) if l not in active and l not in detected]
        if not idle:
            raise ValueError("forced FA needs at least one idle, undetected type-1 preamble")
        return sorted(detected + [idle[rng.integers(len(idle))]])
    hits = [l for l in detected if l in active]
    if not hits:
        raise ValueError("forced MD needs at least one correctly detected type-1 preamble")
    drop = hits[rng.integers(len(hits))]
    return [l for l in detected if l != drop]
