"""Alltop preamble pools.

The pool holds ``N**2`` unit-norm sequences of prime length ``N``, indexed by
a family ``u`` and a modulation ``v``::

    x_{u,v}[k] = exp(2j*pi*((k + u)**3 + v*k) / N) / sqrt(N)

Sequences in the same family are orthogonal; sequences in different families
have inner products of magnitude exactly ``1/sqrt(N)``.  Family ``u = 0``
serves the type-1 (orthogonal, high power) devices; the type-2 sub-pool is
drawn from families ``u >= 1`` in lexicographic ``(u, v)`` order.

Flat pool index ``l = u*N + v``, so indices ``0..N-1`` are the type-1
sub-pool and ``N..N+L2-1`` are the type-2 sub-pool.
"""

import csv
from dataclasses import dataclass

import numpy as np

from ._validation import check_int, is_prime


def alltop_vector(n, u, v):
    """Return the Alltop sequence of family ``u`` and modulation ``v``."""
    k = np.arange(n, dtype=np.int64)
    # reduce modulo n before the exponential to keep the angle small
    phase = ((k + u) ** 3 + v * k) % n
    return np.exp(2j * np.pi * phase / n) / np.sqrt(n)


@dataclass(frozen=True)
class PreamblePool:
    """Immutable Alltop preamble pool partitioned into the two sub-pools.

    Attributes
    ----------
    n : int
        Prime sequence length; also the type-1 sub-pool size.
    vectors : ndarray of shape (n**2, n)
        All pool sequences as rows, flat index ``u*n + v``.
    l2_size : int
        Number of sequences in the type-2 sub-pool.
    """

    n: int
    vectors: np.ndarray
    l2_size: int

    def __post_init__(self):
        self.vectors.setflags(write=False)

    @property
    def size(self):
        return self.vectors.shape[0]

    @property
    def l1_size(self):
        return self.n

    @property
    def l1(self):
        """Type-1 preambles as rows, shape (N, N)."""
        return self.vectors[: self.n]

    @property
    def l2(self):
        """Type-2 preambles as rows, shape (L2, N)."""
        return self.vectors[self.n : self.n + self.l2_size]

    def family(self, index):
        """Return the ``(u, v)`` pair of a flat pool index."""
        return divmod(int(index), self.n)

    def gram(self):
        """Full Gram matrix ``G[a, b] = x_a^H x_b``."""
        return self.vectors.conj() @ self.vectors.T


def build_pool(n, l2_size):
    """Build the Alltop pool of length-``n`` preambles.

    Parameters
    ----------
    n : int
        Prime sequence length, at least 5.
    l2_size : int
        Size of the type-2 sub-pool, ``1 <= l2_size <= n*(n-1)``.

    Returns
    -------
    PreamblePool
    """
    n = check_int(n, "n", min_value=5)
    if not is_prime(n):
        raise ValueError(f"n must be prime, got {n}")
    l2_size = check_int(l2_size, "l2_size", min_value=1, max_value=n * (n - 1))

    vectors = np.stack([alltop_vector(n, u, v) for u in range(n) for v in range(n)])
    return PreamblePool(n=n, vectors=vectors, l2_size=l2_size)


def cross_correlation(pool, a, b):
    """Inner product ``x_b^H x_a`` between two pool entries.

    With ``a`` a type-1 index and ``b`` a type-2 index this is the
    correlation coefficient between the type-2 preamble and the type-1
    correlator.
    """
    size = pool.size
    for name, idx in (("a", a), ("b", b)):
        if not 0 <= int(idx) < size:
            raise IndexError(f"{name}={idx} outside pool of size {size}")
    return complex(np.vdot(pool.vectors[int(b)], pool.vectors[int(a)]))


def coherence_report(pool, tol=1e-10):
    """Check the Gram structure of the pool.

    Returns a dict with the maximum off-diagonal magnitude, the largest
    deviation of any entry from its expected value (1 on the diagonal, 0 within
    a family, ``1/sqrt(N)`` across families) and a pass flag.
    """
    n = pool.n
    g = np.abs(pool.gram())
    fam = np.arange(pool.size) // n
    same = fam[:, None] == fam[None, :]
    expected = np.where(same, 0.0, 1.0 / np.sqrt(n))
    np.fill_diagonal(expected, 1.0)
    err = float(np.max(np.abs(g - expected)))
    off = g[~np.eye(pool.size, dtype=bool)]
    l1_gram = np.abs(pool.l1.conj() @ pool.l1.T)
    return {
        "n": n,
        "size": pool.size,
        "coherence": float(off.max()),
        "expected_coherence": 1.0 / np.sqrt(n),
        "max_gram_error": err,
        "l1_orthogonal": bool(np.max(np.abs(l1_gram - np.eye(n))) <= tol),
        "passed": err <= tol,
    }


def write_gram_csv(pool, path):
    """Write ``|G[a, b]|`` as rows ``(row, col, magnitude)``."""
    g = np.abs(pool.gram())
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "col", "magnitude"])
        for a in range(pool.size):
            for b in range(pool.size):
                writer.writerow([a, b, repr(float(g[a, b]))])
