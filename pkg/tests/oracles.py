"""Independent reference computations used by the test-suite.

Nothing here calls into the code paths being checked.
"""

import itertools

import numpy as np


def alltop_brute(n, u, v):
    """Alltop entry by direct evaluation, one sample at a time."""
    out = np.empty(n, dtype=complex)
    for k in range(n):
        out[k] = np.exp(2j * np.pi * ((k + u) ** 3 + v * k) / n) / np.sqrt(n)
    return out


def poisson_tail_grid(nu_grid, m):
    """``P(Poisson(nu) >= m)`` on a grid by summing the head pmf in log space."""
    from scipy.special import gammaln

    k = np.arange(m)[:, None]
    nu = np.asarray(nu_grid, dtype=float)[None, :]
    head = np.exp(k * np.log(nu) - nu - gammaln(k + 1)).sum(axis=0)
    return 1.0 - head


def mmv_log_likelihood(phi, z, b, alpha, n0):
    """Gaussian log-likelihood of all columns of ``z`` for activity ``b``."""
    n = phi.shape[0]
    cov = alpha * (phi * b) @ phi.conj().T + n0 * np.eye(n)
    _, logdet = np.linalg.slogdet(cov)
    quad = np.real(np.sum(z.conj() * np.linalg.solve(cov, z)))
    return -z.shape[1] * logdet - quad


def map_support(phi, z, alpha, n0, prior, k2=None):
    """Exhaustive MAP over all ``2**L2`` activity vectors.

    Returns the MAP support, restricted to weight ``k2`` when given (the
    independent Bernoulli prior is then constant over the candidates).
    """
    l2 = phi.shape[1]
    best, best_val = None, -np.inf
    logit0, logit1 = np.log1p(-prior), np.log(prior)
    for bits in itertools.product((0, 1), repeat=l2):
        b = np.array(bits, dtype=float)
        if k2 is not None and b.sum() != k2:
            continue
        val = mmv_log_likelihood(phi, z, b, alpha, n0) + np.sum(b * logit1 + (1 - b) * logit0)
        if val > best_val:
            best, best_val = b, val
    return sorted(int(i) for i in np.flatnonzero(best))


def naive_cavi(phi, z, alpha, n0, prior, n_runs, order=None):
    """Sequential mean-field updates with an explicit inverse for every column."""
    n, l2 = phi.shape
    m = z.shape[1]
    mu = np.full(l2, float(prior))
    lam = np.full(l2, np.log(prior / (1 - prior)))
    order = range(l2) if order is None else order
    for _ in range(n_runs):
        for l in order:
            others = mu.copy()
            others[l] = 0.0
            cov = alpha * (phi * others) @ phi.conj().T + n0 * np.eye(n)
            inv = np.linalg.inv(cov)
            f = phi[:, l]
            q = np.real(f.conj() @ inv @ f)
            r = np.sum(np.abs(f.conj() @ inv @ z) ** 2)
            lam[l] = np.log(prior / (1 - prior)) - m * np.log1p(alpha * q) + alpha * r / (1 + alpha * q)
            mu[l] = 1 / (1 + np.exp(-lam[l]))
    return mu, lam
