"""Pure numpy implementations of the hot kernels.

Every function here has a twin in ``_kernels.pyx`` with the same signature.
"""
import numpy as np

BACKEND = "python"


def lmo_scan(atoms, g, rtol):
    """Tie-broken argmin of ``atoms @ g``.

    Returns the smallest row index whose score lies within
    ``rtol * (1 + |min|)`` of the minimum, together with its score.
    """
    scores = atoms @ g
    best = scores.min()
    hit = scores <= best + rtol * (1.0 + abs(best))
    idx = int(np.argmax(hit))
    return idx, float(scores[idx])


def correlate(atoms, g):
    return atoms @ g


def project_capped_simplex(a, tau):
    """Euclidean projection onto ``{x >= 0, sum(x) <= tau}``."""
    a = np.asarray(a, dtype=float)
    clipped = np.maximum(a, 0.0)
    if clipped.sum() <= tau:
        return clipped
    u = np.sort(a)[::-1]
    css = np.cumsum(u) - tau
    k = np.arange(1, a.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(a - theta, 0.0)


def dual_subgradient(atoms, y, sigma, tau, iterations):
    """Subgradient ascent on the restricted dual of the scaled quadratic loss.

    Maximizes ``<lam, y> - |lam|^2 / (2 sigma) - tau * max(0, max_i <lam, atoms[i]>)``.
    Returns ``(weighted_average, last_iterate)``.
    """
    lam = sigma * np.array(y, dtype=float)
    avg = np.zeros_like(lam)
    wsum = 0.0
    k = atoms.shape[0]
    for it in range(iterations):
        g = y - lam / sigma
        if k:
            scores = atoms @ lam
            j = int(np.argmax(scores))
            if scores[j] > 0.0:
                g = g - tau * atoms[j]
        w = it + 1.0
        avg += w * lam
        wsum += w
        lam = lam + (2.0 * sigma / (it + 2.0)) * g
    return avg / wsum, lam
