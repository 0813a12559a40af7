"""Projection and proximal primitives used by the optimizer.

Dense SVD/eigendecomposition from numpy is the backend; this module owns
only the projection logic layered on top. Everything here is a pure
function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .regularizers import ClusterState

__all__ = [
    "SpectralDecomposition",
    "spectral_decomposition",
    "nonneg_project",
    "svt",
    "capped_simplex_project",
    "project_similarity",
]

#: Eigenvalues this close to the [0, 1] boundary are snapped onto it after
#: projection, stabilizing downstream trace checks.
_BOUNDARY_SNAP = 1e-10


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvectors (orthonormal columns) and descending eigenvalues."""

    vectors: np.ndarray
    values: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.T


def spectral_decomposition(x: np.ndarray) -> SpectralDecomposition:
    """Symmetrize and eigendecompose, eigenvalues in descending order."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError("input must be a square matrix")
    w, v = np.linalg.eigh(0.5 * (x + x.T))
    order = np.argsort(w)[::-1]
    return SpectralDecomposition(vectors=v[:, order], values=w[order])


def nonneg_project(x: np.ndarray) -> np.ndarray:
    """Entrywise projection onto the nonnegative orthant."""
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def svt(x: np.ndarray, threshold: float) -> np.ndarray:
    """Singular value soft-thresholding, the nuclear-norm prox.

    Minimizes ``0.5 * ||y - x||_F^2 + threshold * ||y||_*`` by shrinking
    every singular value of ``x`` by ``threshold`` and clipping at zero.
    """
    if threshold < 0.0:
        raise ValueError("threshold must be nonnegative")
    x = np.asarray(x, dtype=np.float64)
    if threshold == 0.0:
        return x.copy()
    u, s, vt = np.linalg.svd(x, full_matrices=False)
    s = np.maximum(s - threshold, 0.0)
    return (u * s) @ vt


def capped_simplex_project(v: np.ndarray, target_sum: float) -> np.ndarray:
    """Euclidean projection onto {s : sum(s) = target_sum, 0 <= s <= 1}.

    The solution is ``clip(v - mu, 0, 1)`` for the scalar ``mu`` solving the
    sum constraint; ``mu`` is located by sorting the 2M breakpoints of the
    piecewise-linear constraint function and scanning, O(M log M) overall.
    """
    v = np.asarray(v, dtype=np.float64).ravel()
    m = v.size
    if m == 0:
        raise ValueError("cannot project an empty vector")
    target = float(target_sum)
    if target < 0.0 or target > m:
        raise ValueError(f"target sum {target} infeasible for length {m}")
    if target == 0.0:
        return np.zeros(m)
    if target == float(m):
        return np.ones(m)

    # g(mu) = sum(clip(v - mu, 0, 1)) is continuous, nonincreasing, piecewise
    # linear with breakpoints at v_i - 1 and v_i; g = m left of all
    # breakpoints and 0 right of them. Evaluate g at every breakpoint via
    # prefix sums over the sorted values, then interpolate on the bracketing
    # segment.
    vs = np.sort(v)
    prefix = np.concatenate([[0.0], np.cumsum(vs)])

    def g(mu: np.ndarray) -> np.ndarray:
        # entries with v_i >= mu + 1 contribute 1 each; those in (mu, mu + 1)
        # contribute v_i - mu.
        hi = np.searchsorted(vs, mu + 1.0, side="left")
        lo = np.searchsorted(vs, mu, side="right")
        return (m - hi) + (prefix[hi] - prefix[lo]) - (hi - lo) * mu

    bp = np.unique(np.concatenate([v - 1.0, v]))
    vals = g(bp)
    # vals[0] = m > target and vals[-1] = 0 < target are guaranteed by the
    # edge-case returns above, so the crossing lies between two breakpoints.
    idx = int(np.searchsorted(-vals, -target, side="left"))
    g_left, g_right = vals[idx - 1], vals[idx]
    if g_right == target:
        mu = bp[idx]
    else:
        slope = (g_right - g_left) / (bp[idx] - bp[idx - 1])
        mu = bp[idx - 1] + (target - g_left) / slope
    out = np.clip(v - mu, 0.0, 1.0)
    # one Newton-style cleanup: distribute any residual over the free set
    free = (out > 0.0) & (out < 1.0)
    n_free = int(free.sum())
    if n_free:
        out[free] += (target - out.sum()) / n_free
        np.clip(out, 0.0, 1.0, out=out)
    return out


def project_similarity(x: np.ndarray, n_clusters: int) -> ClusterState:
    """Frobenius-nearest feasible similarity matrix.

    Symmetrizes, eigendecomposes, projects the eigenvalue vector onto the
    capped simplex with sum ``n_clusters``, snaps near-boundary eigenvalues
    onto [0, 1], and reconstructs.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError("input must be a square matrix")
    m = x.shape[0]
    if not 1 <= int(n_clusters) <= m:
        raise ValueError(f"n_clusters {n_clusters} outside [1, {m}]")
    dec = spectral_decomposition(x)
    sigma = capped_simplex_project(dec.values, float(n_clusters))
    sigma[sigma < _BOUNDARY_SNAP] = 0.0
    sigma[sigma > 1.0 - _BOUNDARY_SNAP] = 1.0
    z = (dec.vectors * sigma) @ dec.vectors.T
    return ClusterState(matrix=0.5 * (z + z.T))
