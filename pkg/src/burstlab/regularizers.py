"""Relaxed clustering penalty and mixture-Gamma log-prior.

The clustering term couples excitement columns through a symmetric
similarity matrix constrained to the spectral set {trace = n_clusters,
eigenvalues in [0, 1]}; the prior scores observed excitement entries under
an equal-weight mixture of Gamma densities. Both come with analytic
gradients. All functions here are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

__all__ = [
    "EPS_EXCITEMENT",
    "ClusterPenaltyConfig",
    "ClusterState",
    "GammaMixtureSpec",
    "cluster_loss",
    "cluster_loss_grad_excitement",
    "cluster_loss_grad_similarity",
    "cluster_penalty_terms",
    "gamma_log_prior",
    "gamma_log_prior_grad",
    "responsibilities",
]

#: Floor applied to excitement values inside the prior density and its
#: gradient, so both stay finite at exact zeros.
EPS_EXCITEMENT = 1e-8

_SYM_TOL = 1e-8


@dataclass(frozen=True)
class ClusterPenaltyConfig:
    """Coefficients of the clustering penalty and the target cluster count."""

    rho1: float
    rho2: float
    n_clusters: int

    def __post_init__(self):
        if self.rho1 <= 0.0 or self.rho2 <= 0.0:
            raise ValueError("rho1 and rho2 must be strictly positive")
        if int(self.n_clusters) < 1:
            raise ValueError("n_clusters must be at least 1")
        object.__setattr__(self, "rho1", float(self.rho1))
        object.__setattr__(self, "rho2", float(self.rho2))
        object.__setattr__(self, "n_clusters", int(self.n_clusters))

    @property
    def shift(self) -> float:
        return self.rho1 / self.rho2

    @property
    def scale(self) -> float:
        return self.rho2 * (self.rho2 + self.rho1) / self.rho1


@dataclass(frozen=True)
class ClusterState:
    """Symmetric student-similarity matrix, the relaxed cluster indicator.

    Construction only enforces symmetry (the matrix is stored symmetrized);
    spectral feasibility -- eigenvalues in [0, 1] and trace equal to the
    cluster count -- is checked by :meth:`validate`, which projections
    guarantee and tests assert.
    """

    matrix: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.matrix, dtype=np.float64)
        if z.ndim != 2 or z.shape[0] != z.shape[1]:
            raise ValueError("similarity matrix must be square")
        if not np.all(np.isfinite(z)):
            raise ValueError("similarity matrix must be finite")
        scale = max(1.0, float(np.abs(z).max(initial=0.0)))
        if np.abs(z - z.T).max(initial=0.0) > _SYM_TOL * scale:
            raise ValueError("similarity matrix must be symmetric")
        z = 0.5 * (z + z.T)
        z.setflags(write=False)
        object.__setattr__(self, "matrix", z)

    @property
    def n_students(self) -> int:
        return self.matrix.shape[0]

    def validate(self, n_clusters: int | None = None, tol: float = 1e-8) -> None:
        """Raise unless eigenvalues lie in [0, 1] and (optionally) trace matches."""
        eigvals = np.linalg.eigvalsh(self.matrix)
        if eigvals[0] < -tol or eigvals[-1] > 1.0 + tol:
            raise ValueError(
                f"similarity eigenvalues outside [0, 1]: "
                f"min {eigvals[0]:.3e}, max {eigvals[-1]:.3e}"
            )
        if n_clusters is not None:
            trace = float(np.trace(self.matrix))
            if abs(trace - n_clusters) > tol:
                raise ValueError(
                    f"similarity trace {trace} != n_clusters {n_clusters}"
                )


def _shifted_inverse(z: np.ndarray, cfg: ClusterPenaltyConfig) -> np.ndarray:
    # Inverse of (shift * I + Z) via eigendecomposition. Feasible Z makes the
    # shifted matrix positive definite; eigenvalues are floored anyway so the
    # optimizer may evaluate at extrapolated (mildly infeasible) points.
    w, v = np.linalg.eigh(0.5 * (z + z.T))
    w = np.maximum(w + cfg.shift, 1e-12)
    return (v / w) @ v.T


def _as_matrix(similarity) -> np.ndarray:
    if isinstance(similarity, ClusterState):
        return similarity.matrix
    return np.asarray(similarity, dtype=np.float64)


def cluster_penalty_terms(
    excitement: np.ndarray, similarity, cfg: ClusterPenaltyConfig
) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss plus both gradients from a single shared inverse.

    Returns ``(loss, grad_excitement, grad_similarity)``.
    """
    a = np.asarray(excitement, dtype=np.float64)
    z = _as_matrix(similarity)
    if a.ndim != 2 or z.shape[0] != a.shape[1]:
        raise ValueError(
            f"excitement is {a.shape} but similarity is {z.shape}"
        )
    inv = _shifted_inverse(z, cfg)
    ab = a @ inv
    loss = cfg.scale * float(np.sum(ab * a))
    grad_a = 2.0 * cfg.scale * ab
    grad_z = -cfg.scale * (ab.T @ ab)
    grad_z = 0.5 * (grad_z + grad_z.T)
    return loss, grad_a, grad_z


def cluster_loss(excitement, similarity, cfg: ClusterPenaltyConfig) -> float:
    """Quadratic coupling of excitement columns through the similarity matrix.

    Equals ``scale * trace(A (shift*I + Z)^{-1} A^T)`` with ``scale`` and
    ``shift`` from the config; nonnegative, and jointly convex over the
    feasible similarity set.
    """
    loss, _, _ = cluster_penalty_terms(excitement, similarity, cfg)
    return loss


def cluster_loss_grad_excitement(excitement, similarity, cfg) -> np.ndarray:
    _, grad_a, _ = cluster_penalty_terms(excitement, similarity, cfg)
    return grad_a


def cluster_loss_grad_similarity(excitement, similarity, cfg) -> np.ndarray:
    """Gradient in the similarity matrix; symmetric negative semidefinite."""
    _, _, grad_z = cluster_penalty_terms(excitement, similarity, cfg)
    return grad_z


@dataclass(frozen=True)
class GammaMixtureSpec:
    """Equal-weight Gamma mixture prior on observed excitement entries.

    ``components`` is a sequence of (shape, scale) pairs. Shapes below 1 make
    the density unbounded at 0 and the MAP problem ill-posed, so they are
    rejected unless ``allow_shape_below_one`` is set.
    """

    components: tuple[tuple[float, float], ...]
    allow_shape_below_one: bool = False

    def __post_init__(self):
        comps = tuple((float(s), float(t)) for s, t in self.components)
        if not comps:
            raise ValueError("mixture needs at least one component")
        for s, t in comps:
            if s <= 0.0 or t <= 0.0:
                raise ValueError("shapes and scales must be positive")
            if s < 1.0 and not self.allow_shape_below_one:
                raise ValueError(
                    f"shape {s} < 1 makes the prior unbounded at 0; set "
                    "allow_shape_below_one to override"
                )
        object.__setattr__(self, "components", comps)

    @property
    def n_components(self) -> int:
        return len(self.components)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        comps = np.asarray(self.components)
        return comps[:, 0], comps[:, 1]


def _log_densities(values: np.ndarray, mixture: GammaMixtureSpec) -> np.ndarray:
    # Rows: components, columns: values. Standard Gamma log-density.
    shapes, scales = mixture.arrays()
    x = values[np.newaxis, :]
    s = shapes[:, np.newaxis]
    t = scales[:, np.newaxis]
    return (s - 1.0) * np.log(x) - x / t - gammaln(s) - s * np.log(t)


def gamma_log_prior(
    excitement: np.ndarray, mixture: GammaMixtureSpec, observed: np.ndarray
) -> float:
    """Log mixture-Gamma density summed over observed entries.

    Entries are floored at ``EPS_EXCITEMENT`` before evaluation; the
    mixture is combined in log space.
    """
    a = np.asarray(excitement, dtype=np.float64)
    mask = np.asarray(observed, dtype=bool)
    if mask.shape != a.shape:
        raise ValueError("observed mask shape mismatch")
    values = np.maximum(a[mask], EPS_EXCITEMENT)
    if values.size == 0:
        return 0.0
    log_f = _log_densities(values, mixture)
    return float(np.sum(logsumexp(log_f, axis=0) - np.log(mixture.n_components)))


def gamma_log_prior_grad(
    excitement: np.ndarray, mixture: GammaMixtureSpec, observed: np.ndarray
) -> np.ndarray:
    """Gradient of :func:`gamma_log_prior`; zero on unobserved entries."""
    a = np.asarray(excitement, dtype=np.float64)
    mask = np.asarray(observed, dtype=bool)
    if mask.shape != a.shape:
        raise ValueError("observed mask shape mismatch")
    grad = np.zeros_like(a)
    values = np.maximum(a[mask], EPS_EXCITEMENT)
    if values.size == 0:
        return grad
    shapes, scales = mixture.arrays()
    log_f = _log_densities(values, mixture)
    resp = np.exp(log_f - logsumexp(log_f, axis=0, keepdims=True))
    per_component = (shapes[:, np.newaxis] - 1.0) / values[np.newaxis, :] - (
        1.0 / scales[:, np.newaxis]
    )
    grad[mask] = np.sum(resp * per_component, axis=0)
    return grad


def responsibilities(value: float, mixture: GammaMixtureSpec) -> np.ndarray:
    """Posterior component weights for one excitement value.

    Computed in log space; nonnegative and sums to 1.
    """
    x = np.array([max(float(value), EPS_EXCITEMENT)])
    log_f = _log_densities(x, mixture)[:, 0]
    return np.exp(log_f - logsumexp(log_f))
