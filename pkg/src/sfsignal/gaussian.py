"""Linear-Gaussian inference with rank-deficient covariance support.

Covariances that are singular (for instance flow covariances confined to the
span of the route incidence matrix) are handled by projecting onto the
numerical range of the matrix, inverting there, and mapping back.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, SingularCovariance, ZeroRank

SYM_TOL = 1e-10
PSD_TOL = 1e-8
# Inversions fall back to the reduced space above this condition number.
COND_LIMIT = 1e12


def symmetrize(m):
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + m.T)


def default_cutoff(cov):
    """Numerical-rank threshold: max(dim) * largest singular value * 1e-10."""
    cov = np.atleast_2d(cov)
    if cov.size == 0:
        return 0.0
    smax = np.linalg.norm(cov, 2)
    return max(cov.shape) * smax * 1e-10


@dataclass(frozen=True)
class GaussianDist:
    """Multivariate normal N(mean, cov); ``cov`` may be singular."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise DimensionMismatch(
                f"mean has length {mean.size} but cov has shape {cov.shape}")
        scale = max(1.0, float(np.max(np.abs(cov)))) if cov.size else 1.0
        if np.max(np.abs(cov - cov.T), initial=0.0) > SYM_TOL * scale:
            raise ValueError("covariance is not symmetric")
        if mean.size and np.linalg.eigvalsh(cov)[0] < -PSD_TOL * scale:
            raise ValueError("covariance has a negative eigenvalue")
        mean.setflags(write=False)
        cov = symmetrize(cov)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self):
        return self.mean.size


@dataclass(frozen=True)
class LinearGaussianObs:
    """Observation model y | x ~ N(A x + b, noise_cov)."""

    map_A: np.ndarray
    offset_b: np.ndarray
    noise_cov_Linv: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.map_A, dtype=float))
        b = np.atleast_1d(np.asarray(self.offset_b, dtype=float))
        L = np.atleast_2d(np.asarray(self.noise_cov_Linv, dtype=float))
        if A.shape[0] != b.size or L.shape != (b.size, b.size):
            raise DimensionMismatch(
                f"map {A.shape}, offset {b.shape} and noise {L.shape} disagree")
        object.__setattr__(self, "map_A", A)
        object.__setattr__(self, "offset_b", b)
        object.__setattr__(self, "noise_cov_Linv", symmetrize(L))

    @classmethod
    def identity(cls, noise_cov):
        noise_cov = np.atleast_2d(noise_cov)
        d = noise_cov.shape[0]
        return cls(np.eye(d), np.zeros(d), noise_cov)


@dataclass(frozen=True)
class ReducedSpace:
    """Affine chart x_tilde = C (x - center) onto the range of a covariance.

    ``transform_C`` has orthonormal rows spanning the retained singular
    directions; ``reduced_cov`` is C cov C^T and is positive definite.
    """

    transform_C: np.ndarray
    center_mu: np.ndarray
    reduced_cov: np.ndarray

    @property
    def dim(self):
        return self.transform_C.shape[0]

    def project(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.center_mu.size:
            raise DimensionMismatch(
                f"expected vectors of length {self.center_mu.size}, got {x.shape}")
        return (x - self.center_mu) @ self.transform_C.T


def range_basis(cov, cutoff=None):
    """Orthonormal rows spanning the singular directions above ``cutoff``."""
    cov = symmetrize(np.atleast_2d(cov))
    if cutoff is None:
        cutoff = default_cutoff(cov)
    w, v = np.linalg.eigh(cov)
    keep = w > cutoff
    # descending order keeps the leading direction first
    return v[:, keep][:, ::-1].T.copy(), w[keep][::-1]


def reduce(dist, cutoff=None):
    """Reduce ``dist`` to the span of its covariance (SVD of a symmetric matrix).

    Raises:
        ZeroRank: every singular value is at or below ``cutoff``.
    """
    C, _ = range_basis(dist.cov, cutoff)
    if C.shape[0] == 0:
        raise ZeroRank("covariance has no singular value above the cutoff")
    reduced_cov = symmetrize(C @ dist.cov @ C.T)
    return ReducedSpace(C, dist.mean.copy(), reduced_cov)


def restore(space, x_reduced):
    """Map reduced coordinates back: C^T x_tilde + center."""
    x_reduced = np.asarray(x_reduced, dtype=float)
    if x_reduced.shape[-1] != space.dim:
        raise DimensionMismatch(
            f"expected reduced vectors of length {space.dim}, got {x_reduced.shape}")
    return x_reduced @ space.transform_C + space.center_mu


def pinv_psd(m, cutoff=None):
    """Inverse of a PSD matrix on its range (zero on the null space).

    Full-rank, well conditioned input is inverted directly; anything else is
    inverted in the reduced space.
    """
    m = symmetrize(np.atleast_2d(m))
    w, v = np.linalg.eigh(m)
    if cutoff is None:
        cutoff = default_cutoff(m)
    if w.size and w[0] > 0 and w[-1] / w[0] < COND_LIMIT:
        return symmetrize(np.linalg.inv(m))
    keep = w > cutoff
    if not np.any(keep):
        raise SingularCovariance("matrix has no range above the rank cutoff")
    vk = v[:, keep]
    return symmetrize((vk / w[keep]) @ vk.T)


def marginal(prior, obs):
    """Predictive distribution of y: N(A mu + b, noise + A cov A^T)."""
    A = obs.map_A
    if A.shape[1] != prior.dim:
        raise DimensionMismatch(
            f"map has {A.shape[1]} columns but prior has dimension {prior.dim}")
    mean = A @ prior.mean + obs.offset_b
    cov = obs.noise_cov_Linv + A @ prior.cov @ A.T
    return GaussianDist(mean, symmetrize(cov))


def gain(prior_cov, obs):
    """Gain matrix K = P A^T S^+ with S the innovation covariance.

    Written in covariance form so that neither the prior covariance nor the
    noise covariance has to be invertible; only S is inverted, on its range.
    """
    A = obs.map_A
    S = obs.noise_cov_Linv + A @ prior_cov @ A.T
    return prior_cov @ A.T @ pinv_psd(S)


def posterior(prior, obs, y):
    """Posterior of x given y under the linear-Gaussian model.

    Equals N(Sigma {A^T L (y - b) + Lambda mu}, Sigma), Sigma = (Lambda + A^T L A)^-1,
    whenever the precisions exist; the covariance (gain) form used here also
    covers singular prior or noise covariances.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    A = obs.map_A
    if A.shape[1] != prior.dim or y.size != A.shape[0]:
        raise DimensionMismatch(
            f"prior dim {prior.dim}, map {A.shape}, observation {y.shape}")
    K = gain(prior.cov, obs)
    innovation = y - A @ prior.mean - obs.offset_b
    mean = prior.mean + K @ innovation
    I = np.eye(prior.dim)
    # Joseph form keeps the update PSD under round-off
    IKA = I - K @ A
    cov = IKA @ prior.cov @ IKA.T + K @ obs.noise_cov_Linv @ K.T
    cov = symmetrize(cov)
    return GaussianDist(mean, clip_psd(cov))


def clip_psd(m):
    """Zero out round-off negative eigenvalues of a symmetric matrix."""
    m = symmetrize(m)
    w, v = np.linalg.eigh(m)
    if w.size == 0 or w[0] >= 0:
        return m
    return symmetrize((v * np.clip(w, 0.0, None)) @ v.T)


def posterior_precision_form(prior, obs, y):
    """Textbook precision-form posterior; requires invertible covariances.

    Kept as an independent route for cross-checking :func:`posterior`.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    try:
        Lam = np.linalg.inv(prior.cov)
        L = np.linalg.inv(obs.noise_cov_Linv)
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance(str(exc)) from exc
    A = obs.map_A
    Sigma = np.linalg.inv(Lam + A.T @ L @ A)
    mean = Sigma @ (A.T @ L @ (y - obs.offset_b) + Lam @ prior.mean)
    return GaussianDist(mean, symmetrize(Sigma))
