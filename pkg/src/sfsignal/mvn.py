"""Multivariate normal orthant probabilities P(X <= upper).

Randomly shifted rank-1 lattice rules applied to the separation-of-variables
(Genz) transform of the integral. The shifts are drawn from a generator
seeded only by ``(seed, dim)`` so that the estimate is a deterministic,
smooth function of the mean and covariance at a fixed budget; finite
differences taken through it see common random numbers.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import DimensionMismatch, ToleranceUnreachable

_PRIMES = np.array([2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53,
                    59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113])


@dataclass(frozen=True)
class CdfControl:
    """Accuracy and budget settings for :func:`cdf`.

    The target error for an estimate ``p`` is ``rel_tol * max(p, floor)``;
    the error estimate is three standard errors over the random shifts.
    Budgets grow by 4x from ``min_points`` to ``max_points``. Setting both
    equal gives a fixed point set, which is what finite-difference callers
    want. With ``strict=False`` an unreachable tolerance returns the best
    estimate instead of raising.
    """

    rel_tol: float = 1e-4
    seed: int = 0
    min_points: int = 2**12
    max_points: int = 2**22
    shifts: int = 8
    floor: float = 1e-2
    strict: bool = True

    def __post_init__(self):
        if not 0 < self.rel_tol <= 0.1:
            raise ValueError("rel_tol must lie in (0, 0.1]")
        if self.min_points < self.shifts or self.max_points < self.min_points:
            raise ValueError("need shifts <= min_points <= max_points")

    @classmethod
    def fixed(cls, points=2**13, seed=0, shifts=8):
        """Fixed budget, never raises: the setting used inside fixed-point solvers."""
        return cls(rel_tol=0.1, seed=seed, min_points=points, max_points=points,
                   shifts=shifts, strict=False)


DEFAULT_CONTROL = CdfControl()


def _degenerate_cholesky(cov, tol):
    """Batched lower Cholesky factor that tolerates PSD (singular) input.

    Pivots at or below ``tol`` (relative to the diagonal) are set to zero and
    the corresponding coordinate is flagged as determined by the others.
    """
    B, d, _ = cov.shape
    L = np.zeros_like(cov)
    deg = np.zeros((B, d), dtype=bool)
    scale = np.maximum(np.max(np.abs(np.diagonal(cov, axis1=1, axis2=2)), axis=1), 1e-300)
    for i in range(d):
        piv = cov[:, i, i] - np.einsum("bj,bj->b", L[:, i, :i], L[:, i, :i])
        small = piv <= tol * scale
        deg[:, i] = small
        lii = np.sqrt(np.where(small, 1.0, piv))
        L[:, i, i] = np.where(small, 0.0, lii)
        if i + 1 < d:
            col = cov[:, i + 1:, i] - np.einsum("bkj,bj->bk", L[:, i + 1:, :i], L[:, i, :i])
            L[:, i + 1:, i] = np.where(small[:, None], 0.0, col / lii[:, None])
    return L, deg


def _lattice(dim, n, seed, shifts):
    """Baker-transformed shifted Richtmyer lattice, shape (shifts, n // shifts, dim)."""
    per = n // shifts
    rng = np.random.default_rng([seed, dim])
    offsets = rng.random((shifts, dim))
    gen = np.sqrt(_PRIMES[:dim].astype(float)) % 1.0
    base = (np.arange(1, per + 1)[:, None] * gen[None, :]) % 1.0
    pts = (base[None, :, :] + offsets[:, None, :]) % 1.0
    return 1.0 - np.abs(2.0 * pts - 1.0)


def _genz_batch(a, L, deg, w, tie_tol):
    """Integrand means for a batch. ``w`` has shape (shifts, per, d-1)."""
    B, d = a.shape
    K, N = w.shape[0], w.shape[1]
    y = np.zeros((B, K, N, d))
    f = np.ones((B, K, N))
    for i in range(d):
        s = np.einsum("bj,bknj->bkn", L[:, i, :i], y[:, :, :, :i]) if i else 0.0
        resid = a[:, i, None, None] - s
        dgi = deg[:, i, None, None]
        lii = np.where(deg[:, i], 1.0, L[:, i, i])[:, None, None]
        e = np.where(dgi, (resid >= -tie_tol[:, None, None]).astype(float), ndtr(resid / lii))
        f *= e
        if i + 1 < d:
            u = np.clip(w[None, :, :, i] * e, 1e-17, 1.0 - 1e-16)
            y[:, :, :, i] = np.where(dgi, 0.0, ndtri(u))
    return f.mean(axis=2)  # (B, K)


def cdf_batch(upper, mean, cov, ctrl=DEFAULT_CONTROL, return_error=False):
    """Evaluate P(X_b <= upper_b), X_b ~ N(mean_b, cov_b), for a batch of same-dim problems.

    Args:
        upper: (B, d) evaluation points.
        mean: (B, d) means.
        cov: (B, d, d) PSD covariances.
        ctrl: accuracy settings.
        return_error: also return the per-problem error estimates.

    Returns:
        (B,) probabilities, plus (B,) error estimates when requested.
    """
    upper = np.asarray(upper, dtype=float)
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    if upper.ndim != 2 or mean.shape != upper.shape or cov.shape != upper.shape + upper.shape[-1:]:
        raise DimensionMismatch(
            f"upper {upper.shape}, mean {mean.shape}, cov {cov.shape} disagree")
    B, d = upper.shape
    a = upper - mean
    if d == 0:
        out = np.ones(B)
        return (out, np.zeros(B)) if return_error else out
    if d == 1:
        sd = np.sqrt(np.clip(cov[:, 0, 0], 0.0, None))
        pos = sd > 0
        out = np.where(a[:, 0] >= 0, 1.0, 0.0)
        out[pos] = ndtr(a[pos, 0] / sd[pos])
        return (out, np.zeros(B)) if return_error else out

    cov = 0.5 * (cov + np.swapaxes(cov, 1, 2))
    L, deg = _degenerate_cholesky(cov, tol=1e-12)
    diag_scale = np.sqrt(np.max(np.abs(np.diagonal(cov, axis1=1, axis2=2)), axis=1))
    tie_tol = 1e-12 * np.maximum(diag_scale, np.max(np.abs(a), axis=1))

    est = np.empty(B)
    err = np.full(B, np.inf)
    todo = np.arange(B)
    n = ctrl.min_points
    while todo.size:
        w = _lattice(d - 1, n, ctrl.seed, ctrl.shifts)
        vals = _genz_batch(a[todo], L[todo], deg[todo], w, tie_tol[todo])
        p = vals.mean(axis=1)
        e = 3.0 * vals.std(axis=1, ddof=1) / np.sqrt(ctrl.shifts)
        est[todo] = p
        err[todo] = e
        ok = e <= ctrl.rel_tol * np.maximum(p, ctrl.floor)
        todo = todo[~ok]
        if n >= ctrl.max_points:
            break
        n = min(4 * n, ctrl.max_points)
    est = np.clip(est, 0.0, 1.0)
    if todo.size and ctrl.strict:
        raise ToleranceUnreachable(
            f"{todo.size} cdf estimate(s) above rel_tol={ctrl.rel_tol} "
            f"at {ctrl.max_points} points (worst error {err[todo].max():.3g})",
            estimate=est, error=err)
    return (est, err) if return_error else est


def cdf(upper, mean, cov, ctrl=DEFAULT_CONTROL):
    """P(X <= upper) for X ~ N(mean, cov); ``cov`` may be singular.

    One-dimensional problems use the error function directly. A coordinate
    with zero variance contributes exactly 0 or 1 (ties count as 1).

    >>> round(cdf([0.0, 0.0], [0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]]), 6)
    0.25
    """
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if upper.size == 0:
        raise DimensionMismatch("cdf needs dimension >= 1")
    return float(cdf_batch(upper[None], mean[None], cov[None], ctrl)[0])
