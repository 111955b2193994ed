"""Dense linear algebra: Cholesky factors and precision-form Gaussian draws.

Everything here works on small dense matrices (tens of rows at most), so no
sparsity or banding is exploited. The one nonstandard piece is ``rue_sample``,
which draws from N(L^{-1} d, sigma^2 L^{-1}) given the precision matrix L and
shift vector d using a single Cholesky factorization and three triangular
solves, avoiding any explicit inverse. Factor and solves go straight to
LAPACK (potrf/trtrs); the Gibbs sweep calls these thousands of times per
second, so wrapper overhead matters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import get_lapack_funcs

from .errors import NotPositiveDefinite

__all__ = ["GaussianConditional", "cholesky", "cholesky_jittered", "rue_sample"]

_POTRF, _TRTRS = get_lapack_funcs(("potrf", "trtrs"), (np.empty((1, 1), dtype=np.float64),))

# Relative diagonal bump used once when a precision matrix fails to factor;
# omega-weighted Gram matrices can be near-singular early in a chain.
_JITTER_REL = 1e-8


def cholesky(m: np.ndarray) -> np.ndarray:
    """Upper-triangular R with R.T @ R equal to the symmetric input.

    Parameters
    ----------
    m : ndarray of shape (p, p)
        Symmetric positive-definite matrix.

    Returns
    -------
    ndarray of shape (p, p)
        Upper-triangular factor R such that ``R.T @ R`` reproduces ``m`` to
        within 1e-9 of its largest entry.

    Raises
    ------
    NotPositiveDefinite
        If a pivot is not strictly positive.
    """
    m = np.asarray(m, dtype=np.float64)
    r, info = _POTRF(m, lower=0, clean=1, overwrite_a=0)
    if info != 0:
        raise NotPositiveDefinite(
            f"Cholesky failed on a {m.shape[0]}x{m.shape[1]} matrix (pivot {info})"
        )
    return r


def cholesky_jittered(m: np.ndarray) -> np.ndarray:
    """Like :func:`cholesky`, but retry once with a small diagonal bump.

    The bump is ``1e-8 * trace(m) / p`` added to every diagonal entry. A
    second failure raises :class:`NotPositiveDefinite`.
    """
    m = np.asarray(m, dtype=np.float64)
    r, info = _POTRF(m, lower=0, clean=1, overwrite_a=0)
    if info == 0:
        return r
    p = m.shape[0]
    bump = _JITTER_REL * float(np.trace(m)) / p
    r, info = _POTRF(m + bump * np.eye(p), lower=0, clean=1, overwrite_a=1)
    if info != 0:
        raise NotPositiveDefinite(
            f"Cholesky failed on a {p}x{p} matrix even after +{bump:g} jitter (pivot {info})"
        )
    return r


def solve_upper(r: np.ndarray, rhs: np.ndarray, transposed: bool = False) -> np.ndarray:
    """Solve R x = rhs (or R.T x = rhs) for upper-triangular R."""
    x, info = _TRTRS(r, rhs, lower=0, trans=1 if transposed else 0)
    if info != 0:
        raise NotPositiveDefinite(f"triangular solve failed (diagonal zero at {info})")
    return x


@dataclass(frozen=True)
class GaussianConditional:
    """A Gaussian in precision form: mean ``precision^{-1} @ shift``.

    Attributes
    ----------
    precision : ndarray of shape (p, p)
        Symmetric positive-definite precision matrix.
    shift : ndarray of shape (p,)
        Shift vector d; the mean is the solution of ``precision @ mean = d``.
    scale : float
        Nonnegative multiplier applied to the correlated standard-normal
        draw, so the covariance is ``scale^2 * precision^{-1}``.
    """

    precision: np.ndarray
    shift: np.ndarray
    scale: float = 1.0

    def __post_init__(self) -> None:
        prec = np.asarray(self.precision, dtype=np.float64)
        asym = np.abs(prec - prec.T).max(initial=0.0)
        norm = np.abs(prec).max(initial=0.0)
        if norm > 0 and asym > 1e-10 * norm:
            raise ValueError(f"precision matrix asymmetric: |A - A.T| = {asym:g}")
        object.__setattr__(self, "precision", prec)
        object.__setattr__(self, "shift", np.asarray(self.shift, dtype=np.float64))
        if self.shift.shape != (prec.shape[0],):
            raise ValueError("shift length does not match precision dimension")
        if self.scale < 0:
            raise ValueError("scale must be nonnegative")


def rue_draw(
    precision: np.ndarray, shift: np.ndarray, scale: float, rng: np.random.Generator
) -> np.ndarray:
    """Unvalidated engine behind :func:`rue_sample`; see there for semantics."""
    r = cholesky_jittered(precision)
    v = rng.standard_normal(r.shape[0])
    w = solve_upper(r, v)
    u = solve_upper(r, shift, transposed=True)
    mu = solve_upper(r, u)
    return mu + scale * w


def rue_sample(g: GaussianConditional, rng: np.random.Generator) -> np.ndarray:
    """Draw from N(L^{-1} d, scale^2 L^{-1}) for precision L and shift d.

    Factor L = R.T @ R, draw v ~ N(0, I), solve R w = v, solve R.T u = d,
    solve R mu = u, and return mu + scale * w. With ``scale == 0`` the result
    is exactly the solution of ``L @ mu = d``.

    Raises
    ------
    NotPositiveDefinite
        If the precision fails to factor even after the one-shot jitter retry.
    """
    return rue_draw(g.precision, g.shift, g.scale, rng)
