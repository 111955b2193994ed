"""Causal quantities derived from posterior draws.

Per-draw conditional effects are weight-averaged treatment contrasts; the
average effect is their empirical mean over subjects. Quantile effects invert
each draw's analytic mixture CDF by bisection, and predictive densities are
plain mixture density evaluations on a grid. Summaries are posterior means
with equal-tailed credible bounds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from scipy.special import ndtr

from .data import FeatureMaps, ProfileRows
from .errors import BisectionFailure, EmptySubgroup, TooFewDraws
from .lsbp import ChainState, PosteriorDraws, stick_weight_matrix, stick_weights

__all__ = [
    "EffectSummary",
    "PredictiveDensity",
    "summarize",
    "cate_draw",
    "cate_for_state",
    "mate_draw",
    "subgroup_cate",
    "predictive_density",
    "qte",
]

_QUANTILE_TOL = 1e-8
_BRACKET_SDS = (4.0, 8.0, 12.0)


@dataclass(frozen=True)
class EffectSummary:
    """Posterior mean with equal-tailed credible bounds at ``level``."""

    point: float
    lower: float
    upper: float
    level: float

    def __post_init__(self) -> None:
        if not self.lower <= self.upper:
            raise ValueError(f"lower bound {self.lower} exceeds upper bound {self.upper}")


@dataclass(frozen=True)
class PredictiveDensity:
    """Per-draw mixture densities on an outcome grid, shape (draws, grid)."""

    grid: np.ndarray
    density: np.ndarray

    def mean_curve(self) -> np.ndarray:
        return self.density.mean(axis=0)

    def bands(self, level: float = 0.95):
        lo, hi = np.quantile(self.density, [(1 - level) / 2, (1 + level) / 2], axis=0)
        return lo, hi

    def integrals(self) -> np.ndarray:
        """Trapezoid integral of each draw's density over the grid."""
        return np.trapezoid(self.density, self.grid, axis=1)


def summarize(draw_vector, level: float = 0.95) -> EffectSummary:
    """Posterior mean and equal-tailed interval of a vector of draws.

    Bounds use linear-interpolation (type-7) empirical quantiles.
    """
    draws = np.asarray(draw_vector, dtype=np.float64).reshape(-1)
    if draws.size < 2:
        raise TooFewDraws(f"need at least 2 draws, got {draws.size}")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    lo, hi = np.quantile(draws, [(1.0 - level) / 2.0, (1.0 + level) / 2.0])
    return EffectSummary(point=float(draws.mean()), lower=float(lo), upper=float(hi), level=level)


def _gamma_block(state: ChainState, p_gamma: int) -> np.ndarray:
    """Treatment-contrast coefficient block, shape (H+1, p_gamma)."""
    return state.atoms.beta[:, state.atoms.beta.shape[1] - p_gamma :]


def cate_draw(state: ChainState, profile: ProfileRows) -> float:
    """Conditional effect at one covariate profile for one retained state:
    the weight-averaged treatment contrast across components."""
    w = stick_weights(profile.psi, state.weights)
    tau_h = _gamma_block(state, profile.phi_gamma.size) @ profile.phi_gamma
    return float(w @ tau_h)


def cate_for_state(state: ChainState, maps: FeatureMaps) -> np.ndarray:
    """Conditional effects for all subjects under one state, shape (n,)."""
    w = stick_weight_matrix(maps.psi, state.weights.b)
    tau = maps.phi_gamma @ _gamma_block(state, maps.p_gamma).T
    return (w * tau).sum(axis=1)


def mate_draw(state: ChainState, maps: FeatureMaps) -> float:
    """Average of the conditional effects over the observed subjects."""
    return float(cate_for_state(state, maps).mean())


def subgroup_cate(draws: PosteriorDraws, members, level: float = 0.95) -> EffectSummary:
    """Summary of the per-draw average effect over a subject subset."""
    members = np.asarray(members)
    if members.dtype == bool:
        members = np.flatnonzero(members)
    if members.size == 0:
        raise EmptySubgroup("subgroup selects no subjects")
    return summarize(draws.cate[:, members].mean(axis=1), level=level)


def _mixture_params(draws: PosteriorDraws, profile: ProfileRows, z: float):
    """Stacked per-draw weights, means, and sds at one profile, (S, H+1) each."""
    phi = profile.phi_full(z)
    w = np.stack([stick_weights(profile.psi, st.weights) for st in draws.states])
    means = np.stack([st.atoms.beta @ phi for st in draws.states])
    sds = np.stack([np.sqrt(st.atoms.sigma_sq) for st in draws.states])
    return w, means, sds


def predictive_density(
    draws: PosteriorDraws, profile: ProfileRows, z: float, grid
) -> PredictiveDensity:
    """Per-draw predictive outcome density at a profile and treatment value."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be a 1-D strictly increasing vector")
    w, means, sds = _mixture_params(draws, profile, z)
    resid = (grid[None, None, :] - means[:, :, None]) / sds[:, :, None]
    with np.errstate(under="ignore"):
        comp = np.exp(-0.5 * resid**2) / (np.sqrt(2.0 * np.pi) * sds[:, :, None])
    dens = (w[:, :, None] * comp).sum(axis=1)
    return PredictiveDensity(grid=grid, density=dens)


def _mixture_cdf(yv: np.ndarray, w: np.ndarray, means: np.ndarray, sds: np.ndarray) -> np.ndarray:
    return (w * ndtr((yv[:, None] - means) / sds)).sum(axis=1)


def _mixture_quantiles(w, means, sds, alpha: float) -> np.ndarray:
    """Per-draw alpha-quantile of the mixture by bisection on the exact CDF."""
    mix_mean = (w * means).sum(axis=1)
    mix_sd = np.sqrt(np.maximum((w * (sds**2 + means**2)).sum(axis=1) - mix_mean**2, 0.0))
    mix_sd = np.maximum(mix_sd, 1e-12)
    lo = hi = None
    for k in _BRACKET_SDS:
        lo = mix_mean - k * mix_sd
        hi = mix_mean + k * mix_sd
        if np.all(_mixture_cdf(lo, w, means, sds) <= alpha) and np.all(
            _mixture_cdf(hi, w, means, sds) >= alpha
        ):
            break
    else:
        raise BisectionFailure(
            f"alpha={alpha}: quantile bracket not found within +-{_BRACKET_SDS[-1]} pooled sds"
        )
    for _ in range(200):
        if np.max(hi - lo) <= _QUANTILE_TOL:
            break
        mid = 0.5 * (lo + hi)
        below = _mixture_cdf(mid, w, means, sds) < alpha
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def qte(
    draws: PosteriorDraws,
    profile: ProfileRows,
    alphas: Sequence[float],
    level: float = 0.95,
) -> List[EffectSummary]:
    """Quantile treatment effects at one profile, one summary per alpha.

    For each retained draw the alpha-quantile of the treated and untreated
    mixtures is found by bisection to 1e-8 on the outcome scale; their
    difference is then summarized across draws.
    """
    alphas = [float(a) for a in np.atleast_1d(alphas)]
    if any(not 0.0 < a < 1.0 for a in alphas):
        raise ValueError("every alpha must lie in (0, 1)")
    w1, m1, s1 = _mixture_params(draws, profile, 1.0)
    w0, m0, s0 = _mixture_params(draws, profile, 0.0)
    out = []
    for a in alphas:
        q1 = _mixture_quantiles(w1, m1, s1, a)
        q0 = _mixture_quantiles(w0, m0, s0, a)
        out.append(summarize(q1 - q0, level=level))
    return out
