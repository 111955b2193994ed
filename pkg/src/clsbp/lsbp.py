"""The covariate-dependent stick-breaking mixture and its Gibbs sampler.

Mixture weights come from sequential logistic regressions on weight features
(H explicit sticks, component H+1 takes the residual stick). Each component
is a normal kernel whose mean is linear in the atom features and the
treatment contrast. A blocked Gibbs sweep updates memberships, weight
hypervariances, the logistic augmentation (binary half-signs and
Polya-Gamma weights), the stick coefficients, the global-local shrinkage
scales, and finally the component regressions.

Membership labels are 0-based here: ``u_i`` ranges over ``0 .. H`` with
component ``H`` holding the residual stick. Augmentation entries are defined
for sticks ``h <= u_i``; entries outside that support are stored as zero and
never enter any conditional.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.special import expit

from .data import FeatureMaps, ObservationSet, SamplerConfig, build_feature_maps, validate
from .distributions import sample_inverse_gamma, sample_pg1_many
from .errors import AllZeroLikelihood, ClsbpError, NegativeScale
from .linalg import cholesky_jittered, rue_draw, solve_upper

__all__ = [
    "AtomParams",
    "WeightParams",
    "ShrinkageState",
    "AugmentationState",
    "ChainState",
    "PosteriorDraws",
    "stick_weights",
    "stick_weight_matrix",
    "log_stick_weight_matrix",
    "component_mean",
    "update_memberships",
    "update_augmentation",
    "update_weight_coefficients",
    "update_atoms",
    "update_horseshoe",
    "update_weight_hyper",
    "gibbs_step",
    "run_gibbs",
    "log_likelihood",
    "initial_state",
]

_LOG_2PI = np.log(2.0 * np.pi)
# Positivity floor for variance-like draws; keeps reciprocals finite without
# measurably perturbing the stationary distribution.
_VAR_FLOOR = 1e-300


def _softplus(x: np.ndarray) -> np.ndarray:
    """log(1 + e^x), stable for large |x|."""
    with np.errstate(under="ignore"):
        return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def _weighted_grams(weights: np.ndarray, design: np.ndarray, outer=None) -> np.ndarray:
    """Per-column weighted Gram stack: out[h] = design.T @ diag(w[:, h]) @ design.

    Built as one flattened outer product and one matrix multiply so the whole
    stack is a single BLAS call; shapes (n, H) x (n, p) -> (H, p, p). Pass the
    precomputed flattened outer products when the design is fixed.
    """
    n, p = design.shape
    if outer is None:
        outer = (design[:, :, None] * design[:, None, :]).reshape(n, p * p)
    return (weights.T @ outer).reshape(weights.shape[1], p, p)


@dataclass(frozen=True)
class AtomParams:
    """Component regressions: ``beta`` rows stack the untreated-mean block and
    the treatment-contrast block; ``sigma_sq`` holds component variances."""

    beta: np.ndarray        # (H+1, p)
    sigma_sq: np.ndarray    # (H+1,)


@dataclass(frozen=True)
class WeightParams:
    """Stick-breaking logistic coefficients, one row per explicit stick."""

    b: np.ndarray           # (H, q)


@dataclass(frozen=True)
class ShrinkageState:
    """Global-local shrinkage scales for the atom coefficients (half-Cauchy
    via inverse-gamma auxiliaries) and inverse-gamma hypervariances for the
    stick coefficients."""

    xi_sq: float
    lambda_sq: np.ndarray   # (p,)
    nu_aux: np.ndarray      # (p,)
    nu_xi: float
    zeta_sq: float
    rho_sq: np.ndarray      # (q,)


@dataclass(frozen=True)
class AugmentationState:
    """Membership labels plus the logistic augmentation.

    ``eta`` and ``omega`` are ``None`` in retained snapshots: ``eta`` is a
    deterministic function of ``u`` and ``omega`` is pure augmentation noise,
    so dropping them loses nothing and bounds memory.
    """

    u: np.ndarray                      # (n,) ints in 0..H
    eta: Optional[np.ndarray] = None   # (n, H), +-1/2 on support, 0 elsewhere
    omega: Optional[np.ndarray] = None # (n, H), positive on support, 0 elsewhere


@dataclass(frozen=True)
class ChainState:
    atoms: AtomParams
    weights: WeightParams
    shrink: ShrinkageState
    aug: AugmentationState


@dataclass(frozen=True)
class PosteriorDraws:
    """Retained post-burn-in states plus derived per-subject effect draws.

    ``cate[s, i]`` is the conditional treatment effect for subject ``i``
    under retained draw ``s``. ``diagnostics`` is the mixture log-likelihood
    trace over every sweep, burn-in included.
    """

    states: List[ChainState]
    cate: np.ndarray
    diagnostics: np.ndarray
    maps: Optional[FeatureMaps] = None

    @property
    def keep(self) -> int:
        return len(self.states)


def stick_weights(psi_x: np.ndarray, weights: WeightParams) -> np.ndarray:
    """Mixture weights for one weight-feature row.

    Each stick takes a logistic share of what remains; component H takes the
    residual, so the returned vector sums to one exactly.
    """
    b = weights.b
    H = b.shape[0]
    out = np.empty(H + 1)
    remaining = 1.0
    if H:
        sig = expit(b @ np.asarray(psi_x, dtype=np.float64))
        for h in range(H):
            out[h] = sig[h] * remaining
            remaining -= out[h]
    out[H] = max(1.0 - out[:H].sum(), 0.0)
    _force_unit_sum(out)
    return out


def _force_unit_sum(out: np.ndarray) -> None:
    """Nudge one entry by single ulps until ``out.sum()`` is exactly 1.

    Entries at or below 0.5 are preferred: their ulp is no coarser than the
    float spacing at 1, so the summed value cannot step over 1 exactly.
    """
    if out.sum() == 1.0:
        return
    order = np.argsort(out)[::-1]
    candidates = [j for j in order if 0.0 < out[j] <= 0.5] + [j for j in order if out[j] > 0.5]
    for j in candidates:
        bulk = out[j] - (out.sum() - 1.0)
        if 0.0 <= bulk <= 1.0:
            out[j] = bulk
        for _ in range(80):
            diff = out.sum() - 1.0
            if diff == 0.0:
                return
            nxt = np.nextafter(out[j], -np.inf if diff > 0.0 else np.inf)
            if nxt < 0.0:
                break
            out[j] = nxt


def stick_weight_matrix(psi: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise mixture weights for all subjects, shape (n, H+1)."""
    n = psi.shape[0]
    H = b.shape[0]
    w = np.empty((n, H + 1))
    remaining = np.ones(n)
    if H:
        sig = expit(psi @ b.T)
        for h in range(H):
            w[:, h] = sig[:, h] * remaining
            remaining = remaining - w[:, h]
    w[:, H] = np.maximum(remaining, 0.0)
    return w


def log_stick_weight_matrix(psi: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Log mixture weights, stable under saturated logits."""
    n = psi.shape[0]
    H = b.shape[0]
    out = np.empty((n, H + 1))
    if H == 0:
        out[:] = 0.0
        return out
    lin = psi @ b.T
    log_sig = -_softplus(-lin)
    log_one_minus = -_softplus(lin)
    cum = np.cumsum(log_one_minus, axis=1)
    out[:, 0] = log_sig[:, 0]
    if H > 1:
        out[:, 1:H] = log_sig[:, 1:] + cum[:, :-1]
    out[:, H] = cum[:, -1]
    return out


def component_mean(atoms: AtomParams, h: int, phi_full_row: np.ndarray) -> float:
    """Kernel mean of component ``h`` at one stacked atom-feature row."""
    return float(atoms.beta[h] @ np.asarray(phi_full_row, dtype=np.float64))


def update_memberships(
    y: np.ndarray,
    phi_full: np.ndarray,
    psi: np.ndarray,
    atoms: AtomParams,
    weights: WeightParams,
    rng: np.random.Generator,
) -> np.ndarray:
    """Resample every membership label from its categorical conditional.

    Probabilities are proportional to weight times normal kernel density,
    computed in log space with max subtraction.
    """
    means = phi_full @ atoms.beta.T
    sig2 = atoms.sigma_sq
    with np.errstate(over="ignore"):
        log_norm = -0.5 * (_LOG_2PI + np.log(sig2)) - (y[:, None] - means) ** 2 / (2.0 * sig2)
    logp = log_stick_weight_matrix(psi, weights.b) + log_norm
    top = logp.max(axis=1)
    if not np.all(np.isfinite(top)):
        i = int(np.flatnonzero(~np.isfinite(top))[0])
        raise AllZeroLikelihood(f"every component underflowed for subject {i}")
    pr = np.exp(logp - top[:, None])
    cum = np.cumsum(pr, axis=1)
    r = rng.random(y.size) * cum[:, -1]
    u = (cum < r[:, None]).sum(axis=1)
    return np.minimum(u, atoms.beta.shape[0] - 1).astype(np.int64)


def update_augmentation(
    u: np.ndarray, psi: np.ndarray, weights: WeightParams, rng: np.random.Generator
):
    """Refresh the logistic augmentation given memberships.

    For sticks ``h <= u_i``: the half-sign is +1/2 exactly at ``u_i = h``
    and -1/2 past it (deterministic), and the Polya-Gamma weight is drawn at
    the stick's current linear predictor. Off-support entries are zero.
    """
    b = weights.b
    n = u.size
    H = b.shape[0]
    sticks = np.arange(H)
    support = u[:, None] >= sticks[None, :]
    eta = np.where(u[:, None] == sticks[None, :], 0.5, -0.5) * support
    omega = np.zeros((n, H))
    if H and support.any():
        lin = psi @ b.T
        omega[support] = sample_pg1_many(lin[support], rng)
    return eta, omega


def update_weight_coefficients(
    eta: np.ndarray,
    omega: np.ndarray,
    psi: np.ndarray,
    zeta_sq: float,
    rho_sq: np.ndarray,
    rng: np.random.Generator,
    psi_outer=None,
) -> np.ndarray:
    """Draw every stick's coefficient vector from its Gaussian conditional.

    An empty stick (no subject reaches it) reduces to a prior draw.
    """
    H = eta.shape[1]
    q = psi.shape[1]
    b = np.empty((H, q))
    if H == 0:
        return b
    prior_diag = 1.0 / (zeta_sq * rho_sq)
    gram = _weighted_grams(omega, psi, psi_outer)
    gram[:, np.arange(q), np.arange(q)] += prior_diag
    shift = eta.T @ psi
    for h in range(H):
        b[h] = rue_draw(gram[h], shift[h], 1.0, rng)
    return b


def update_atoms(
    u: np.ndarray,
    y: np.ndarray,
    phi_full: np.ndarray,
    shrink: ShrinkageState,
    cfg: SamplerConfig,
    rng: np.random.Generator,
    phi_outer=None,
):
    """Draw (variance, coefficients) for every component from the conjugate
    normal-inverse-gamma conditional.

    One Cholesky factorization per component serves the posterior mean, the
    scale quadratic, and the coefficient draw.
    """
    n_comp = cfg.H + 1
    p = phi_full.shape[1]
    onehot = (u[:, None] == np.arange(n_comp)[None, :]).astype(np.float64)
    gram = _weighted_grams(onehot, phi_full, phi_outer)
    prior_diag = 1.0 / (shrink.xi_sq * shrink.lambda_sq)
    gram[:, np.arange(p), np.arange(p)] += prior_diag
    sy = (onehot * y[:, None]).T @ phi_full
    ssq = np.bincount(u, weights=y * y, minlength=n_comp)
    counts = np.bincount(u, minlength=n_comp)

    beta = np.empty((n_comp, p))
    sigma_sq = np.empty(n_comp)
    for h in range(n_comp):
        r = cholesky_jittered(gram[h])
        half = solve_upper(r, sy[h], transposed=True)
        mean = solve_upper(r, half)
        quad = float(sy[h] @ mean)
        nu_h = cfg.nu0 + counts[h]
        nu_s_sq = cfg.nu0 * cfg.s0_sq + ssq[h] - quad
        if nu_s_sq <= 0.0:
            if nu_s_sq <= -1e-9:
                raise NegativeScale(
                    f"component {h}: posterior scale {nu_s_sq:g} is negative beyond round-off"
                )
            nu_s_sq = 1e-12
        # inverse-gamma(nu_h/2, nu_s_sq/2) drawn inline to keep the loop tight
        sigma_sq[h] = max(0.5 * nu_s_sq / rng.standard_gamma(0.5 * nu_h), _VAR_FLOOR)
        v = rng.standard_normal(p)
        w = solve_upper(r, v)
        beta[h] = mean + np.sqrt(sigma_sq[h]) * w
    return beta, sigma_sq


def update_horseshoe(atoms: AtomParams, shrink: ShrinkageState, rng: np.random.Generator):
    """Refresh the local and global shrinkage scales and their auxiliaries.

    Uses the inverse-gamma decomposition of the half-Cauchy: each scale and
    each auxiliary has a conjugate inverse-gamma conditional given the
    variance-standardized squared coefficients.
    """
    n_comp, p = atoms.beta.shape
    scaled_sq = (atoms.beta**2 / atoms.sigma_sq[:, None]).sum(axis=0)  # per coordinate
    lambda_sq = sample_inverse_gamma(
        0.5 * (n_comp + 1), 1.0 / shrink.nu_aux + 0.5 * scaled_sq / shrink.xi_sq, rng
    )
    lambda_sq = np.maximum(lambda_sq, _VAR_FLOOR)
    nu_aux = sample_inverse_gamma(1.0, 1.0 + 1.0 / lambda_sq, rng)
    xi_sq = sample_inverse_gamma(
        0.5 * (p * n_comp + 1), 1.0 / shrink.nu_xi + 0.5 * (scaled_sq / lambda_sq).sum(), rng
    )
    xi_sq = max(xi_sq, _VAR_FLOOR)
    nu_xi = sample_inverse_gamma(1.0, 1.0 + 1.0 / xi_sq, rng)
    return xi_sq, lambda_sq, nu_aux, nu_xi


def update_weight_hyper(
    weights: WeightParams, cfg: SamplerConfig, shrink: ShrinkageState, rng: np.random.Generator
):
    """Conjugate inverse-gamma refresh of the stick-coefficient variances."""
    b = weights.b
    H, q = b.shape
    col_sq = (b * b).sum(axis=0)
    rho_sq = sample_inverse_gamma(
        cfg.a_rho + 0.5 * H, cfg.b_rho + 0.5 * col_sq / shrink.zeta_sq, rng
    )
    rho_sq = np.maximum(np.atleast_1d(rho_sq), _VAR_FLOOR)
    zeta_sq = sample_inverse_gamma(
        cfg.a_zeta + 0.5 * q * H, cfg.b_zeta + 0.5 * (col_sq / rho_sq).sum(), rng
    )
    return max(zeta_sq, _VAR_FLOOR), rho_sq


def gibbs_step(
    state: ChainState,
    y: np.ndarray,
    maps: FeatureMaps,
    cfg: SamplerConfig,
    rng: np.random.Generator,
) -> ChainState:
    """One full sweep: memberships, weight hypervariances, augmentation and
    stick coefficients, shrinkage scales, then component regressions."""
    u = update_memberships(y, maps.phi_full, maps.psi, state.atoms, state.weights, rng)
    zeta_sq, rho_sq = update_weight_hyper(state.weights, cfg, state.shrink, rng)
    eta, omega = update_augmentation(u, maps.psi, state.weights, rng)
    b = update_weight_coefficients(
        eta, omega, maps.psi, zeta_sq, rho_sq, rng, psi_outer=maps.psi_outer
    )
    xi_sq, lambda_sq, nu_aux, nu_xi = update_horseshoe(state.atoms, state.shrink, rng)
    shrink = ShrinkageState(
        xi_sq=xi_sq, lambda_sq=lambda_sq, nu_aux=nu_aux, nu_xi=nu_xi,
        zeta_sq=zeta_sq, rho_sq=rho_sq,
    )
    beta, sigma_sq = update_atoms(u, y, maps.phi_full, shrink, cfg, rng, phi_outer=maps.phi_outer)
    return ChainState(
        atoms=AtomParams(beta=beta, sigma_sq=sigma_sq),
        weights=WeightParams(b=b),
        shrink=shrink,
        aug=AugmentationState(u=u, eta=eta, omega=omega),
    )


def log_likelihood(state: ChainState, y: np.ndarray, maps: FeatureMaps) -> float:
    """Mixture log-likelihood of the outcomes under the current state."""
    means = maps.phi_full @ state.atoms.beta.T
    sig2 = state.atoms.sigma_sq
    log_norm = -0.5 * (_LOG_2PI + np.log(sig2)) - (y[:, None] - means) ** 2 / (2.0 * sig2)
    logp = log_stick_weight_matrix(maps.psi, state.weights.b) + log_norm
    top = logp.max(axis=1)
    with np.errstate(under="ignore"):
        return float((top + np.log(np.exp(logp - top[:, None]).sum(axis=1))).sum())


def initial_state(n: int, p: int, q: int, cfg: SamplerConfig, rng: np.random.Generator) -> ChainState:
    """Neutral, reproducible start: uniform memberships, zero coefficients,
    prior-scale variances, unit shrinkage scales."""
    H = cfg.H
    return ChainState(
        atoms=AtomParams(beta=np.zeros((H + 1, p)), sigma_sq=np.full(H + 1, cfg.s0_sq)),
        weights=WeightParams(b=np.zeros((H, q))),
        shrink=ShrinkageState(
            xi_sq=1.0,
            lambda_sq=np.ones(p),
            nu_aux=np.ones(p),
            nu_xi=1.0,
            zeta_sq=1.0,
            rho_sq=np.ones(q),
        ),
        aug=AugmentationState(u=rng.integers(0, H + 1, size=n), eta=np.zeros((n, H)), omega=np.zeros((n, H))),
    )


def _destandardized_snapshot(state: ChainState, mu_y: float, sd_y: float) -> ChainState:
    """Map a chain state from the standardized outcome back to the raw scale.

    Component means transform as m + sd * mean, so every coefficient scales
    by sd and the baseline intercept absorbs the location; the treatment
    block is a difference and only scales. Variances scale by sd^2. Shrinkage
    scales stay on the standardized scale (they are relative to sigma).
    """
    beta = state.atoms.beta * sd_y
    beta[:, 0] += mu_y
    return ChainState(
        atoms=AtomParams(beta=beta, sigma_sq=state.atoms.sigma_sq * sd_y * sd_y),
        weights=state.weights,
        shrink=state.shrink,
        aug=AugmentationState(u=state.aug.u, eta=None, omega=None),
    )


def run_gibbs(
    obs: ObservationSet, cfg: SamplerConfig, rng: Optional[np.random.Generator] = None
) -> PosteriorDraws:
    """Run the full chain and retain every ``thin``-th post-burn-in state.

    With ``cfg.standardize_outcome`` the chain itself runs on the centered,
    unit-variance outcome; retained states, effect draws, and the trace are
    all mapped back to the raw outcome scale.

    Returns the retained snapshots (augmentation matrices dropped), the
    per-draw per-subject treatment effect matrix, and the log-likelihood
    trace over all sweeps. A chain abort reports the failing sweep index.
    """
    from .estimands import cate_for_state  # local import; estimands builds on this module

    validate(obs)
    maps = build_feature_maps(obs, cfg)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    if cfg.standardize_outcome:
        mu_y = float(obs.y.mean())
        sd_y = float(obs.y.std())
        if sd_y == 0.0:
            sd_y = 1.0
    else:
        mu_y, sd_y = 0.0, 1.0
    y = (obs.y - mu_y) / sd_y
    state = initial_state(obs.n, maps.p, maps.q, cfg, rng)
    total = cfg.burn_in + cfg.keep * cfg.thin
    trace = np.empty(total)
    states: List[ChainState] = []
    cate = np.empty((cfg.keep, obs.n))
    kept = 0
    log_jacobian = obs.n * np.log(sd_y)
    for it in range(total):
        try:
            state = gibbs_step(state, y, maps, cfg, rng)
        except ClsbpError as exc:
            raise type(exc)(f"chain aborted at sweep {it}: {exc}") from exc
        trace[it] = log_likelihood(state, y, maps) - log_jacobian
        if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thin == cfg.thin - 1:
            snapshot = _destandardized_snapshot(state, mu_y, sd_y)
            states.append(snapshot)
            cate[kept] = cate_for_state(snapshot, maps)
            kept += 1
    return PosteriorDraws(states=states, cate=cate, diagnostics=trace, maps=maps)
