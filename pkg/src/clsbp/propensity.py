"""Built-in propensity-score estimation via ridge-stabilized logistic IRLS.

Keeps the pipeline self-contained; externally estimated scores can always be
supplied through the observation set's ``pi_hat`` column instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import SeparationDetected, SingleArm

__all__ = ["LogisticModel", "fit_logistic", "predict_propensity"]

_RIDGE = 1e-6
_DIVERGENCE_NORM = 1e3
_CLIP = 1e-6


@dataclass(frozen=True)
class LogisticModel:
    """Fitted coefficients on the raw covariate scale: intercept first."""

    coef: np.ndarray
    converged: bool
    iterations: int


def fit_logistic(x: np.ndarray, z: np.ndarray, max_iter: int = 100, tol: float = 1e-8) -> LogisticModel:
    """Maximize the logistic log-likelihood by iteratively reweighted least
    squares with a 1e-6 ridge on the slopes.

    Covariates are standardized internally for conditioning; returned
    coefficients are mapped back to the raw scale. Convergence means the
    largest coefficient change fell below ``tol``.

    Raises
    ------
    SingleArm
        If the treatment indicator is constant.
    SeparationDetected
        If the (standardized-scale) coefficient norm exceeds 1e3.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    z = np.asarray(z, dtype=np.float64).reshape(-1)
    n, d = x.shape
    if n <= d + 1:
        raise ValueError(f"need more than d+1 = {d + 1} observations, got {n}")
    if np.all(z == z[0]):
        raise SingleArm("treatment indicator is constant; cannot fit a propensity model")

    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    design = np.column_stack([np.ones(n), (x - mu) / sd])
    ridge = np.full(d + 1, _RIDGE)
    ridge[0] = 0.0

    coef = np.zeros(d + 1)
    zbar = z.mean()
    coef[0] = np.log(zbar / (1.0 - zbar))
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        p = expit(design @ coef)
        wgt = np.maximum(p * (1.0 - p), 1e-10)
        grad = design.T @ (z - p) - ridge * coef
        hess = design.T @ (wgt[:, None] * design)
        hess[np.arange(d + 1), np.arange(d + 1)] += ridge
        step = np.linalg.solve(hess, grad)
        coef = coef + step
        if np.linalg.norm(coef) > _DIVERGENCE_NORM:
            raise SeparationDetected(
                f"coefficient norm exceeded {_DIVERGENCE_NORM:g} at iteration {iterations}"
            )
        if np.max(np.abs(step)) < tol:
            converged = True
            break

    slopes = coef[1:] / sd
    intercept = coef[0] - float(slopes @ mu)
    return LogisticModel(
        coef=np.concatenate([[intercept], slopes]), converged=converged, iterations=iterations
    )


def predict_propensity(model: LogisticModel, x: np.ndarray) -> np.ndarray:
    """Predicted treatment probabilities, clipped into [1e-6, 1 - 1e-6]."""
    if not model.converged:
        raise ValueError("model did not converge; refusing to predict")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    lin = model.coef[0] + x @ model.coef[1:]
    return np.clip(expit(lin), _CLIP, 1.0 - _CLIP)
