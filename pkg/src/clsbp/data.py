"""Data model, configuration, and feature-map construction.

An :class:`ObservationSet` holds outcomes, binary treatments, confounders,
and an optional propensity column. :func:`build_feature_maps` turns it into
the three design matrices the mixture model consumes: atom features for the
untreated mean, atom features for the treatment contrast, and weight
features for the stick-breaking logits. All three follow the linear-identity
choice (intercept, covariates, optional propensity score).

All types here are immutable after construction; arrays are frozen.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from .errors import (
    EmptyData,
    MissingPropensity,
    NonBinaryTreatment,
    NonFiniteValue,
    PropensityOutOfRange,
)

__all__ = [
    "ObservationSet",
    "SamplerConfig",
    "FeatureTransform",
    "FeatureMaps",
    "ProfileRows",
    "validate",
    "build_feature_maps",
    "load_observations",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ObservationSet:
    """Outcomes ``y``, treatments ``z`` in {0, 1}, confounders ``x`` (n x d),
    and optionally an estimated propensity score per subject."""

    y: np.ndarray
    z: np.ndarray
    x: np.ndarray
    pi_hat: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        y = _frozen(np.asarray(self.y, dtype=np.float64).reshape(-1))
        z = _frozen(np.asarray(self.z, dtype=np.float64).reshape(-1))
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        x = _frozen(x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "x", x)
        if self.pi_hat is not None:
            ph = _frozen(np.asarray(self.pi_hat, dtype=np.float64).reshape(-1))
            object.__setattr__(self, "pi_hat", ph)
        n = y.size
        if z.size != n or x.shape[0] != n or (self.pi_hat is not None and self.pi_hat.size != n):
            raise ValueError("y, z, x (and pi_hat, if given) must share the subject dimension")

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def d(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class SamplerConfig:
    """Sampler and prior settings.

    ``H`` explicit sticks give ``H + 1`` mixture components. ``nu0`` and
    ``s0_sq`` parameterize the inverse-gamma prior on component variances;
    with ``standardize_outcome`` on (the default) the chain runs on the
    centered, unit-variance outcome, so they are interpreted on that scale
    and everything returned is mapped back to the raw outcome scale. The
    four ``a_*``/``b_*`` values are inverse-gamma hyperprior shapes/scales
    for the weight-coefficient variances.
    """

    H: int = 20
    nu0: float = 10.0
    s0_sq: float = 0.2
    a_rho: float = 2.0
    b_rho: float = 2.0
    a_zeta: float = 2.0
    b_zeta: float = 2.0
    burn_in: int = 4000
    keep: int = 4000
    thin: int = 1
    seed: int = 0
    include_pscore_in_atoms: bool = False
    include_pscore_in_weights: bool = False
    standardize: bool = True
    standardize_outcome: bool = True

    def __post_init__(self) -> None:
        if self.H < 0:
            raise ValueError("H must be >= 0")
        if self.keep < 1:
            raise ValueError("keep must be >= 1")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        for name in ("nu0", "s0_sq", "a_rho", "b_rho", "a_zeta", "b_zeta"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def validate(obs: ObservationSet) -> None:
    """Check every ObservationSet invariant; raise a named error otherwise."""
    if obs.n < 1:
        raise EmptyData("no subjects")
    if obs.d < 1:
        raise EmptyData("no covariate columns")
    if not np.all(np.isfinite(obs.y)):
        i = int(np.flatnonzero(~np.isfinite(obs.y))[0])
        raise NonFiniteValue(f"y is not finite at row {i}")
    if not np.all(np.isfinite(obs.x)):
        i, j = np.argwhere(~np.isfinite(obs.x))[0]
        raise NonFiniteValue(f"x is not finite at row {int(i)}, column {int(j)}")
    bad = (obs.z != 0.0) & (obs.z != 1.0)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise NonBinaryTreatment(f"z must be 0 or 1; row {i} has {obs.z[i]!r}")
    if obs.pi_hat is not None:
        if not np.all(np.isfinite(obs.pi_hat)):
            i = int(np.flatnonzero(~np.isfinite(obs.pi_hat))[0])
            raise NonFiniteValue(f"pi_hat is not finite at row {i}")
        out = (obs.pi_hat <= 0.0) | (obs.pi_hat >= 1.0)
        if np.any(out):
            i = int(np.flatnonzero(out)[0])
            raise PropensityOutOfRange(
                f"pi_hat must lie strictly inside (0, 1); row {i} has {obs.pi_hat[i]!r}"
            )


@dataclass(frozen=True)
class ProfileRows:
    """Feature rows for a single covariate profile."""

    phi_beta: np.ndarray
    phi_gamma: np.ndarray
    psi: np.ndarray

    def phi_full(self, z: float) -> np.ndarray:
        """Stacked atom-feature row (phi_beta, z * phi_gamma)."""
        return np.concatenate([self.phi_beta, z * self.phi_gamma])


@dataclass(frozen=True)
class FeatureTransform:
    """Per-column affine standardization plus the propensity-inclusion flags.

    ``shift``/``scale`` apply columnwise as ``(x - shift) / scale``; columns
    left untouched carry shift 0 and scale 1. The transform is all that is
    needed to map a new covariate profile onto feature rows, so it is what
    gets persisted with fitted draws.
    """

    shift: np.ndarray
    scale: np.ndarray
    pscore_in_atoms: bool = False
    pscore_in_weights: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "shift", _frozen(np.asarray(self.shift, dtype=np.float64)))
        object.__setattr__(self, "scale", _frozen(np.asarray(self.scale, dtype=np.float64)))
        if np.any(self.scale == 0):
            raise ValueError("scale entries must be nonzero")

    @property
    def d(self) -> int:
        return self.shift.size

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.shift) / self.scale

    def invert(self, x_std: np.ndarray) -> np.ndarray:
        return x_std * self.scale + self.shift

    def profile_rows(self, x_row, pi_hat: Optional[float] = None) -> ProfileRows:
        """Feature rows for one raw covariate profile (length-d vector)."""
        x_row = np.asarray(x_row, dtype=np.float64).reshape(-1)
        if x_row.size != self.d:
            raise ValueError(f"profile has {x_row.size} covariates, expected {self.d}")
        xs = self.apply(x_row)
        base = np.concatenate([[1.0], xs])
        if (self.pscore_in_atoms or self.pscore_in_weights) and pi_hat is None:
            raise MissingPropensity("this model was fit with a propensity feature; supply pi_hat")
        atom = base if not self.pscore_in_atoms else np.concatenate([base, [float(pi_hat)]])
        weight = base if not self.pscore_in_weights else np.concatenate([base, [float(pi_hat)]])
        return ProfileRows(phi_beta=atom, phi_gamma=atom.copy(), psi=weight)


@dataclass(frozen=True)
class FeatureMaps:
    """Design matrices for all n subjects plus the transform that built them.

    ``phi_full`` row i is the concatenation of the ``phi_beta`` row and the
    ``z_i``-scaled ``phi_gamma`` row; the first column of each of
    ``phi_beta``, ``phi_gamma``, ``psi`` is the constant intercept.
    """

    phi_beta: np.ndarray
    phi_gamma: np.ndarray
    psi: np.ndarray
    phi_full: np.ndarray
    transform: FeatureTransform

    def __post_init__(self) -> None:
        for name in ("phi_beta", "phi_gamma", "psi", "phi_full"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def n(self) -> int:
        return self.phi_full.shape[0]

    @property
    def p_beta(self) -> int:
        return self.phi_beta.shape[1]

    @property
    def p_gamma(self) -> int:
        return self.phi_gamma.shape[1]

    @property
    def p(self) -> int:
        return self.phi_full.shape[1]

    @property
    def q(self) -> int:
        return self.psi.shape[1]

    @cached_property
    def phi_outer(self) -> np.ndarray:
        """Row-wise outer products of ``phi_full``, flattened to (n, p*p).

        Constant across Gibbs sweeps, so cached; lets weighted Gram stacks be
        a single matrix multiply.
        """
        p = self.p
        return (self.phi_full[:, :, None] * self.phi_full[:, None, :]).reshape(self.n, p * p)

    @cached_property
    def psi_outer(self) -> np.ndarray:
        """Row-wise outer products of ``psi``, flattened to (n, q*q)."""
        q = self.q
        return (self.psi[:, :, None] * self.psi[:, None, :]).reshape(self.n, q * q)

    def profile_rows(self, x_row, pi_hat: Optional[float] = None) -> ProfileRows:
        return self.transform.profile_rows(x_row, pi_hat)


def _standardize_transform(x: np.ndarray, enabled: bool, atoms: bool, weights: bool) -> FeatureTransform:
    d = x.shape[1]
    shift = np.zeros(d)
    scale = np.ones(d)
    if enabled:
        for j in range(d):
            col = x[:, j]
            # Binary/constant columns are already on a bounded scale; only
            # columns with more than two distinct values get rescaled.
            if np.unique(col).size > 2:
                sd = col.std()
                if sd > 0:
                    shift[j] = col.mean()
                    scale[j] = sd
    return FeatureTransform(shift=shift, scale=scale, pscore_in_atoms=atoms, pscore_in_weights=weights)


def build_feature_maps(obs: ObservationSet, cfg: SamplerConfig) -> FeatureMaps:
    """Build the three design matrices from validated observations.

    Atom and weight maps are (1, X, [pi_hat]) with the propensity column
    appended only where the corresponding config flag is set. Continuous
    covariate columns are standardized when ``cfg.standardize`` is on; the
    intercept and the propensity column are never touched.

    Raises
    ------
    MissingPropensity
        If a flag demands ``pi_hat`` and the observations carry none.
    """
    need_pscore = cfg.include_pscore_in_atoms or cfg.include_pscore_in_weights
    if need_pscore and obs.pi_hat is None:
        raise MissingPropensity(
            "include_pscore flags are set but the observations have no pi_hat column"
        )
    tr = _standardize_transform(
        obs.x, cfg.standardize, cfg.include_pscore_in_atoms, cfg.include_pscore_in_weights
    )
    xs = tr.apply(obs.x)
    base = np.column_stack([np.ones(obs.n), xs])
    if cfg.include_pscore_in_atoms:
        atom = np.column_stack([base, obs.pi_hat])
    else:
        atom = base
    if cfg.include_pscore_in_weights:
        weight = np.column_stack([base, obs.pi_hat])
    else:
        weight = base
    phi_full = np.column_stack([atom, obs.z[:, None] * atom])
    return FeatureMaps(
        phi_beta=atom, phi_gamma=atom.copy(), psi=weight, phi_full=phi_full, transform=tr
    )


_X_COL = re.compile(r"^x([1-9][0-9]*)$")


def load_observations(path) -> ObservationSet:
    """Read an ObservationSet from CSV.

    Expected header: ``y``, ``z``, ``x1`` .. ``xd`` (contiguous from 1), and
    optionally ``pihat``. Unknown columns are ignored so files carrying
    simulation ground truth load directly. UTF-8, comma-separated, ``.``
    decimal.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise EmptyData(f"{path}: no header row")
        names = [f.strip() for f in reader.fieldnames]
        x_idx = sorted(int(m.group(1)) for f in names if (m := _X_COL.match(f)))
        if "y" not in names or "z" not in names:
            raise EmptyData(f"{path}: header must contain 'y' and 'z' columns")
        if not x_idx:
            raise EmptyData(f"{path}: no covariate columns x1..xd found")
        if x_idx != list(range(1, len(x_idx) + 1)):
            raise EmptyData(f"{path}: covariate columns must be x1..x{len(x_idx)} without gaps")
        has_pihat = "pihat" in names
        y, z, pihat = [], [], []
        xcols = [f"x{j}" for j in x_idx]
        xs = []
        for row in reader:
            y.append(float(row["y"]))
            z.append(float(row["z"]))
            xs.append([float(row[c]) for c in xcols])
            if has_pihat:
                pihat.append(float(row["pihat"]))
    if not y:
        raise EmptyData(f"{path}: no data rows")
    return ObservationSet(
        y=np.array(y),
        z=np.array(z),
        x=np.array(xs),
        pi_hat=np.array(pihat) if has_pihat else None,
    )
