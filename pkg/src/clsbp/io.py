"""Persistence formats for fitted draws and result tables.

A fit writes into its output directory:

- ``draws/diagnostics.csv``: one row per retained draw (draw index, sweep
  index, mixture log-likelihood, number of occupied components).
- ``draws/cate.csv``: the draws-by-subjects conditional-effect matrix, or
  ``draws/cate.bin`` when binary output is requested: a 16-byte magic header
  ``CLSBPDRAWSv1\\0\\0\\0\\0``, two little-endian uint64 giving rows and
  columns, then the matrix as little-endian float64, row-major.
- ``draws/params.npz``: per-draw component coefficients, variances, stick
  coefficients, and membership labels, enough to recompute any estimand.
- ``manifest.json``: seed, resolved configuration, feature transform, and
  environment versions; every command is reproducible from it.

Floats in CSVs are written with ``repr``, so identical doubles give
byte-identical files.
"""

from __future__ import annotations

import csv
import json
import struct
import sys
from dataclasses import asdict
from pathlib import Path
from typing import List, Optional

import numpy as np

from .data import FeatureTransform, SamplerConfig
from .errors import DrawsNotFound
from .lsbp import (
    AtomParams,
    AugmentationState,
    ChainState,
    PosteriorDraws,
    ShrinkageState,
    WeightParams,
)

__all__ = [
    "MAGIC",
    "write_cate_binary",
    "read_cate_binary",
    "save_draws",
    "load_draws",
    "write_manifest",
    "read_manifest",
    "fmt",
]

MAGIC = b"CLSBPDRAWSv1\x00\x00\x00\x00"


def fmt(x) -> str:
    """Shortest round-trip decimal form of a float; deterministic per value."""
    return repr(float(x))


def write_cate_binary(path, cate: np.ndarray) -> None:
    cate = np.ascontiguousarray(cate, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<QQ", cate.shape[0], cate.shape[1]))
        fh.write(cate.tobytes(order="C"))


def read_cate_binary(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(16)
        if magic != MAGIC:
            raise DrawsNotFound(f"{path}: bad magic header")
        rows, cols = struct.unpack("<QQ", fh.read(16))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != rows * cols:
        raise DrawsNotFound(f"{path}: truncated payload")
    return data.reshape(rows, cols).astype(np.float64)


def save_draws(outdir, draws: PosteriorDraws, cfg: SamplerConfig, binary_cate: bool = False) -> None:
    """Write diagnostics, the effect matrix, and per-draw parameters."""
    ddir = Path(outdir) / "draws"
    ddir.mkdir(parents=True, exist_ok=True)

    states = draws.states
    with open(ddir / "diagnostics.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["draw", "sweep", "log_likelihood", "occupied_components"])
        for s, st in enumerate(states):
            sweep = cfg.burn_in + (s + 1) * cfg.thin - 1
            writer.writerow(
                [s, sweep, fmt(draws.diagnostics[sweep]), int(np.unique(st.aug.u).size)]
            )

    if binary_cate:
        write_cate_binary(ddir / "cate.bin", draws.cate)
    else:
        n = draws.cate.shape[1]
        with open(ddir / "cate.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"cate_{i + 1}" for i in range(n)])
            for row in draws.cate:
                writer.writerow([fmt(v) for v in row])

    np.savez_compressed(
        ddir / "params.npz",
        beta=np.stack([st.atoms.beta for st in states]),
        sigma_sq=np.stack([st.atoms.sigma_sq for st in states]),
        b=np.stack([st.weights.b for st in states]),
        u=np.stack([st.aug.u for st in states]),
        cate=draws.cate,
        loglik=draws.diagnostics,
    )


def load_draws(outdir) -> PosteriorDraws:
    """Rebuild posterior draws from a fit's output directory.

    Retained states come back with atom, weight, and membership content;
    shrinkage scales and augmentation matrices are not persisted (no
    estimand needs them), so those fields hold placeholders.
    """
    ddir = Path(outdir) / "draws"
    npz_path = ddir / "params.npz"
    if not npz_path.exists():
        raise DrawsNotFound(f"no draws found under {outdir} (missing {npz_path})")
    with np.load(npz_path) as payload:
        beta = payload["beta"]
        sigma_sq = payload["sigma_sq"]
        b = payload["b"]
        u = payload["u"]
        cate = payload["cate"]
        loglik = payload["loglik"]
    p = beta.shape[2]
    q = b.shape[2]
    placeholder = ShrinkageState(
        xi_sq=1.0, lambda_sq=np.ones(p), nu_aux=np.ones(p), nu_xi=1.0,
        zeta_sq=1.0, rho_sq=np.ones(q),
    )
    states: List[ChainState] = [
        ChainState(
            atoms=AtomParams(beta=beta[s], sigma_sq=sigma_sq[s]),
            weights=WeightParams(b=b[s]),
            shrink=placeholder,
            aug=AugmentationState(u=u[s], eta=None, omega=None),
        )
        for s in range(beta.shape[0])
    ]
    return PosteriorDraws(states=states, cate=cate, diagnostics=loglik, maps=None)


def _transform_to_dict(tr: FeatureTransform) -> dict:
    return {
        "shift": [float(v) for v in tr.shift],
        "scale": [float(v) for v in tr.scale],
        "pscore_in_atoms": tr.pscore_in_atoms,
        "pscore_in_weights": tr.pscore_in_weights,
    }


def transform_from_dict(d: dict) -> FeatureTransform:
    return FeatureTransform(
        shift=np.array(d["shift"], dtype=np.float64),
        scale=np.array(d["scale"], dtype=np.float64),
        pscore_in_atoms=bool(d["pscore_in_atoms"]),
        pscore_in_weights=bool(d["pscore_in_weights"]),
    )


def write_manifest(
    outdir,
    command: str,
    cfg: Optional[SamplerConfig] = None,
    transform: Optional[FeatureTransform] = None,
    **extra,
) -> dict:
    import clsbp
    import scipy

    manifest = {
        "command": command,
        "versions": {
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "clsbp": clsbp.__version__,
        },
    }
    if cfg is not None:
        manifest["config"] = asdict(cfg)
        manifest["seed"] = cfg.seed
    if transform is not None:
        manifest["transform"] = _transform_to_dict(transform)
    manifest.update(extra)
    path = Path(outdir) / "manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def read_manifest(outdir) -> dict:
    path = Path(outdir) / "manifest.json"
    if not path.exists():
        raise DrawsNotFound(f"missing manifest: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
