"""Command-line entry point.

Four subcommands: ``fit`` runs the sampler on a CSV and persists draws and
effect summaries; ``estimate`` computes quantile effects and predictive
densities from persisted draws; ``simulate`` writes one benchmark dataset
with its ground truth; ``benchmark`` runs replicated scenario grids and
writes the metrics table.

Exit codes: 0 success, 2 validation problem, 3 numerical failure, 4 I/O or
missing-artifact problem. Flags override a JSON config file (``--config``);
the ``CLSBP_SEED`` environment variable is the seed fallback.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .data import SamplerConfig, load_observations
from .errors import ClsbpError, DrawsNotFound, NumericalError, ValidationError
from .estimands import predictive_density, qte, subgroup_cate, summarize
from .io import (
    fmt,
    load_draws,
    read_manifest,
    save_draws,
    transform_from_dict,
    write_manifest,
)
from .lsbp import run_gibbs, stick_weights
from .propensity import fit_logistic, predict_propensity
from .simulate import ScenarioSpec, run_replications

_SAMPLER_KEYS = (
    "sticks", "nu0", "s0sq", "burnin", "keep", "thin", "seed",
    "fit_propensity", "pscore_in_atoms", "pscore_in_weights", "standardize",
)


def _add_sampler_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--sticks", type=int, default=None, help="explicit sticks H (H+1 components)")
    p.add_argument("--nu0", type=float, default=None, help="variance prior degrees of freedom")
    p.add_argument("--s0sq", type=float, default=None, help="variance prior scale")
    p.add_argument("--burnin", type=int, default=None, help="burn-in sweeps")
    p.add_argument("--keep", type=int, default=None, help="retained draws")
    p.add_argument("--thin", type=int, default=None, help="thinning interval")
    p.add_argument("--seed", type=int, default=None, help="random seed")
    p.add_argument("--fit-propensity", action=argparse.BooleanOptionalAction, default=None,
                   help="fit a logistic propensity model when no pihat column is present")
    p.add_argument("--pscore-in-atoms", action=argparse.BooleanOptionalAction, default=None,
                   help="include the propensity score in the atom features")
    p.add_argument("--pscore-in-weights", action=argparse.BooleanOptionalAction, default=None,
                   help="include the propensity score in the weight features")
    p.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=None,
                   help="standardize continuous covariates (default on)")
    p.add_argument("--standardize-outcome", action=argparse.BooleanOptionalAction, default=None,
                   help="run the chain on the centered unit-variance outcome (default on)")
    p.add_argument("--config", type=str, default=None, help="JSON config file; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clsbp", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit the mixture model on a CSV")
    fit.add_argument("--input", required=True, help="CSV with columns y, z, x1..xd[, pihat]")
    fit.add_argument("--outdir", required=True)
    fit.add_argument("--level", type=float, default=None, help="credible level (default 0.95)")
    fit.add_argument("--subgroup-col", type=str, default=None,
                     help="covariate column (e.g. x3) whose levels define subgroups")
    fit.add_argument("--binary-draws", action="store_true",
                     help="write the effect matrix as compact binary instead of CSV")
    _add_sampler_flags(fit)

    est = sub.add_parser("estimate", help="quantile effects and predictive densities from draws")
    est.add_argument("--input", required=True, help="output directory of a previous fit")
    est.add_argument("--outdir", required=True)
    est.add_argument("--level", type=float, default=None)
    est.add_argument("--qte-alphas", type=str, default="0.1,0.3,0.5,0.7,0.9",
                     help="comma-separated quantile levels in (0,1)")
    est.add_argument("--profile", type=str, required=True,
                     help="comma-separated raw covariate values x1..xd")
    est.add_argument("--profile-pihat", type=float, default=None,
                     help="propensity value for the profile (required if the fit used one)")
    est.add_argument("--z-values", type=str, default="0,1")
    est.add_argument("--grid", type=str, default=None,
                     help="outcome grid lo:hi:num (default: span all components +-6 sd)")
    est.add_argument("--config", type=str, default=None)

    simp = sub.add_parser("simulate", help="write one simulated dataset with ground truth")
    simp.add_argument("--outdir", required=True)
    simp.add_argument("--scenario", required=True,
                      help="sim1:t=<v> or sim2:mu=<linear|nonlinear>:tau=<homogeneous|heterogeneous>")
    simp.add_argument("--n", type=int, default=None, help="sample size (default 500/250)")
    simp.add_argument("--seed", type=int, default=None)
    simp.add_argument("--config", type=str, default=None)

    bench = sub.add_parser("benchmark", help="replicated scenario grid -> metrics.csv")
    bench.add_argument("--outdir", required=True)
    bench.add_argument("--scenario", action="append", required=True,
                       help="repeatable; sim1:t=<v>[:pscore=on|off][:n=<n>] or "
                            "sim2:mu=..:tau=..[:pscore=..][:n=..]")
    bench.add_argument("--reps", type=int, default=None, help="replications per scenario")
    bench.add_argument("--jobs", type=int, default=None, help="parallel worker processes")
    bench.add_argument("--level", type=float, default=None)
    _add_sampler_flags(bench)
    return parser


def _load_config_file(path):
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _resolve(args, file_cfg: dict, key: str, default):
    v = getattr(args, key, None)
    if v is None:
        v = file_cfg.get(key)
    return default if v is None else v


def _resolve_seed(args, file_cfg: dict) -> int:
    v = getattr(args, "seed", None)
    if v is None:
        v = file_cfg.get("seed")
    if v is None:
        env = os.environ.get("CLSBP_SEED")
        v = int(env) if env else 0
    return int(v)


def _sampler_config(args, file_cfg: dict) -> SamplerConfig:
    return SamplerConfig(
        H=int(_resolve(args, file_cfg, "sticks", 20)),
        nu0=float(_resolve(args, file_cfg, "nu0", 10.0)),
        s0_sq=float(_resolve(args, file_cfg, "s0sq", 0.2)),
        burn_in=int(_resolve(args, file_cfg, "burnin", 4000)),
        keep=int(_resolve(args, file_cfg, "keep", 4000)),
        thin=int(_resolve(args, file_cfg, "thin", 1)),
        seed=_resolve_seed(args, file_cfg),
        include_pscore_in_atoms=bool(_resolve(args, file_cfg, "pscore_in_atoms", False)),
        include_pscore_in_weights=bool(_resolve(args, file_cfg, "pscore_in_weights", False)),
        standardize=bool(_resolve(args, file_cfg, "standardize", True)),
        standardize_outcome=bool(_resolve(args, file_cfg, "standardize_outcome", True)),
    )


def _parse_scenario(text: str, n_override=None) -> ScenarioSpec:
    parts = text.split(":")
    kind = parts[0]
    kv = {}
    for part in parts[1:]:
        key, _, value = part.partition("=")
        if not value:
            raise ValidationError(f"bad scenario fragment {part!r} in {text!r}")
        kv[key] = value
    use_pscore = kv.pop("pscore", "on") in ("on", "with", "true", "1")
    n = int(kv.pop("n", 0)) or (n_override or 0)
    if kind == "sim1":
        spec = ScenarioSpec(kind="sim1", n=n or 500, t=float(kv.pop("t", 0.0)),
                            use_pscore=use_pscore)
    elif kind == "sim2":
        spec = ScenarioSpec(kind="sim2", n=n or 250, mu_type=kv.pop("mu", "linear"),
                            tau_type=kv.pop("tau", "homogeneous"), use_pscore=use_pscore)
    else:
        raise ValidationError(f"unknown scenario kind {kind!r}")
    if kv:
        raise ValidationError(f"unrecognized scenario keys {sorted(kv)} in {text!r}")
    return spec


def _check_invariants(draws) -> bool:
    ok = bool(np.all(np.isfinite(draws.cate)))
    for st in draws.states[:: max(len(draws.states) // 16, 1)]:
        ok = ok and bool(np.all(st.atoms.sigma_sq > 0))
        w = stick_weights(draws.maps.psi[0], st.weights)
        ok = ok and abs(float(w.sum()) - 1.0) < 1e-12 and bool(np.all(w >= 0))
    return ok


def cmd_fit(args) -> int:
    file_cfg = _load_config_file(args.config)
    cfg = _sampler_config(args, file_cfg)
    level = float(_resolve(args, file_cfg, "level", 0.95))
    obs = load_observations(args.input)
    fitted_propensity = False
    if bool(_resolve(args, file_cfg, "fit_propensity", False)) and obs.pi_hat is None:
        model = fit_logistic(obs.x, obs.z)
        obs = replace(obs, pi_hat=predict_propensity(model, obs.x))
        fitted_propensity = True

    started = time.perf_counter()
    draws = run_gibbs(obs, cfg)
    wall = time.perf_counter() - started

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    save_draws(outdir, draws, cfg, binary_cate=args.binary_draws)

    rows = [("ATE", "all", summarize(draws.cate.mean(axis=1), level=level))]
    if args.subgroup_col:
        col = args.subgroup_col
        if not col.startswith("x") or not col[1:].isdigit() or not 1 <= int(col[1:]) <= obs.d:
            raise ValidationError(f"subgroup column {col!r} not among x1..x{obs.d}")
        values = obs.x[:, int(col[1:]) - 1]
        for value in np.unique(values):
            members = np.flatnonzero(values == value)
            rows.append((f"CATE", f"{col}={value:g}", subgroup_cate(draws, members, level=level)))
    with open(outdir / "estimates.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["estimand", "group", "point", "lower", "upper", "level"])
        for estimand, group, es in rows:
            writer.writerow([estimand, group, fmt(es.point), fmt(es.lower), fmt(es.upper), fmt(es.level)])
    with open(outdir / "estimates.json", "w", encoding="utf-8") as fh:
        json.dump(
            [
                {"estimand": estimand, "group": group, "point": es.point,
                 "lower": es.lower, "upper": es.upper, "level": es.level}
                for estimand, group, es in rows
            ],
            fh, indent=2,
        )
        fh.write("\n")

    write_manifest(
        outdir, "fit", cfg=cfg, transform=draws.maps.transform,
        input=str(args.input), n=obs.n, d=obs.d, level=level,
        fitted_propensity=fitted_propensity, binary_draws=bool(args.binary_draws),
        subgroup_col=args.subgroup_col, wall_time_s=wall,
        invariants_ok=_check_invariants(draws),
    )
    print(f"fit: {obs.n} subjects, {cfg.keep} retained draws -> {outdir}")
    return 0


def _default_grid(states, profile, z_values, num=512):
    lo, hi = np.inf, -np.inf
    for z in z_values:
        phi = profile.phi_full(z)
        for st in states:
            means = st.atoms.beta @ phi
            sd = np.sqrt(st.atoms.sigma_sq)
            lo = min(lo, float((means - 6.0 * sd).min()))
            hi = max(hi, float((means + 6.0 * sd).max()))
    return np.linspace(lo, hi, num)


def cmd_estimate(args) -> int:
    file_cfg = _load_config_file(args.config)
    level = float(_resolve(args, file_cfg, "level", 0.95))
    indir = Path(args.input)
    draws = load_draws(indir)
    manifest = read_manifest(indir)
    transform = transform_from_dict(manifest["transform"])

    x_row = np.array([float(v) for v in args.profile.split(",")])
    profile = transform.profile_rows(x_row, args.profile_pihat)
    alphas = [float(a) for a in args.qte_alphas.split(",")]
    if any(not 0.0 < a < 1.0 for a in alphas):
        raise ValidationError("--qte-alphas must lie strictly inside (0, 1)")
    z_values = [float(v) for v in args.z_values.split(",")]

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    results = qte(draws, profile, alphas, level=level)
    with open(outdir / "qte.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["alpha", "point", "lower", "upper"])
        for a, es in zip(alphas, results):
            writer.writerow([fmt(a), fmt(es.point), fmt(es.lower), fmt(es.upper)])

    if args.grid:
        lo, hi, num = args.grid.split(":")
        grid = np.linspace(float(lo), float(hi), int(num))
    else:
        grid = _default_grid(draws.states, profile, z_values)
    integral_checks = {}
    with open(outdir / "predictive.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["z", "y", "mean", "lower", "upper"])
        for z in z_values:
            dens = predictive_density(draws, profile, z, grid)
            mean_curve = dens.mean_curve()
            lo_band, hi_band = dens.bands(level)
            for g, m, l, u in zip(grid, mean_curve, lo_band, hi_band):
                writer.writerow([fmt(z), fmt(g), fmt(m), fmt(l), fmt(u)])
            integral_checks[f"z={z:g}"] = float(np.mean(dens.integrals()))

    write_manifest(
        outdir, "estimate", input=str(indir), level=level, qte_alphas=alphas,
        profile=[float(v) for v in x_row], profile_pihat=args.profile_pihat,
        z_values=z_values, grid=[float(grid[0]), float(grid[-1]), int(grid.size)],
        predictive_integrals=integral_checks,
    )
    print(f"estimate: {len(alphas)} quantile levels, grid of {grid.size} -> {outdir}")
    return 0


def cmd_simulate(args) -> int:
    file_cfg = _load_config_file(args.config)
    seed = _resolve_seed(args, file_cfg)
    spec = _parse_scenario(args.scenario, n_override=args.n)
    sim = spec.generate(np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0,))))
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    obs = sim.obs
    with open(outdir / "sim.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["y", "z"] + [f"x{j + 1}" for j in range(obs.d)] + ["pitrue", "mutrue", "tautrue"]
        )
        for i in range(obs.n):
            writer.writerow(
                [fmt(obs.y[i]), fmt(obs.z[i])]
                + [fmt(v) for v in obs.x[i]]
                + [fmt(sim.pi_true[i]), fmt(sim.mu_true[i]), fmt(sim.tau_true[i])]
            )
    write_manifest(outdir, "simulate", scenario=args.scenario, n=obs.n, seed=seed,
                   sate_true=sim.sate_true)
    print(f"simulate: {obs.n} rows of {spec.label} -> {outdir / 'sim.csv'}")
    return 0


def cmd_benchmark(args) -> int:
    file_cfg = _load_config_file(args.config)
    cfg = _sampler_config(args, file_cfg)
    level = float(_resolve(args, file_cfg, "level", 0.95))
    reps = int(_resolve(args, file_cfg, "reps", 20))
    jobs = int(_resolve(args, file_cfg, "jobs", 1))
    specs = [_parse_scenario(s) for s in args.scenario]

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    all_rows = []
    failures = {}
    for spec in specs:
        outcome = run_replications(spec, reps, cfg, parallelism=jobs, level=level)
        pscore = "with" if spec.use_pscore else "without"
        for row in outcome.rows:
            all_rows.append((row.scenario, "cLSBP", pscore, row.estimand,
                             row.rmse, row.coverage, row.length))
        if outcome.failures:
            failures[spec.label] = outcome.failures
    wall = time.perf_counter() - started

    with open(outdir / "metrics.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "method", "pscore", "estimand", "rmse", "cov", "len"])
        for scenario, method, pscore, estimand, rmse, cov, length in all_rows:
            writer.writerow([scenario, method, pscore, estimand, fmt(rmse), fmt(cov), fmt(length)])

    write_manifest(
        outdir, "benchmark", cfg=cfg, scenarios=args.scenario, reps=reps, jobs=jobs,
        level=level, wall_time_s=wall,
        cate_scoring="pooled over subjects and replications",
        failed_replications={k: len(v) for k, v in failures.items()},
        failure_messages=failures,
    )
    print(f"benchmark: {len(specs)} scenario(s) x {reps} reps -> {outdir / 'metrics.csv'}")
    return 0


_DISPATCH = {
    "fit": cmd_fit,
    "estimate": cmd_estimate,
    "simulate": cmd_simulate,
    "benchmark": cmd_benchmark,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _DISPATCH[args.command](args)
    except ValidationError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 3
    except (DrawsNotFound, OSError) as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 4
    except ClsbpError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
