"""Experiment runner: JSON configs in, CSV artifacts plus a run manifest out.

Subcommands map one-to-one to the solver modules.  Configs are validated
against a published JSON schema before any computation; identical config and
seed produce byte-identical CSVs.

Exit codes: 0 success, 1 verification violations, 2 schema violation,
3 solver non-convergence, 4 unsupported configuration.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np
import jsonschema

from . import __version__
from .continuum import (
    CTRLaw,
    ContinuumDataset,
    SolverError,
    solve_optz,
    solve_symmetric,
)
from .distributions import TypeDistribution, WelfareWeight
from .finite import FiniteDataset, FiniteMechanism, TieBreakRule
from .largemarket import (
    LargeMarketConfig,
    are,
    design,
    finite_n_diagnostics,
    profits,
)
from .scoring import ScoringRule
from .stylized import (
    ExclusiveInclusiveData,
    bundling_example,
    classic_benchmarks,
    solve_ep,
)
from .verify import full_report

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_SCHEMA = 2
EXIT_NONCONVERGENCE = 3
EXIT_UNSUPPORTED = 4

OUT_ENV_VAR = "ADMARKET_OUT"

_DIST_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["uniform", "beta", "piecewise"]},
        "a": {"type": "number", "exclusiveMinimum": 0},
        "b": {"type": "number", "exclusiveMinimum": 0},
        "knots_x": {"type": "array", "items": {"type": "number"}},
        "knots_cdf": {"type": "array", "items": {"type": "number"}},
    },
    "required": ["kind"],
}

_ETA_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "eta_v": {"type": "number", "minimum": 0},
        "eta_w": {"type": "number", "minimum": 0},
        "eta_r": {"type": "number", "minimum": 1e-3},
    },
    "required": ["eta_v", "eta_w", "eta_r"],
}

_LAW_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["uniform", "beta", "piecewise"]},
        "lo": {"type": "number", "minimum": 0, "maximum": 1},
        "hi": {"type": "number", "minimum": 0, "maximum": 1},
        "a": {"type": "number", "exclusiveMinimum": 0},
        "b": {"type": "number", "exclusiveMinimum": 0},
        "knots_x": {"type": "array", "items": {"type": "number"}},
        "knots_cdf": {"type": "array", "items": {"type": "number"}},
    },
    "required": ["kind"],
}

_SCHEMAS = {
    "solve-finite": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "schema_version": {"const": 1},
            "seed": {"type": "integer", "minimum": 0},
            "distribution": _DIST_SCHEMA,
            "eta": _ETA_SCHEMA,
            "profiles": {"type": "array",
                         "items": {"type": "array", "items": {"type": "number"}}},
            "masses": {"type": "array",
                       "items": {"type": "array", "items": {"type": "number"}}},
            "ironing_levels": {"type": "array", "items": {"type": "number"}},
            "tie_weights": {"type": "array",
                            "items": {"type": "array", "items": {"type": "number"}}},
            "grid_size": {"type": "integer", "minimum": 11, "maximum": 2001},
        },
        "required": ["schema_version", "distribution", "eta", "profiles",
                     "masses", "ironing_levels"],
    },
    "solve-stylized": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "schema_version": {"const": 1},
            "seed": {"type": "integer", "minimum": 0},
            "mode": {"enum": ["bundling", "ep", "benchmarks"]},
            "distribution": _DIST_SCHEMA,
            "eta": _ETA_SCHEMA,
            "incl_total": {"type": "array",
                           "items": {"type": "number",
                                     "exclusiveMinimum": 0, "exclusiveMaximum": 1}},
            "datasets": {"type": "array", "items": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "excl_1": {"type": "number", "minimum": 0},
                    "excl_2": {"type": "number", "minimum": 0},
                    "incl_1": {"type": "number", "minimum": 0},
                    "incl_2": {"type": "number", "minimum": 0},
                },
                "required": ["excl_1", "excl_2", "incl_1", "incl_2"],
            }},
        },
        "required": ["schema_version", "mode"],
    },
    "solve-continuum": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "schema_version": {"const": 1},
            "seed": {"type": "integer", "minimum": 0},
            "mode": {"enum": ["optz", "quality-sweep", "symmetric-sequence"]},
            "distribution": _DIST_SCHEMA,
            "eta": _ETA_SCHEMA,
            "lam": {"type": "array",
                    "items": {"type": "number", "exclusiveMinimum": 0}},
            "law": _LAW_SCHEMA,
            "quality_values": {"type": "array",
                               "items": {"type": "number",
                                         "minimum": 0, "exclusiveMaximum": 1}},
            "n_values": {"type": "array",
                         "items": {"type": "integer", "minimum": 2}},
        },
        "required": ["schema_version", "mode", "distribution", "eta"],
    },
    "large-market": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "schema_version": {"const": 1},
            "seed": {"type": "integer", "minimum": 0},
            "distribution": _DIST_SCHEMA,
            "eta": _ETA_SCHEMA,
            "mean_ctr_values": {"type": "array",
                                "items": {"type": "number",
                                          "minimum": 0, "maximum": 1}},
            "finite_n": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "law": _LAW_SCHEMA,
                    "n_values": {"type": "array",
                                 "items": {"type": "integer", "minimum": 2}},
                    "grid_size": {"type": "integer", "minimum": 11,
                                  "maximum": 501},
                },
                "required": ["law", "n_values"],
            },
        },
        "required": ["schema_version", "distribution", "eta", "mean_ctr_values"],
    },
    "verify": None,  # shares the solve-finite schema; filled in below
}
_SCHEMAS["verify"] = _SCHEMAS["solve-finite"]


class ConfigError(ValueError):
    pass


class UnsupportedError(ValueError):
    pass


def _load_config(path: str, command: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    validator = jsonschema.Draft202012Validator(_SCHEMAS[command])
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        loc = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"config field '{loc}': {err.message}")
    return cfg


def _build_dist(spec: dict) -> TypeDistribution:
    kind = spec["kind"]
    if kind == "uniform":
        return TypeDistribution.uniform()
    if kind == "beta":
        if "a" not in spec or "b" not in spec:
            raise ConfigError("config field 'distribution': beta needs a and b")
        return TypeDistribution.beta(spec["a"], spec["b"])
    if "knots_x" not in spec or "knots_cdf" not in spec:
        raise ConfigError("config field 'distribution': piecewise needs knots")
    return TypeDistribution.piecewise_linear_cdf(spec["knots_x"], spec["knots_cdf"])


def _build_law(spec: dict) -> CTRLaw:
    kind = spec["kind"]
    if kind == "uniform":
        return CTRLaw.uniform(spec.get("lo", 0.0), spec.get("hi", 1.0))
    if kind == "beta":
        if "a" not in spec or "b" not in spec:
            raise ConfigError("config field 'law': beta needs a and b")
        return CTRLaw.beta(spec["a"], spec["b"])
    if "knots_x" not in spec or "knots_cdf" not in spec:
        raise ConfigError("config field 'law': piecewise needs knots")
    return CTRLaw.piecewise_linear_cdf(spec["knots_x"], spec["knots_cdf"])


def _build_eta(spec: dict) -> WelfareWeight:
    try:
        return WelfareWeight(spec["eta_v"], spec["eta_w"], spec["eta_r"])
    except ValueError as exc:
        raise ConfigError(f"config field 'eta': {exc}") from exc


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return "%.12g" % float(value)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_manifest(out_dir: Path, command: str, config_path: str, seed: int,
                    files: list[str]) -> None:
    digest = hashlib.sha256(Path(config_path).read_bytes()).hexdigest()
    manifest = {
        "command": command,
        "config_sha256": digest,
        "seed": seed,
        "package_version": __version__,
        "files": files,
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _build_finite_mechanism(cfg: dict, seed: int) -> FiniteMechanism:
    dist = _build_dist(cfg["distribution"])
    eta = _build_eta(cfg["eta"])
    profiles = np.asarray(cfg["profiles"], dtype=float)
    masses = np.asarray(cfg["masses"], dtype=float)
    try:
        dataset = FiniteDataset(profiles, masses)
    except ValueError as exc:
        raise ConfigError(f"config field 'profiles/masses': {exc}") from exc
    levels = cfg["ironing_levels"]
    if len(levels) != dataset.n_merchants:
        raise ConfigError("config field 'ironing_levels': one level per merchant")
    rules = [ScoringRule(dist, eta, float(z)) for z in levels]
    tiebreak = None
    if "tie_weights" in cfg:
        tiebreak = TieBreakRule(np.asarray(cfg["tie_weights"], dtype=float))
    return FiniteMechanism(dataset, rules, tiebreak,
                           grid_size=cfg.get("grid_size", 201), seed=seed)


# -- subcommand handlers ----------------------------------------------------


def _run_solve_finite(cfg: dict, out_dir: Path, seed: int) -> tuple[int, list[str]]:
    mech = _build_finite_mechanism(cfg, seed)
    outcome = mech.outcome()
    rows = []
    for i in range(mech.dataset.n_merchants):
        for j, theta in enumerate(outcome.grid):
            rows.append([i, theta, outcome.clicks[i, j], outcome.transfers[i, j],
                         outcome.payoffs[i, j]])
    _write_csv(out_dir / "interim_curves.csv",
               ["merchant", "theta", "clicks", "transfer", "payoff"], rows)
    _write_csv(out_dir / "objective.csv",
               ["surplus", "engagement", "revenue", "value"],
               [[outcome.surplus, outcome.engagement, outcome.revenue,
                 outcome.value]])
    return EXIT_OK, ["interim_curves.csv", "objective.csv"]


def _run_solve_stylized(cfg: dict, out_dir: Path, seed: int) -> tuple[int, list[str]]:
    mode = cfg["mode"]
    dist = _build_dist(cfg.get("distribution", {"kind": "uniform"}))
    eta = _build_eta(cfg.get("eta", {"eta_v": 0.0, "eta_w": 0.0, "eta_r": 1.0}))
    if mode == "bundling":
        if "incl_total" not in cfg:
            raise ConfigError("config field 'incl_total': required for bundling mode")
        rows = []
        for a11 in cfg["incl_total"]:
            ex = bundling_example(a11)
            lo, hi = ex.tie_interval
            rows.append([a11, ex.scarcity, ex.ironing_level, lo, hi,
                         ex.incl_tiebreak_1, ex.separate_revenue(),
                         ex.bundled_revenue()])
        _write_csv(out_dir / "bundling.csv",
                   ["alpha11", "nu", "zB", "thetaS", "thetaB", "p1",
                    "separate_revenue", "bundled_revenue"], rows)
        return EXIT_OK, ["bundling.csv"]
    if mode == "ep":
        if "datasets" not in cfg:
            raise ConfigError("config field 'datasets': required for ep mode")
        rows = []
        for spec in cfg["datasets"]:
            try:
                data = ExclusiveInclusiveData(**spec)
            except ValueError as exc:
                raise ConfigError(f"config field 'datasets': {exc}") from exc
            sol = solve_ep(data, dist, eta)
            rows.append([spec["excl_1"], spec["excl_2"], spec["incl_1"],
                         spec["incl_2"], sol.beta[0], sol.beta[1], sol.case,
                         sol.z[0], sol.z[1], sol.p_incl[0], sol.p_incl[1]])
        _write_csv(out_dir / "ep_solutions.csv",
                   ["excl_1", "excl_2", "incl_1", "incl_2", "beta1", "beta2",
                    "case", "z1", "z2", "p1", "p2"], rows)
        return EXIT_OK, ["ep_solutions.csv"]
    bench = classic_benchmarks(dist, eta)
    _write_csv(out_dir / "benchmarks.csv",
               ["monopoly_price", "bilateral_gap", "dissolution_level",
                "band_lo", "band_hi"],
               [[bench.monopoly_price, bench.bilateral_gap,
                 bench.dissolution_level, bench.dissolution_interval[0],
                 bench.dissolution_interval[1]]])
    return EXIT_OK, ["benchmarks.csv"]


def _run_solve_continuum(cfg: dict, out_dir: Path, seed: int) -> tuple[int, list[str]]:
    mode = cfg["mode"]
    dist = _build_dist(cfg["distribution"])
    eta = _build_eta(cfg["eta"])
    if mode == "quality-sweep":
        if "quality_values" not in cfg or "lam" not in cfg:
            raise ConfigError(
                "config field 'quality_values/lam': required for quality-sweep")
        lam = np.asarray(cfg["lam"], dtype=float)
        if len(lam) != 2:
            raise UnsupportedError("quality-sweep supports exactly 2 merchants")
        lam = lam / lam.sum()
        rows = []
        for eps in cfg["quality_values"]:
            law = CTRLaw.uniform(eps, 1.0)
            data = ContinuumDataset.iid(2, law, lam)
            sol = solve_optz(data, dist, eta)
            rows.append([eps, lam[0], sol.z[0], sol.z[1]])
        _write_csv(out_dir / "quality_sweep.csv",
                   ["eps", "lambda1", "z1", "z2"], rows)
        return EXIT_OK, ["quality_sweep.csv"]
    if mode == "symmetric-sequence":
        if "n_values" not in cfg or "law" not in cfg:
            raise ConfigError(
                "config field 'n_values/law': required for symmetric-sequence")
        law = _build_law(cfg["law"])
        rows = [[n, solve_symmetric(law, dist, eta, n)] for n in cfg["n_values"]]
        _write_csv(out_dir / "symmetric_levels.csv", ["N", "zN"], rows)
        return EXIT_OK, ["symmetric_levels.csv"]
    if "lam" not in cfg or "law" not in cfg:
        raise ConfigError("config field 'lam/law': required for optz mode")
    lam = np.asarray(cfg["lam"], dtype=float)
    law = _build_law(cfg["law"])
    data = ContinuumDataset.iid(len(lam), law, lam / lam.sum())
    sol = solve_optz(data, dist, eta)
    rows = [[i, sol.z[i], int(sol.corner[i]), sol.residuals[i]]
            for i in range(len(lam))]
    _write_csv(out_dir / "ironing_levels.csv",
               ["merchant", "z", "corner", "residual"], rows)
    return EXIT_OK, ["ironing_levels.csv"]


def _run_large_market(cfg: dict, out_dir: Path, seed: int) -> tuple[int, list[str]]:
    dist = _build_dist(cfg["distribution"])
    eta = _build_eta(cfg["eta"])
    rows = []
    for mu in cfg["mean_ctr_values"]:
        lm = LargeMarketConfig(dist, eta, mu)
        dsn = design(lm)
        pr = profits(lm, dsn)
        eff = are(lm)
        rows.append([mu, eta.eta_r, dsn.selling_price, dsn.bid_ask_price,
                     int(dsn.bid_ask_saturated), pr.selling_only, pr.combined,
                     eff.value,
                     eta.eta_w * eff.engagement_limit
                     + eta.eta_v * eff.surplus_limit + eta.eta_r * eff.revenue_limit,
                     eff.surplus_max])
    _write_csv(out_dir / "large_market.csv",
               ["mu", "eta_r", "p_S", "p_tilde", "p_tilde_saturated",
                "pi_selling_only", "pi_combined", "ARE", "Pi_inf", "TS_inf"],
               rows)
    files = ["large_market.csv"]
    if "finite_n" in cfg:
        fin = cfg["finite_n"]
        law = _build_law(fin["law"])
        lm = LargeMarketConfig(dist, eta, law.mean())
        diag = finite_n_diagnostics(lm, law, fin["n_values"],
                                    grid_size=fin.get("grid_size", 61))
        header = (["theta", "limit_step"]
                  + [f"scaled_clicks_N{n}" for n in diag.n_values])
        curves = [[diag.theta_grid[j], diag.limit_step[j]]
                  + [c[j] for c in diag.scaled_clicks]
                  for j in range(len(diag.theta_grid))]
        _write_csv(out_dir / "clicks_step.csv", header, curves)
        _write_csv(out_dir / "finite_transfers.csv",
                   ["N", "ironing_level", "aggregate_transfer",
                    "limit_transfer"],
                   [[n, diag.ironing_levels[i], diag.aggregate_transfers[i],
                     diag.limit_transfer] for i, n in enumerate(diag.n_values)])
        files += ["clicks_step.csv", "finite_transfers.csv"]
    return EXIT_OK, files


def _run_verify(cfg: dict, out_dir: Path, seed: int) -> tuple[int, list[str]]:
    mech = _build_finite_mechanism(cfg, seed)
    report = full_report(mech)
    with open(out_dir / "verification.txt", "w", encoding="utf-8") as fh:
        fh.write(report.to_text() + "\n")
    return report.exit_code(), ["verification.txt"]


_HANDLERS = {
    "solve-finite": _run_solve_finite,
    "solve-stylized": _run_solve_stylized,
    "solve-continuum": _run_solve_continuum,
    "large-market": _run_large_market,
    "verify": _run_verify,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="admarket",
        description="Solvers for optimal data-sharing ad mechanisms.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _HANDLERS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)

    out_dir = Path(args.out or os.environ.get(OUT_ENV_VAR, "."))
    try:
        cfg = _load_config(args.config, args.command)
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        out_dir.mkdir(parents=True, exist_ok=True)
        code, files = _HANDLERS[args.command](cfg, out_dir, seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except SolverError as exc:
        print(f"error: solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except UnsupportedError as exc:
        print(f"error: unsupported configuration: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    _write_manifest(out_dir, args.command, args.config, seed, files)
    return code


if __name__ == "__main__":
    sys.exit(main())
