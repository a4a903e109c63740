"""Render comparative-statics figures from admarket CSV artifacts.

All numbers are read from the solver CSVs; no economics is computed here.
Each renderer validates the input columns against the CSV schema of the
producing subcommand, writes one image, and returns a structural summary
(curve counts, monotonicity flags, limiting values) used by the tests.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


class ColumnMismatchError(ValueError):
    """Input CSV does not match the expected schema."""


@dataclass(frozen=True)
class FigureSpec:
    figure_id: str                 # "quality-sweep" | "efficiency" | "clicks-step"
    inputs: tuple[str, ...]
    output: str
    xlabel: str = ""
    ylabel: str = ""
    titles: tuple[str, ...] = field(default=())


def read_table(path: str, required: list[str],
               prefix_ok: list[str] | None = None) -> dict[str, np.ndarray]:
    """Load a CSV into named float columns, enforcing the schema.

    ``required`` columns must all be present; any further columns must start
    with one of the ``prefix_ok`` prefixes.  An empty table is an error.
    """
    p = Path(path)
    if not p.exists():
        raise ColumnMismatchError(f"{path}: no such file")
    with open(p, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ColumnMismatchError(f"{path}: empty file")
    header, data = rows[0], rows[1:]
    missing = [c for c in required if c not in header]
    extra = [c for c in header if c not in required
             and not any(c.startswith(pre) for pre in prefix_ok or [])]
    if missing or extra:
        raise ColumnMismatchError(
            f"{path}: column mismatch (missing: {missing or 'none'}, "
            f"unexpected: {extra or 'none'})")
    if not data:
        raise ColumnMismatchError(f"{path}: no data rows")
    arr = np.array(data, dtype=float)
    return {c: arr[:, j] for j, c in enumerate(header)}


def _save(fig, output: str) -> None:
    out = Path(output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150)
    plt.close(fig)


def render_quality_sweep(spec: FigureSpec) -> dict:
    """Ironing levels versus customer-quality floor, one panel per input CSV
    (each CSV holds one data-share split)."""
    tables = [read_table(p, ["eps", "lambda1", "z1", "z2"]) for p in spec.inputs]
    fig, axes = plt.subplots(1, len(tables), squeeze=False,
                             figsize=(4.2 * len(tables), 3.4), sharey=True)
    summary = {"figure_id": spec.figure_id, "panels": len(tables),
               "curves_per_panel": 2, "panel_stats": []}
    for ax, tab in zip(axes[0], tables):
        order = np.argsort(tab["eps"])
        eps, z1, z2 = tab["eps"][order], tab["z1"][order], tab["z2"][order]
        lam1 = float(tab["lambda1"][0])
        ax.plot(eps, z1, marker="o", label="$z_1$")
        ax.plot(eps, z2, marker="s", label="$z_2$")
        ax.set_xlabel(spec.xlabel or r"quality floor $\varepsilon$")
        ax.set_title(rf"$\lambda_1 = {lam1:g}$")
        ax.legend()
        summary["panel_stats"].append({
            "lambda1": lam1,
            "z1_increasing": bool(np.all(np.diff(z1) > 0)),
            "z2_increasing": bool(np.all(np.diff(z2) > 0)),
            "z1_ge_z2": bool(np.all(z1 >= z2 - 1e-12)),
        })
    axes[0][0].set_ylabel(spec.ylabel or "ironing level")
    _save(fig, spec.output)
    return summary


def render_efficiency(spec: FigureSpec) -> dict:
    """Achieved relative efficiency versus mean CTR, one curve per revenue
    weight found across the input CSVs."""
    cols = ["mu", "eta_r", "p_S", "p_tilde", "p_tilde_saturated",
            "pi_selling_only", "pi_combined", "ARE", "Pi_inf", "TS_inf"]
    tabs = [read_table(p, cols) for p in spec.inputs]
    mu = np.concatenate([t["mu"] for t in tabs])
    eta_r = np.concatenate([t["eta_r"] for t in tabs])
    arev = np.concatenate([t["ARE"] for t in tabs])
    fig, ax = plt.subplots(figsize=(4.8, 3.4))
    summary = {"figure_id": spec.figure_id, "curves": 0, "curve_stats": []}
    for er in sorted(set(np.round(eta_r, 12))):
        m = np.isclose(eta_r, er)
        order = np.argsort(mu[m])
        x, y = mu[m][order], arev[m][order]
        ax.plot(x, y, marker="o", label=rf"$\eta_r = {er:g}$")
        summary["curves"] += 1
        summary["curve_stats"].append({
            "eta_r": float(er),
            "are_max": float(np.max(y)),
            "bounded_by_one": bool(np.all(y <= 1.0 + 1e-12)),
            "decreasing_in_mu": bool(np.all(np.diff(y) < 1e-12)),
        })
    ax.set_xlabel(spec.xlabel or r"mean CTR $\bar\mu$")
    ax.set_ylabel(spec.ylabel or "achieved relative efficiency")
    ax.legend()
    _save(fig, spec.output)
    return summary


def render_clicks_step(spec: FigureSpec) -> dict:
    """Scaled expected clicks for several market sizes against the limit
    step function."""
    if len(spec.inputs) != 1:
        raise ColumnMismatchError("clicks-step takes exactly one input CSV")
    tab = read_table(spec.inputs[0], ["theta", "limit_step"],
                     prefix_ok=["scaled_clicks_N"])
    n_cols = sorted((c for c in tab if c.startswith("scaled_clicks_N")),
                    key=lambda c: int(c.split("N")[-1]))
    if not n_cols:
        raise ColumnMismatchError(
            f"{spec.inputs[0]}: no scaled_clicks_N* columns")
    theta, step = tab["theta"], tab["limit_step"]
    fig, ax = plt.subplots(figsize=(4.8, 3.4))
    # convergence is measured away from the top of the type space, where the
    # finite-market curves rise above the step for every market size
    jump = float(theta[np.argmax(step > step[0])]) if np.any(step > step[0]) else 1.0
    measured = theta <= (jump + 1.0) / 2.0
    devs = {}
    for c in n_cols:
        n = int(c.split("N")[-1])
        ax.plot(theta, tab[c], label=f"$N = {n}$")
        devs[n] = float(np.max(np.abs(tab[c] - step)[measured]))
    ax.plot(theta, step, "k--", label="limit")
    ax.set_xlabel(spec.xlabel or r"type $\theta$")
    ax.set_ylabel(spec.ylabel or "scaled expected clicks")
    ax.legend()
    _save(fig, spec.output)
    ns = sorted(devs)
    return {"figure_id": spec.figure_id, "curves": len(n_cols) + 1,
            "step_low": float(np.min(step)), "step_high": float(np.max(step)),
            "max_dev_by_n": devs,
            "dev_shrinks": bool(devs[ns[-1]] <= devs[ns[0]] + 1e-12)}


_RENDERERS = {
    "quality-sweep": render_quality_sweep,
    "efficiency": render_efficiency,
    "clicks-step": render_clicks_step,
}


def render(spec: FigureSpec) -> dict:
    try:
        fn = _RENDERERS[spec.figure_id]
    except KeyError:
        raise ColumnMismatchError(f"unknown figure id: {spec.figure_id}")
    return fn(spec)


def script_main(figure_id: str, argv: list[str] | None = None) -> int:
    """Shared entry point: positional input CSV(s) followed by the output
    image path."""
    import argparse
    import sys

    parser = argparse.ArgumentParser(
        description=f"Render the {figure_id} figure from admarket CSV output.")
    parser.add_argument("paths", nargs="+",
                        metavar="CSV... OUTPUT",
                        help="one or more input CSVs, then the output image")
    args = parser.parse_args(argv)
    if len(args.paths) < 2:
        parser.error("need at least one input CSV and an output path")
    spec = FigureSpec(figure_id, tuple(args.paths[:-1]), args.paths[-1])
    try:
        summary = render(spec)
    except ColumnMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(summary)
    return 0
