"""Render an experiment archive into summary tables and SVG figures."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .harness import FACTOR_KEYS, MODEL_ORDER, SummaryTable, aggregate, _runs_by_id
from .metrics import ScenarioResult

__all__ = ["report", "render_table_csv", "render_table_text", "cross_means"]

_MODEL_LABEL = {"geo": "Geo", "pref": "Pref", "mix": "Mix"}
_MODEL_COLOR = {"geo": "#c44e52", "pref": "#4c72b0", "mix": "#55a868"}


def render_table_csv(table: SummaryTable, path: Path) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([table.factor, *table.columns, "n_runs"])
        for row in table.to_rows():
            writer.writerow(row)


def render_table_text(table: SummaryTable, path: Path) -> None:
    header = [table.factor, *table.columns, "n_runs"]
    body = [
        [f"{row[0]:g}"] + [f"{v:.4f}" for v in row[1:-1]] + [str(row[-1])]
        for row in table.to_rows()
    ]
    widths = [max(len(h), *(len(r[i]) for r in body)) for i, h in enumerate(header)]
    lines = [
        "  ".join(h.rjust(w) for h, w in zip(header, widths)),
        "  ".join("-" * w for w in widths),
    ]
    lines += ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in body]
    path.write_text(f"mean ratios ({table.mode}) by {table.factor}\n" + "\n".join(lines) + "\n")


def cross_means(rows: list[ScenarioResult], mode: str):
    """Per-(range, prop_random) cell means for the cross-factor figure.

    Returns (ranges, props, {column: matrix}) with matrix[i, j] the mean
    over runs at range i, prop j.
    """
    ranges = sorted({r.spatial_range for r in rows})
    props = sorted({r.prop_random for r in rows})
    shape = (len(ranges), len(props))
    cells: dict[str, list[list[list[float]]]] = {}

    def bucket(col):
        return cells.setdefault(col, [[[] for _ in props] for _ in ranges])

    if mode == "abundance_vs_sim":
        for r in rows:
            i, j = ranges.index(r.spatial_range), props.index(r.prop_random)
            bucket(f"{_MODEL_LABEL[r.model]}/Sim")[i][j].append(r.abundance_ratio)
    elif mode == "rmse_pairs":
        for run in _runs_by_id(rows).values():
            if not all(k.value in run for k in MODEL_ORDER):
                continue
            geo, pref, mix = (run[k.value] for k in MODEL_ORDER)
            i = ranges.index(geo.spatial_range)
            j = props.index(geo.prop_random)
            bucket("Geo/Pref")[i][j].append(geo.rmse / pref.rmse)
            bucket("Geo/Mix")[i][j].append(geo.rmse / mix.rmse)
            bucket("Pref/Mix")[i][j].append(pref.rmse / mix.rmse)
    else:
        raise ValueError("mode must be 'rmse_pairs' or 'abundance_vs_sim'")

    mats = {}
    for col, grid in cells.items():
        mat = np.full(shape, np.nan)
        for i in range(shape[0]):
            for j in range(shape[1]):
                if grid[i][j]:
                    mat[i, j] = float(np.mean(grid[i][j]))
        mats[col] = mat
    return ranges, props, mats


def _boxplot_by_factor(rows, factor, path: Path) -> None:
    key = FACTOR_KEYS[factor]
    levels = sorted({getattr(r, key) for r in rows})
    fig, ax = plt.subplots(figsize=(1.8 + 1.6 * len(levels), 4.0))
    width = 0.22
    for k, kind in enumerate(MODEL_ORDER):
        data = [
            [r.abundance_ratio for r in rows
             if r.model == kind.value and getattr(r, key) == lev]
            for lev in levels
        ]
        positions = [i + (k - 1) * width for i in range(len(levels))]
        bp = ax.boxplot(
            data,
            positions=positions,
            widths=width * 0.85,
            patch_artist=True,
            manage_ticks=False,
        )
        for box in bp["boxes"]:
            box.set_facecolor(_MODEL_COLOR[kind.value])
            box.set_alpha(0.6)
        for med in bp["medians"]:
            med.set_color("black")
    ax.axhline(1.0, color="gray", lw=0.8, ls="--")
    ax.set_xticks(range(len(levels)))
    ax.set_xticklabels([f"{lev:g}" for lev in levels])
    ax.set_xlabel(factor)
    ax.set_ylabel("abundance ratio (estimated / simulated)")
    handles = [
        plt.Rectangle((0, 0), 1, 1, fc=_MODEL_COLOR[k.value], alpha=0.6)
        for k in MODEL_ORDER
    ]
    ax.legend(handles, [_MODEL_LABEL[k.value] for k in MODEL_ORDER], loc="best")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def _cross_figure(rows, mode, path: Path) -> None:
    ranges, props, mats = cross_means(rows, mode)
    cols = list(mats)
    fig, axes = plt.subplots(
        1, len(cols), figsize=(3.2 * len(cols), 3.0), squeeze=False
    )
    vals = np.concatenate([m.ravel() for m in mats.values()])
    vals = vals[np.isfinite(vals)]
    lo, hi = (vals.min(), vals.max()) if vals.size else (0.9, 1.1)
    pad = max(0.02, 0.1 * (hi - lo))
    for ax, col in zip(axes[0], cols):
        mat = mats[col]
        im = ax.imshow(mat, cmap="RdBu_r", vmin=lo - pad, vmax=hi + pad, aspect="auto")
        for i in range(mat.shape[0]):
            for j in range(mat.shape[1]):
                if np.isfinite(mat[i, j]):
                    ax.text(j, i, f"{mat[i, j]:.3f}", ha="center", va="center", fontsize=8)
        ax.set_title(col, fontsize=10)
        ax.set_xticks(range(len(props)))
        ax.set_xticklabels([f"{p:g}" for p in props], fontsize=8)
        ax.set_yticks(range(len(ranges)))
        ax.set_yticklabels([f"{r:g}" for r in ranges], fontsize=8)
        ax.set_xlabel("prop_random", fontsize=9)
        ax.set_ylabel("range", fontsize=9)
    fig.colorbar(im, ax=axes[0], shrink=0.85)
    fig.suptitle(
        "mean abundance ratios by range x prop_random"
        if mode == "abundance_vs_sim"
        else "mean RMSE ratios by range x prop_random",
        fontsize=11,
    )
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)


def report(rows: list[ScenarioResult], outdir: str | Path) -> list[Path]:
    """Write summary tables (CSV + text), box plots, and cross-factor figures.

    Raises ValueError on an empty archive before touching the filesystem.
    Returns the list of files written.
    """
    if not rows:
        raise ValueError("no result rows; nothing to report")
    outdir = Path(outdir)

    # compute everything first so bad input can't leave partial output
    tables = [
        aggregate(rows, mode, factor)
        for mode in ("rmse_pairs", "abundance_vs_sim")
        for factor in ("range", "prop_random", "n_total")
    ]

    outdir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for table in tables:
        stem = f"table_{table.mode}_by_{table.factor}"
        for suffix, renderer in ((".csv", render_table_csv), (".txt", render_table_text)):
            path = outdir / (stem + suffix)
            renderer(table, path)
            written.append(path)

    for factor in ("range", "prop_random"):
        path = outdir / f"boxplot_abundance_by_{factor}.svg"
        _boxplot_by_factor(rows, factor, path)
        written.append(path)

    for mode in ("abundance_vs_sim", "rmse_pairs"):
        path = outdir / f"cross_{mode}.svg"
        _cross_figure(rows, mode, path)
        written.append(path)

    n_conv = sum(1 for r in rows if r.converged)
    by_model = {
        k.value: sum(1 for r in rows if r.model == k.value) for k in MODEL_ORDER
    }
    summary = outdir / "summary.txt"
    summary.write_text(
        f"rows: {len(rows)}\n"
        f"rows per model: {by_model}\n"
        f"converged: {n_conv}/{len(rows)} ({100.0 * n_conv / len(rows):.1f}%)\n"
    )
    written.append(summary)
    return written
