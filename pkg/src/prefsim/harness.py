"""Factorial experiment driver: run, persist, resume, aggregate.

Results go to a line-delimited JSON archive (one ScenarioResult per line)
next to a manifest recording the config hash and package version. Reruns
skip (scenario, model) pairs already present, so interrupted experiments
resume without duplicating or rewriting rows.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .fields import GridSpec
from .inference import InferenceConfig, fit, posterior_functional_draws, predict
from .metrics import ScenarioResult, abundance, mark_loglik_matrix, rmse, waic
from .models import ModelKind
from .sampling import Dataset, make_dataset
from .scenarios import ScenarioSpec, derive_seed

__all__ = [
    "ExperimentConfig",
    "SummaryTable",
    "desk_profile",
    "full_profile",
    "scenario_grid",
    "run_experiment",
    "run_single",
    "read_results",
    "aggregate",
]

MODEL_ORDER = (ModelKind.GEO, ModelKind.PREF, ModelKind.MIX)

FACTOR_KEYS = {
    "range": "spatial_range",
    "prop_random": "prop_random",
    "n_total": "n_total",
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Factor levels and fixed settings for one factorial study."""

    ranges: tuple[float, ...] = (0.2, 0.5, 0.8)
    prop_random: tuple[float, ...] = (0.10, 0.25, 0.50, 0.75, 0.90)
    n_totals: tuple[int, ...] = (60, 100, 160, 200)
    n_replicates: int = 4
    master_seed: int = 20240601
    grid_nx: int = 32
    grid_ny: int = 32
    n_test: int = 400
    eta: float = 0.0
    tau: float = 0.3
    alpha_sim: float = 1.5
    sigma: float = 1.0
    nu: float = 1.0
    waic_draws: int = 1000
    inference: InferenceConfig = field(default_factory=InferenceConfig)

    def __post_init__(self):
        if self.n_replicates < 1:
            raise ValueError("n_replicates must be >= 1")
        for name in ("ranges", "prop_random", "n_totals"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"factor list {name} must be nonempty")
        if self.waic_draws < 2:
            raise ValueError("waic_draws must be >= 2")

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.grid_nx, self.grid_ny)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["inference"] = dataclasses.asdict(self.inference)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.blake2b(blob, digest_size=16).hexdigest()


def desk_profile(**overrides) -> ExperimentConfig:
    """Reduced profile sized for a single desk-scale acceptance run.

    Corner factor levels only, and a coarser latent grid so the full
    sweep stays in the tens of minutes on one core.
    """
    base = dict(
        ranges=(0.2, 0.8),
        prop_random=(0.10, 0.90),
        n_totals=(60, 200),
        n_replicates=4,
        grid_nx=20,
        grid_ny=20,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def full_profile(**overrides) -> ExperimentConfig:
    """The complete 240-run factorial design."""
    return ExperimentConfig(**overrides)


def scenario_grid(cfg: ExperimentConfig) -> list[ScenarioSpec]:
    """Cartesian product of factor levels and replicates, in stable order."""
    grid = cfg.grid
    specs = []
    for r in cfg.ranges:
        for p in cfg.prop_random:
            for n in cfg.n_totals:
                for rep in range(cfg.n_replicates):
                    specs.append(
                        ScenarioSpec(
                            spatial_range=r,
                            prop_random=p,
                            n_total=n,
                            replicate=rep,
                            grid=grid,
                            eta=cfg.eta,
                            tau=cfg.tau,
                            alpha_sim=cfg.alpha_sim,
                            sigma=cfg.sigma,
                            nu=cfg.nu,
                            n_test=cfg.n_test,
                        )
                    )
    return specs


def run_single(
    cfg: ExperimentConfig, spec: ScenarioSpec, kind: ModelKind, d: Dataset | None = None
) -> ScenarioResult:
    """Fit one model kind to one scenario's dataset and score it."""
    if d is None:
        d = make_dataset(spec, cfg.master_seed)
    grid = spec.grid
    fit_seed = derive_seed(cfg.master_seed, spec, f"fit-{kind.value}")
    result = fit(kind, d, grid, cfg.inference, seed=fit_seed)

    draws = posterior_functional_draws(
        result, grid, cfg.waic_draws, derive_seed(cfg.master_seed, spec, f"draws-{kind.value}")
    )
    w = waic(mark_loglik_matrix(result, d, grid, draws))
    pred = predict(result, d.test_locs, d, grid)
    err = rmse(pred.mean, d.test_true)
    a_est = abundance(draws, result.hyper_hat.eta, grid)
    a_true = abundance(d.truth.values, spec.eta, grid)

    return ScenarioResult(
        scenario_id=spec.scenario_id,
        model=kind.value,
        spatial_range=spec.spatial_range,
        prop_random=spec.prop_random,
        n_total=spec.n_total,
        replicate=spec.replicate,
        waic=w.waic,
        p_eff=w.p_eff,
        rmse=err,
        abundance_ratio=a_est / a_true,
        log_evidence=result.log_evidence,
        converged=result.converged,
    )


def _run_spec(args) -> tuple[str, list[dict], list[dict]]:
    """Worker: all requested model kinds for one spec. Returns id, rows, failures."""
    cfg, spec, kinds = args
    rows, failures = [], []
    d = make_dataset(spec, cfg.master_seed)
    for kind in kinds:
        try:
            rows.append(run_single(cfg, spec, kind, d=d).to_dict())
        except Exception as exc:  # recorded, never fatal to the sweep
            failures.append(
                {"scenario_id": spec.scenario_id, "model": kind.value, "error": repr(exc)}
            )
    return spec.scenario_id, rows, failures


def read_results(outdir: Path) -> list[ScenarioResult]:
    """Load all rows of an archive; missing file means no rows."""
    path = Path(outdir) / "results.jsonl"
    if not path.exists():
        return []
    rows = []
    with path.open() as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(ScenarioResult.from_dict(json.loads(line)))
    return rows


def run_experiment(
    cfg: ExperimentConfig,
    outdir: str | Path,
    resume: bool = True,
    jobs: int = 1,
    progress=None,
) -> Path:
    """Run the full factorial sweep, appending results under ``outdir``.

    Per spec and model kind: simulate the dataset once, fit all three
    kinds to the identical data, score, and append one JSON row each.
    Existing (scenario, model) rows are skipped, so a rerun after an
    interruption tops up the archive without touching earlier lines.
    Failures land in failures.jsonl and the sweep keeps going.

    ``jobs`` > 1 spreads specs over a process pool; rows still pass
    through this single writer process.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest_path = outdir / "manifest.json"
    manifest = {
        "config_hash": cfg.config_hash(),
        "version": __version__,
        "config": cfg.to_dict(),
    }
    if manifest_path.exists():
        old = json.loads(manifest_path.read_text())
        if old.get("config_hash") != manifest["config_hash"]:
            raise ValueError(
                "output directory holds results for a different config; "
                "use a fresh directory"
            )
    else:
        manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")

    done = {(r.scenario_id, r.model) for r in read_results(outdir)} if resume else set()
    if not resume and (outdir / "results.jsonl").exists():
        (outdir / "results.jsonl").unlink()

    todo = []
    for spec in scenario_grid(cfg):
        kinds = [k for k in MODEL_ORDER if (spec.scenario_id, k.value) not in done]
        if kinds:
            todo.append((cfg, spec, kinds))

    results_path = outdir / "results.jsonl"
    failures_path = outdir / "failures.jsonl"
    t0 = time.time()
    n_done = 0

    def write_outcome(spec_id, rows, failures):
        nonlocal n_done
        with results_path.open("a") as fh:
            for row in rows:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
        if failures:
            with failures_path.open("a") as fh:
                for row in failures:
                    fh.write(json.dumps(row, sort_keys=True) + "\n")
        n_done += 1
        if progress is not None:
            progress(
                f"[{n_done}/{len(todo)}] {spec_id}: "
                f"{len(rows)} rows, {len(failures)} failures, "
                f"{time.time() - t0:.0f}s elapsed"
            )

    if jobs <= 1:
        for args in todo:
            write_outcome(*_run_spec(args))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for spec_id, rows, failures in pool.map(_run_spec, todo, chunksize=1):
                write_outcome(spec_id, rows, failures)
    return results_path


@dataclass(frozen=True)
class SummaryTable:
    """Mean ratios by factor level: one row per level, one column per ratio."""

    mode: str
    factor: str
    levels: tuple
    columns: tuple[str, ...]
    means: np.ndarray
    n_runs: tuple[int, ...]

    def to_rows(self) -> list[list]:
        out = []
        for i, lev in enumerate(self.levels):
            out.append([lev] + [float(v) for v in self.means[i]] + [self.n_runs[i]])
        return out


def _runs_by_id(rows: list[ScenarioResult]) -> dict[str, dict[str, ScenarioResult]]:
    runs: dict[str, dict[str, ScenarioResult]] = {}
    for r in rows:
        runs.setdefault(r.scenario_id, {})[r.model] = r
    return runs


def aggregate(rows: list[ScenarioResult], mode: str, factor: str) -> SummaryTable:
    """Mean ratio table over runs grouped by one design factor.

    mode "rmse_pairs": per-run RMSE ratios Geo/Pref, Geo/Mix, Pref/Mix
    (runs with all three fits present). mode "abundance_vs_sim": per-run
    estimated-over-simulated abundance ratio per model kind. Cells are
    arithmetic means over all runs sharing the factor level; row order
    in the input does not matter.
    """
    if not rows:
        raise ValueError("no result rows to aggregate")
    if factor not in FACTOR_KEYS:
        raise ValueError(f"factor must be one of {sorted(FACTOR_KEYS)}")
    key = FACTOR_KEYS[factor]

    # canonical order: grouping and means independent of archive row order
    rows = sorted(rows, key=lambda r: (r.scenario_id, r.model))
    levels = sorted({getattr(r, key) for r in rows})

    if mode == "abundance_vs_sim":
        columns = ("geo_vs_sim", "pref_vs_sim", "mix_vs_sim")
        values: dict[tuple, list] = {}
        for r in rows:
            values.setdefault((getattr(r, key), r.model), []).append(r.abundance_ratio)
        means = np.full((len(levels), 3), np.nan)
        n_runs = []
        for i, lev in enumerate(levels):
            counts = []
            for j, kind in enumerate(MODEL_ORDER):
                cell = values.get((lev, kind.value), [])
                if cell:
                    means[i, j] = float(np.mean(cell))
                counts.append(len(cell))
            n_runs.append(max(counts))
    elif mode == "rmse_pairs":
        columns = ("geo_over_pref", "geo_over_mix", "pref_over_mix")
        ratios: dict[tuple, list[list[float]]] = {}
        for run in _runs_by_id(rows).values():
            if not all(k.value in run for k in MODEL_ORDER):
                continue
            geo, pref, mix = (run[k.value] for k in MODEL_ORDER)
            lev = getattr(geo, key)
            ratios.setdefault(lev, []).append(
                [geo.rmse / pref.rmse, geo.rmse / mix.rmse, pref.rmse / mix.rmse]
            )
        means = np.full((len(levels), 3), np.nan)
        n_runs = []
        for i, lev in enumerate(levels):
            cell = ratios.get(lev, [])
            if cell:
                means[i] = np.mean(np.asarray(cell), axis=0)
            n_runs.append(len(cell))
    else:
        raise ValueError("mode must be 'rmse_pairs' or 'abundance_vs_sim'")

    return SummaryTable(
        mode=mode,
        factor=factor,
        levels=tuple(levels),
        columns=columns,
        means=means,
        n_runs=tuple(n_runs),
    )
