"""On-disk form of datasets and fits for the CLI.

A dataset directory holds ``dataset.csv`` (flat table: x, y, mark, a,
split) and ``field.json`` (the generating field as a flat value array
plus grid, kernel, seed, and mark-model metadata), which together
reconstruct the Dataset exactly.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from pathlib import Path

import numpy as np

from .fields import FieldRealization, GridSpec, MaternParams
from .inference import FitResult
from .models import HyperParams, ModelKind
from .sampling import Dataset, SimParams

__all__ = ["save_dataset", "load_dataset", "save_fit", "load_fit"]

DATASET_HEADER = ["x", "y", "mark", "a", "split"]


def save_dataset(d: Dataset, outdir: str | Path) -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / "dataset.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DATASET_HEADER)
        for (x, y), mark, a in zip(d.train_locs, d.train_y, d.train_a):
            writer.writerow([repr(float(x)), repr(float(y)), repr(float(mark)), int(a), "train"])
        for (x, y), true in zip(d.test_locs, d.test_true):
            writer.writerow([repr(float(x)), repr(float(y)), repr(float(true)), 0, "test"])

    field_path = outdir / "field.json"
    truth = d.truth
    field_path.write_text(
        json.dumps(
            {
                "grid": {
                    "nx": truth.grid.nx,
                    "ny": truth.grid.ny,
                    "domain": list(truth.grid.domain),
                },
                "matern": dataclasses.asdict(truth.params),
                "seed": truth.seed,
                "values": [float(v) for v in truth.values],
                "eta": d.sim_params.eta,
                "tau": d.sim_params.tau,
                "alpha_sim": d.sim_params.alpha_sim,
                "scenario_id": d.scenario_id,
            },
            indent=1,
        )
        + "\n"
    )
    return [csv_path, field_path]


def load_dataset(indir: str | Path) -> Dataset:
    indir = Path(indir)
    meta = json.loads((indir / "field.json").read_text())
    grid = GridSpec(
        meta["grid"]["nx"], meta["grid"]["ny"], tuple(meta["grid"]["domain"])
    )
    truth = FieldRealization(
        grid=grid,
        params=MaternParams(**meta["matern"]),
        seed=meta["seed"],
        values=np.asarray(meta["values"], dtype=float),
    )

    train, test = [], []
    with (indir / "dataset.csv").open() as fh:
        for row in csv.DictReader(fh):
            rec = (float(row["x"]), float(row["y"]), float(row["mark"]), int(row["a"]))
            (train if row["split"] == "train" else test).append(rec)
    train_arr = np.asarray(train, dtype=float)
    test_arr = np.asarray(test, dtype=float)
    return Dataset(
        train_locs=train_arr[:, :2],
        train_y=train_arr[:, 2],
        train_a=train_arr[:, 3].astype(np.int8),
        test_locs=test_arr[:, :2],
        test_true=test_arr[:, 2],
        truth=truth,
        sim_params=SimParams(
            eta=meta["eta"],
            tau=meta["tau"],
            alpha_sim=meta["alpha_sim"],
            matern=MaternParams(**meta["matern"]),
        ),
        scenario_id=meta.get("scenario_id", ""),
    )


def save_fit(result: FitResult, path: str | Path, extras: dict | None = None) -> Path:
    path = Path(path)
    blob = {
        "model": result.model.value,
        "hyper": dataclasses.asdict(result.hyper_hat),
        "log_evidence": result.log_evidence,
        "converged": result.converged,
        "outer_evals": result.outer_evals,
        "inner_iterations": result.inner_iterations,
        "u_mode": [float(v) for v in result.u_mode],
    }
    if extras:
        blob.update(extras)
    path.write_text(json.dumps(blob, indent=1) + "\n")
    return path


def load_fit(path: str | Path) -> dict:
    """Archived fit as a plain dict; the Hessian factor is not persisted."""
    blob = json.loads(Path(path).read_text())
    blob["model"] = ModelKind(blob["model"])
    blob["hyper"] = HyperParams(**blob["hyper"])
    blob["u_mode"] = np.asarray(blob["u_mode"], dtype=float)
    return blob
