"""Sampling designs and synthetic dataset assembly.

Two designs over the domain: uniform (completely random) and preferential,
where the point density is proportional to exp(alpha * u(s)) for the latent
surface u. Marks are the surface plus the mark intercept and iid Gaussian
noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .fields import FieldRealization, GridSpec, MaternParams, interpolate, sample_field
from .scenarios import ScenarioSpec, derive_seed

__all__ = [
    "SimParams",
    "Observation",
    "Dataset",
    "uniform_points",
    "preferential_points",
    "generate_marks",
    "round_half_up",
    "make_dataset",
]


def round_half_up(x: float) -> int:
    """Round to nearest integer with .5 going up."""
    return int(math.floor(x + 0.5))


def _generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def uniform_points(n: int, grid: GridSpec, seed: int) -> np.ndarray:
    """(n, 2) points uniform over the grid's domain; n = 0 gives an empty array."""
    if n < 0:
        raise ValueError("n must be >= 0")
    x0, x1, y0, y1 = grid.domain
    rng = _generator(seed)
    pts = rng.random((n, 2))
    pts[:, 0] = x0 + pts[:, 0] * (x1 - x0)
    pts[:, 1] = y0 + pts[:, 1] * (y1 - y0)
    return pts


def preferential_points(
    n: int, realization: FieldRealization, alpha: float, seed: int
) -> np.ndarray:
    """(n, 2) points with density proportional to exp(alpha * u(s)).

    Rejection sampling against a constant envelope. The interpolated
    surface is a convex combination of node values, so the envelope
    max over nodes of alpha * u is exact and acceptance never exceeds 1.
    With alpha = 0 every proposal is accepted and the result is uniform.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if not np.isfinite(alpha):
        raise ValueError("alpha must be finite")
    g = alpha * realization.values
    if not np.all(np.isfinite(g)):
        raise FloatingPointError("non-finite rejection envelope")
    log_env = float(g.max()) if g.size else 0.0
    grid = realization.grid
    x0, x1, y0, y1 = grid.domain
    rng = _generator(seed)
    out = np.empty((n, 2))
    filled = 0
    chunk = max(4 * n, 256)
    while filled < n:
        raw = rng.random((chunk, 3))
        pts = np.column_stack(
            [x0 + raw[:, 0] * (x1 - x0), y0 + raw[:, 1] * (y1 - y0)]
        )
        logp = alpha * interpolate(realization, pts) - log_env
        keep = raw[:, 2] < np.exp(logp)
        take = min(int(keep.sum()), n - filled)
        out[filled : filled + take] = pts[keep][:take]
        filled += take
    return out


def generate_marks(
    locations: np.ndarray,
    realization: FieldRealization,
    eta: float,
    tau: float,
    seed: int,
) -> np.ndarray:
    """Marks y_i = eta + u(s_i) + eps_i with eps iid N(0, tau^2).

    tau = 0 returns the noiseless surface values plus intercept.
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    locs = np.atleast_2d(np.asarray(locations, dtype=float))
    u = interpolate(realization, locs)
    rng = _generator(seed)
    return eta + u + tau * rng.standard_normal(len(locs))


class Observation(NamedTuple):
    x: float
    y: float
    mark: float
    a: int


@dataclass(frozen=True)
class SimParams:
    """The generating constants behind a synthetic dataset."""

    eta: float
    tau: float
    alpha_sim: float
    matern: MaternParams


@dataclass(frozen=True)
class Dataset:
    """Training observations, held-out test locations, and the truth behind them.

    ``train_a`` flags the design of each training point: 1 preferential,
    0 uniform. Test locations are uniform, disjoint from training
    coordinates, with noiseless surface values for scoring.
    """

    train_locs: np.ndarray
    train_y: np.ndarray
    train_a: np.ndarray
    test_locs: np.ndarray
    test_true: np.ndarray
    truth: FieldRealization
    sim_params: SimParams
    scenario_id: str = ""

    def __post_init__(self):
        locs = np.asarray(self.train_locs, dtype=float)
        y = np.asarray(self.train_y, dtype=float)
        a = np.asarray(self.train_a, dtype=np.int8)
        tl = np.asarray(self.test_locs, dtype=float)
        tt = np.asarray(self.test_true, dtype=float)
        if locs.ndim != 2 or locs.shape[1] != 2:
            raise ValueError("train_locs must have shape (m, 2)")
        if y.shape != (len(locs),) or a.shape != (len(locs),):
            raise ValueError("train_y and train_a must match train_locs length")
        if not np.isin(a, (0, 1)).all():
            raise ValueError("train_a entries must be 0 or 1")
        if tl.ndim != 2 or tl.shape[1] != 2 or tt.shape != (len(tl),):
            raise ValueError("test arrays inconsistent")
        for name, arr in (("train_locs", locs), ("train_y", y),
                          ("train_a", a), ("test_locs", tl), ("test_true", tt)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_train(self) -> int:
        return len(self.train_y)

    @property
    def n_pref(self) -> int:
        return int(self.train_a.sum())

    def observations(self) -> list[Observation]:
        return [
            Observation(float(sx), float(sy), float(m), int(ai))
            for (sx, sy), m, ai in zip(self.train_locs, self.train_y, self.train_a)
        ]


def _uniform_disjoint(
    n: int, grid: GridSpec, seed: int, taken: np.ndarray
) -> np.ndarray:
    """Uniform points whose coordinates never exactly equal a taken point."""
    rng = _generator(seed)
    x0, x1, y0, y1 = grid.domain
    seen = {(float(px), float(py)) for px, py in np.atleast_2d(taken)}
    out = np.empty((n, 2))
    filled = 0
    while filled < n:
        raw = rng.random((max(n, 64), 2))
        raw[:, 0] = x0 + raw[:, 0] * (x1 - x0)
        raw[:, 1] = y0 + raw[:, 1] * (y1 - y0)
        for px, py in raw:
            if (float(px), float(py)) in seen:
                continue
            out[filled] = (px, py)
            seen.add((float(px), float(py)))
            filled += 1
            if filled == n:
                break
    return out


def make_dataset(spec: ScenarioSpec, master_seed: int) -> Dataset:
    """Simulate one complete dataset for a scenario.

    Draws the latent field, places round_half_up(n_total * (1 - prop_random))
    preferential points and the remainder uniformly, generates marks for
    all of them, and lays out disjoint uniform test locations with
    noiseless values of the true surface.
    """
    matern = MaternParams(range=spec.spatial_range, sigma=spec.sigma, nu=spec.nu)
    truth = sample_field(spec.grid, matern, derive_seed(master_seed, spec, "field"))

    n_pref = round_half_up(spec.n_total * (1.0 - spec.prop_random))
    n_unif = spec.n_total - n_pref
    pref = preferential_points(
        n_pref, truth, spec.alpha_sim, derive_seed(master_seed, spec, "pref")
    )
    unif = uniform_points(n_unif, spec.grid, derive_seed(master_seed, spec, "uniform"))
    locs = np.vstack([pref, unif])
    a = np.concatenate([np.ones(n_pref, dtype=np.int8), np.zeros(n_unif, dtype=np.int8)])
    y = generate_marks(
        locs, truth, spec.eta, spec.tau, derive_seed(master_seed, spec, "marks")
    )

    test_locs = _uniform_disjoint(
        spec.n_test, spec.grid, derive_seed(master_seed, spec, "test"), locs
    )
    test_true = spec.eta + interpolate(truth, test_locs)

    return Dataset(
        train_locs=locs,
        train_y=y,
        train_a=a,
        test_locs=test_locs,
        test_true=test_true,
        truth=truth,
        sim_params=SimParams(
            eta=spec.eta, tau=spec.tau, alpha_sim=spec.alpha_sim, matern=matern
        ),
        scenario_id=spec.scenario_id,
    )
