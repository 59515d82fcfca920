"""Model-comparison metrics: WAIC, out-of-sample RMSE, abundance integration.

WAIC works on the shared mark layer only (the point-process terms are
excluded from the pointwise likelihoods) so the three model kinds are
compared on the same per-observation quantity. The abundance surface is
exp(eta + u): marks use an identity link, but the integration needs a
positive surface, and the same functional is applied to truth and
estimates so the ratio stays internally consistent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp

from .fields import GridSpec, bilinear_weights, cell_corners
from .inference import FitResult
from .sampling import Dataset

__all__ = [
    "WaicResult",
    "ScenarioResult",
    "mark_loglik_matrix",
    "waic",
    "rmse",
    "abundance",
]

_LOG2PI = math.log(2.0 * math.pi)


class WaicResult(NamedTuple):
    waic: float
    p_eff: float


def mark_loglik_matrix(
    fit_result: FitResult, d: Dataset, grid: GridSpec, draws: np.ndarray
) -> np.ndarray:
    """(n_draws, n_obs) pointwise mark log-likelihoods under field draws.

    Entry (s, i) is log N(y_i; eta_hat + u_s(s_i), tau_hat^2) for draw s.
    """
    draws = np.asarray(draws, dtype=float)
    if draws.ndim != 2 or draws.shape[1] != grid.n_nodes:
        raise ValueError("draws must have shape (n_draws, n_nodes)")
    nodes, weights = bilinear_weights(grid, d.train_locs)
    surf = np.einsum("smk,mk->sm", draws[:, nodes], weights)
    h = fit_result.hyper_hat
    resid = d.train_y[None, :] - h.eta - surf
    tau = h.tau
    out = -0.5 * (resid / tau) ** 2 - math.log(tau) - 0.5 * _LOG2PI
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("log-likelihood matrix has non-finite entries")
    return out


def waic(loglik: np.ndarray) -> WaicResult:
    """WAIC and effective parameter count from a pointwise log-lik matrix.

    lppd_i uses a stable log-sum-exp over draws; p_eff sums the unbiased
    per-observation variances; waic = -2 (lppd - p_eff).
    """
    L = np.asarray(loglik, dtype=float)
    if L.ndim != 2:
        raise ValueError("loglik must be a 2-D (draws, observations) matrix")
    if L.shape[0] < 2:
        raise ValueError("waic needs at least 2 draws")
    if not np.all(np.isfinite(L)):
        raise ValueError("loglik entries must be finite")
    n_draws = L.shape[0]
    lppd = float((logsumexp(L, axis=0) - math.log(n_draws)).sum())
    p_eff = float(L.var(axis=0, ddof=1).sum())
    return WaicResult(waic=-2.0 * (lppd - p_eff), p_eff=p_eff)


def rmse(pred: np.ndarray, truth: np.ndarray) -> float:
    """Root mean squared difference between two equal-length vectors."""
    p = np.asarray(pred, dtype=float)
    t = np.asarray(truth, dtype=float)
    if p.shape != t.shape or p.ndim != 1 or len(p) < 1:
        raise ValueError("pred and truth must be equal-length vectors")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def abundance(surface_values: np.ndarray, eta: float, grid: GridSpec) -> float:
    """Integral of exp(eta + u) over the domain by the cell-sum quadrature.

    ``surface_values`` holds node values of u: a single (n_nodes,) surface,
    or a (n_draws, n_nodes) matrix, in which case the posterior-mean
    abundance over draws is returned.
    """
    vals = np.asarray(surface_values, dtype=float)
    if vals.shape[-1] != grid.n_nodes:
        raise ValueError("surface values must live on the grid nodes")
    if vals.ndim not in (1, 2):
        raise ValueError("surface values must be 1-D or 2-D")
    corners = cell_corners(grid)
    ubar = vals[..., corners].mean(axis=-1)
    with np.errstate(over="ignore"):
        per = np.exp(eta + ubar).sum(axis=-1) * grid.cell_area
    total = float(per) if vals.ndim == 1 else float(per.mean())
    if not math.isfinite(total):
        raise FloatingPointError("abundance integral overflowed")
    return total


@dataclass(frozen=True)
class ScenarioResult:
    """Metrics for one (scenario, model) run, one row of the results archive."""

    scenario_id: str
    model: str
    spatial_range: float
    prop_random: float
    n_total: int
    replicate: int
    waic: float
    p_eff: float
    rmse: float
    abundance_ratio: float
    log_evidence: float
    converged: bool

    def __post_init__(self):
        if math.isfinite(self.rmse) and self.rmse < 0:
            raise ValueError("rmse must be >= 0")
        if math.isfinite(self.abundance_ratio) and self.abundance_ratio <= 0:
            raise ValueError("abundance_ratio must be > 0")

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "model": self.model,
            "spatial_range": self.spatial_range,
            "prop_random": self.prop_random,
            "n_total": self.n_total,
            "replicate": self.replicate,
            "waic": self.waic,
            "p_eff": self.p_eff,
            "rmse": self.rmse,
            "abundance_ratio": self.abundance_ratio,
            "log_evidence": self.log_evidence,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, row: dict) -> "ScenarioResult":
        return cls(
            scenario_id=row["scenario_id"],
            model=row["model"],
            spatial_range=float(row["spatial_range"]),
            prop_random=float(row["prop_random"]),
            n_total=int(row["n_total"]),
            replicate=int(row["replicate"]),
            waic=float(row["waic"]),
            p_eff=float(row["p_eff"]),
            rmse=float(row["rmse"]),
            abundance_ratio=float(row["abundance_ratio"]),
            log_evidence=float(row["log_evidence"]),
            converged=bool(row["converged"]),
        )
