"""Joint negative log-posteriors for the three observation models.

All three share a latent Gaussian field u on the grid nodes and a Gaussian
mark likelihood y_i ~ N(eta + u(s_i), tau^2). They differ in how sampling
locations enter:

- geo: locations carry no information; a homogeneous Poisson process with
  log-intensity beta.
- pref: locations follow a log-Gaussian Cox process with log-intensity
  eta_star + alpha * u(s), discretized to the grid cells.
- mix: each location is tagged a = 1 (preferential component) or a = 0
  (uniform component); tagged points contribute their component's
  point terms, and each component's integral term is weighted by its
  share of the points, so a dataset that is all one tag reduces exactly
  to pref or geo.

The LGCP discretization evaluates the field per cell as the average of the
four corner node values and the integral by the midpoint-style cell sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import cho_solve
from scipy.linalg.lapack import dpotri

from .fields import (
    GridSpec,
    MaternParams,
    bilinear_weights,
    build_cov_matrix,
    cell_corners,
    cholesky_with_jitter,
)
from .sampling import Dataset

__all__ = [
    "ModelKind",
    "HyperParams",
    "CellCounts",
    "active_fields",
    "pack_hyper",
    "unpack_hyper",
    "default_hyper",
    "cell_counts",
    "hyper_prior_nll",
    "DataGeometry",
    "JointPosterior",
    "neg_log_posterior",
    "nlp_grad_u",
    "nlp_hess_u",
]

_LOG2PI = math.log(2.0 * math.pi)

# Vague-but-proper hyperpriors: wide normals on unconstrained intercepts
# and the sharing coefficient, unit-scale normals on log scales centered
# at data-free defaults (quarter-diameter range, unit field SD, 0.3 noise SD).
_INTERCEPT_SD = 10.0
_LOG_SD = 1.0
_LOG_SIGMA_CENTER = 0.0
_LOG_TAU_CENTER = math.log(0.3)


class ModelKind(Enum):
    GEO = "geo"
    PREF = "pref"
    MIX = "mix"


_ACTIVE = {
    ModelKind.GEO: ("eta", "beta", "log_range", "log_sigma", "log_tau"),
    ModelKind.PREF: ("eta", "eta_star", "alpha", "log_range", "log_sigma", "log_tau"),
    ModelKind.MIX: (
        "eta",
        "eta_star",
        "beta",
        "alpha",
        "log_range",
        "log_sigma",
        "log_tau",
    ),
}


def active_fields(kind: ModelKind) -> tuple[str, ...]:
    """Hyperparameter names a model kind actually uses, in packing order."""
    return _ACTIVE[kind]


@dataclass(frozen=True)
class HyperParams:
    """Model hyperparameters; fields a kind does not use stay None.

    eta: mark intercept. eta_star: LGCP log-intensity intercept.
    beta: homogeneous log-intensity. alpha: sharing coefficient between
    the field and the log-intensity. Scale parameters are stored on the
    log scale.
    """

    eta: float
    log_range: float
    log_sigma: float
    log_tau: float
    eta_star: float | None = None
    beta: float | None = None
    alpha: float | None = None

    def __post_init__(self):
        for name in ("eta", "log_range", "log_sigma", "log_tau"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        for name in ("eta_star", "beta", "alpha"):
            v = getattr(self, name)
            if v is not None and not np.isfinite(v):
                raise ValueError(f"{name} must be finite or None")

    @property
    def tau(self) -> float:
        return math.exp(self.log_tau)

    @property
    def sigma(self) -> float:
        return math.exp(self.log_sigma)

    @property
    def spatial_range(self) -> float:
        return math.exp(self.log_range)

    def matern(self, nu: float = 1.0) -> MaternParams:
        return MaternParams(range=self.spatial_range, sigma=self.sigma, nu=nu)


def pack_hyper(h: HyperParams, kind: ModelKind) -> np.ndarray:
    """Vector of the kind's active hyperparameters, in active_fields order."""
    vals = []
    for name in _ACTIVE[kind]:
        v = getattr(h, name)
        if v is None:
            raise ValueError(f"{kind.value} requires {name}")
        vals.append(float(v))
    return np.array(vals)


def unpack_hyper(theta: np.ndarray, kind: ModelKind) -> HyperParams:
    """Inverse of pack_hyper; inactive fields come back None."""
    names = _ACTIVE[kind]
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (len(names),):
        raise ValueError(f"{kind.value} expects {len(names)} parameters")
    return HyperParams(**dict(zip(names, theta)))


def default_hyper(kind: ModelKind, grid: GridSpec) -> HyperParams:
    """Prior-center hyperparameters for a kind, handy as a neutral start."""
    base = dict(
        eta=0.0,
        log_range=math.log(grid.diameter / 4.0),
        log_sigma=_LOG_SIGMA_CENTER,
        log_tau=_LOG_TAU_CENTER,
    )
    for name in _ACTIVE[kind]:
        base.setdefault(name, 0.0)
    return HyperParams(**base)


def hyper_prior_nll(h: HyperParams, grid: GridSpec) -> float:
    """Negative log prior density over the fields present in ``h``.

    Normal priors, constants included: N(0, 10^2) on eta, eta_star, beta,
    alpha; N(center, 1) on the log scales with centers log(diameter/4),
    log(1), log(0.3).
    """

    def normal_nll(v: float, center: float, sd: float) -> float:
        z = (v - center) / sd
        return 0.5 * z * z + math.log(sd) + 0.5 * _LOG2PI

    total = normal_nll(h.eta, 0.0, _INTERCEPT_SD)
    for name in ("eta_star", "beta", "alpha"):
        v = getattr(h, name)
        if v is not None:
            total += normal_nll(v, 0.0, _INTERCEPT_SD)
    total += normal_nll(h.log_range, math.log(grid.diameter / 4.0), _LOG_SD)
    total += normal_nll(h.log_sigma, _LOG_SIGMA_CENTER, _LOG_SD)
    total += normal_nll(h.log_tau, _LOG_TAU_CENTER, _LOG_SD)
    return total


@dataclass(frozen=True)
class CellCounts:
    """Per-cell point counts on the grid's cell lattice."""

    counts: np.ndarray
    n_points: int

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 1 or (c < 0).any():
            raise ValueError("counts must be a 1-D nonnegative array")
        if int(c.sum()) != self.n_points:
            raise ValueError("counts must sum to n_points")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)


def _cell_index(grid: GridSpec, locs: np.ndarray) -> np.ndarray:
    x0, x1, y0, y1 = grid.domain
    x, y = locs[:, 0], locs[:, 1]
    if np.any(x < x0) or np.any(x > x1) or np.any(y < y0) or np.any(y > y1):
        raise ValueError("points fall outside the domain")
    # Points on an interior cell edge belong to the upper/right cell.
    cx = np.minimum(np.floor((x - x0) / grid.dx), grid.nx - 2).astype(np.int64)
    cy = np.minimum(np.floor((y - y0) / grid.dy), grid.ny - 2).astype(np.int64)
    return cy * (grid.nx - 1) + cx


def cell_counts(locs: np.ndarray, grid: GridSpec) -> CellCounts:
    """Count points per grid cell; boundary ties go to the upper/right cell."""
    locs = np.atleast_2d(np.asarray(locs, dtype=float))
    if locs.size == 0:
        return CellCounts(np.zeros(grid.n_cells, dtype=np.int64), 0)
    idx = _cell_index(grid, locs)
    counts = np.bincount(idx, minlength=grid.n_cells)
    return CellCounts(counts, len(locs))


def _canonical_order(d: Dataset) -> np.ndarray:
    """Sort order making assembly independent of observation permutation."""
    return np.lexsort((d.train_a, d.train_y, d.train_locs[:, 1], d.train_locs[:, 0]))


class DataGeometry:
    """Everything about (dataset, grid, kind) that hyperparameters don't touch.

    Precomputed once per fit: sorted observation arrays, the bilinear
    projection onto nodes and its Gram matrix, per-cell counts for the
    kind's point-process parts, and flattened scatter indices for the
    LGCP Hessian block.
    """

    def __init__(self, kind: ModelKind, d: Dataset, grid: GridSpec):
        if d.n_train == 0:
            raise ValueError("dataset has no training observations")
        self.kind = kind
        self.grid = grid
        order = _canonical_order(d)
        self.locs = d.train_locs[order]
        self.y = d.train_y[order]
        self.a = d.train_a[order]
        self.m = len(self.y)
        self.n = grid.n_nodes

        self.nodes, self.weights = bilinear_weights(grid, self.locs)
        ptp = np.zeros((self.n, self.n))
        pair_nodes = (self.nodes[:, :, None] * self.n + self.nodes[:, None, :]).ravel()
        pair_w = (self.weights[:, :, None] * self.weights[:, None, :]).ravel()
        np.add.at(ptp.reshape(-1), pair_nodes, pair_w)
        self.ptp = ptp

        self.corners = cell_corners(grid)
        corner_pairs = (
            self.corners[:, :, None] * self.n + self.corners[:, None, :]
        ).reshape(grid.n_cells, 16)
        self.corner_pairs = np.ascontiguousarray(corner_pairs)

        n_all = self.m
        n_pref = int(self.a.sum())
        n_unif = n_all - n_pref
        if kind is ModelKind.GEO:
            self.lgcp_counts = None
            self.lgcp_weight = 0.0
            self.homog_count = n_all
            self.homog_weight = 1.0
        elif kind is ModelKind.PREF:
            self.lgcp_counts = cell_counts(self.locs, grid).counts
            self.lgcp_weight = 1.0
            self.homog_count = 0
            self.homog_weight = 0.0
        else:
            pref_locs = self.locs[self.a == 1]
            self.lgcp_counts = cell_counts(pref_locs, grid).counts
            self.lgcp_weight = n_pref / n_all
            self.homog_count = n_unif
            self.homog_weight = n_unif / n_all


class JointPosterior:
    """Negative log-posterior of the latent field for fixed hyperparameters.

    Exposes the value and its analytic gradient and Hessian in u. The
    field-prior inverse covariance is formed lazily (Hessians only);
    value and gradient use triangular solves against the Cholesky factor.
    """

    def __init__(
        self,
        kind: ModelKind,
        h: HyperParams,
        geom: DataGeometry,
        nu: float = 1.0,
    ):
        if geom.kind is not kind:
            raise ValueError("geometry was built for a different model kind")
        pack_hyper(h, kind)  # validates required fields are present
        self.kind = kind
        self.h = h
        self.geom = geom
        self.grid = geom.grid
        cov = build_cov_matrix(self.grid, h.matern(nu))
        self._chol_cov, _ = cholesky_with_jitter(cov, h.sigma**2)
        self.logdet_cov = 2.0 * float(np.log(np.diag(self._chol_cov)).sum())
        self._cov_inv = None
        self._tau2 = h.tau**2
        self._hyper_nll = hyper_prior_nll(h, self.grid)
        self._y_centered = geom.y - h.eta

    # -- pieces -----------------------------------------------------------

    def _residuals(self, u: np.ndarray) -> np.ndarray:
        g = self.geom
        return self._y_centered - (u[g.nodes] * g.weights).sum(axis=1)

    def _cell_log_intensity(self, u: np.ndarray) -> np.ndarray:
        g = self.geom
        ubar = u[g.corners].mean(axis=1)
        return self.h.eta_star + self.h.alpha * ubar

    def cov_inverse(self) -> np.ndarray:
        if self._cov_inv is None:
            inv_tri, info = dpotri(self._chol_cov, lower=1)
            if info != 0:  # pragma: no cover - factor already validated
                raise np.linalg.LinAlgError("dpotri failed")
            self._cov_inv = np.tril(inv_tri) + np.tril(inv_tri, -1).T
        return self._cov_inv

    # -- value / grad / hess ----------------------------------------------

    def value(self, u: np.ndarray) -> float:
        g = self.geom
        h = self.h
        r = self._residuals(u)
        val = (
            0.5 * float(r @ r) / self._tau2
            + g.m * h.log_tau
            + 0.5 * g.m * _LOG2PI
        )

        if g.lgcp_counts is not None:
            if g.lgcp_weight == 0.0:
                pp = 0.0
            else:
                s = self._cell_log_intensity(u)
                with np.errstate(over="ignore"):
                    integral = g.lgcp_weight * self.grid.cell_area * float(np.exp(s).sum())
                pp = -float(g.lgcp_counts @ s) + integral
        else:
            pp = 0.0
        if g.homog_weight != 0.0:
            if h.beta > 700.0:  # exp would overflow; reject this point
                pp += math.inf
            else:
                pp += (
                    -g.homog_count * h.beta
                    + g.homog_weight * math.exp(h.beta) * self.grid.area
                )
        val += pp

        alpha_u = cho_solve((self._chol_cov, True), u)
        val += 0.5 * float(u @ alpha_u) + 0.5 * self.logdet_cov + 0.5 * g.n * _LOG2PI
        val += self._hyper_nll
        if math.isnan(val):
            return math.inf
        return val

    def grad(self, u: np.ndarray) -> np.ndarray:
        g = self.geom
        h = self.h
        r = self._residuals(u)
        grad = cho_solve((self._chol_cov, True), u)
        grad -= np.bincount(
            g.nodes.ravel(),
            weights=(g.weights * (r / self._tau2)[:, None]).ravel(),
            minlength=g.n,
        )
        if g.lgcp_counts is not None and g.lgcp_weight != 0.0:
            s = self._cell_log_intensity(u)
            cell_g = 0.25 * h.alpha * (
                g.lgcp_weight * self.grid.cell_area * np.exp(s) - g.lgcp_counts
            )
            grad += np.bincount(
                g.corners.ravel(),
                weights=np.repeat(cell_g, 4),
                minlength=g.n,
            )
        return grad

    def hess(self, u: np.ndarray) -> np.ndarray:
        g = self.geom
        h = self.h
        H = self.cov_inverse() + g.ptp / self._tau2
        if g.lgcp_counts is not None and g.lgcp_weight != 0.0:
            s = self._cell_log_intensity(u)
            cell_w = (
                h.alpha**2 * g.lgcp_weight * self.grid.cell_area / 16.0
            ) * np.exp(s)
            np.add.at(
                H.reshape(-1), g.corner_pairs.ravel(), np.repeat(cell_w, 16)
            )
        return H

    def hess_chol(self, u: np.ndarray) -> np.ndarray:
        H = self.hess(u)
        scale = float(np.mean(np.diag(H)))
        L, _ = cholesky_with_jitter(H, scale)
        return L


def _validate_u(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.n_nodes,):
        raise ValueError(f"u must have shape ({grid.n_nodes},)")
    if not np.all(np.isfinite(u)):
        raise ValueError("u must be finite")
    return u


def neg_log_posterior(
    kind: ModelKind,
    h: HyperParams,
    u: np.ndarray,
    d: Dataset,
    grid: GridSpec,
    nu: float = 1.0,
) -> float:
    """Joint negative log-posterior density at latent field u.

    Sum of the mark likelihood, the kind's point-process likelihood, the
    Gaussian field prior, and the hyperprior, all with their constants.
    """
    u = _validate_u(u, grid)
    post = JointPosterior(kind, h, DataGeometry(kind, d, grid), nu=nu)
    val = post.value(u)
    if not np.isfinite(val):
        raise FloatingPointError("negative log-posterior is not finite")
    return val


def nlp_grad_u(
    kind: ModelKind,
    h: HyperParams,
    u: np.ndarray,
    d: Dataset,
    grid: GridSpec,
    nu: float = 1.0,
) -> np.ndarray:
    """Gradient of neg_log_posterior with respect to u."""
    u = _validate_u(u, grid)
    post = JointPosterior(kind, h, DataGeometry(kind, d, grid), nu=nu)
    out = post.grad(u)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("gradient is not finite")
    return out


def nlp_hess_u(
    kind: ModelKind,
    h: HyperParams,
    u: np.ndarray,
    d: Dataset,
    grid: GridSpec,
    nu: float = 1.0,
) -> np.ndarray:
    """Hessian of neg_log_posterior with respect to u (dense, symmetric)."""
    u = _validate_u(u, grid)
    post = JointPosterior(kind, h, DataGeometry(kind, d, grid), nu=nu)
    out = post.hess(u)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("Hessian is not finite")
    return out
