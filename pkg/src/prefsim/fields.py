"""Gaussian random fields with Matern covariance on a regular grid.

The latent surface lives on the nodes of a regular rectangular grid over a
continuous domain. Off-node values come from bilinear interpolation, so a
field realization defines a continuous surface on the whole domain.

The Matern kernel uses the practical-range convention: ``range`` is the
distance at which correlation has decayed to 0.1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import cho_solve, cholesky
from scipy.optimize import brentq
from scipy.special import gammaln, kv

__all__ = [
    "GridSpec",
    "MaternParams",
    "FieldRealization",
    "FactorizationError",
    "matern_cov",
    "matern_scale_factor",
    "build_cov_matrix",
    "cholesky_with_jitter",
    "sample_field",
    "bilinear_weights",
    "interpolate",
]

_LOG2 = math.log(2.0)


class FactorizationError(np.linalg.LinAlgError):
    """Raised when a matrix stays non-positive-definite through the jitter schedule."""


@dataclass(frozen=True)
class GridSpec:
    """Regular grid of latent nodes over a rectangular domain.

    Nodes are laid out row-major: node ``k`` sits at column ``k % nx`` and
    row ``k // nx``. Cells are the ``(nx-1)*(ny-1)`` rectangles between
    adjacent nodes, indexed row-major as well.
    """

    nx: int
    ny: int
    domain: tuple[float, float, float, float] = (0.0, 1.0, 0.0, 1.0)

    def __post_init__(self):
        if not (isinstance(self.nx, int) and isinstance(self.ny, int)):
            raise ValueError("nx and ny must be integers")
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs at least 2 nodes per axis")
        x0, x1, y0, y1 = self.domain
        if not (x1 > x0 and y1 > y0):
            raise ValueError("domain must have positive extent")

    @property
    def n_nodes(self) -> int:
        return self.nx * self.ny

    @property
    def n_cells(self) -> int:
        return (self.nx - 1) * (self.ny - 1)

    @property
    def dx(self) -> float:
        x0, x1, _, _ = self.domain
        return (x1 - x0) / (self.nx - 1)

    @property
    def dy(self) -> float:
        _, _, y0, y1 = self.domain
        return (y1 - y0) / (self.ny - 1)

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def area(self) -> float:
        x0, x1, y0, y1 = self.domain
        return (x1 - x0) * (y1 - y0)

    @property
    def diameter(self) -> float:
        x0, x1, y0, y1 = self.domain
        return math.hypot(x1 - x0, y1 - y0)

    def node_coords(self) -> np.ndarray:
        """(n_nodes, 2) array of node locations, row-major."""
        return _node_coords(self)


@lru_cache(maxsize=64)
def _node_coords(grid: GridSpec) -> np.ndarray:
    x0, x1, y0, y1 = grid.domain
    xs = np.linspace(x0, x1, grid.nx)
    ys = np.linspace(y0, y1, grid.ny)
    coords = np.column_stack(
        [np.tile(xs, grid.ny), np.repeat(ys, grid.nx)]
    )
    coords.setflags(write=False)
    return coords


@lru_cache(maxsize=64)
def _distance_index(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Unique node-pair distances and the (n, n) index map into them.

    On a regular grid the pairwise distance depends only on the absolute
    index offsets, so at most nx*ny distinct distances occur among n^2
    pairs. Kernel evaluations then run on the unique set only.
    """
    n = grid.n_nodes
    ix = np.arange(n) % grid.nx
    iy = np.arange(n) // grid.nx
    ddx = np.abs(ix[:, None] - ix[None, :])
    ddy = np.abs(iy[:, None] - iy[None, :])
    idx = (ddx * grid.ny + ddy).astype(np.int32)
    kx = np.arange(grid.nx) * grid.dx
    ky = np.arange(grid.ny) * grid.dy
    uniq = np.hypot(kx[:, None], ky[None, :]).ravel()
    uniq.setflags(write=False)
    idx.setflags(write=False)
    return uniq, idx


@lru_cache(maxsize=64)
def cell_corners(grid: GridSpec) -> np.ndarray:
    """(n_cells, 4) node indices of each cell's corners.

    Corner order: lower-left, lower-right, upper-left, upper-right.
    """
    cx = np.arange(grid.nx - 1)
    cy = np.arange(grid.ny - 1)
    ll = (cy[:, None] * grid.nx + cx[None, :]).ravel()
    corners = np.column_stack([ll, ll + 1, ll + grid.nx, ll + grid.nx + 1])
    corners.setflags(write=False)
    return corners


@dataclass(frozen=True)
class MaternParams:
    """Matern kernel parameters.

    ``range`` is the practical range: the distance at which correlation
    equals 0.1. ``sigma`` is the marginal standard deviation, ``nu`` the
    smoothness.
    """

    range: float
    sigma: float
    nu: float = 1.0

    def __post_init__(self):
        for name in ("range", "sigma", "nu"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0")


@lru_cache(maxsize=256)
def matern_scale_factor(nu: float) -> float:
    """Solve for c such that the Matern correlation at x = c equals 0.1.

    Distances are then rescaled by range/c, giving correlation 0.1 at the
    practical range. For nu = 0.5 this is log(10) exactly (exponential
    kernel).
    """
    if nu == 0.5:
        return math.log(10.0)

    def corr(x: float) -> float:
        return _matern_corr_scalar(x, nu) - 0.1

    hi = 1.0
    while corr(hi) > 0:
        hi *= 2.0
        if hi > 1e6:  # pragma: no cover - kernel correlation always decays
            raise RuntimeError("failed to bracket practical-range scale")
    return brentq(corr, 1e-12, hi, xtol=1e-14, rtol=1e-15)


def _matern_corr_scalar(x: float, nu: float) -> float:
    if x <= 0:
        return 1.0
    lg = (1.0 - nu) * _LOG2 - gammaln(nu) + nu * math.log(x)
    val = math.exp(lg) * kv(nu, x)
    return float(val)


def matern_cov(d, params: MaternParams):
    """Matern covariance at distance(s) ``d``.

    Parameters
    ----------
    d : float or ndarray
        Nonnegative distances.
    params : MaternParams

    Returns
    -------
    float or ndarray, covariance values; sigma^2 at d = 0, monotone
    decreasing in d, and equal to 0.1 * sigma^2 at d = range.
    """
    d_arr = np.asarray(d, dtype=float)
    if not np.all(np.isfinite(d_arr)):
        raise ValueError("distances must be finite")
    if np.any(d_arr < 0):
        raise ValueError("distances must be nonnegative")
    c = matern_scale_factor(params.nu)
    x = d_arr * (c / params.range)
    nu = params.nu
    amp = math.exp((1.0 - nu) * _LOG2 - gammaln(nu))
    with np.errstate(invalid="ignore", over="ignore", divide="ignore", under="ignore"):
        corr = amp * np.power(x, nu) * kv(nu, x)
        corr = np.where(x > 0, corr, 1.0)
    bad = ~np.isfinite(corr)
    if np.any(bad):
        # x^nu underflow / K_nu overflow happen only so close to zero that
        # the correlation is 1 to double precision; anything else is a
        # genuine numeric failure
        tiny = bad & (x < 1.0)
        corr = np.where(tiny, 1.0, corr)
        if np.any(bad & ~tiny):
            raise FloatingPointError("Matern evaluation left double range")
    out = params.sigma**2 * corr
    if d_arr.ndim == 0:
        return float(out)
    return out


def build_cov_matrix(grid: GridSpec, params: MaternParams) -> np.ndarray:
    """Dense (n, n) covariance matrix over the grid nodes.

    Exactly symmetric by construction: entries are gathered from the
    kernel evaluated once per unique node-pair distance.
    """
    uniq, idx = _distance_index(grid)
    vals = matern_cov(uniq, params)
    return vals[idx]


def cholesky_with_jitter(mat: np.ndarray, scale: float) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor, adding escalating diagonal jitter on failure.

    Jitter steps through 0, then 1e-10 * scale up to 1e-6 * scale in
    factors of 10. Raises FactorizationError if all attempts fail.

    Returns (L, jitter_used).
    """
    jitters = [0.0] + [1e-10 * scale * 10.0**k for k in range(5)]
    n = mat.shape[0]
    for jit in jitters:
        try:
            if jit == 0.0:
                return cholesky(mat, lower=True), 0.0
            return cholesky(mat + jit * np.eye(n), lower=True), jit
        except np.linalg.LinAlgError:
            continue
    raise FactorizationError(
        f"matrix not positive definite after jitter up to {jitters[-1]:.3e}"
    )


@dataclass(frozen=True)
class FieldRealization:
    """A sampled latent surface: node values plus everything that made it."""

    grid: GridSpec
    params: MaternParams
    seed: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_nodes,):
            raise ValueError(
                f"values must have shape ({self.grid.n_nodes},), got {vals.shape}"
            )
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


def sample_field(grid: GridSpec, params: MaternParams, seed: int) -> FieldRealization:
    """Draw one zero-mean realization of the field at the grid nodes.

    Uses a counter-based generator keyed by ``seed``; identical inputs
    reproduce bit-identical values.
    """
    cov = build_cov_matrix(grid, params)
    L, _ = cholesky_with_jitter(cov, params.sigma**2)
    rng = np.random.Generator(np.random.Philox(seed))
    z = rng.standard_normal(grid.n_nodes)
    return FieldRealization(grid=grid, params=params, seed=seed, values=L @ z)


def bilinear_weights(grid: GridSpec, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Corner node indices and bilinear weights for points in the domain.

    Parameters
    ----------
    points : (m, 2) ndarray inside the closed domain.

    Returns
    -------
    nodes : (m, 4) int ndarray, corner node indices per point.
    weights : (m, 4) ndarray, nonnegative, each row summing to 1.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must have shape (m, 2)")
    x0, x1, y0, y1 = grid.domain
    x, y = pts[:, 0], pts[:, 1]
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    if np.any(x < x0) or np.any(x > x1) or np.any(y < y0) or np.any(y > y1):
        raise ValueError("points fall outside the domain")
    tx = (x - x0) / grid.dx
    ty = (y - y0) / grid.dy
    cx = np.minimum(np.floor(tx), grid.nx - 2).astype(np.int64)
    cy = np.minimum(np.floor(ty), grid.ny - 2).astype(np.int64)
    fx = tx - cx
    fy = ty - cy
    ll = cy * grid.nx + cx
    nodes = np.column_stack([ll, ll + 1, ll + grid.nx, ll + grid.nx + 1])
    weights = np.column_stack(
        [(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy]
    )
    return nodes, weights


def interpolate(realization: FieldRealization, points) -> np.ndarray | float:
    """Bilinear interpolation of the field surface at ``points``.

    A single (2,) point returns a float; an (m, 2) array returns an (m,)
    array. Points outside the domain raise ValueError.
    """
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    nodes, weights = bilinear_weights(realization.grid, pts)
    vals = (realization.values[nodes] * weights).sum(axis=1)
    if single:
        return float(vals[0])
    return vals
