"""Kinetic functions and kinetic measures assembled from computed solutions.

The nonlocal part ``m1`` pairs every cell ``i`` with every offset ``j``.  The
pair contributes mass ``W_j (u_i - u_{i+j})^2 / 2`` at ``x_i``, spread along
``xi = (1 - tau) u_i + tau u_{i+j}``.  By default tau follows the law of the
integral Taylor remainder (density ``2 (1 - tau)``), which is the exact
localization.  ``placement="midpoint"`` puts the whole pair mass at tau = 1/2
instead.  The viscous part ``m2`` is ``eps |u_x|^2 delta_{xi = u}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BracketError, ShapeError, UnusableTrajectoryError
from .fractional import QuadratureSpec, quadrature_weights, spectral_jump_weights
from .grid import Field, Grid


@dataclass(frozen=True)
class XiGrid:
    xi_min: float
    xi_max: float
    B: int

    def __post_init__(self):
        if not self.xi_max > self.xi_min:
            raise ValueError("xi_max must exceed xi_min")
        if self.B < 1:
            raise ValueError("need at least one xi bin")

    @property
    def dxi(self) -> float:
        return (self.xi_max - self.xi_min) / self.B

    @property
    def edges(self) -> np.ndarray:
        return self.xi_min + self.dxi * np.arange(self.B + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.xi_min + self.dxi * (np.arange(self.B) + 0.5)

    @classmethod
    def bracketing(cls, umin: float, umax: float, dxi: float, margin_bins: int = 2):
        """Grid of spacing ``dxi`` aligned to multiples of ``dxi``, with empty margin bins."""
        lo = (math.floor(umin / dxi) - margin_bins) * dxi
        hi = (math.ceil(umax / dxi) + margin_bins) * dxi
        return cls(lo, hi, int(round((hi - lo) / dxi)))

    def check_brackets(self, values) -> None:
        v = np.asarray(values)
        if v.size and (v.min() < self.xi_min or v.max() > self.xi_max):
            raise BracketError(
                f"values in [{v.min():.6g}, {v.max():.6g}] escape xi grid "
                f"[{self.xi_min:.6g}, {self.xi_max:.6g}]")

    def bin_of(self, values) -> np.ndarray:
        idx = np.floor((np.asarray(values) - self.xi_min) / self.dxi).astype(int)
        return np.clip(idx, 0, self.B - 1)

    def cell_fraction(self, values) -> np.ndarray:
        """Bin averages of ``1_{v > xi}``; shape ``values.shape + (B,)``."""
        v = np.asarray(values, dtype=float)[..., None]
        return np.clip((v - self.edges[:-1]) / self.dxi, 0.0, 1.0)


def kinetic_function(u_value, xi):
    """``chi_u(xi) = 1_{0 < xi < u} - 1_{u < xi < 0}``."""
    u = np.asarray(u_value, dtype=float)
    x = np.asarray(xi, dtype=float)
    out = np.where((x > 0) & (x < u), 1, 0) - np.where((x < 0) & (x > u), 1, 0)
    return out.astype(int) if out.ndim else int(out)


def _circulant(w: np.ndarray) -> np.ndarray:
    n = w.size
    idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
    return w[idx]


def _ramp_deposit(u: np.ndarray, w: np.ndarray, xi: XiGrid) -> np.ndarray:
    """Per-cell bin masses of ``sum_j w_j * ramp`` densities.

    For the pair ``(i, i+j)`` the density on ``[u_i, u_{i+j}]`` is
    ``w_j |xi - u_{i+j}|``: the remainder law of tau.  It is integrated
    exactly (piecewise linear between knots) with nonnegative terms only.
    """
    Wm = _circulant(w)
    pts = np.unique(np.concatenate([xi.edges, u]))
    up = Wm @ np.maximum(u[:, None] - pts[None, :], 0.0)
    down = Wm @ np.maximum(pts[None, :] - u[:, None], 0.0)
    left = pts[:-1]
    side_up = left[None, :] >= u[:, None]
    h_lo = np.where(side_up, up[:, :-1], down[:, :-1])
    h_hi = np.where(side_up, up[:, 1:], down[:, 1:])
    seg = 0.5 * np.diff(pts)[None, :] * (h_lo + h_hi)
    starts = np.searchsorted(pts, xi.edges[:-1])
    return np.add.reduceat(seg, starts, axis=1)


def _midpoint_deposit(u: np.ndarray, w: np.ndarray, xi: XiGrid) -> np.ndarray:
    n = u.size
    Wm = _circulant(w)
    uj = u[None, :]
    ui = u[:, None]
    mass = 0.5 * Wm * (ui - uj) ** 2
    bins = xi.bin_of(0.5 * (ui + uj))
    flat = (np.arange(n)[:, None] * xi.B + bins).ravel()
    return np.bincount(flat, weights=mass.ravel(), minlength=n * xi.B).reshape(n, xi.B)


def m1_weights(grid: Grid, alpha, spec: QuadratureSpec = QuadratureSpec(),
               kernel: str = "quadrature") -> np.ndarray:
    if kernel == "quadrature":
        return np.asarray(quadrature_weights(grid, alpha, spec))
    if kernel == "spectral":
        return spectral_jump_weights(grid, alpha)
    raise ValueError(f"unknown kernel {kernel!r}")


def compute_m1(u: Field, alpha, spec: QuadratureSpec = QuadratureSpec(), xi: XiGrid = None,
               placement: str = "remainder", kernel: str = "quadrature",
               weights: np.ndarray | None = None) -> np.ndarray:
    """Nonlocal kinetic measure of one time slice, per unit time.

    Returns an ``(N, B)`` array: mass in x-cell ``i`` and xi-bin ``b``,
    including the cell width.  The total equals
    ``dx * sum_{i,j} W_j (u_i - u_{i+j})^2 / 2``.
    """
    if xi is None:
        raise ValueError("compute_m1 needs an XiGrid")
    xi.check_brackets(u.values)
    w = m1_weights(u.grid, alpha, spec, kernel) if weights is None else np.asarray(weights)
    if placement == "remainder":
        out = _ramp_deposit(u.values, w, xi)
    elif placement == "midpoint":
        out = _midpoint_deposit(u.values, w, xi)
    else:
        raise ValueError(f"unknown placement {placement!r}")
    return u.grid.dx * out


def compute_m2(u: Field, epsilon: float, xi: XiGrid, placement: str = "gradient") -> np.ndarray:
    """Viscous kinetic measure ``eps |u_x|^2 delta_{xi = u}`` per unit time, ``(N, B)``.

    ``gradient`` deposits ``eps ((u_{i+1} - u_{i-1}) / 2dx)^2 dx`` in the bin
    of ``u_i``.  ``stencil`` uses the 3-point Laplacian jump weights with the
    same ramp localization as :func:`compute_m1`.
    """
    xi.check_brackets(u.values)
    grid = u.grid
    out = np.zeros((grid.N, xi.B))
    if epsilon == 0:
        return out
    v = u.values
    if placement == "gradient":
        grad = (np.roll(v, -1) - np.roll(v, 1)) / (2.0 * grid.dx)
        np.add.at(out, (np.arange(grid.N), xi.bin_of(v)), epsilon * grad**2 * grid.dx)
        return out
    if placement == "stencil":
        w = np.zeros(grid.N)
        w[1] = w[-1] = epsilon / grid.dx**2
        return grid.dx * _ramp_deposit(v, w, xi)
    raise ValueError(f"unknown placement {placement!r}")


@dataclass
class KineticMeasure:
    """Masses over (x-cell, time slab, xi-bin), split into ``m1`` and ``m2``."""

    m1: np.ndarray
    m2: np.ndarray
    grid: Grid
    xi: XiGrid
    slab_times: np.ndarray
    slab_dt: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def masses(self) -> np.ndarray:
        return self.m1 + self.m2

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.masses))

    @classmethod
    def zero(cls, grid: Grid, xi: XiGrid, slabs: int = 1):
        z = np.zeros((grid.N, slabs, xi.B))
        return cls(z, z.copy(), grid, xi, np.zeros(slabs), np.zeros(slabs))


def assemble_measure(traj, xi: XiGrid, spec: QuadratureSpec = QuadratureSpec(), stride: int = 1,
                     m1_placement: str = "remainder", m2_placement: str = "gradient",
                     kernel: str = "spectral") -> KineticMeasure:
    """``m = m1 + m2`` over a recorded trajectory, consumed in time order.

    Slab ``s`` aggregates steps ``[s*stride, (s+1)*stride)``.  Dissipation
    happens in the implicit stage, so step ``n`` contributes ``dt_n`` times
    the measure of its end state ``u^{n+1}``; the slab is stamped with the
    start time of its first step.
    """
    if traj.path is None:
        raise UnusableTrajectoryError("trajectory has no recorded path; set record_noise")
    cfg = traj.config
    grid = cfg.grid
    n_steps = traj.dt_history.size
    slabs = max(1, math.ceil(n_steps / stride))
    m1 = np.zeros((grid.N, slabs, xi.B))
    m2 = np.zeros_like(m1)
    times = np.zeros(slabs)
    sdt = np.zeros(slabs)
    w = m1_weights(grid, cfg.alpha, spec, kernel) * cfg.nu
    for n in range(n_steps):
        s = n // stride
        u = Field(grid, traj.path[n + 1], traj.path_times[n + 1])
        dt = traj.dt_history[n]
        if n % stride == 0:
            times[s] = traj.path_times[n]
        if cfg.nu > 0:
            m1[:, s, :] += dt * compute_m1(u, cfg.alpha, spec, xi, m1_placement, weights=w)
        if cfg.epsilon > 0:
            m2[:, s, :] += dt * compute_m2(u, cfg.epsilon, xi, m2_placement)
        sdt[s] += dt
    return KineticMeasure(m1, m2, grid, xi, times, sdt,
                          {"stride": stride, "kernel": kernel, "m1_placement": m1_placement,
                           "m2_placement": m2_placement})


def outside_mass(m: KineticMeasure, R: float) -> float:
    mask = np.abs(m.xi.centers) > R
    return float(np.sum(m.masses[..., mask]))


@dataclass
class MeasureValidation:
    nonnegative: bool
    negative_bins: int
    total_mass: float
    finite: bool
    R_list: list
    outside: list
    outside_stderr: list
    decay_monotone: bool
    vanishes: bool
    time_ordered: bool
    tolerance: float

    @property
    def passed(self) -> bool:
        return (self.nonnegative and self.finite and self.decay_monotone
                and self.vanishes and self.time_ordered)


def validate_kinetic_measure(m, R_list, tolerance: float = 1e-8) -> MeasureValidation:
    """Check nonnegativity, finiteness, decay for large ``|xi|`` and time order.

    ``m`` may be one measure or a list of ensemble members, in which case the
    outside masses are sample means with standard errors.
    """
    members = m if isinstance(m, (list, tuple)) else [m]
    R_list = sorted(float(r) for r in R_list)
    neg = sum(int(np.count_nonzero(x.masses < 0)) for x in members)
    totals = [x.total_mass for x in members]
    finite = all(np.isfinite(x.masses).all() for x in members)
    outside, stderr = [], []
    for R in R_list:
        vals = [outside_mass(x, R) for x in members]
        mean = math.fsum(vals) / len(vals)
        outside.append(mean)
        if len(vals) > 1:
            var = math.fsum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
            stderr.append(math.sqrt(var / len(vals)))
        else:
            stderr.append(0.0)
    monotone = all(b <= a for a, b in zip(outside, outside[1:]))
    vanishes = bool(outside) and outside[-1] <= tolerance
    ordered = all(np.all(np.diff(x.slab_times) > 0) for x in members)
    return MeasureValidation(
        nonnegative=neg == 0,
        negative_bins=neg,
        total_mass=math.fsum(totals) / len(totals),
        finite=finite,
        R_list=R_list,
        outside=outside,
        outside_stderr=stderr,
        decay_monotone=monotone,
        vanishes=vanishes,
        time_ordered=ordered,
        tolerance=tolerance,
    )


def measure_moment(m: KineticMeasure, p: float) -> float:
    """``int |xi|^{2p} dm`` with xi at bin centres."""
    weight = np.abs(m.xi.centers) ** (2.0 * p)
    return float(np.sum(m.masses * weight))


def young_moment(trajectories, p: float) -> tuple[float, float]:
    """Sample mean and standard error of ``max_t int |u|^p dx``."""
    vals = []
    for traj in trajectories:
        dx = traj.config.grid.dx
        vals.append(max(dx * float(np.sum(np.abs(s.values) ** p)) for s in traj.snapshots))
    mean = math.fsum(vals) / len(vals)
    if len(vals) < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
    return mean, math.sqrt(var / len(vals))
