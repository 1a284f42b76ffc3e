"""IMEX Euler-Maruyama integrator for the viscous approximation.

One step is explicit monotone transport plus the Euler-Maruyama noise term,
followed by an implicit solve of the linear diffusion
``(I + dt nu Lambda_alpha + dt eps (-Delta_h)) u = u*``, done by division in
Fourier space.  ``Lambda_alpha`` is the spectral fractional Laplacian and
``-Delta_h`` the 3-point Laplacian; both have nonnegative jump weights, so
the implicit solve preserves order and the scheme is monotone.
"""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, InvalidPairingError, SolverDivergenceError
from .flux import FluxModel, engquist_osher, lax_friedrichs, max_wave_speed
from .fractional import FractionalOrder, fractional_symbol, laplacian_symbol
from .grid import Field, Grid, integrate, lp_norm, make_grid, positive_part_integral
from .noise import (
    NoiseIncrement,
    NoiseModel,
    sample_increment,
    subdivide_increment,
    zero_increment,
)

NUMERICAL_FLUXES = ("engquist_osher", "lax_friedrichs")
MAX_SUBSTEPS = 2**16


def _smooth_bump(r):
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = np.abs(r) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    return out


@dataclass
class InitialData:
    """Named initial profile.

    kinds: ``riemann`` (uL, uR, x0), ``box`` (height, left, right),
    ``bump`` (amplitude, width, center, base), ``sine`` (amplitude, mode, offset),
    ``custom`` (samples).
    """

    kind: str = "bump"
    params: dict = field(default_factory=dict)

    @classmethod
    def riemann(cls, uL=1.0, uR=0.0, x0=0.5):
        return cls("riemann", {"uL": uL, "uR": uR, "x0": x0})

    @classmethod
    def bump(cls, amplitude=1.0, width=0.2, center=0.5, base=0.0):
        return cls("bump", {"amplitude": amplitude, "width": width, "center": center, "base": base})

    @classmethod
    def sine(cls, amplitude=1.0, mode=1, offset=0.0):
        return cls("sine", {"amplitude": amplitude, "mode": mode, "offset": offset})

    @classmethod
    def box(cls, height=1.0, left=0.25, right=0.5):
        return cls("box", {"height": height, "left": left, "right": right})

    @classmethod
    def custom(cls, samples):
        return cls("custom", {"samples": [float(v) for v in samples]})

    def sample(self, grid: Grid) -> np.ndarray:
        x = grid.cell_centers
        p = self.params
        if self.kind == "riemann":
            return np.where(x < p.get("x0", 0.5 * grid.L), p.get("uL", 1.0), p.get("uR", 0.0))
        if self.kind == "bump":
            r = (x - p.get("center", 0.5 * grid.L)) / p.get("width", 0.2 * grid.L)
            return p.get("base", 0.0) + p.get("amplitude", 1.0) * _smooth_bump(r)
        if self.kind == "sine":
            k = 2.0 * np.pi * p.get("mode", 1) / grid.L
            return p.get("offset", 0.0) + p.get("amplitude", 1.0) * np.sin(k * x)
        if self.kind == "box":
            inside = (x >= p.get("left", 0.25 * grid.L)) & (x < p.get("right", 0.5 * grid.L))
            return np.where(inside, p.get("height", 1.0), 0.0)
        if self.kind == "custom":
            s = np.asarray(p["samples"], dtype=float)
            if s.shape != (grid.N,):
                raise ConfigurationError(f"custom initial data has {s.size} samples, grid has {grid.N}")
            return s.copy()
        raise ConfigurationError(f"unknown initial data kind {self.kind!r}")


@dataclass
class SolverConfig:
    L: float = 1.0
    N: int = 256
    alpha: float = 0.5
    nu: float = 1.0
    epsilon: float = 0.0
    T: float = 0.5
    cfl: float = 0.5
    flux: FluxModel = field(default_factory=FluxModel)
    noise: NoiseModel = field(default_factory=lambda: NoiseModel(c=0.0))
    initial_data: InitialData = field(default_factory=InitialData)
    record_noise: bool = False
    output_times: tuple | None = None
    numerical_flux: str = "engquist_osher"
    dt: float | None = None

    def __post_init__(self):
        errors = []
        if not self.T >= 0:
            errors.append(f"T must be nonnegative, got {self.T}")
        if not (0.0 < self.cfl <= 1.0):
            errors.append(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.nu < 0:
            errors.append(f"nu must be nonnegative, got {self.nu}")
        if self.epsilon < 0:
            errors.append(f"epsilon must be nonnegative, got {self.epsilon}")
        if self.numerical_flux not in NUMERICAL_FLUXES:
            errors.append(f"numerical_flux must be one of {NUMERICAL_FLUXES}")
        if self.dt is not None and not self.dt > 0:
            errors.append("dt must be positive when given")
        try:
            FractionalOrder(self.alpha)
        except ValueError as exc:
            errors.append(str(exc))
        try:
            grid = make_grid(self.L, self.N)
            if not grid.is_power_of_two:
                errors.append(f"solver needs power-of-two N, got {self.N}")
        except ConfigurationError as exc:
            errors.append(str(exc))
        if errors:
            raise ConfigurationError("; ".join(errors), errors)
        if self.noise.L != self.L:
            self.noise = replace(self.noise, L=float(self.L))

    @property
    def grid(self) -> Grid:
        return make_grid(self.L, self.N)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["flux"] = {"kind": self.flux.kind, "speed": self.flux.speed,
                     "coefficients": list(self.flux.coefficients)}
        d["output_times"] = None if self.output_times is None else list(self.output_times)
        return d

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=float)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class Trajectory:
    snapshots: list
    config: SolverConfig
    config_hash: str
    step_count: int
    seed: tuple
    dt: float
    dt_history: np.ndarray
    monitors: dict
    noise_record: np.ndarray | None = None
    path: np.ndarray | None = None
    path_times: np.ndarray | None = None

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])

    @property
    def final(self) -> Field:
        return self.snapshots[-1]


def seed_entropy(seed) -> tuple:
    if seed is None:
        raise ConfigurationError("seeds must be explicit")
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    return tuple(int(s) for s in seed)


@lru_cache(maxsize=128)
def _implicit_multiplier(N, L, alpha, nu, eps, dt):
    grid = make_grid(L, N)
    denom = 1.0 + dt * nu * fractional_symbol(grid, alpha) + dt * eps * laplacian_symbol(grid)
    return 1.0 / denom


class _Stepper:
    def __init__(self, cfg: SolverConfig):
        self.cfg = cfg
        self.grid = cfg.grid
        self.x = self.grid.cell_centers
        self.noisy = not cfg.noise.is_zero
        self.diffusive = cfg.nu > 0 or cfg.epsilon > 0

    def _fluxes(self, u):
        right = np.roll(u, -1)
        if self.cfg.numerical_flux == "engquist_osher":
            return engquist_osher(u, right, self.cfg.flux)
        return lax_friedrichs(u, right, self.cfg.flux, max_wave_speed(u, self.cfg.flux))

    def single(self, u, dt, inc: NoiseIncrement):
        F = self._fluxes(u)
        ustar = u - dt / self.grid.dx * (F - np.roll(F, 1))
        if self.noisy:
            ustar = ustar + inc.dBeta @ self.cfg.noise.coefficients(self.x, u)
        if self.diffusive and np.ptp(ustar) > 0.0:
            mult = _implicit_multiplier(self.grid.N, self.grid.L, self.cfg.alpha,
                                        self.cfg.nu, self.cfg.epsilon, dt)
            ustar = np.fft.irfft(np.fft.rfft(ustar) * mult, n=self.grid.N)
        return ustar

    def advance(self, u, dt, inc, index=0, record=None):
        speed = max_wave_speed(u, self.cfg.flux)
        courant = dt * speed / self.grid.dx
        if not courant < MAX_SUBSTEPS * self.cfg.cfl:
            raise SolverDivergenceError(index, f"wave speed {speed:.3g} at step {index} is unbounded")
        if courant > self.cfg.cfl * (1.0 + 1e-12):
            parts = math.ceil(courant / self.cfg.cfl)
            for sub in subdivide_increment(inc, parts):
                u = self.advance(u, sub.dt, sub, index, record)
            return u
        out = self.single(u, dt, inc)
        if not np.all(np.isfinite(out)):
            raise SolverDivergenceError(index)
        if record is not None:
            record(dt, inc, out)
        return out


def step(u: Field, dt: float, cfg: SolverConfig, inc: NoiseIncrement | None = None,
         index: int = 0) -> Field:
    """Advance ``u`` by ``dt``; CFL violations are subdivided, never accepted."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if inc is None:
        inc = zero_increment(dt, cfg.noise)
    out = _Stepper(cfg).advance(u.values, dt, inc, index)
    return Field(u.grid, out, u.time + dt)


def base_dt(cfg: SolverConfig, u0: np.ndarray) -> float:
    """Nominal step: CFL on the initial wave speed, capped by ``cfl * dx``."""
    if cfg.dt is not None:
        return cfg.dt
    speed = max(max_wave_speed(u0, cfg.flux), 1.0)
    return cfg.cfl * cfg.grid.dx / speed


def _output_indices(cfg: SolverConfig, n_steps: int, dt: float) -> list[int]:
    times = cfg.output_times if cfg.output_times is not None else (0.0, cfg.T)
    idx = sorted({int(round(t / dt)) if cfg.T > 0 else 0 for t in times} | {0, n_steps})
    return [i for i in idx if 0 <= i <= n_steps]


def run(cfg: SolverConfig, seed, dt: float | None = None, increments=None) -> Trajectory:
    """Integrate ``cfg`` on ``[0, T]``.

    ``dt`` overrides the nominal step (used to share one noise clock between
    coupled runs); ``increments`` supplies a precomputed ``(n_steps, K)``
    Brownian path instead of drawing from ``seed``.
    """
    grid = cfg.grid
    ent = seed_entropy(seed)
    u = cfg.initial_data.sample(grid)
    if not np.all(np.isfinite(u)):
        raise ConfigurationError("initial data is not finite")
    h = dt if dt is not None else base_dt(cfg, u)
    n_steps = 0 if cfg.T == 0 else max(1, math.ceil(cfg.T / h - 1e-9))
    h = cfg.T / n_steps if n_steps else 0.0
    if increments is not None:
        increments = np.asarray(increments, dtype=float)
        if increments.shape != (n_steps, cfg.noise.K):
            raise ConfigurationError(
                f"increments have shape {increments.shape}, need {(n_steps, cfg.noise.K)}")
    out_idx = set(_output_indices(cfg, n_steps, h) if n_steps else [0])

    stepper = _Stepper(cfg)
    rng = np.random.default_rng(list(ent))
    q_mult = fractional_symbol(grid, cfg.alpha)

    dts, incs, states = [], [], [u.copy()]
    mon = {"time": [0.0], "mass": [], "l2sq": [], "min": [], "max": [], "dissipation": [0.0]}

    def monitor(v):
        mon["mass"].append(grid.dx * math.fsum(v))
        mon["l2sq"].append(grid.dx * float(np.dot(v, v)))
        mon["min"].append(float(v.min()))
        mon["max"].append(float(v.max()))

    monitor(u)

    def record(sub_dt, inc, v):
        dts.append(sub_dt)
        mon["time"].append(mon["time"][-1] + sub_dt)
        monitor(v)
        lam_u = np.fft.irfft(np.fft.rfft(v) * q_mult, n=grid.N)
        mon["dissipation"].append(grid.dx * float(np.dot(v, lam_u)))
        if cfg.record_noise:
            incs.append(inc.dBeta.copy())
            states.append(v.copy())

    snapshots = [Field(grid, u.copy(), 0.0)]
    for n in range(n_steps):
        if increments is not None:
            inc = NoiseIncrement(increments[n], h, (*ent, n))
        elif stepper.noisy:
            inc = sample_increment(h, cfg.noise, rng, (*ent, n))
        else:
            inc = zero_increment(h, cfg.noise)
        u = stepper.advance(u, h, inc, n, record)
        if n + 1 in out_idx:
            t_out = cfg.T if n + 1 == n_steps else (n + 1) * h
            snapshots.append(Field(grid, u.copy(), t_out))
    monitors = {k: np.asarray(v) for k, v in mon.items()}
    traj = Trajectory(
        snapshots=snapshots,
        config=cfg,
        config_hash=cfg.fingerprint(),
        step_count=len(dts),
        seed=ent,
        dt=h,
        dt_history=np.asarray(dts),
        monitors=monitors,
    )
    if cfg.record_noise:
        traj.noise_record = np.asarray(incs).reshape(len(dts), cfg.noise.K)
        traj.path = np.asarray(states)
        traj.path_times = monitors["time"].copy()
    return traj


def energy_balance(traj: Trajectory) -> np.ndarray:
    """``||u(t)||^2 + 2 nu int_0^t Q_alpha ds`` along the recorded steps."""
    m = traj.monitors
    dts = np.concatenate([[0.0], traj.dt_history])
    return m["l2sq"] + 2.0 * traj.config.nu * np.cumsum(dts * m["dissipation"])


@dataclass
class SweepReport:
    eps: list
    finals: list
    gaps: list
    ratios: list
    cauchy: bool
    extrapolated: Field | None
    envelope: float | None
    limit_final: Field | None = None
    limit_distance: float | None = None

    @property
    def within_envelope(self) -> bool | None:
        if self.limit_distance is None or self.envelope is None:
            return None
        return self.limit_distance <= self.envelope


def l1_distance(f: Field, g: Field) -> float:
    return positive_part_integral(f, g) + positive_part_integral(g, f)


def viscosity_sweep(cfg: SolverConfig, eps_list, seed, include_limit: bool = False) -> SweepReport:
    """Runs along decreasing ``eps`` sharing one noise path.

    Reports successive L1 gaps at ``T``, their ratios, a geometric
    extrapolation of the limit and, with ``include_limit``, the distance from
    the smallest ``eps`` run to the ``eps = 0`` run on the same path.
    """
    eps_list = [float(e) for e in eps_list]
    if any(e <= 0 for e in eps_list) or any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ConfigurationError("eps_list must be positive and strictly decreasing")
    u0 = cfg.initial_data.sample(cfg.grid)
    h = base_dt(cfg, u0)
    finals = [run(replace(cfg, epsilon=e, record_noise=False), seed, dt=h).final for e in eps_list]
    gaps = [l1_distance(a, b) for a, b in zip(finals, finals[1:])]
    ratios = [b / a if a > 0 else float("inf") for a, b in zip(gaps, gaps[1:])]
    cauchy = all(b < a for a, b in zip(gaps, gaps[1:]))
    extrapolated = envelope = None
    if ratios and cauchy:
        r = max(ratios)
        envelope = gaps[-1] * r / (1.0 - r)
        extrapolated = finals[-1].with_values(
            finals[-1].values + (finals[-1].values - finals[-2].values) * r / (1.0 - r))
    report = SweepReport(eps_list, finals, gaps, ratios, cauchy, extrapolated, envelope)
    if include_limit:
        report.limit_final = run(replace(cfg, epsilon=0.0, record_noise=False), seed, dt=h).final
        report.limit_distance = l1_distance(finals[-1], report.limit_final)
    return report


def member_seed(base_seed, m: int) -> tuple:
    return (*seed_entropy(base_seed), int(m))


def _mean_and_stderr(samples) -> tuple[float, float]:
    samples = list(samples)
    n = len(samples)
    if all(v == samples[0] for v in samples):
        return float(samples[0]), 0.0
    mean = math.fsum(samples) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((s - mean) ** 2 for s in samples) / (n - 1)
    return mean, math.sqrt(var / n)


def _map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


@dataclass
class EnsembleStats:
    times: np.ndarray
    p_values: tuple
    mean: dict
    stderr: dict
    sup_mean: dict
    sup_stderr: dict
    members: int
    l2_envelope: np.ndarray

    def envelope_ok(self, n_se: float = 2.0) -> bool:
        m, s = self.mean[2.0], self.stderr[2.0]
        return bool(np.all(m <= self.l2_envelope + n_se * s))


def gronwall_envelope(cfg: SolverConfig, times) -> np.ndarray:
    """``e^{D0 t} (||u0||_2^2 + ||hat_g||_1 t)``."""
    grid = cfg.grid
    u0 = Field(grid, cfg.initial_data.sample(grid))
    n = cfg.noise
    D0 = 0.0 if n.is_zero else n.D0
    g1 = 0.0 if n.is_zero else n.hat_g_l1
    t = np.asarray(times, dtype=float)
    return np.exp(D0 * t) * (lp_norm(u0, 2) ** 2 + g1 * t)


def ensemble(cfg: SolverConfig, M: int, base_seed, p_values=(1.0, 2.0, 4.0),
             threads: int = 1) -> EnsembleStats:
    """``E ||u(t)||_p^p`` at the output times over ``M`` independent members."""
    if M < 2:
        raise ConfigurationError("ensemble needs M >= 2")
    p_values = tuple(float(p) for p in p_values)
    cfg = replace(cfg, record_noise=False)
    h = base_dt(cfg, cfg.initial_data.sample(cfg.grid))

    def member(m):
        traj = run(cfg, member_seed(base_seed, m), dt=h)
        return [[lp_norm(s, p) ** p for s in traj.snapshots] for p in p_values], traj.times

    results = _map(member, range(M), threads)
    times = results[0][1]
    mean, stderr, sup_mean, sup_stderr = {}, {}, {}, {}
    for ip, p in enumerate(p_values):
        per_time = np.array([r[0][ip] for r in results])  # (M, T)
        stats = [_mean_and_stderr(per_time[:, j]) for j in range(per_time.shape[1])]
        mean[p] = np.array([s[0] for s in stats])
        stderr[p] = np.array([s[1] for s in stats])
        sup_mean[p], sup_stderr[p] = _mean_and_stderr(per_time.max(axis=1))
    return EnsembleStats(times, p_values, mean, stderr, sup_mean, sup_stderr, M,
                         gronwall_envelope(cfg, times))


@dataclass
class ContractionReport:
    times: np.ndarray
    gap_mean: np.ndarray
    gap_stderr: np.ndarray
    step_mean: np.ndarray
    step_stderr: np.ndarray
    members: int
    n_se: float = 2.0

    @property
    def non_increasing(self) -> bool:
        return bool(np.all(self.step_mean <= self.n_se * self.step_stderr))


def _pairing_key(cfg: SolverConfig) -> dict:
    d = cfg.to_dict()
    d.pop("initial_data")
    d.pop("record_noise")
    return d


def contraction_experiment(cfgA: SolverConfig, cfgB: SolverConfig, M: int, base_seed,
                           threads: int = 1) -> ContractionReport:
    """``E int (u_A - u_B)^+ dx`` over paired members sharing noise streams."""
    if _pairing_key(cfgA) != _pairing_key(cfgB):
        raise InvalidPairingError("paired configurations may differ only in initial data")
    cfgA = replace(cfgA, record_noise=False)
    cfgB = replace(cfgB, record_noise=False)
    h = min(base_dt(cfgA, cfgA.initial_data.sample(cfgA.grid)),
            base_dt(cfgB, cfgB.initial_data.sample(cfgB.grid)))

    def member(m):
        s = member_seed(base_seed, m)
        a, b = run(cfgA, s, dt=h), run(cfgB, s, dt=h)
        return [positive_part_integral(x, y) for x, y in zip(a.snapshots, b.snapshots)], a.times

    results = _map(member, range(M), threads)
    times = results[0][1]
    gaps = np.array([r[0] for r in results])
    stats = [_mean_and_stderr(gaps[:, j]) for j in range(gaps.shape[1])]
    diffs = np.diff(gaps, axis=1)
    dstats = [_mean_and_stderr(diffs[:, j]) for j in range(diffs.shape[1])]
    return ContractionReport(
        times=times,
        gap_mean=np.array([s[0] for s in stats]),
        gap_stderr=np.array([s[1] for s in stats]),
        step_mean=np.array([s[0] for s in dstats]),
        step_stderr=np.array([s[1] for s in dstats]),
        members=M,
    )
