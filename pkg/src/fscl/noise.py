"""Truncated cylindrical Wiener forcing ``Phi(u) dW = sum_k g_k(x, u) d beta_k``.

The built-in family is ``g_k(x, u) = sigma_k e_k(x) (b0 + b1 u)`` with
``sigma_k = c k^{-q}`` and ``e_k`` the orthonormal trigonometric modes on the
torus without the constant: ``e_{2m-1} = sqrt(2/L) sin(2 pi m x / L)``,
``e_{2m} = sqrt(2/L) cos(2 pi m x / L)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import zeta

from .errors import ShapeError
from .grid import Field

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NoiseModel:
    K: int = 16
    c: float = 0.1
    q: float = 1.0
    b0: float = 1.0
    b1: float = 1.0
    L: float = 1.0
    u_max: float = 4.0  # half-width of the state box where the modulus bound is certified

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("noise needs K >= 1 modes")
        if self.c < 0:
            raise ValueError("noise strength c must be nonnegative")
        if self.q <= 0.5:
            raise ValueError(f"decay exponent q must exceed 1/2, got {self.q}")
        if self.L <= 0:
            raise ValueError("L must be positive")
        if self.truncation_tail > 1e-6:
            log.debug("noise truncation tail %.3g exceeds 1e-6", self.truncation_tail)

    @property
    def is_zero(self) -> bool:
        return self.c == 0.0 or (self.b0 == 0.0 and self.b1 == 0.0)

    @property
    def sigma(self) -> np.ndarray:
        k = np.arange(1, self.K + 1, dtype=float)
        return self.c * k ** (-self.q)

    @property
    def frequencies(self) -> np.ndarray:
        """Integer frequency ``m`` of each mode."""
        return (np.arange(self.K) // 2 + 1).astype(float)

    @property
    def truncation_tail(self) -> float:
        """``sum_{k > K} sigma_k^2``, the discarded variance."""
        return float(self.c**2 * zeta(2.0 * self.q, self.K + 1.0))

    @property
    def variance_sum(self) -> float:
        return float(np.sum(self.sigma**2))

    @property
    def D0(self) -> float:
        """Constant of the growth bound ``G^2 <= D0 (hat_g + u^2)``."""
        return 2.0 * (2.0 / self.L) * self.variance_sum * max(self.b0**2, self.b1**2)

    @property
    def hat_g(self) -> float:
        """Constant integrable profile ``hat_g`` paired with :attr:`D0`."""
        if self.D0 == 0.0:
            return 0.0
        return 2.0 * self.b0**2 * (2.0 / self.L) * self.variance_sum / self.D0

    @property
    def hat_g_l1(self) -> float:
        return self.hat_g * self.L

    @property
    def D1(self) -> float:
        """Constant of the modulus bound on ``|u|, |v| <= u_max``."""
        lip = 2.0 * np.pi * self.frequencies / self.L
        rho_max = abs(self.b0) + abs(self.b1) * self.u_max
        per_mode = np.maximum(lip**2 * rho_max**2, self.b1**2)
        return float(2.0 * (2.0 / self.L) * np.sum(self.sigma**2 * per_mode))

    @staticmethod
    def h(r):
        return r

    def modes(self, x) -> np.ndarray:
        """``e_k(x)`` with shape ``(K,) + x.shape``."""
        x = np.asarray(x, dtype=float)
        arg = 2.0 * np.pi * self.frequencies.reshape((-1,) + (1,) * x.ndim) * x / self.L
        sin_mode = (np.arange(self.K) % 2 == 0).reshape((-1,) + (1,) * x.ndim)
        return np.sqrt(2.0 / self.L) * np.where(sin_mode, np.sin(arg), np.cos(arg))

    def coupling(self, u):
        return self.b0 + self.b1 * np.asarray(u, dtype=float)

    def coefficients(self, x, u) -> np.ndarray:
        """``g_k(x, u)`` with shape ``(K,) + broadcast(x, u).shape``."""
        x, u = np.broadcast_arrays(np.asarray(x, float), np.asarray(u, float))
        sig = self.sigma.reshape((-1,) + (1,) * x.ndim)
        return sig * self.modes(x) * self.coupling(u)

    def G2(self, x, u):
        x, u = np.broadcast_arrays(np.asarray(x, float), np.asarray(u, float))
        sig2 = (self.sigma**2).reshape((-1,) + (1,) * x.ndim)
        return np.sum(sig2 * self.modes(x) ** 2, axis=0) * self.coupling(u) ** 2


@dataclass
class NoiseIncrement:
    dBeta: np.ndarray
    dt: float
    seed_path: tuple = field(default_factory=tuple)

    def __post_init__(self):
        self.dBeta = np.asarray(self.dBeta, dtype=float)


def sample_increment(dt: float, model: NoiseModel, rng: np.random.Generator,
                     seed_path: tuple = ()) -> NoiseIncrement:
    if not dt > 0:
        raise ValueError(f"increment needs dt > 0, got {dt}")
    return NoiseIncrement(rng.normal(0.0, np.sqrt(dt), size=model.K), dt, tuple(seed_path))


def zero_increment(dt: float, model: NoiseModel) -> NoiseIncrement:
    return NoiseIncrement(np.zeros(model.K), dt)


def subdivide_increment(inc: NoiseIncrement, parts: int) -> list[NoiseIncrement]:
    """Split an increment into ``parts`` Brownian-bridge sub-increments.

    The sub-increments sum to the original exactly in distribution and up to
    rounding numerically; the bridge draws are seeded from ``seed_path`` so the
    split is reproducible.
    """
    if parts == 1:
        return [inc]
    h = inc.dt / parts
    rng = np.random.default_rng([*_entropy(inc.seed_path), parts, 0xB41D])
    z = rng.normal(0.0, np.sqrt(h), size=(parts, inc.dBeta.size))
    z = z - z.mean(axis=0) + inc.dBeta / parts
    return [NoiseIncrement(z[i], h, (*inc.seed_path, parts, i)) for i in range(parts)]


def brownian_path(n_steps: int, dt: float, model: NoiseModel, seed) -> np.ndarray:
    """Increments ``(n_steps, K)`` of one Brownian path on a uniform clock."""
    rng = np.random.default_rng(_entropy(seed if isinstance(seed, tuple) else (seed,)))
    return rng.normal(0.0, np.sqrt(dt), size=(n_steps, model.K))


def coarsen_increments(increments: np.ndarray, factor: int) -> np.ndarray:
    """Sum consecutive blocks of ``factor`` increments: the same path on a coarser clock."""
    inc = np.asarray(increments, dtype=float)
    if inc.shape[0] % factor:
        raise ValueError("number of increments must be divisible by the coarsening factor")
    return inc.reshape(inc.shape[0] // factor, factor, *inc.shape[1:]).sum(axis=1)


def _entropy(seed_path) -> list[int]:
    return [int(s) & 0xFFFFFFFF for s in seed_path] or [0]


def evaluate_G2(x, u, model: NoiseModel):
    return model.G2(x, u)


def apply_noise_term(f: Field, inc: NoiseIncrement, model: NoiseModel) -> Field:
    """``sum_k g_k(x, f(x)) dBeta_k`` at the cell centres."""
    if inc.dBeta.shape != (model.K,):
        raise ShapeError(f"increment has {inc.dBeta.shape} entries, model has K={model.K}")
    g = model.coefficients(f.grid.cell_centers, f.values)
    return f.with_values(inc.dBeta @ g)


@dataclass
class BoundsReport:
    D0_emp: float
    D1_emp: float
    D0: float
    D1: float
    passed_growth: bool
    passed_modulus: bool

    @property
    def passed(self) -> bool:
        return self.passed_growth and self.passed_modulus


def default_sweep(model: NoiseModel, n_x: int = 33, n_u: int = 17):
    x = np.linspace(0.0, model.L, n_x)
    u = np.linspace(-model.u_max, model.u_max, n_u)
    return x, u


def verify_bounds(model: NoiseModel, sweep=None, rtol: float = 1e-12) -> BoundsReport:
    """Empirical constants of the growth and modulus bounds over a sweep.

    ``sweep`` is a pair ``(x_samples, u_samples)``; the modulus bound is
    checked over all pairs ``(x, u), (y, v)`` drawn from it.
    """
    xs, us = default_sweep(model) if sweep is None else map(np.asarray, sweep)
    X, U = np.meshgrid(xs, us, indexing="ij")
    X, U = X.ravel(), U.ravel()
    G2 = model.G2(X, U)
    denom0 = model.hat_g + U**2
    with np.errstate(divide="ignore", invalid="ignore"):
        r0 = np.where(denom0 > 0, G2 / denom0, np.where(G2 > 0, np.inf, 0.0))
    D0_emp = float(np.max(r0, initial=0.0))

    g = model.coefficients(X, U)  # (K, P)
    sq = np.sum(g**2, axis=0)
    lhs = sq[:, None] + sq[None, :] - 2.0 * g.T @ g
    lhs = np.maximum(lhs, 0.0)
    dxp = X[:, None] - X[None, :]
    dup = np.abs(U[:, None] - U[None, :])
    denom1 = dxp**2 + dup * model.h(dup)
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = np.where(denom1 > 0, lhs / denom1, 0.0)
    D1_emp = float(np.max(r1, initial=0.0))

    slack0 = rtol * max(model.D0, 1.0)
    slack1 = rtol * max(model.D1, 1.0)
    return BoundsReport(
        D0_emp=D0_emp,
        D1_emp=D1_emp,
        D0=model.D0,
        D1=model.D1,
        passed_growth=D0_emp <= model.D0 + slack0,
        passed_modulus=D1_emp <= model.D1 + slack1,
    )
