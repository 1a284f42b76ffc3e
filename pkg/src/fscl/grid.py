"""Periodic 1-D grid, cell-centred fields and midpoint quadrature."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, ShapeError


@dataclass(frozen=True)
class Grid:
    """Uniform periodic mesh of ``N`` cells on ``[0, L)``."""

    L: float
    N: int

    @property
    def dx(self) -> float:
        return self.L / self.N

    @cached_property
    def cell_centers(self) -> np.ndarray:
        x = (np.arange(self.N) + 0.5) * self.dx
        x.setflags(write=False)
        return x

    @property
    def is_power_of_two(self) -> bool:
        return self.N & (self.N - 1) == 0


def make_grid(L: float, N: int) -> Grid:
    if not np.isfinite(L) or L <= 0:
        raise ConfigurationError(f"domain length must be positive, got {L}")
    if int(N) != N or N < 4:
        raise ConfigurationError(f"need an integer N >= 4 cells, got {N}")
    return Grid(float(L), int(N))


@dataclass
class Field:
    """Cell values of ``u(., t)`` on a grid."""

    grid: Grid
    values: np.ndarray
    time: float = 0.0
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.N,):
            raise ShapeError(
                f"field has shape {self.values.shape}, grid expects ({self.grid.N},)"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")
        if self.time < 0:
            raise ValueError("field time must be nonnegative")

    def with_values(self, values, time=None) -> "Field":
        return Field(self.grid, values, self.time if time is None else time)

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), self.time)


def _check_same_grid(f: Field, g: Field):
    if f.grid != g.grid:
        raise ShapeError(f"grid mismatch: {f.grid} vs {g.grid}")


def integrate(f: Field) -> float:
    return f.grid.dx * float(np.sum(f.values))


def lp_norm(f: Field, p=2.0) -> float:
    if p == np.inf:
        return float(np.max(np.abs(f.values)))
    if p < 1:
        raise ValueError(f"lp_norm needs p >= 1, got {p}")
    return float((f.grid.dx * np.sum(np.abs(f.values) ** p)) ** (1.0 / p))


def positive_part_integral(f: Field, g: Field) -> float:
    """``int (f - g)^+ dx``."""
    _check_same_grid(f, g)
    return f.grid.dx * float(np.sum(np.maximum(f.values - g.values, 0.0)))
