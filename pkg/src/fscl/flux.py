"""Scalar fluxes and monotone two-point numerical fluxes."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import ConfigurationError
from .grid import Field

KINDS = ("burgers", "linear", "polynomial")


@dataclass(frozen=True)
class FluxModel:
    """``A(u)`` as a polynomial of degree at most four.

    ``burgers`` is ``u^2/2``; ``linear`` is ``speed * u``; ``polynomial`` takes
    ascending ``coefficients`` ``(p0, p1, ...)`` of ``A``.
    """

    kind: str = "burgers"
    speed: float = 1.0
    coefficients: tuple = ()
    _coef: np.ndarray = field(init=False, repr=False, compare=False)
    _breaks: np.ndarray = field(init=False, repr=False, compare=False)
    _pos_at_breaks: np.ndarray = field(init=False, repr=False, compare=False)
    _neg_at_breaks: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind == "burgers":
            coef = np.array([0.0, 0.0, 0.5])
        elif self.kind == "linear":
            coef = np.array([0.0, float(self.speed)])
        elif self.kind == "polynomial":
            coef = np.asarray(self.coefficients, dtype=float)
            if coef.size == 0 or coef.size > 5:
                raise ConfigurationError("polynomial flux needs 1 to 5 coefficients")
        else:
            raise ConfigurationError(f"unknown flux kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "_coef", coef)
        deriv = P.polyder(coef) if coef.size > 1 else np.zeros(1)
        roots = P.polyroots(deriv) if np.any(deriv[1:]) else np.array([])
        real = np.sort(np.unique(np.real(roots[np.abs(np.imag(roots)) < 1e-12])))
        breaks = np.unique(np.concatenate([real, [0.0]]))
        object.__setattr__(self, "_breaks", breaks)
        # near-degenerate leading coefficients put roots far out; their table entries
        # may overflow but are only reached by states beyond those roots
        with np.errstate(over="ignore", invalid="ignore"):
            object.__setattr__(self, "_pos_at_breaks", self._part_at_breaks(breaks, 1.0))
            object.__setattr__(self, "_neg_at_breaks", self._part_at_breaks(breaks, -1.0))
        self._check_derivative()

    @property
    def coef(self) -> np.ndarray:
        return self._coef

    def A(self, u):
        return P.polyval(np.asarray(u, dtype=float), self._coef)

    def a(self, u):
        if self._coef.size == 1:
            return np.zeros_like(np.asarray(u, dtype=float))
        return P.polyval(np.asarray(u, dtype=float), P.polyder(self._coef))

    def _check_derivative(self):
        probe = np.linspace(-2.0, 2.0, 41)
        h = 1e-5
        fd = (self.A(probe + h) - self.A(probe - h)) / (2 * h)
        exact = self.a(probe)
        scale = np.maximum(np.abs(exact), 1.0)
        if np.max(np.abs(fd - exact) / scale) > 1e-6:
            raise ConfigurationError("flux derivative failed the finite-difference check")

    def _sign_between(self, lo, hi):
        return np.sign(self.a(0.5 * (lo + hi)))

    def _part_at_breaks(self, breaks, sign):
        # int_0^b of the sign-part of a at each breakpoint; 0 is a breakpoint
        out = np.zeros(breaks.size)
        i0 = int(np.searchsorted(breaks, 0.0))
        for i in range(i0 + 1, breaks.size):
            lo, hi = breaks[i - 1], breaks[i]
            keep = self._sign_between(lo, hi) == sign
            out[i] = out[i - 1] + (self.A(hi) - self.A(lo) if keep else 0.0)
        for i in range(i0 - 1, -1, -1):
            lo, hi = breaks[i], breaks[i + 1]
            keep = self._sign_between(lo, hi) == sign
            out[i] = out[i + 1] - (self.A(hi) - self.A(lo) if keep else 0.0)
        return out

    def _part_integral(self, u, sign):
        br = self._breaks
        table = self._pos_at_breaks if sign > 0 else self._neg_at_breaks
        idx = np.clip(np.searchsorted(br, u, side="right") - 1, 0, br.size - 1)
        anchor = br[idx]
        lo, hi = np.minimum(anchor, u), np.maximum(anchor, u)
        keep = np.sign(self.a(0.5 * (lo + hi))) == sign
        return table[idx] + np.where(keep, self.A(u) - self.A(anchor), 0.0)

    def positive_part_integral(self, u):
        """``int_0^u max(a(s), 0) ds`` (signed by orientation)."""
        u = np.asarray(u, dtype=float)
        if self.kind == "burgers":
            return 0.5 * np.maximum(u, 0.0) ** 2
        if self.kind == "linear":
            return max(self.speed, 0.0) * u
        return self._part_integral(u, 1.0)

    def negative_part_integral(self, u):
        """``int_0^u min(a(s), 0) ds``."""
        u = np.asarray(u, dtype=float)
        if self.kind == "burgers":
            return 0.5 * np.minimum(u, 0.0) ** 2
        if self.kind == "linear":
            return min(self.speed, 0.0) * u
        return self._part_integral(u, -1.0)


def engquist_osher(uL, uR, model: FluxModel):
    """``A(0) + int_0^uL a^+ + int_0^uR a^-``."""
    return (
        model.A(0.0)
        + model.positive_part_integral(uL)
        + model.negative_part_integral(uR)
    )


def lax_friedrichs(uL, uR, model: FluxModel, speed: float):
    """Global Lax-Friedrichs flux; monotone when ``speed >= max |a|``."""
    uL = np.asarray(uL, dtype=float)
    uR = np.asarray(uR, dtype=float)
    return 0.5 * (model.A(uL) + model.A(uR)) - 0.5 * speed * (uR - uL)


def max_wave_speed(f, model: FluxModel) -> float:
    values = f.values if isinstance(f, Field) else np.asarray(f, dtype=float)
    if values.size == 0:
        return 0.0
    return float(np.max(np.abs(model.a(values))))
