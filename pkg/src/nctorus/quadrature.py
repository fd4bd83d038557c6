"""Quadrature rules with node-doubling convergence checks.

Measure convention: ``d xi = (2 pi)^{-2} d_L xi`` on the plane, so the unit
circle carries ``(2 pi)^{-2}`` times arclength and has total mass ``1/(2 pi)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Callable, Sequence, Tuple

import numpy as np

from .xi import Cutoff

PLANE_WEIGHT = 1.0 / (2.0 * math.pi) ** 2
MAX_DOUBLINGS = 5


class ConvergenceError(RuntimeError):
    """Node doubling did not bring the drift below tolerance."""


@dataclass(frozen=True)
class QuadratureConfig:
    circle_nodes: int = 1024
    radial_nodes: int = 256
    r0: float = 0.5
    r1: float = 1.0
    remainder_depth: int = 6
    tol: float = 1e-9

    def __post_init__(self):
        n = self.circle_nodes
        if n < 8 or n & (n - 1):
            raise ValueError("circle_nodes must be a power of two >= 8")
        if self.radial_nodes < 8:
            raise ValueError("radial_nodes must be at least 8")
        if not (0 < self.r0 < self.r1 <= 1.0):
            raise ValueError("cutoff radii must satisfy 0 < r0 < r1 <= 1")
        if self.remainder_depth < 0:
            raise ValueError("remainder_depth must be non-negative")
        if not self.tol > 0:
            raise ValueError("tol must be positive")

    @property
    def cutoff(self) -> Cutoff:
        return Cutoff(self.r0, self.r1)

    def replace(self, **kw) -> "QuadratureConfig":
        d = asdict(self)
        d.update(kw)
        return QuadratureConfig(**d)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data) -> "QuadratureConfig":
        if isinstance(data, str):
            data = json.loads(data)
        known = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        return cls(**known)


@lru_cache(maxsize=64)
def circle_points(n: int) -> Tuple[np.ndarray, np.ndarray]:
    phi = 2.0 * np.pi * np.arange(n) / n
    return np.cos(phi), np.sin(phi)


@lru_cache(maxsize=64)
def gauss_legendre(n: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def circle_mean_nested(f: Callable[[np.ndarray, np.ndarray], np.ndarray], n: int, tol: float):
    """Trapezoid mean of ``f`` over the unit circle with nested doubling.

    Returns ``(mean, nodes_used, drift)``; ``f`` may return arrays with leading
    axes, the last axis indexing nodes.
    """
    x1, x2 = circle_points(n)
    vals = np.asarray(f(x1, x2))
    coarse = vals[..., ::2].mean(axis=-1)
    fine = vals.mean(axis=-1)
    for _ in range(MAX_DOUBLINGS + 1):
        scale = np.maximum(np.abs(fine), np.abs(vals).mean(axis=-1))
        drift = np.abs(fine - coarse)
        if np.all(drift <= tol * np.maximum(scale, 1e-300)) or np.all(drift <= 1e-15):
            return fine, n, float(np.max(drift, initial=0.0))
        n *= 2
        x1, x2 = circle_points(n)
        vals = np.asarray(f(x1, x2))
        coarse, fine = fine, vals.mean(axis=-1)
    raise ConvergenceError(f"circle quadrature did not converge (drift {np.max(drift):.3g} at {n} nodes)")


def _gl_on(a: float, b: float, n: int):
    x, w = gauss_legendre(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def radial_integral(f: Callable[[np.ndarray], np.ndarray], breaks: Sequence[float], n: int, tol: float,
                    tail: bool = False):
    """Piecewise Gauss-Legendre integral of ``f(r)`` over consecutive breakpoints.

    With ``tail`` the last piece is ``[breaks[-1], inf)`` using ``r = b + t/(1-t)``.
    Convergence is certified by comparing ``n`` and ``2n`` nodes per piece.
    """
    breaks = sorted(set(float(b) for b in breaks))

    def rule(m):
        total = 0.0
        for a, b in zip(breaks[:-1], breaks[1:]):
            if b > a:
                r, w = _gl_on(a, b, m)
                total = total + np.tensordot(np.asarray(f(r)), w, axes=([-1], [0]))
        if tail:
            t, w = _gl_on(0.0, 1.0, m)
            r = breaks[-1] + t / (1.0 - t)
            jac = 1.0 / (1.0 - t) ** 2
            total = total + np.tensordot(np.asarray(f(r)), w * jac, axes=([-1], [0]))
        return total

    prev = rule(n)
    for _ in range(MAX_DOUBLINGS + 1):
        nxt = rule(2 * n)
        drift = np.abs(nxt - prev)
        scale = np.maximum(np.abs(nxt), 1.0)
        if np.all(drift <= tol * scale):
            return nxt, 2 * n, float(np.max(drift, initial=0.0))
        n *= 2
        prev = nxt
    raise ConvergenceError(f"radial quadrature did not converge (drift {np.max(drift):.3g})")


def log_power_constant(s: complex, l: int) -> complex:
    """Finite part at ``R -> inf`` of ``int_1^R r^{s-1} log^l r dr``.

    Equals ``-(-1)^l l! / s^{l+1}`` for ``s != 0`` and ``0`` for ``s = 0`` (the
    integral is then a pure power of ``log R``).
    """
    s = complex(s)
    if abs(s) < 1e-13:
        return 0.0
    return -((-1) ** l) * math.factorial(l) / s ** (l + 1)
