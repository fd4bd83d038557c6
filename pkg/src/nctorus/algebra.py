"""Finitely supported elements of the smooth noncommutative two torus.

An element is stored as a map ``(m, n) -> a_mn`` standing for the series
``sum a_mn U^m V^n`` with the relation ``V U = e^{2 pi i theta} U V``.
"""

from __future__ import annotations

import cmath
import math
from functools import lru_cache
from typing import Dict, Iterable, Mapping, Tuple

import numpy as np

Mode = Tuple[int, int]

DEFAULT_THETA = (math.sqrt(5.0) - 1.0) / 2.0
DEFAULT_PRUNE = 1e-15


class ThetaMismatch(ValueError):
    pass


@lru_cache(maxsize=65536)
def phase(theta: float, k: int) -> complex:
    """``e^{2 pi i theta k}`` computed from the reduced product ``k theta mod 1``."""
    if k == 0:
        return 1.0 + 0.0j
    frac = math.fmod(k * theta, 1.0)
    return cmath.exp(2j * math.pi * frac)


def prune(coeffs: Mapping, rel: float = DEFAULT_PRUNE) -> dict:
    if not coeffs:
        return {}
    scale = max(abs(c) for c in coeffs.values())
    if scale == 0.0:
        return {}
    cut = rel * scale
    return {k: c for k, c in coeffs.items() if abs(c) > cut}


class AlgebraElement:
    """Immutable finitely supported Fourier series over A_theta."""

    __slots__ = ("theta", "coeffs")

    def __init__(self, coeffs: Mapping[Mode, complex] | None = None,
                 theta: float = DEFAULT_THETA, prune_rel: float = DEFAULT_PRUNE):
        clean: Dict[Mode, complex] = {}
        for (m, n), c in (coeffs or {}).items():
            key = (int(m), int(n))
            clean[key] = clean.get(key, 0.0) + complex(c)
        object.__setattr__(self, "theta", float(theta))
        object.__setattr__(self, "coeffs", prune(clean, prune_rel))

    def __setattr__(self, name, value):
        raise AttributeError("AlgebraElement is immutable")

    # constructors
    @classmethod
    def scalar(cls, c: complex, theta: float = DEFAULT_THETA) -> "AlgebraElement":
        return cls({(0, 0): c}, theta)

    @classmethod
    def monomial(cls, m: int, n: int, c: complex = 1.0,
                 theta: float = DEFAULT_THETA) -> "AlgebraElement":
        return cls({(m, n): c}, theta)

    @classmethod
    def random(cls, rng: np.random.Generator, radius: int = 2, nterms: int = 4,
               scale: float = 1.0, theta: float = DEFAULT_THETA) -> "AlgebraElement":
        coeffs = {}
        for _ in range(nterms):
            m, n = (int(v) for v in rng.integers(-radius, radius + 1, size=2))
            coeffs[(m, n)] = coeffs.get((m, n), 0.0) + scale * complex(*rng.normal(size=2))
        return cls(coeffs, theta)

    # basic protocol
    def _check(self, other: "AlgebraElement") -> None:
        if self.theta != other.theta:
            raise ThetaMismatch(f"theta mismatch: {self.theta} vs {other.theta}")

    def _coerce(self, other) -> "AlgebraElement":
        if isinstance(other, AlgebraElement):
            self._check(other)
            return other
        if isinstance(other, (int, float, complex)):
            return AlgebraElement.scalar(other, self.theta)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out.get(k, 0.0) + c
        return AlgebraElement(out, self.theta)

    __radd__ = __add__

    def __neg__(self):
        return AlgebraElement({k: -c for k, c in self.coeffs.items()}, self.theta)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return AlgebraElement({k: other * c for k, c in self.coeffs.items()}, self.theta)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return multiply(self, other)

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex)):
            return self * other
        return NotImplemented

    def __eq__(self, other):
        if not isinstance(other, AlgebraElement):
            return NotImplemented
        return self.theta == other.theta and self.coeffs == other.coeffs

    def __hash__(self):
        return hash((self.theta, frozenset(self.coeffs.items())))

    def __repr__(self):
        body = " + ".join(f"({c:.6g})U^{m}V^{n}" for (m, n), c in sorted(self.coeffs.items()))
        return f"AlgebraElement({body or '0'}, theta={self.theta:.6g})"

    @property
    def support(self) -> Iterable[Mode]:
        return self.coeffs.keys()

    def coeff(self, m: int, n: int) -> complex:
        return self.coeffs.get((m, n), 0.0j)

    def is_zero(self) -> bool:
        return not self.coeffs

    def norm(self) -> float:
        """l2 norm of the coefficients, i.e. the GNS norm sqrt(phi0(a* a))."""
        return math.sqrt(sum(abs(c) ** 2 for c in self.coeffs.values()))

    def max_mode(self) -> int:
        return max((max(abs(m), abs(n)) for m, n in self.coeffs), default=0)

    def adjoint(self) -> "AlgebraElement":
        return adjoint(self)

    def to_json(self) -> dict:
        terms = [{"m": m, "n": n, "re": c.real, "im": c.imag}
                 for (m, n), c in sorted(self.coeffs.items())]
        return {"theta": self.theta, "terms": terms}

    @classmethod
    def from_json(cls, data: Mapping, theta: float | None = None) -> "AlgebraElement":
        th = data.get("theta", theta if theta is not None else DEFAULT_THETA)
        coeffs = {}
        for t in data.get("terms", []):
            key = (int(t["m"]), int(t["n"]))
            coeffs[key] = coeffs.get(key, 0.0) + complex(t.get("re", 0.0), t.get("im", 0.0))
        return cls(coeffs, th)


def multiply(a: AlgebraElement, b: AlgebraElement) -> AlgebraElement:
    """Product using ``(U^m V^n)(U^p V^q) = e^{2 pi i theta n p} U^{m+p} V^{n+q}``."""
    a._check(b)
    th = a.theta
    out: Dict[Mode, complex] = {}
    for (m, n), c in a.coeffs.items():
        for (p, q), d in b.coeffs.items():
            key = (m + p, n + q)
            out[key] = out.get(key, 0.0) + c * d * phase(th, n * p)
    return AlgebraElement(out, th)


def adjoint(a: AlgebraElement) -> AlgebraElement:
    """``(c U^m V^n)* = conj(c) e^{2 pi i theta m n} U^{-m} V^{-n}``."""
    th = a.theta
    return AlgebraElement(
        {(-m, -n): c.conjugate() * phase(th, m * n) for (m, n), c in a.coeffs.items()}, th)


def trace_phi0(a: AlgebraElement) -> complex:
    return a.coeffs.get((0, 0), 0.0j)


def inner(a: AlgebraElement, b: AlgebraElement) -> complex:
    """GNS inner product ``<a, b> = phi0(b* a)``."""
    return trace_phi0(multiply(adjoint(b), a))


_DERIVATIONS = ("delta1", "delta2", "dbar", "dbar_star")


def derivation_weight(which: str, m: int, n: int, tau: complex = 1j) -> complex:
    if which == "delta1":
        return m
    if which == "delta2":
        return n
    if which == "dbar":
        return m + tau * n
    if which == "dbar_star":
        return m + tau.conjugate() * n
    raise ValueError(f"unknown derivation {which!r}; expected one of {_DERIVATIONS}")


def derive(a: AlgebraElement, which: str, tau: complex = 1j) -> AlgebraElement:
    """Apply delta1, delta2, dbar = delta1 + tau delta2 or dbar* = delta1 + conj(tau) delta2."""
    tau = complex(tau)
    if which in ("dbar", "dbar_star") and tau.imag <= 0:
        raise ValueError("complex structure requires Im(tau) > 0")
    return AlgebraElement(
        {(m, n): derivation_weight(which, m, n, tau) * c for (m, n), c in a.coeffs.items()},
        a.theta)
