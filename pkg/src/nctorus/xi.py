"""Closed-class scalar functions of the covariable xi.

Every term is a product over a fixed factor basis::

    xi1^a xi2^b  l^el  lbar^elb  rho^er  g^(eg + gz*z)  Lam^pL  L0^p0  prod_k chi^(k)(|xi|)^c_k

with ``l = xi1 + tau xi2``, ``lbar = xi1 + conj(tau) xi2``, ``rho = |xi|^2``,
``g = l lbar``, ``Lam = log(g / rho)``, ``L0 = log|xi|`` and ``chi`` the radial
cutoff.  A coefficient may carry a power ``z^zp`` of the formal parameter ``z``.

Terms are never simplified by polynomial division; they merge only when their
signatures agree exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterable, List, NamedTuple, Optional, Tuple

import numpy as np
from scipy.special import beta, betainc

TAU_I_TOL = 1e-15


class Sig(NamedTuple):
    a: int = 0
    b: int = 0
    el: int = 0
    elb: int = 0
    er: complex = 0
    eg: complex = 0
    gz: int = 0
    pL: int = 0
    p0: int = 0
    chi: Tuple[int, ...] = ()


ONE = Sig()


def _clean_num(x):
    x = complex(x)
    if x.imag == 0.0:
        r = x.real
        return int(r) if r == int(r) else r
    return x


def _is_int(x) -> bool:
    x = complex(x)
    return x.imag == 0.0 and x.real == int(x.real)


def _chi_add(c1: Tuple[int, ...], c2: Tuple[int, ...]) -> Tuple[int, ...]:
    if not c1:
        return c2
    if not c2:
        return c1
    n = max(len(c1), len(c2))
    out = [0] * n
    for i, v in enumerate(c1):
        out[i] += v
    for i, v in enumerate(c2):
        out[i] += v
    return _chi_trim(out)


def _chi_trim(c) -> Tuple[int, ...]:
    c = list(c)
    while c and c[-1] == 0:
        c.pop()
    return tuple(c)


def tau_is_i(tau: complex) -> bool:
    return abs(complex(tau) - 1j) <= TAU_I_TOL


@lru_cache(maxsize=None)
def normalize(sig: Sig, g_is_rho: bool) -> Optional[Sig]:
    """Canonical form of a signature; ``None`` when the term vanishes identically."""
    a, b, el, elb, er, eg, gz, pL, p0, chi = sig
    if _is_int(eg) and complex(eg) != 0:
        k = int(complex(eg).real)
        el += k
        elb += k
        eg = 0
    if g_is_rho:
        if pL > 0:
            return None
        if el < 0:
            elb -= el
            er = complex(er) + el
            el = 0
        if elb < 0:
            el -= elb
            er = complex(er) + elb
            elb = 0
        p = min(el, elb)
        if p > 0:
            el -= p
            elb -= p
            er = complex(er) + p
        if complex(eg) != 0:
            er = complex(er) + complex(eg)
            eg = 0
    return Sig(a, b, el, elb, _clean_num(er), _clean_num(eg), gz, pL, p0, _chi_trim(chi))


@lru_cache(maxsize=None)
def sig_mul(s1: Sig, s2: Sig, g_is_rho: bool) -> Optional[Sig]:
    s = Sig(s1.a + s2.a, s1.b + s2.b, s1.el + s2.el, s1.elb + s2.elb,
            complex(s1.er) + complex(s2.er), complex(s1.eg) + complex(s2.eg),
            s1.gz + s2.gz, s1.pL + s2.pL, s1.p0 + s2.p0, _chi_add(s1.chi, s2.chi))
    return normalize(s, g_is_rho)


def sig_degree(sig: Sig) -> complex:
    """Homogeneity degree of the z-independent part (chi factors count as degree 0)."""
    return complex(sig.a + sig.b + sig.el + sig.elb) + 2 * complex(sig.er) + 2 * complex(sig.eg)


def has_chi_derivative(sig: Sig) -> bool:
    return any(c > 0 for c in sig.chi[1:])


def strip_chi(sig: Sig) -> Sig:
    return sig._replace(chi=())


def with_chi(sig: Sig, power: int = 1) -> Sig:
    return sig._replace(chi=_chi_add(sig.chi, (power,)))


@lru_cache(maxsize=None)
def sig_partial(sig: Sig, axis: int, tau: complex, g_is_rho: bool) -> Tuple[Tuple[Sig, int, complex], ...]:
    """Derivative of one basis term: tuple of ``(sig, z-power increment, coefficient)``."""
    tau = complex(tau)
    c = (1.0, tau)[axis]
    cb = (1.0, tau.conjugate())[axis]
    out: List[Tuple[Sig, int, complex]] = []

    def add(s: Sig, dz: int, coeff: complex) -> None:
        if coeff == 0:
            return
        ns = normalize(s, g_is_rho)
        if ns is not None:
            out.append((ns, dz, complex(coeff)))

    def bump_xi(s: Sig, k: int = 1) -> Sig:
        return s._replace(a=s.a + k) if axis == 0 else s._replace(b=s.b + k)

    # polynomial numerator
    p = sig.a if axis == 0 else sig.b
    if p:
        add(sig._replace(a=sig.a - 1) if axis == 0 else sig._replace(b=sig.b - 1), 0, p)
    if sig.el:
        add(sig._replace(el=sig.el - 1), 0, sig.el * c)
    if sig.elb:
        add(sig._replace(elb=sig.elb - 1), 0, sig.elb * cb)
    er = complex(sig.er)
    if er != 0:
        add(bump_xi(sig._replace(er=er - 1)), 0, 2 * er)
    eg = complex(sig.eg)
    # d g^s = s g^s (c / l + cb / lbar)
    if eg != 0:
        add(sig._replace(el=sig.el - 1), 0, eg * c)
        add(sig._replace(elb=sig.elb - 1), 0, eg * cb)
    if sig.gz:
        add(sig._replace(el=sig.el - 1), 1, sig.gz * c)
        add(sig._replace(elb=sig.elb - 1), 1, sig.gz * cb)
    if sig.pL:
        base = sig._replace(pL=sig.pL - 1)
        add(base._replace(el=base.el - 1), 0, sig.pL * c)
        add(base._replace(elb=base.elb - 1), 0, sig.pL * cb)
        add(bump_xi(base._replace(er=complex(base.er) - 1)), 0, -2 * sig.pL)
    if sig.p0:
        base = sig._replace(p0=sig.p0 - 1)
        add(bump_xi(base._replace(er=complex(base.er) - 1)), 0, sig.p0)
    # d chi^(k)(r) = chi^(k+1)(r) xi_i rho^{-1/2}
    for k, cnt in enumerate(sig.chi):
        if cnt == 0:
            continue
        chi = list(sig.chi) + [0]
        chi[k] -= 1
        chi[k + 1] += 1
        s = bump_xi(sig._replace(chi=_chi_trim(chi), er=complex(sig.er) - 0.5))
        add(s, 0, cnt)

    merged: Dict[Tuple[Sig, int], complex] = {}
    for s, dz, co in out:
        merged[(s, dz)] = merged.get((s, dz), 0.0) + co
    return tuple((s, dz, co) for (s, dz), co in merged.items() if co != 0)


def sig_conj(sig: Sig) -> Sig:
    """Pointwise complex conjugate for real xi (requires z-free)."""
    if sig.gz:
        raise ValueError("cannot conjugate a term carrying the symbolic parameter z")
    return sig._replace(el=sig.elb, elb=sig.el,
                        er=_clean_num(complex(sig.er).conjugate()),
                        eg=_clean_num(complex(sig.eg).conjugate()))


# ---------------------------------------------------------------------------
# cutoff function


@dataclass(frozen=True)
class Cutoff:
    """Radial cutoff: 0 for |xi| <= r0, 1 for |xi| >= r1, polynomial C^smoothness in between."""

    r0: float = 0.5
    r1: float = 1.0
    smoothness: int = 12

    def __post_init__(self):
        if not 0 < self.r0 < self.r1 <= 1.0:
            raise ValueError("cutoff radii must satisfy 0 < r0 < r1 <= 1")

    def _step(self, t: np.ndarray, k: int) -> np.ndarray:
        """k-th derivative of the smoothstep I_t(K+1, K+1) on 0 <= t <= 1."""
        K = self.smoothness
        if k == 0:
            return betainc(K + 1, K + 1, t)
        j = k - 1  # derivative order applied to t^K (1-t)^K
        norm = 1.0 / beta(K + 1, K + 1)
        out = np.zeros_like(t)
        for i in range(j + 1):
            if i > K or j - i > K:
                continue
            c = math.comb(j, i) * math.perm(K, i) * math.perm(K, j - i) * (-1) ** (j - i)
            out = out + c * t ** (K - i) * (1 - t) ** (K - j + i)
        return norm * out

    def derivative(self, r: np.ndarray, k: int = 0) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        width = self.r1 - self.r0
        t = np.clip((r - self.r0) / width, 0.0, 1.0)
        val = self._step(t, k) / width ** k
        inside = (r > self.r0) & (r < self.r1)
        if k == 0:
            return np.where(r >= self.r1, 1.0, np.where(inside, val, 0.0))
        return np.where(inside, val, 0.0)

    def __call__(self, r):
        return self.derivative(r, 0)

    def to_json(self) -> dict:
        return {"r0": self.r0, "r1": self.r1, "smoothness": self.smoothness}


DEFAULT_CUTOFF = Cutoff()


# ---------------------------------------------------------------------------
# numeric evaluation


class XiGrid:
    """Cached basis factors at a fixed set of points."""

    def __init__(self, x1, x2, tau: complex, cutoff: Cutoff = DEFAULT_CUTOFF):
        self.x1 = np.asarray(x1, dtype=float)
        self.x2 = np.asarray(x2, dtype=float)
        self.tau = complex(tau)
        self.cutoff = cutoff
        self.rho = self.x1 ** 2 + self.x2 ** 2
        self.r = np.sqrt(self.rho)
        self.l = self.x1 + self.tau * self.x2
        self.lb = self.x1 + self.tau.conjugate() * self.x2
        self.g = (self.l * self.lb).real
        with np.errstate(divide="ignore", invalid="ignore"):
            self.log_rho = np.log(self.rho)
            self.log_g = np.log(self.g)
            self.Lam = self.log_g - self.log_rho
        self.L0 = 0.5 * self.log_rho
        self._chi: Dict[int, np.ndarray] = {}
        self._cache: Dict[Tuple[Sig, complex], np.ndarray] = {}

    def chi(self, k: int) -> np.ndarray:
        if k not in self._chi:
            self._chi[k] = self.cutoff.derivative(self.r, k)
        return self._chi[k]

    def eval_sig(self, sig: Sig, z: complex | None = None) -> np.ndarray:
        key = (sig, z)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        val = np.ones(self.x1.shape, dtype=complex)
        mask = None
        for k, cnt in enumerate(sig.chi):
            if cnt:
                ck = self.chi(k)
                val = val * ck ** cnt
                nz = ck != 0
                mask = nz if mask is None else (mask & nz)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if sig.a:
                val = val * self.x1 ** sig.a
            if sig.b:
                val = val * self.x2 ** sig.b
            if sig.el:
                val = val * self.l ** sig.el
            if sig.elb:
                val = val * self.lb ** sig.elb
            ge = complex(sig.eg)
            if sig.gz:
                if z is None:
                    raise ValueError("term carries z but no numeric z was supplied")
                ge = ge + sig.gz * complex(z)
            if complex(sig.er) != 0:
                val = val * np.exp(complex(sig.er) * self.log_rho)
            if ge != 0:
                val = val * np.exp(ge * self.log_g)
            if sig.pL:
                val = val * self.Lam ** sig.pL
            if sig.p0:
                val = val * self.L0 ** sig.p0
        if mask is not None:
            val = np.where(mask, val, 0.0)
        if not np.all(np.isfinite(val)):
            raise ZeroDivisionError("basis factor singular at an evaluation point")
        self._cache[key] = val
        return val


# ---------------------------------------------------------------------------
# public coefficient-function type

TermKey = Tuple[Sig, int]


class CoefficientFunction:
    """Immutable finite sum ``sum_k c_k z^{zp_k} * basis_k(xi)``."""

    __slots__ = ("tau", "terms")

    def __init__(self, terms: Dict[TermKey, complex] | None = None, tau: complex = 1j):
        tau = complex(tau)
        if tau.imag <= 0:
            raise ValueError("Im(tau) must be positive")
        gr = tau_is_i(tau)
        clean: Dict[TermKey, complex] = {}
        for (s, zp), c in (terms or {}).items():
            ns = normalize(s, gr)
            if ns is None or c == 0:
                continue
            clean[(ns, zp)] = clean.get((ns, zp), 0.0) + complex(c)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "terms", {k: c for k, c in clean.items() if abs(c) > 1e-300})

    def __setattr__(self, name, value):
        raise AttributeError("CoefficientFunction is immutable")

    # constructors
    @classmethod
    def basis(cls, tau: complex = 1j, coeff: complex = 1.0, zp: int = 0, **fields) -> "CoefficientFunction":
        return cls({(Sig(**fields), zp): coeff}, tau)

    @classmethod
    def const(cls, c: complex, tau: complex = 1j) -> "CoefficientFunction":
        return cls({(ONE, 0): c}, tau)

    @classmethod
    def ell(cls, tau: complex, power: int = 1):
        return cls.basis(tau, el=power)

    @classmethod
    def ellbar(cls, tau: complex, power: int = 1):
        return cls.basis(tau, elb=power)

    @classmethod
    def rho(cls, tau: complex, power: complex = 1):
        return cls.basis(tau, er=power)

    @classmethod
    def g(cls, tau: complex, power: int = 1):
        return cls.basis(tau, el=power, elb=power)

    @classmethod
    def g_z(cls, tau: complex, shift: int = 0):
        """``g^{z + shift}``."""
        return cls.basis(tau, el=shift, elb=shift, gz=1)

    @classmethod
    def Lambda(cls, tau: complex, power: int = 1):
        return cls.basis(tau, pL=power)

    @classmethod
    def L0(cls, tau: complex, power: int = 1):
        return cls.basis(tau, p0=power)

    @classmethod
    def xi(cls, tau: complex, axis: int):
        return cls.basis(tau, a=1) if axis == 1 else cls.basis(tau, b=1)

    # arithmetic
    def _check(self, other: "CoefficientFunction") -> None:
        if self.tau != other.tau:
            raise ValueError(f"tau mismatch: {self.tau} vs {other.tau}")

    def _coerce(self, other):
        if isinstance(other, CoefficientFunction):
            self._check(other)
            return other
        if isinstance(other, (int, float, complex)):
            return CoefficientFunction.const(other, self.tau)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0.0) + c
        return CoefficientFunction(prune_terms(out), self.tau)

    __radd__ = __add__

    def __neg__(self):
        return CoefficientFunction({k: -c for k, c in self.terms.items()}, self.tau)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        gr = tau_is_i(self.tau)
        out: Dict[TermKey, complex] = {}
        for (s1, z1), c1 in self.terms.items():
            for (s2, z2), c2 in other.terms.items():
                s = sig_mul(s1, s2, gr)
                if s is None:
                    continue
                k = (s, z1 + z2)
                out[k] = out.get(k, 0.0) + c1 * c2
        return CoefficientFunction(prune_terms(out), self.tau)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        k = int(k)
        if k < 0:
            if len(self.terms) != 1:
                raise ValueError("negative powers only for single basis terms")
            (s, zp), c = next(iter(self.terms.items()))
            if zp or s.gz or s.a or s.b or s.pL or s.p0 or s.chi:
                raise ValueError("negative powers need a pure l, lbar, rho, g monomial")
            inv = Sig(el=-s.el, elb=-s.elb, er=-complex(s.er), eg=-complex(s.eg))
            base = CoefficientFunction({(normalize(inv, tau_is_i(self.tau)), 0): 1.0 / c}, self.tau)
            return base ** (-k)
        out = CoefficientFunction.const(1.0, self.tau)
        for _ in range(k):
            out = out * self
        return out

    def is_zero(self) -> bool:
        return not self.terms

    @property
    def has_z(self) -> bool:
        return any(zp or s.gz for (s, zp) in self.terms)

    def degrees(self) -> set:
        return {sig_degree(s) for (s, _) in self.terms}

    def __repr__(self):
        return f"CoefficientFunction({len(self.terms)} terms, tau={self.tau})"

    # calculus
    def partial(self, axis: int) -> "CoefficientFunction":
        """Derivative in xi_axis, axis in {1, 2}."""
        if axis not in (1, 2):
            raise ValueError("axis must be 1 or 2")
        return CoefficientFunction(partial_terms(self.terms, axis - 1, self.tau), self.tau)

    def evaluate(self, xi, z: complex | None = None, cutoff: Cutoff = DEFAULT_CUTOFF):
        """Value at a point ``(xi1, xi2)`` or at arrays of points."""
        x1, x2 = xi
        scalar = np.ndim(x1) == 0
        grid = XiGrid(np.atleast_1d(x1), np.atleast_1d(x2), self.tau, cutoff)
        out = eval_terms(self.terms, grid, z)
        return complex(out[0]) if scalar else out

    def substitute(self, z: complex) -> "CoefficientFunction":
        return CoefficientFunction(substitute_terms(self.terms, z), self.tau)

    def shift_z(self, s: int) -> "CoefficientFunction":
        return CoefficientFunction(shift_terms(self.terms, s), self.tau)

    def dz_at_zero(self) -> "CoefficientFunction":
        if not self.has_z:
            raise ValueError("dz_at_zero needs a z-dependent function")
        return CoefficientFunction(dz_terms(self.terms, self.tau), self.tau)

    def conj(self) -> "CoefficientFunction":
        return CoefficientFunction({(sig_conj(s), zp): c.conjugate() for (s, zp), c in self.terms.items()},
                                   self.tau)

    def to_json(self) -> list:
        return [{"sig": {k: (str(v) if isinstance(v, complex) else v) for k, v in s._asdict().items()},
                 "zp": zp, "re": c.real, "im": c.imag}
                for (s, zp), c in sorted(self.terms.items(), key=lambda kv: repr(kv[0]))]


# ---------------------------------------------------------------------------
# term-level helpers shared with the symbol calculus


def prune_terms(terms: Dict, rel: float = 1e-15) -> Dict:
    if not terms:
        return {}
    scale = max(abs(c) for c in terms.values())
    cut = rel * scale
    return {k: c for k, c in terms.items() if abs(c) > cut}


def partial_terms(terms: Dict[TermKey, complex], axis: int, tau: complex) -> Dict[TermKey, complex]:
    gr = tau_is_i(tau)
    out: Dict[TermKey, complex] = {}
    for (s, zp), c in terms.items():
        for ns, dz, co in sig_partial(s, axis, complex(tau), gr):
            k = (ns, zp + dz)
            out[k] = out.get(k, 0.0) + c * co
    return prune_terms(out)


def eval_terms(terms: Dict[TermKey, complex], grid: XiGrid, z: complex | None = None) -> np.ndarray:
    total = np.zeros(grid.x1.shape, dtype=complex)
    for (s, zp), c in terms.items():
        if zp and z is None:
            raise ValueError("z-dependent coefficient but no numeric z supplied")
        coeff = c * (complex(z) ** zp if zp else 1.0)
        total += coeff * grid.eval_sig(s, z if s.gz else None)
    return total


def substitute_terms(terms: Dict[TermKey, complex], z: complex) -> Dict[TermKey, complex]:
    z = complex(z)
    out: Dict[TermKey, complex] = {}
    for (s, zp), c in terms.items():
        ns = s
        if s.gz:
            ns = s._replace(eg=_clean_num(complex(s.eg) + s.gz * z), gz=0)
        k = (ns, 0)
        out[k] = out.get(k, 0.0) + c * (z ** zp if zp else 1.0)
    return out


def shift_terms(terms: Dict[TermKey, complex], shift: int) -> Dict[TermKey, complex]:
    """Substitute ``z -> z + shift`` symbolically."""
    out: Dict[TermKey, complex] = {}
    for (s, zp), c in terms.items():
        ns = s._replace(el=s.el + s.gz * shift, elb=s.elb + s.gz * shift) if s.gz else s
        for i in range(zp + 1):
            k = (ns, i)
            out[k] = out.get(k, 0.0) + c * math.comb(zp, i) * float(shift) ** (zp - i)
    return out


def negate_z_terms(terms: Dict[TermKey, complex]) -> Dict[TermKey, complex]:
    """Substitute ``z -> -z`` symbolically."""
    return {(s._replace(gz=-s.gz), zp): c * (-1) ** zp for (s, zp), c in terms.items()}


def dz_terms(terms: Dict[TermKey, complex], tau: complex) -> Dict[TermKey, complex]:
    """``d/dz`` at ``z = 0``, using ``log g = Lam + 2 L0``."""
    gr = tau_is_i(tau)
    out: Dict[TermKey, complex] = {}

    def add(s, c):
        ns = normalize(s, gr)
        if ns is not None:
            out[(ns, 0)] = out.get((ns, 0), 0.0) + c

    for (s, zp), c in terms.items():
        base = s._replace(gz=0)
        if zp == 1:
            add(base, c)
        elif zp == 0 and s.gz:
            add(base._replace(pL=base.pL + 1), c * s.gz)
            add(base._replace(p0=base.p0 + 1), 2 * c * s.gz)
    return prune_terms(out)
