"""Graded operator symbols over A_theta with explicit truncation depth.

A symbol of order ``o`` is stored as components ``j = 0, 1, ...`` where
component ``j`` collects the terms of homogeneity degree ``o - j``.  Each
component is a *tensor*: a dict ``(sig, aux, m, n) -> c`` meaning
``c * z^aux * basis_sig(xi) * U^m V^n``.  For resolvent expansions the ``aux``
slot holds instead the pole order ``k`` of ``(lambda - g)^{-k}``.

Representatives of non-polynomial symbols carry the radial cutoff ``chi`` as an
explicit factor, so star products of representatives see ``d chi`` terms exactly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

import numpy as np

from .algebra import DEFAULT_THETA, AlgebraElement, phase
from .xi import (ONE, CoefficientFunction, Cutoff, DEFAULT_CUTOFF, Sig, XiGrid, dz_terms,
                 has_chi_derivative, negate_z_terms, normalize, prune_terms, shift_terms,
                 sig_conj, sig_degree, sig_mul, sig_partial, strip_chi, substitute_terms,
                 tau_is_i, with_chi)

DEFAULT_DEPTH = 6

Key = Tuple[Sig, int, int, int]
Tensor = Dict[Key, complex]


class DepthError(ValueError):
    """Requested components lie below the valid truncation depth."""


class EllipticityError(ValueError):
    """Leading symbol is not a scalar invertible basis monomial."""


@dataclass(frozen=True)
class Context:
    theta: float = DEFAULT_THETA
    tau: complex = 1j

    def __post_init__(self):
        if complex(self.tau).imag <= 0:
            raise ValueError("Im(tau) must be positive")
        object.__setattr__(self, "tau", complex(self.tau))
        object.__setattr__(self, "theta", float(self.theta))

    @property
    def g_is_rho(self) -> bool:
        return tau_is_i(self.tau)


# ---------------------------------------------------------------------------
# tensor kernels


def t_add(*ts: Tensor, scale: complex = 1.0) -> Tensor:
    out: Tensor = {}
    for t in ts:
        for k, c in t.items():
            out[k] = out.get(k, 0.0) + c
    if scale != 1.0:
        out = {k: scale * c for k, c in out.items()}
    return prune_terms(out)


def t_scale(t: Tensor, c: complex) -> Tensor:
    return {k: c * v for k, v in t.items()} if c != 0 else {}


def t_mul(t1: Tensor, t2: Tensor, ctx: Context) -> Tensor:
    """Pointwise product: basis factors multiply, algebra parts multiply in order."""
    if not t1 or not t2:
        return {}
    gr = ctx.g_is_rho
    th = ctx.theta
    out: Tensor = {}
    for (s1, x1, m1, n1), c1 in t1.items():
        for (s2, x2, m2, n2), c2 in t2.items():
            s = sig_mul(s1, s2, gr)
            if s is None:
                continue
            k = (s, x1 + x2, m1 + m2, n1 + n2)
            out[k] = out.get(k, 0.0) + c1 * c2 * phase(th, n1 * m2)
    return prune_terms(out)


def t_partial(t: Tensor, axis: int, ctx: Context, poles: bool = False) -> Tensor:
    """xi-derivative (axis 0 or 1).  With ``poles`` the aux slot is a pole order."""
    gr = ctx.g_is_rho
    tau = ctx.tau
    cb = (1.0, tau.conjugate())[axis]
    c = (1.0, tau)[axis]
    out: Tensor = {}
    for (s, x, m, n), v in t.items():
        for ns, dz, co in sig_partial(s, axis, tau, gr):
            if poles and dz:
                raise ValueError("resolvent terms cannot carry z")
            k = (ns, x + dz, m, n)
            out[k] = out.get(k, 0.0) + v * co
        if poles and x:
            # d (lambda - g)^{-x} = x (lambda - g)^{-x-1} (c lbar + cb l)
            for extra, co in ((Sig(elb=1), c), (Sig(el=1), cb)):
                ns = sig_mul(s, extra, gr)
                if ns is None:
                    continue
                k = (ns, x + 1, m, n)
                out[k] = out.get(k, 0.0) + v * x * co
    return prune_terms(out)


def t_delta(t: Tensor, gamma: Tuple[int, int]) -> Tensor:
    g1, g2 = gamma
    out = {}
    for (s, x, m, n), v in t.items():
        w = (m ** g1) * (n ** g2)
        if w:
            out[(s, x, m, n)] = v * w
    return out


def t_conj(t: Tensor, ctx: Context) -> Tensor:
    """Pointwise adjoint: conjugate function times adjoint algebra element."""
    out: Tensor = {}
    for (s, x, m, n), v in t.items():
        if x:
            raise ValueError("adjoint of z-dependent symbols is not supported")
        k = (sig_conj(s), 0, -m, -n)
        out[k] = out.get(k, 0.0) + v.conjugate() * phase(ctx.theta, m * n)
    return out


def t_map_sig(t: Tensor, fn) -> Tensor:
    out: Tensor = {}
    for (s, x, m, n), v in t.items():
        r = fn(s)
        if r is None:
            continue
        k = (r, x, m, n)
        out[k] = out.get(k, 0.0) + v
    return out


def t_from_cf(cf: CoefficientFunction, a: AlgebraElement) -> Tensor:
    out: Tensor = {}
    for (s, zp), c in cf.terms.items():
        for (m, n), d in a.coeffs.items():
            k = (s, zp, m, n)
            out[k] = out.get(k, 0.0) + c * d
    return out


def t_cf_terms(t: Tensor, mode: Tuple[int, int]) -> Dict[Tuple[Sig, int], complex]:
    return {(s, x): v for (s, x, m, n), v in t.items() if (m, n) == mode}


def multi_indices(k: int) -> Iterator[Tuple[int, int]]:
    for g1 in range(k + 1):
        yield (g1, k - g1)


def _factorial(g: Tuple[int, int]) -> int:
    return math.factorial(g[0]) * math.factorial(g[1])


class _Derivs:
    """Memoized ``d^gamma`` of symbol components."""

    def __init__(self, comps: Mapping[int, Tensor], ctx: Context, poles: bool = False):
        self.comps = comps
        self.ctx = ctx
        self.poles = poles
        self.cache: Dict[Tuple[int, Tuple[int, int]], Tensor] = {}

    def get(self, j: int, gamma: Tuple[int, int]) -> Tensor:
        key = (j, gamma)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        if gamma == (0, 0):
            val = self.comps.get(j, {})
        elif gamma[0] > 0:
            val = t_partial(self.get(j, (gamma[0] - 1, gamma[1])), 0, self.ctx, self.poles)
        else:
            val = t_partial(self.get(j, (0, gamma[1] - 1)), 1, self.ctx, self.poles)
        self.cache[key] = val
        return val


# ---------------------------------------------------------------------------
# symbol type


@dataclass(frozen=True)
class OperatorSymbol:
    """Classical (possibly log-polyhomogeneous, possibly z-dependent) symbol.

    ``order`` is the z-independent part of the order and ``order_z`` the
    coefficient of ``z`` in it.  ``depth`` is ``None`` for exact symbols;
    otherwise components ``j >= depth`` are unknown.
    """

    ctx: Context
    order: complex
    comps: Dict[int, Tensor]
    depth: Optional[int] = None
    order_z: complex = 0

    def __post_init__(self):
        object.__setattr__(self, "comps", {j: t for j, t in self.comps.items() if t})

    @property
    def is_exact(self) -> bool:
        return self.depth is None

    @property
    def is_parametric(self) -> bool:
        return self.order_z != 0 or any(x or s.gz for t in self.comps.values() for (s, x, _, _) in t)

    def component(self, j: int) -> Tensor:
        if self.depth is not None and j >= self.depth:
            raise DepthError(f"component {j} lies below truncation depth {self.depth}")
        return self.comps.get(j, {})

    def max_j(self) -> int:
        return max(self.comps, default=-1)

    def is_polynomial(self) -> bool:
        for t in self.comps.values():
            for (s, x, _, _) in t:
                if (s.el < 0 or s.elb < 0 or complex(s.er) != 0 or complex(s.eg) != 0 or s.gz
                        or s.pL or s.p0 or s.chi):
                    return False
        return True

    def truncate(self, depth: int) -> "OperatorSymbol":
        if self.depth is not None and depth > self.depth:
            raise DepthError(f"cannot extend depth {self.depth} to {depth}")
        return OperatorSymbol(self.ctx, self.order, {j: t for j, t in self.comps.items() if j < depth},
                              depth, self.order_z)

    def degree_of(self, j: int, z: complex | None = None) -> complex:
        base = self.order - j
        return base + (self.order_z * z if z is not None else 0)

    def __add__(self, other: "OperatorSymbol") -> "OperatorSymbol":
        if self.ctx != other.ctx:
            raise ValueError("context mismatch")
        shift = self.order - other.order
        if abs(shift - round(shift.real)) > 1e-12 or self.order_z != other.order_z:
            raise ValueError("orders must differ by an integer")
        shift = int(round(shift.real))
        if shift < 0:
            return other + self
        depth = _min_depth(self.depth, None if other.depth is None else other.depth + shift)
        comps = {j: dict(t) for j, t in self.comps.items()}
        for j, t in other.comps.items():
            comps[j + shift] = t_add(comps.get(j + shift, {}), t)
        if depth is not None:
            comps = {j: t for j, t in comps.items() if j < depth}
        return OperatorSymbol(self.ctx, self.order, comps, depth, self.order_z)

    def scale(self, c: complex) -> "OperatorSymbol":
        return OperatorSymbol(self.ctx, self.order, {j: t_scale(t, c) for j, t in self.comps.items()},
                              self.depth, self.order_z)

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        return self + (-other)

    def at(self, z: complex) -> "OperatorSymbol":
        """Substitute a numeric value for the formal parameter z."""
        z = complex(z)
        comps = {}
        for j, t in self.comps.items():
            out: Tensor = {}
            for (m, n), cfterms in _by_mode(t).items():
                for (s, x), v in substitute_terms(cfterms, z).items():
                    ns = normalize(s, self.ctx.g_is_rho)
                    if ns is None:
                        continue
                    k = (ns, 0, m, n)
                    out[k] = out.get(k, 0.0) + v
            comps[j] = prune_terms(out)
        return OperatorSymbol(self.ctx, self.order + self.order_z * z, comps, self.depth, 0)

    def negate_z(self) -> "OperatorSymbol":
        comps = {}
        for j, t in self.comps.items():
            out: Tensor = {}
            for (m, n), cfterms in _by_mode(t).items():
                for (s, x), v in negate_z_terms(cfterms).items():
                    out[(s, x, m, n)] = v
            comps[j] = out
        return OperatorSymbol(self.ctx, self.order, comps, self.depth, -self.order_z)

    def with_cutoff(self, power: int = 1) -> "OperatorSymbol":
        """Representative ``chi * sigma`` (applied to every term)."""
        comps = {j: t_map_sig(t, lambda s: with_chi(s, power)) for j, t in self.comps.items()}
        return OperatorSymbol(self.ctx, self.order, comps, self.depth, self.order_z)

    def without_cutoff(self) -> "OperatorSymbol":
        """Homogeneous parts only: strip chi powers and drop compactly supported chi-derivative terms."""
        comps = {j: t_map_sig(t, lambda s: None if has_chi_derivative(s) else strip_chi(s))
                 for j, t in self.comps.items()}
        return OperatorSymbol(self.ctx, self.order, {j: prune_terms(t) for j, t in comps.items()},
                              self.depth, self.order_z)

    def homogeneous_component(self, degree: complex, logpower: int = 0) -> List[Tuple[CoefficientFunction, AlgebraElement]]:
        """Component of given homogeneity degree and power of log|xi|, chi stripped."""
        jf = self.order - complex(degree)
        j = int(round(jf.real))
        if abs(jf - j) > 1e-9:
            return []
        if j < 0:
            return []
        t = self.component(j)
        grouped: Dict[Sig, Dict[Tuple[int, int], complex]] = {}
        for (s, x, m, n), v in t.items():
            if has_chi_derivative(s) or s.p0 != logpower or x:
                if x and s.p0 == logpower and not has_chi_derivative(s):
                    raise ValueError("homogeneous_component of a z-dependent term; substitute z first")
                continue
            ns = strip_chi(s)
            d = grouped.setdefault(ns, {})
            d[(m, n)] = d.get((m, n), 0.0) + v
        out = []
        for s, modes in grouped.items():
            a = AlgebraElement(modes, self.ctx.theta)
            if not a.is_zero():
                out.append((CoefficientFunction({(s, 0): 1.0}, self.ctx.tau), a))
        return out

    def component_tensor(self, degree: complex, logpower: int = 0) -> Tensor:
        out: Tensor = {}
        for cf, a in self.homogeneous_component(degree, logpower):
            for k, v in t_from_cf(cf, a).items():
                out[k] = out.get(k, 0.0) + v
        return out

    def evaluate(self, x1, x2, z: complex | None = None, cutoff: Cutoff = DEFAULT_CUTOFF,
                 js: Optional[List[int]] = None) -> Dict[Tuple[int, int], np.ndarray]:
        """Fourier-mode values of the (representative) symbol at points."""
        grid = XiGrid(np.atleast_1d(x1), np.atleast_1d(x2), self.ctx.tau, cutoff)
        return evaluate_tensor(_merge(self.comps, js), grid, z)

    def to_json(self) -> dict:
        comps = []
        for j in sorted(self.comps):
            for (s, x, m, n), v in sorted(self.comps[j].items(), key=lambda kv: repr(kv[0])):
                comps.append({"degree": _num_json(self.order - j), "logpower": s.p0, "j": j,
                              "sig": {k: (str(val) if isinstance(val, complex) else val)
                                      for k, val in s._asdict().items()},
                              "zp": x, "m": m, "n": n, "re": v.real, "im": v.imag})
        return {"theta": self.ctx.theta, "tau": {"re": self.ctx.tau.real, "im": self.ctx.tau.imag},
                "order": _num_json(self.order), "order_z": _num_json(self.order_z),
                "depth": self.depth, "components": comps}


def _num_json(x):
    x = complex(x)
    return x.real if x.imag == 0 else {"re": x.real, "im": x.imag}


def _merge(comps: Mapping[int, Tensor], js=None) -> Tensor:
    out: Tensor = {}
    for j, t in comps.items():
        if js is not None and j not in js:
            continue
        for k, v in t.items():
            out[k] = out.get(k, 0.0) + v
    return out


def _by_mode(t: Tensor) -> Dict[Tuple[int, int], Dict[Tuple[Sig, int], complex]]:
    out: Dict[Tuple[int, int], Dict[Tuple[Sig, int], complex]] = {}
    for (s, x, m, n), v in t.items():
        d = out.setdefault((m, n), {})
        d[(s, x)] = d.get((s, x), 0.0) + v
    return out


def evaluate_tensor(t: Tensor, grid: XiGrid, z: complex | None = None) -> Dict[Tuple[int, int], np.ndarray]:
    out: Dict[Tuple[int, int], np.ndarray] = {}
    for (s, x, m, n), v in t.items():
        if x and z is None:
            raise ValueError("z-dependent symbol: supply z")
        val = v * (complex(z) ** x if x else 1.0) * grid.eval_sig(s, z if s.gz else None)
        if (m, n) in out:
            out[(m, n)] = out[(m, n)] + val
        else:
            out[(m, n)] = val
    return out


def _min_depth(*ds):
    vals = [d for d in ds if d is not None]
    return min(vals) if vals else None


# ---------------------------------------------------------------------------
# constructors


def from_differential(coeffs: Mapping[Tuple[int, int], AlgebraElement | complex],
                      ctx: Context = Context()) -> OperatorSymbol:
    """Symbol ``sum a_{j1 j2} xi1^j1 xi2^j2`` of ``sum a_{j1 j2} delta1^j1 delta2^j2``."""
    if not coeffs:
        return OperatorSymbol(ctx, 0, {}, None)
    order = max(j1 + j2 for (j1, j2) in coeffs)
    comps: Dict[int, Tensor] = {}
    for (j1, j2), a in coeffs.items():
        if not isinstance(a, AlgebraElement):
            a = AlgebraElement.scalar(a, ctx.theta)
        if a.theta != ctx.theta:
            raise ValueError("theta mismatch")
        t = comps.setdefault(order - j1 - j2, {})
        s = Sig(a=j1, b=j2)
        for (m, n), c in a.coeffs.items():
            t[(s, 0, m, n)] = t.get((s, 0, m, n), 0.0) + c
    return OperatorSymbol(ctx, order, comps, None)


def from_terms(order: complex, comps: Mapping[int, List[Tuple[CoefficientFunction, AlgebraElement]]],
               ctx: Context, depth: Optional[int] = None) -> OperatorSymbol:
    out = {}
    for j, pairs in comps.items():
        t: Tensor = {}
        for cf, a in pairs:
            for k, v in t_from_cf(cf, a).items():
                t[k] = t.get(k, 0.0) + v
        out[j] = t
    return OperatorSymbol(ctx, order, out, depth)


def identity(ctx: Context = Context()) -> OperatorSymbol:
    return from_differential({(0, 0): 1.0}, ctx)


def multiplication(a: AlgebraElement, ctx: Context) -> OperatorSymbol:
    return from_differential({(0, 0): a}, ctx)


def cauchy_riemann(alpha: AlgebraElement, ctx: Context) -> OperatorSymbol:
    """Symbol ``l(xi) + alpha`` of ``D = dbar + alpha``."""
    return from_differential({(1, 0): 1.0, (0, 1): ctx.tau, (0, 0): alpha}, ctx)


# ---------------------------------------------------------------------------
# calculus


def _resolve_depth(N: Optional[int], *syms: OperatorSymbol) -> Optional[int]:
    valid = _min_depth(*(s.depth for s in syms))
    if N is None:
        return valid
    if valid is not None and N > valid:
        raise DepthError(f"requested depth {N} exceeds input validity {valid}")
    return N


def star_product(s1: OperatorSymbol, s2: OperatorSymbol, N: Optional[int] = None) -> OperatorSymbol:
    """Composition symbol ``sum_gamma d^gamma s1 * delta^gamma s2 / gamma!`` to depth N."""
    if s1.ctx != s2.ctx:
        raise ValueError("context mismatch")
    ctx = s1.ctx
    depth = _resolve_depth(N, s1, s2)
    d1 = _Derivs(s1.comps, ctx)
    delta_cache: Dict[Tuple[int, Tuple[int, int]], Tensor] = {}

    def delta(j, g):
        key = (j, g)
        if key not in delta_cache:
            delta_cache[key] = t_delta(s2.comps.get(j, {}), g)
        return delta_cache[key]

    comps: Dict[int, Tensor] = {}
    if depth is None:
        if not (s1.is_polynomial() and s2.is_polynomial()):
            raise DepthError("exact star product needs polynomial symbols; pass a depth N")
        for j1 in s1.comps:
            deg1 = int(round((s1.order - j1).real))
            for j2 in s2.comps:
                for k in range(deg1 + 1):
                    for g in multi_indices(k):
                        a = d1.get(j1, g)
                        if not a:
                            continue
                        term = t_mul(a, delta(j2, g), ctx)
                        if term:
                            j = j1 + j2 + k
                            comps[j] = t_add(comps.get(j, {}), t_scale(term, 1.0 / _factorial(g)))
    else:
        for j in range(depth):
            acc: List[Tensor] = []
            for j1 in s1.comps:
                if j1 > j:
                    continue
                for j2 in s2.comps:
                    k = j - j1 - j2
                    if k < 0:
                        continue
                    for g in multi_indices(k):
                        b = delta(j2, g)
                        if not b:
                            continue
                        a = d1.get(j1, g)
                        if not a:
                            continue
                        acc.append(t_scale(t_mul(a, b, ctx), 1.0 / _factorial(g)))
            if acc:
                comps[j] = t_add(*acc)
    return OperatorSymbol(ctx, s1.order + s2.order, comps, depth, s1.order_z + s2.order_z)


def adjoint_symbol(sym: OperatorSymbol, N: Optional[int] = None) -> OperatorSymbol:
    """``sigma(P*) ~ sum_l d^l delta^l (sigma^*) / l!``."""
    ctx = sym.ctx
    depth = _resolve_depth(N, sym)
    pointwise = {j: t_conj(t, ctx) for j, t in sym.comps.items()}
    d = _Derivs({j: t for j, t in pointwise.items()}, ctx)
    comps: Dict[int, Tensor] = {}
    if depth is None:
        if not sym.is_polynomial():
            raise DepthError("exact adjoint needs a polynomial symbol; pass a depth N")
        for j0 in pointwise:
            deg = int(round((sym.order - j0).real))
            for k in range(deg + 1):
                for g in multi_indices(k):
                    # delta commutes with d; apply delta after d
                    term = t_delta(d.get(j0, g), g)
                    if term:
                        comps[j0 + k] = t_add(comps.get(j0 + k, {}), t_scale(term, 1.0 / _factorial(g)))
    else:
        for j in range(depth):
            acc = []
            for j0 in pointwise:
                k = j - j0
                if k < 0:
                    continue
                for g in multi_indices(k):
                    term = t_delta(d.get(j0, g), g)
                    if term:
                        acc.append(t_scale(term, 1.0 / _factorial(g)))
            if acc:
                comps[j] = t_add(*acc)
    return OperatorSymbol(ctx, complex(sym.order).conjugate(), comps, depth)


def _leading_monomial(sym: OperatorSymbol) -> Tuple[Sig, complex]:
    """Recognize a scalar leading component as ``c * l^i lbar^k rho^r`` (or ``g^k``)."""
    lead = sym.comps.get(0, {})
    if not lead:
        raise EllipticityError("leading component vanishes")
    if any((m, n) != (0, 0) or x for (s, x, m, n) in lead):
        raise EllipticityError("only scalar (central) leading symbols can be inverted")
    ctx = sym.ctx
    if len(lead) == 1:
        (s, _, _, _), c = next(iter(lead.items()))
        if s.a == 0 and s.b == 0 and not s.chi and not s.pL and not s.p0 and not s.gz:
            return s, c
    degs = {sig_degree(s) for (s, _, _, _) in lead}
    if len(degs) != 1:
        raise EllipticityError("leading component is not homogeneous")
    d = degs.pop()
    if abs(d.imag) > 0 or d.real != int(d.real) or any(s.chi or s.pL or s.p0 for (s, _, _, _) in lead):
        raise EllipticityError("cannot recognize leading component as an invertible monomial")
    d = int(d.real)
    rng = np.random.default_rng(12345)
    pts = rng.normal(size=(2, 7))
    grid = XiGrid(pts[0], pts[1], ctx.tau)
    vals = evaluate_tensor(lead, grid)[(0, 0)]
    for r in range(d // 2 + 1):
        for i in range(d - 2 * r + 1):
            cand = normalize(Sig(el=i, elb=d - 2 * r - i, er=r), ctx.g_is_rho)
            cv = grid.eval_sig(cand)
            ratio = vals / cv
            if np.allclose(ratio, ratio[0], rtol=1e-12, atol=0):
                return cand, complex(ratio[0])
    raise EllipticityError("leading symbol is not an invertible scalar monomial in l, lbar, rho")


def _scalar_tensor(s: Sig, c: complex, aux: int = 0) -> Tensor:
    return {(s, aux, 0, 0): c}


def _inverse_sig(s: Sig, ctx: Context) -> Sig:
    inv = Sig(el=-s.el, elb=-s.elb, er=-complex(s.er), eg=-complex(s.eg))
    return normalize(inv, ctx.g_is_rho)


def parametrix(sym: OperatorSymbol, N: int = DEFAULT_DEPTH, cutoff: bool = True) -> OperatorSymbol:
    """Inverse symbol to depth N for scalar elliptic leading term (right-inverse recursion)."""
    ctx = sym.ctx
    depth = _resolve_depth(N, sym)
    s0, c0 = _leading_monomial(sym)
    q: Dict[int, Tensor] = {0: _scalar_tensor(_inverse_sig(s0, ctx), 1.0 / c0)}
    base = dict(sym.comps)
    base[0] = _scalar_tensor(s0, c0)
    d = _Derivs(base, ctx)
    for j in range(1, depth):
        acc = []
        for l in range(j):
            for k in range(0, j - l + 1):
                ng = j - k - l
                for g in multi_indices(ng):
                    if k == 0 and ng == 0:
                        continue
                    a = d.get(k, g)
                    if not a:
                        continue
                    b = t_delta(q.get(l, {}), g)
                    if not b:
                        continue
                    acc.append(t_scale(t_mul(a, b, ctx), 1.0 / _factorial(g)))
        inner = t_add(*acc) if acc else {}
        q[j] = t_scale(t_mul(q[0], inner, ctx), -1.0)
    out = OperatorSymbol(ctx, -complex(sym.order), q, depth)
    return out.with_cutoff() if cutoff else out


@dataclass(frozen=True)
class ResolventSymbol:
    """Components ``b_{-2-j}`` of ``(lambda - Delta)^{-1}``; aux slot = pole order in ``(lambda - g)``."""

    ctx: Context
    comps: Dict[int, Tensor]
    depth: int

    def evaluate(self, x1, x2, lam: complex, js: Optional[List[int]] = None) -> Dict[Tuple[int, int], np.ndarray]:
        grid = XiGrid(np.atleast_1d(x1), np.atleast_1d(x2), self.ctx.tau)
        out: Dict[Tuple[int, int], np.ndarray] = {}
        for j, t in self.comps.items():
            if js is not None and j not in js:
                continue
            for (s, k, m, n), v in t.items():
                val = v * grid.eval_sig(s) * (lam - grid.g) ** (-k)
                out[(m, n)] = out.get((m, n), 0) + val
        return out


def _require_g_leading(sym: OperatorSymbol) -> None:
    s0, c0 = _leading_monomial(sym)
    target = normalize(Sig(el=1, elb=1), sym.ctx.g_is_rho)
    if s0 != target or abs(c0 - 1.0) > 1e-12:
        raise EllipticityError("resolvent expansion requires the leading symbol g(xi)")
    if abs(complex(sym.order) - 2) > 1e-12:
        raise EllipticityError("resolvent expansion requires an order-2 symbol")


def resolvent_expansion(sym: OperatorSymbol, N: int = DEFAULT_DEPTH) -> ResolventSymbol:
    ctx = sym.ctx
    depth = _resolve_depth(N, sym)
    _require_g_leading(sym)
    g_sig = normalize(Sig(el=1, elb=1), ctx.g_is_rho)
    # symbol of (lambda - Delta) with lambda dropped: only derivatives of component 0 enter
    lam_minus = {j: t_scale(t, -1.0) for j, t in sym.comps.items()}
    lam_minus[0] = _scalar_tensor(g_sig, -1.0)
    d = _Derivs(lam_minus, ctx)
    b: Dict[int, Tensor] = {0: _scalar_tensor(ONE, 1.0, aux=1)}
    for j in range(1, depth):
        acc = []
        for l in range(j):
            for k in range(0, j - l + 1):
                ng = j - k - l
                if k == 0 and ng == 0:
                    continue
                for g in multi_indices(ng):
                    a = d.get(k, g)
                    if not a:
                        continue
                    bb = t_delta(b.get(l, {}), g)
                    if not bb:
                        continue
                    acc.append(t_scale(t_mul(a, bb, ctx), 1.0 / _factorial(g)))
        inner = t_add(*acc) if acc else {}
        b[j] = t_scale(t_mul(b[0], inner, ctx), -1.0)
    return ResolventSymbol(ctx, {j: t for j, t in b.items() if t}, depth)


def _falling_poly(k: int) -> List[float]:
    """Coefficients (in powers of z) of z(z-1)...(z-k+2)/(k-1)!."""
    coeffs = np.array([1.0])
    for r in range(k - 1):
        coeffs = np.convolve(coeffs, [-float(r), 1.0])
    return list(coeffs / math.factorial(k - 1))


def complex_power(sym: OperatorSymbol, N: int = DEFAULT_DEPTH, cutoff: bool = True) -> OperatorSymbol:
    """Parametric symbol of ``Delta^z`` via closed-form contour integrals of the resolvent terms."""
    res = resolvent_expansion(sym, N)
    ctx = sym.ctx
    comps: Dict[int, Tensor] = {}
    for j, t in res.comps.items():
        out: Tensor = {}
        for (s, k, m, n), v in t.items():
            ns = sig_mul(s, Sig(el=1 - k, elb=1 - k, gz=1), ctx.g_is_rho)
            if ns is None:
                continue
            for zp, c in enumerate(_falling_poly(k)):
                if c == 0:
                    continue
                key = (ns, zp, m, n)
                out[key] = out.get(key, 0.0) + v * c
        comps[j] = prune_terms(out)
    outsym = OperatorSymbol(ctx, 0, comps, res.depth, order_z=2)
    return outsym.with_cutoff() if cutoff else outsym


def _shift_tensor(t: Tensor, shift: int) -> Tensor:
    out: Tensor = {}
    for (m, n), cf in _by_mode(t).items():
        for (s, x), v in shift_terms(cf, shift).items():
            out[(s, x, m, n)] = out.get((s, x, m, n), 0.0) + v
    return out


def _dz_tensor(t: Tensor, ctx: Context) -> Tensor:
    out: Tensor = {}
    for (m, n), cf in _by_mode(t).items():
        for (s, x), v in dz_terms(cf, ctx.tau).items():
            out[(s, x, m, n)] = out.get((s, x, m, n), 0.0) + v
    return prune_terms(out)


def _subst_tensor(t: Tensor, z: complex, ctx: Context) -> Tensor:
    out: Tensor = {}
    for (m, n), cf in _by_mode(t).items():
        for (s, x), v in substitute_terms(cf, z).items():
            ns = normalize(s, ctx.g_is_rho)
            if ns is not None:
                out[(ns, x, m, n)] = out.get((ns, x, m, n), 0.0) + v
    return prune_terms(out)


L0_SIG = Sig(p0=1)


def log_symbol(sym: OperatorSymbol, K: int = DEFAULT_DEPTH, cutoff: bool = False) -> OperatorSymbol:
    """Log-polyhomogeneous symbol of ``log Delta``: ``2 log|xi| + sigma_cl``.

    ``sigma_cl`` is assembled from ``d/dz|_0`` of the shifted complex-power
    components restricted to the unit circle and re-extended homogeneously.
    """
    ctx = sym.ctx
    depth = _resolve_depth(K, sym)
    power = complex_power(sym, depth, cutoff=False)
    brackets: Dict[int, Tensor] = {}
    for j in range(depth):
        shifted = _shift_tensor(power.comps.get(j, {}), -1)
        if not shifted:
            continue
        # |xi|^{-2-j} d/dz [b(z-1)(xi/|xi|)] = d/dz b(z-1)(xi) - 2 L0 b(-1)(xi)
        part = _dz_tensor(shifted, ctx)
        at = _subst_tensor(shifted, 0.0, ctx)
        log_part = t_mul(_scalar_tensor(L0_SIG, -2.0), at, ctx)
        brackets[j] = t_add(part, log_part)
    d = _Derivs(sym.comps, ctx)
    comps: Dict[int, Tensor] = {}
    for k in range(depth):
        acc = []
        for i in range(k + 1):
            for j in range(k - i + 1):
                na = k - i - j
                br = brackets.get(j)
                if not br:
                    continue
                for g in multi_indices(na):
                    a = d.get(i, g)
                    if not a:
                        continue
                    b = t_delta(br, g)
                    if not b:
                        continue
                    acc.append(t_scale(t_mul(a, b, ctx), 1.0 / _factorial(g)))
        if acc:
            comps[k] = t_add(*acc)
    comps[0] = t_add(comps.get(0, {}), _scalar_tensor(L0_SIG, 2.0))
    out = OperatorSymbol(ctx, 0, comps, depth)
    return out.with_cutoff() if cutoff else out


def homogeneous_component(sym: OperatorSymbol, degree: complex, logpower: int = 0):
    return sym.homogeneous_component(degree, logpower)


def power_of(sym: OperatorSymbol, k: int, N: Optional[int] = None) -> OperatorSymbol:
    """``sym ⋆ sym ⋆ ... (k times)``; k = 0 gives the identity."""
    out = identity(sym.ctx)
    for _ in range(k):
        out = star_product(out, sym, N if N is not None else sym.depth)
    return out


def z_derivative(sym: OperatorSymbol, k: int, z0: complex = 0.0) -> OperatorSymbol:
    """``d^k/dz^k`` of a parametric symbol at ``z = z0`` (log g expanded as ``Lam + 2 L0``)."""
    ctx = sym.ctx
    z0 = complex(z0)
    comps: Dict[int, Tensor] = {}
    for j, t in sym.comps.items():
        out: Tensor = {}
        for (s, x, m, n), v in t.items():
            for i in range(min(k, x) + 1):
                pref = math.comb(k, i) * math.perm(x, i)
                if x - i:
                    pref *= z0 ** (x - i)
                p = k - i
                if p and not s.gz:
                    continue
                pref *= s.gz ** p if p else 1
                base = s._replace(eg=complex(s.eg) + s.gz * z0, gz=0) if s.gz else s
                for q in range(p + 1):
                    c = pref * math.comb(p, q) * 2 ** q
                    ns = normalize(base._replace(pL=base.pL + p - q, p0=base.p0 + q), ctx.g_is_rho)
                    if ns is None or c == 0:
                        continue
                    key = (ns, 0, m, n)
                    out[key] = out.get(key, 0.0) + v * c
        comps[j] = prune_terms(out)
    return OperatorSymbol(ctx, sym.order + sym.order_z * z0, comps, sym.depth, 0)


def resolvent_defect(sym: OperatorSymbol, res: ResolventSymbol, lam: complex, x1, x2) -> List[float]:
    """Max modulus over points and modes of component ``j`` of ``sigma(lambda - Delta) * r(lambda) - 1``.

    The pole-order slot is differentiated exactly, so each entry should vanish
    to rounding for every ``j`` below the truncation depth.
    """
    ctx = sym.ctx
    grid = XiGrid(np.atleast_1d(np.asarray(x1, float)), np.atleast_1d(np.asarray(x2, float)), ctx.tau)
    lam = complex(lam)

    def ev(t: Tensor) -> Dict[Tuple[int, int], np.ndarray]:
        out: Dict[Tuple[int, int], np.ndarray] = {}
        for (s, k, m, n), v in t.items():
            val = v * grid.eval_sig(s) * (lam - grid.g) ** (-k)
            out[(m, n)] = out.get((m, n), 0) + val
        return out

    minus = {j: t_scale(t, -1.0) for j, t in sym.comps.items()}
    d_sym = _Derivs(minus, ctx)
    defects = []
    for j in range(res.depth):
        total: Dict[Tuple[int, int], np.ndarray] = {}
        # leading factor lambda - g times b_j
        for key, val in ev(res.comps.get(j, {})).items():
            total[key] = total.get(key, 0) + (lam - grid.g) * val
        for l in range(j + 1):
            for k in range(j - l + 1):
                ng = j - k - l
                if k == 0 and ng == 0:
                    continue
                for g in multi_indices(ng):
                    a = d_sym.get(k, g)
                    b = t_delta(res.comps.get(l, {}), g)
                    if not a or not b:
                        continue
                    for key, val in ev(t_scale(t_mul(a, b, ctx), 1.0 / _factorial(g))).items():
                        total[key] = total.get(key, 0) + val
        if j == 0:
            total[(0, 0)] = total.get((0, 0), 0) - 1.0
        defects.append(float(max((np.max(np.abs(v)) for v in total.values()), default=0.0)))
    return defects
