"""Residue densities, cut-off integrals, the canonical trace and zeta functions.

Every symbol handled here is an explicit representative: a finite sum of basis
terms (possibly carrying the radial cutoff and its derivatives) or a closed-form
scalar fixture with a known large-``|xi|`` expansion.  Each basis term factors in
polar coordinates as ``radial(r) * r^d * log^l r * angular(omega)``, so its cut-off
integral is a product of a circle integral and a one-dimensional radial constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .algebra import AlgebraElement
from .quadrature import (PLANE_WEIGHT, ConvergenceError, QuadratureConfig, circle_mean_nested,
                         circle_points, log_power_constant, radial_integral)
from .symbols import (Context, DEFAULT_DEPTH, OperatorSymbol, Tensor, complex_power, star_product,
                      z_derivative)
from .xi import (CoefficientFunction, Cutoff, DEFAULT_CUTOFF, Sig, XiGrid, has_chi_derivative, normalize,
                 sig_degree)

CIRCLE_MASS = 1.0 / (2.0 * math.pi)
POLE_GUARD = 1e-8


class PoleError(ValueError):
    """Evaluation point too close to a pole of the zeta function."""


class IntegrabilityError(ValueError):
    """Remainder not integrable or term singular at the origin."""


# ---------------------------------------------------------------------------
# circle integrals


def _angular_sig(s: Sig) -> Sig:
    return s._replace(chi=(), p0=0)


def _circle_means(sigs: Sequence[Sig], tau: complex, cfg: QuadratureConfig) -> Dict[Sig, complex]:
    """Trapezoid means over the unit circle for many basis factors at once."""
    if not sigs:
        return {}
    sigs = list(sigs)

    def f(x1, x2):
        grid = XiGrid(x1, x2, tau)
        return np.stack([grid.eval_sig(s) for s in sigs])

    means, _, _ = circle_mean_nested(f, cfg.circle_nodes, cfg.tol)
    return dict(zip(sigs, means))


def _pairs_to_tensor(pairs) -> Tuple[Tensor, float, complex]:
    t: Tensor = {}
    theta = tau = None
    for cf, a in pairs:
        theta, tau = a.theta, cf.tau
        for (s, zp), c in cf.terms.items():
            if zp:
                raise ValueError("z-dependent integrand; substitute z first")
            for (m, n), d in a.coeffs.items():
                k = (s, 0, m, n)
                t[k] = t.get(k, 0.0) + c * d
    return t, theta, tau


def circle_integral(integrand, cfg: QuadratureConfig = QuadratureConfig(), theta: float | None = None,
                    tau: complex | None = None) -> AlgebraElement:
    """``int_{|xi|=1} f(xi) d xi`` with the normalized circle measure (mass ``1/(2 pi)``).

    ``integrand`` is a list of ``(CoefficientFunction, AlgebraElement)`` pairs,
    a single ``CoefficientFunction`` (scalar) or a raw tensor (then pass theta, tau).
    """
    if isinstance(integrand, CoefficientFunction):
        integrand = [(integrand, AlgebraElement.scalar(1.0, theta if theta is not None else 0.0))]
    if isinstance(integrand, dict):
        t = integrand
    else:
        t, theta0, tau0 = _pairs_to_tensor(integrand)
        theta = theta if theta is not None else theta0
        tau = tau if tau is not None else tau0
    if not t:
        return AlgebraElement({}, theta if theta is not None else 0.0)
    means = _circle_means(sorted({s for (s, _, _, _) in t}, key=repr), tau, cfg)
    out: Dict[Tuple[int, int], complex] = {}
    for (s, x, m, n), v in t.items():
        out[(m, n)] = out.get((m, n), 0.0) + v * means[s] * CIRCLE_MASS
    return AlgebraElement(out, theta, prune_rel=0.0)


def res_density(sym: OperatorSymbol, cfg: QuadratureConfig = QuadratureConfig()) -> AlgebraElement:
    """``int_{|xi|=1} sigma_{-2,0}(xi) d xi`` in A_theta (zero if no such component)."""
    if sym.is_parametric:
        raise ValueError("residue density of a z-dependent symbol; substitute z first")
    pairs = sym.homogeneous_component(-2, 0)
    if not pairs:
        return AlgebraElement({}, sym.ctx.theta)
    return circle_integral(pairs, cfg)


def Res(sym: OperatorSymbol, cfg: QuadratureConfig = QuadratureConfig()) -> complex:
    return res_density(sym, cfg).coeff(0, 0)


# ---------------------------------------------------------------------------
# radial constants


def _radial_factor(chi: Tuple[int, ...], d: complex, l: int, sym_cut: Cutoff, dec_cut: Cutoff,
                   cfg: QuadratureConfig) -> complex:
    """Cut-off constant of ``F(r) r^{d+1} log^l r`` where ``F`` is the chi-product ``chi``.

    The term is split as ``(F - chi_dec) + chi_dec`` (``chi_dec`` omitted when
    ``F`` is compactly supported); the second piece is integrated on ``[r0, 1]``
    and continued by the exact finite part of ``int_1^R r^{d+1} log^l r dr``.
    """
    d = complex(d)
    s = d + 2.0
    if not chi:
        if s.real > 0:
            return 0.0  # homogeneous on all of R^2: the cut-off integral vanishes
        raise IntegrabilityError(f"homogeneous term of degree {d} without cutoff is singular at 0")
    compact = any(c > 0 for c in chi[1:])

    def power(r):
        with np.errstate(divide="ignore"):
            val = np.exp((d + 1.0) * np.log(r))
            if l:
                val = val * np.log(r) ** l
        return val

    def F(r):
        val = np.ones_like(r)
        for k, c in enumerate(chi):
            if c:
                val = val * sym_cut.derivative(r, k) ** c
        return val

    lo = min(sym_cut.r0, dec_cut.r0)
    breaks = [lo, sym_cut.r0, sym_cut.r1, dec_cut.r0, dec_cut.r1, 1.0]
    if compact:
        total, _, _ = radial_integral(lambda r: F(r) * power(r), breaks, cfg.radial_nodes, cfg.tol)
        return complex(total)
    total = 0.0
    if not (chi == (1,) and sym_cut == dec_cut):
        diff, _, _ = radial_integral(lambda r: (F(r) - dec_cut(r)) * power(r), breaks, cfg.radial_nodes, cfg.tol)
        total += diff
    inner, _, _ = radial_integral(lambda r: dec_cut(r) * power(r), [dec_cut.r0, dec_cut.r1, 1.0],
                                  cfg.radial_nodes, cfg.tol)
    return complex(total + inner + log_power_constant(s, l))


def _tensor_of(sym: OperatorSymbol, modes: Optional[Iterable[Tuple[int, int]]]) -> Tensor:
    t: Tensor = {}
    wanted = None if modes is None else set(modes)
    for comp in sym.comps.values():
        for (s, x, m, n), v in comp.items():
            if wanted is not None and (m, n) not in wanted:
                continue
            if x or s.gz:
                raise ValueError("z-dependent symbol; substitute z first")
            k = (s, x, m, n)
            t[k] = t.get(k, 0.0) + v
    return t


def cutoff_integral_tensor(t: Tensor, ctx: Context, cfg: QuadratureConfig,
                           symbol_cutoff: Cutoff = DEFAULT_CUTOFF) -> Dict[Tuple[int, int], complex]:
    dec = cfg.cutoff
    if symbol_cutoff.r1 > 1.0:
        raise ValueError("symbol cutoff must equal 1 outside the unit disc")
    radial_keys = {}
    angular = set()
    for (s, _, _, _) in t:
        d = sig_degree(s)
        radial_keys[s] = (s.chi, d, s.p0)
        angular.add(_angular_sig(s))
    means = _circle_means(sorted(angular, key=repr), ctx.tau, cfg)
    rad_cache: Dict = {}
    out: Dict[Tuple[int, int], complex] = {}
    for (s, _, m, n), v in t.items():
        key = radial_keys[s]
        if key not in rad_cache:
            rad_cache[key] = _radial_factor(key[0], key[1], key[2], symbol_cutoff, dec, cfg)
        val = v * means[_angular_sig(s)] * rad_cache[key] * CIRCLE_MASS
        out[(m, n)] = out.get((m, n), 0.0) + val
    return out


def cutoff_integral(sym, cfg: QuadratureConfig = QuadratureConfig(),
                    symbol_cutoff: Cutoff = DEFAULT_CUTOFF) -> AlgebraElement:
    """Cut-off integral ``-int sigma(xi) d xi`` as an element of A_theta."""
    if isinstance(sym, ScalarFixture):
        return AlgebraElement.scalar(fixture_cutoff_integral(sym, cfg), 0.0)
    vals = cutoff_integral_tensor(_tensor_of(sym, None), sym.ctx, cfg, symbol_cutoff)
    return AlgebraElement(vals, sym.ctx.theta, prune_rel=0.0)


def TR(sym, cfg: QuadratureConfig = QuadratureConfig(), symbol_cutoff: Cutoff = DEFAULT_CUTOFF) -> complex:
    """Canonical trace ``phi0(-int sigma)``; only the (0, 0) Fourier mode is integrated."""
    if isinstance(sym, ScalarFixture):
        return fixture_cutoff_integral(sym, cfg)
    vals = cutoff_integral_tensor(_tensor_of(sym, [(0, 0)]), sym.ctx, cfg, symbol_cutoff)
    return complex(vals.get((0, 0), 0.0))


# ---------------------------------------------------------------------------
# closed-form scalar fixtures


@dataclass(frozen=True)
class ScalarFixture:
    """Scalar symbol given in closed form together with its homogeneous expansion.

    ``expansion(N)`` returns ``(coefficient, Sig)`` pairs for all homogeneous terms
    of degree greater than ``order - N``.
    """

    name: str
    order: float
    tau: complex
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    expansion: Callable[[int], List[Tuple[complex, Sig]]]
    exact: Optional[complex] = None

    def evaluate(self, x1, x2):
        return self.func(np.asarray(x1, float), np.asarray(x2, float))


def _binom(a: float, k: int) -> float:
    out = 1.0
    for i in range(k):
        out *= (a - i) / (i + 1)
    return out


def shifted_rho_power(s: float, kappa: float = 1.0, tau: complex = 1j) -> ScalarFixture:
    """``(kappa + |xi|^2)^{-s}``; cut-off integral ``kappa^{1-s} / (4 pi (s-1))``."""
    order = -2.0 * s

    def expansion(N):
        return [(_binom(-s, k) * kappa ** k, Sig(er=-s - k)) for k in range(N) if order - 2 * k > order - N]

    return ScalarFixture(f"(kappa+rho)^-{s}", order, complex(tau),
                         lambda x1, x2: (kappa + x1 ** 2 + x2 ** 2) ** (-s), expansion,
                         kappa ** (1 - s) / (4 * math.pi * (s - 1)))


def shifted_g_power(s: float, tau: complex, kappa: float = 1.0) -> ScalarFixture:
    """``(kappa + g(xi))^{-s}``; cut-off integral ``kappa^{1-s} / (4 pi (s-1) Im tau)``."""
    tau = complex(tau)
    order = -2.0 * s

    def expansion(N):
        return [(_binom(-s, k) * kappa ** k, Sig(eg=-s - k)) for k in range(N) if order - 2 * k > order - N]

    def func(x1, x2):
        g = np.abs(x1 + tau * x2) ** 2
        return (kappa + g) ** (-s)

    return ScalarFixture(f"(kappa+g)^-{s}", order, tau, func, expansion,
                         kappa ** (1 - s) / (4 * math.pi * (s - 1) * tau.imag))


def shifted_rho_power_log(s: float, kappa: float = 1.0, tau: complex = 1j) -> ScalarFixture:
    """``(kappa + rho)^{-s} log(kappa + rho)``; log-polyhomogeneous, exact value by s-differentiation."""
    order = -2.0 * s

    def expansion(N):
        terms = []
        kmax = N // 2 + 1
        for k in range(kmax + 1):
            ck = _binom(-s, k) * kappa ** k
            if order - 2 * k > order - N:
                terms.append((2.0 * ck, Sig(er=-s - k, p0=1)))
            for i in range(1, kmax + 1):
                if order - 2 * (k + i) > order - N:
                    terms.append((ck * (-1) ** (i + 1) * kappa ** i / i, Sig(er=-s - k - i)))
        return terms

    def func(x1, x2):
        u = kappa + x1 ** 2 + x2 ** 2
        return u ** (-s) * np.log(u)

    exact = kappa ** (1 - s) / (4 * math.pi) * (math.log(kappa) / (s - 1) + 1.0 / (s - 1) ** 2)
    return ScalarFixture(f"(kappa+rho)^-{s} log", order, complex(tau), func, expansion, exact)


def plane_integral(func: Callable[[np.ndarray, np.ndarray], np.ndarray], breaks: Sequence[float],
                   cfg: QuadratureConfig, tail: bool = True) -> complex:
    """``int f d xi`` over a disc (or the plane with ``tail``) in polar coordinates."""

    def at_nodes(nc):
        c, s = circle_points(nc)

        def radial(r):
            r = np.asarray(r)
            vals = func(r[:, None] * c[None, :], r[:, None] * s[None, :])
            return r * vals.mean(axis=1)

        val, _, _ = radial_integral(radial, breaks, cfg.radial_nodes, cfg.tol, tail=tail)
        return complex(val) * 2.0 * math.pi * PLANE_WEIGHT

    nc = max(cfg.circle_nodes // 4, 64)
    a = at_nodes(nc)
    for _ in range(4):
        b = at_nodes(2 * nc)
        if abs(b - a) <= cfg.tol * max(1.0, abs(b)):
            return b
        nc *= 2
        a = b
    raise ConvergenceError("plane quadrature did not converge under angular doubling")


def fixture_cutoff_integral(fx: ScalarFixture, cfg: QuadratureConfig = QuadratureConfig(),
                            N: Optional[int] = None) -> complex:
    """``-int f = int (f - chi sum_{j<N} f_j) + sum_j -int chi f_j`` with the decomposition cutoff."""
    N = cfg.remainder_depth if N is None else N
    if fx.order - N >= -2:
        raise IntegrabilityError(f"remainder depth {N} too small for order {fx.order}")
    terms = fx.expansion(N)
    dec = cfg.cutoff
    g_is_rho = abs(fx.tau - 1j) <= 1e-15
    sigs = [(c, normalize(s, g_is_rho)) for c, s in terms]

    def remainder(x1, x2):
        grid = XiGrid(x1.ravel(), x2.ravel(), fx.tau, dec)
        expn = sum(c * grid.eval_sig(s) for c, s in sigs) if sigs else 0.0
        with np.errstate(invalid="ignore"):
            chi = dec(grid.r)
            hom = np.where(chi > 0, chi * expn, 0.0) if sigs else 0.0
        return (fx.evaluate(x1, x2).ravel() - hom).reshape(x1.shape)

    rem = plane_integral(remainder, [0.0, dec.r0, dec.r1], cfg, tail=True)
    ctx = Context(theta=0.0, tau=fx.tau)
    t: Tensor = {}
    for c, s in sigs:
        k = (s._replace(chi=(1,)), 0, 0, 0)
        t[k] = t.get(k, 0.0) + c
    hom = cutoff_integral_tensor(t, ctx, cfg, symbol_cutoff=dec).get((0, 0), 0.0) if t else 0.0
    return complex(rem + hom)


def rsweep_fit(func: Callable[[np.ndarray, np.ndarray], np.ndarray], exponents: Sequence[Tuple[complex, int]],
               cfg: QuadratureConfig = QuadratureConfig(), radii: Sequence[float] = (),
               inner_breaks: Sequence[float] = (0.5, 1.0)) -> Dict[str, object]:
    """Brute-force ``int_{B(R)} f`` on a sweep of radii, fit by the cut-off expansion.

    ``exponents`` lists ``(d, l)`` pairs of homogeneous terms ``r^{d+2} log^l R``
    expected in ``int_{B(R)}``; constant and ``log R`` columns are always added.
    Returns the fitted constant (the cut-off integral) and the fit residual.
    """
    radii = list(radii) or list(np.geomspace(20.0, 400.0, 24))
    vals = []
    lo = sorted(set([0.0] + list(inner_breaks)))
    for R in radii:
        breaks = lo + [x for x in np.geomspace(1.0, R, 6)[1:]]
        vals.append(plane_integral(func, breaks, cfg, tail=False))
    vals = np.array(vals)
    R = np.array(radii, dtype=float)
    cols = [np.ones_like(R, dtype=complex), np.log(R).astype(complex)]
    for d, l in exponents:
        s = complex(d) + 2.0
        if abs(s) < 1e-12:
            cols.append(np.log(R) ** (l + 1) + 0j)
        else:
            cols.append(np.exp(s * np.log(R)) * np.log(R) ** l)
    A = np.stack(cols, axis=1)
    coef, *_ = np.linalg.lstsq(A, vals, rcond=None)
    resid = float(np.max(np.abs(A @ coef - vals)))
    return {"constant": complex(coef[0]), "log_coefficient": complex(coef[1]), "residual": resid,
            "radii": radii}


# ---------------------------------------------------------------------------
# zeta functions


def _check_pole(sym: OperatorSymbol) -> None:
    for t in sym.comps.values():
        for (s, _, _, _) in t:
            if not s.chi or has_chi_derivative(s):
                continue
            gap = abs(sig_degree(s) + 2.0)
            if 0 < gap < POLE_GUARD:
                raise PoleError(f"evaluation point within {gap:.2e} of a pole")


_POWER_CACHE: Dict[Tuple[int, int], Tuple[OperatorSymbol, OperatorSymbol]] = {}


def _power(delta: OperatorSymbol, N: int) -> OperatorSymbol:
    key = (id(delta), N)
    hit = _POWER_CACHE.get(key)
    if hit is not None and hit[0] is delta:
        return hit[1]
    p = complex_power(delta, N, cutoff=True)
    _POWER_CACHE[key] = (delta, p)
    return p


def zeta_symbol(A: OperatorSymbol, delta: OperatorSymbol, z: complex, N: int = DEFAULT_DEPTH) -> OperatorSymbol:
    """Representative of ``A Delta^{-z}``: ``sigma(A) * chi sum_{j<N} b_j(-z)``."""
    return star_product(A, _power(delta, N).at(-complex(z)), N)


def zeta_value(A: OperatorSymbol, delta: OperatorSymbol, z: complex, cfg: QuadratureConfig = QuadratureConfig(),
               N: int = DEFAULT_DEPTH) -> complex:
    """``zeta(A, Delta, z) = TR(A Delta^{-z})`` on the fixed representative."""
    sym = zeta_symbol(A, delta, z, N)
    _check_pole(sym)
    return TR(sym, cfg)


@dataclass
class LaurentExpansion:
    coefficients: Dict[int, complex]
    residues: Dict[int, complex]
    cutoff_values: Dict[int, complex]

    def __call__(self, z: complex) -> complex:
        return sum(c * complex(z) ** k for k, c in self.coefficients.items())

    def to_json(self) -> dict:
        return {"coefficients": {str(k): {"re": v.real, "im": v.imag} for k, v in sorted(self.coefficients.items())}}


def laurent_at_zero(A: OperatorSymbol, delta: OperatorSymbol, K: int = 1,
                    cfg: QuadratureConfig = QuadratureConfig(), N: int = DEFAULT_DEPTH,
                    kernel_trace: complex = 0.0, q: float = 2.0) -> LaurentExpansion:
    """Laurent coefficients ``a_{-1}, a_0, ..., a_K`` of ``z -> TR(A Delta^{-z})`` at 0.

    Powers of ``log Delta`` are taken as z-derivatives at 0 of the same complex
    power representative used by :func:`zeta_value`, so both sides agree term by term.
    ``kernel_trace`` is ``Tr(A Pi)`` for the kernel projection (zero when invertible).
    """
    power = _power(delta, N)
    tr: Dict[int, complex] = {}
    res: Dict[int, complex] = {}
    for k in range(K + 2):
        sk = star_product(A, z_derivative(power, k, 0.0), N)
        res[k] = Res(sk, cfg)
        if k <= K:
            tr[k] = TR(sk, cfg)
    coeffs = {-1: res[0] / q}
    for k in range(K + 1):
        a = ((-1) ** k / math.factorial(k)) * (tr[k] - res[k + 1] / (q * (k + 1)))
        if k == 0:
            a -= kernel_trace
        coeffs[k] = a
    return LaurentExpansion(coeffs, res, tr)


def laurent_fit_contour(f: Callable[[complex], complex], z0: complex = 0.0, radius: float = 0.1,
                        nodes: int = 16, orders: Sequence[int] = (-1, 0, 1)) -> Dict[int, complex]:
    """Laurent coefficients of ``f`` at ``z0`` from trapezoid rule on a circle.

    Exact up to aliasing of coefficients ``k +- nodes``, which is spectrally small.
    """
    phis = 2 * np.pi * np.arange(nodes) / nodes
    pts = radius * np.exp(1j * phis)
    vals = np.array([f(z0 + p) for p in pts])
    return {k: complex(np.mean(vals * pts ** (-k))) for k in orders}


def laurent_fit_points(f: Callable[[complex], complex], points: Sequence[float] = (0.05, -0.05, 0.1, -0.1),
                       richardson: bool = True) -> Dict[int, complex]:
    """Interpolate ``z f(z)`` by a cubic at the given points, reading off ``a_{-1}, a_0, a_1, a_2``.

    With ``richardson`` the fit is repeated on the halved stencil and the two
    are combined to cancel the leading ``h^2`` interpolation error.
    """

    def fit(pts):
        pts = np.asarray(pts, dtype=complex)
        vals = np.array([z * f(z) for z in pts])
        A = np.vander(pts, 4, increasing=True)
        c = np.linalg.solve(A, vals)
        return {k - 1: complex(c[k]) for k in range(4)}

    big = fit(points)
    if not richardson:
        return big
    small = fit([p / 2 for p in points])
    return {k: (4 * small[k] - big[k]) / 3 for k in big}
