"""Variations of the zeta determinant along holomorphic Cauchy-Riemann families.

The family is ``D_w = dbar + alpha0 + w beta`` with ``Delta_w = D_w^* D_w``.
Wirtinger derivatives are taken by central differences in ``w = u + i v``::

    d/dw = (d_u - i d_v) / 2,    d/dwbar = (d_u + i d_v) / 2

with Richardson extrapolation over two step sizes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .algebra import DEFAULT_THETA, AlgebraElement, adjoint, multiply, trace_phi0
from .oracle import check_invertibility
from .quadrature import QuadratureConfig
from .symbols import (Context, OperatorSymbol, Tensor, adjoint_symbol, cauchy_riemann, evaluate_tensor,
                      log_symbol, parametrix, star_product, t_from_cf)
from .trace import circle_integral, cutoff_integral
from .xi import CoefficientFunction as CF, XiGrid

DEFAULT_FD_STEPS = (1e-3, 1e-4)


class NotInvertibleError(ValueError):
    """The spectral oracle could not certify invertibility of ``D_w``."""


class FiniteDifferenceError(RuntimeError):
    """Richardson drift of a finite-difference derivative exceeded tolerance."""


@dataclass(frozen=True)
class CauchyRiemannFamily:
    theta: float = DEFAULT_THETA
    tau: complex = 1j
    alpha0: AlgebraElement = None
    beta: AlgebraElement = None
    w: complex = 0.0

    def __post_init__(self):
        object.__setattr__(self, "tau", complex(self.tau))
        object.__setattr__(self, "w", complex(self.w))
        if self.alpha0 is None:
            object.__setattr__(self, "alpha0", AlgebraElement({}, self.theta))
        if self.beta is None:
            object.__setattr__(self, "beta", AlgebraElement({}, self.theta))
        for name in ("alpha0", "beta"):
            if getattr(self, name).theta != self.theta:
                raise ValueError(f"{name} has a different theta than the family")
        if self.tau.imag <= 0:
            raise ValueError("Im(tau) must be positive")

    @property
    def ctx(self) -> Context:
        return Context(self.theta, self.tau)

    def alpha(self, w: complex | None = None) -> AlgebraElement:
        w = self.w if w is None else complex(w)
        return self.alpha0 + self.beta * w

    def D(self, w: complex | None = None) -> OperatorSymbol:
        return cauchy_riemann(self.alpha(w), self.ctx)

    def Delta(self, w: complex | None = None) -> OperatorSymbol:
        d = self.D(w)
        return star_product(adjoint_symbol(d), d)

    def at(self, w: complex) -> "CauchyRiemannFamily":
        return CauchyRiemannFamily(self.theta, self.tau, self.alpha0, self.beta, w)

    def to_json(self) -> dict:
        return {"theta": self.theta, "tau": {"re": self.tau.real, "im": self.tau.imag},
                "alpha0": self.alpha0.to_json(), "beta": self.beta.to_json(),
                "w": {"re": self.w.real, "im": self.w.imag}}

    @classmethod
    def from_json(cls, data: dict) -> "CauchyRiemannFamily":
        theta = float(data.get("theta", DEFAULT_THETA))
        tau = data.get("tau", {"re": 0.0, "im": 1.0})
        w = data.get("w", {"re": 0.0, "im": 0.0})
        empty = {"terms": []}
        return cls(theta, complex(tau["re"], tau["im"]),
                   AlgebraElement.from_json(data.get("alpha0", empty), theta),
                   AlgebraElement.from_json(data.get("beta", empty), theta),
                   complex(w["re"], w["im"]))


def default_family(tau: complex = 1j, beta: str = "U", theta: float = DEFAULT_THETA) -> CauchyRiemannFamily:
    """Reference scenario: small alpha0 supported on (0,0), (1,0), (0,1)."""
    alpha0 = AlgebraElement({(0, 0): 0.3 + 0.1j, (1, 0): 0.05, (0, 1): -0.04j}, theta)
    betas = {"U": {(1, 0): 1.0}, "V": {(0, 1): 1.0}, "U+V": {(1, 0): 1.0, (0, 1): 1.0}}
    return CauchyRiemannFamily(theta, tau, alpha0, AlgebraElement(betas[beta], theta))


def certify(fam: CauchyRiemannFamily, w: complex | None = None, radius: float = 0.0) -> Dict:
    """Invertibility certificate of ``D_w`` from the lattice oracle.

    With ``radius > 0`` the margin ``sigma_min - radius * |beta|_1`` is required to
    stay positive, which certifies the whole disc of that radius around w.
    """
    rep = check_invertibility(fam.ctx, fam.alpha(w))
    margin = min(rep["sigma_min"]) - radius * sum(abs(c) for c in fam.beta.coeffs.values())
    rep["margin"] = margin
    if not rep["certified"] or margin <= 0:
        raise NotInvertibleError(f"D_w not certified invertible (sigma_min {rep['sigma_min'][-1]:.3g})")
    return rep


# ---------------------------------------------------------------------------
# symbol identity


def log_times_inverse(fam: CauchyRiemannFamily, w: complex | None = None, depth: int = 4) -> OperatorSymbol:
    """Homogeneous symbol of ``log Delta_w * D_w^{-1}`` to the given depth (no cutoff)."""
    return star_product(log_symbol(fam.Delta(w), depth), parametrix(fam.D(w), depth, cutoff=False), depth)


def log_inverse_closed_form(fam: CauchyRiemannFamily, w: complex | None = None) -> Tensor:
    """``g^{-1} l^{-1} [(a + a*) xi1 + (conj(tau) a + tau a*) xi2] - Lam l^{-2} a``."""
    tau = fam.tau
    a = fam.alpha(w)
    ast = adjoint(a)
    gl = CF.g(tau, -1) * CF.ell(tau, -1)
    pairs = [(gl * CF.xi(tau, 1), a + ast),
             (gl * CF.xi(tau, 2), a * tau.conjugate() + ast * tau),
             (CF.Lambda(tau) * CF.ell(tau, -2) * (-1.0), a)]
    t: Tensor = {}
    for cf, el in pairs:
        for k, v in t_from_cf(cf, el).items():
            t[k] = t.get(k, 0.0) + v
    return t


def log_inverse_identity(fam: CauchyRiemannFamily, w: complex | None = None, depth: int = 4) -> Dict[str, Tensor]:
    """Computed component (-2, 0) of ``log Delta * D^{-1}`` and its closed form."""
    if depth < 2:
        raise ValueError("depth must be at least 2 to reach the (-2, 0) component")
    sym = log_times_inverse(fam, w, depth)
    return {"computed": sym.component_tensor(-2, 0), "closed_form": log_inverse_closed_form(fam, w)}


def compare_on_circle(t1: Tensor, t2: Tensor, tau: complex, points: np.ndarray) -> float:
    """Max relative difference of two tensors at unit-circle points over all modes."""
    grid = XiGrid(np.cos(points), np.sin(points), tau)
    v1 = evaluate_tensor(t1, grid)
    v2 = evaluate_tensor(t2, grid)
    keys = set(v1) | set(v2)
    scale = max((np.max(np.abs(v)) for v in v2.values()), default=0.0)
    diff = max((np.max(np.abs(v1.get(k, 0.0) - v2.get(k, 0.0))) for k in keys), default=0.0)
    return float(diff / scale) if scale > 0 else float(diff)


# ---------------------------------------------------------------------------
# finite differences


def _as_array(x) -> Tuple[np.ndarray, Optional[List]]:
    if isinstance(x, AlgebraElement):
        return x, None
    return np.asarray(x, dtype=complex), None


def _axpy(fs: Sequence, cs: Sequence[complex]):
    """Linear combination for AlgebraElements or numbers."""
    out = None
    for f, c in zip(fs, cs):
        term = f * c
        out = term if out is None else out + term
    return out


def wirtinger(F: Callable[[complex], object], w: complex, steps: Sequence[float] = DEFAULT_FD_STEPS,
              conjugate: bool = True, tol: float | None = None):
    """``d/dwbar`` (or ``d/dw``) of ``F`` at w by central differences with Richardson.

    Returns ``(value, drift)``; ``drift`` is the change from the finest plain
    difference to the extrapolated value.
    """
    sgn = 1.0 if conjugate else -1.0

    def central(h):
        fu = _axpy([F(w + h), F(w - h)], [1.0 / (2 * h), -1.0 / (2 * h)])
        fv = _axpy([F(w + 1j * h), F(w - 1j * h)], [1.0 / (2 * h), -1.0 / (2 * h)])
        return _axpy([fu, fv], [0.5, 0.5j * sgn])

    h1, h2 = steps[0], steps[-1]
    d1, d2 = central(h1), central(h2)
    if h1 == h2:
        return d2, 0.0
    w1 = -h2 ** 2 / (h1 ** 2 - h2 ** 2)
    w2 = h1 ** 2 / (h1 ** 2 - h2 ** 2)
    ext = _axpy([d1, d2], [w1, w2])
    diff = _axpy([ext, d2], [1.0, -1.0])
    drift = diff.norm() if isinstance(diff, AlgebraElement) else abs(diff)
    if tol is not None and drift > tol:
        raise FiniteDifferenceError(f"Richardson drift {drift:.3g} exceeds {tol:.3g}")
    return ext, drift


# ---------------------------------------------------------------------------
# residues, J term, variations


def res_log_inverse(fam: CauchyRiemannFamily, w: complex | None = None, depth: int = 4,
                    cfg: QuadratureConfig = QuadratureConfig()) -> AlgebraElement:
    """``res(log Delta_w D_w^{-1})`` as an element of A_theta."""
    sym = log_times_inverse(fam, w, depth)
    pairs = sym.homogeneous_component(-2, 0)
    if not pairs:
        return AlgebraElement({}, fam.theta)
    return circle_integral(pairs, cfg)


def res_variation(fam: CauchyRiemannFamily, depth: int = 4, cfg: QuadratureConfig = QuadratureConfig(),
                  steps: Sequence[float] = DEFAULT_FD_STEPS, check: bool = True) -> Dict:
    """Finite-difference ``d/dwbar res(log Delta D^{-1})`` and the closed form ``beta^*/(2 pi Im tau)``."""
    if check:
        certify(fam, radius=2 * max(steps))
    fd, drift = wirtinger(lambda w: res_log_inverse(fam, w, depth, cfg), fam.w, steps)
    closed = adjoint(fam.beta) * (1.0 / (2 * math.pi * fam.tau.imag))
    return {"finite_difference": fd, "closed_form": closed, "drift": drift}


def J_term(fam: CauchyRiemannFamily, w: complex | None = None, N: int = 6, depth: int = 4,
           cfg: QuadratureConfig = QuadratureConfig()) -> AlgebraElement:
    """``J = -int sigma(D^{-1}) - 1/2 res(log Delta D^{-1})`` on the fixed representative."""
    fint = cutoff_integral(parametrix(fam.D(w), N, cutoff=True), cfg)
    return fint - res_log_inverse(fam, w, depth, cfg) * 0.5


def first_variation(fam: CauchyRiemannFamily, w: complex | None = None, N: int = 6, depth: int = 4,
                    cfg: QuadratureConfig = QuadratureConfig()) -> complex:
    """``d/dw zeta'(0) = -phi0(beta J)``."""
    return -trace_phi0(multiply(fam.beta, J_term(fam, w, N, depth, cfg)))


def holomorphy_defect(fam: CauchyRiemannFamily, N: int = 6, cfg: QuadratureConfig = QuadratureConfig(),
                      steps: Sequence[float] = DEFAULT_FD_STEPS) -> float:
    """Norm of ``d/dwbar -int sigma(D_w^{-1})`` (zero for a holomorphic family)."""
    fd, _ = wirtinger(lambda w: cutoff_integral(parametrix(fam.D(w), N, cutoff=True), cfg), fam.w, steps)
    return fd.norm()


@dataclass
class CurvatureReport:
    value_A: complex
    value_B: complex
    discrepancy: float
    res_variation: AlgebraElement
    drift: float
    certificate: Dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"value_A": {"re": self.value_A.real, "im": self.value_A.imag},
                "value_B": {"re": self.value_B.real, "im": self.value_B.imag},
                "discrepancy": self.discrepancy,
                "diagnostics": {"richardson_drift": self.drift,
                                "sigma_min": self.certificate.get("sigma_min"),
                                "certified": self.certificate.get("certified")}}


def curvature_closed_form(fam: CauchyRiemannFamily) -> complex:
    """``phi0(beta beta^*) / (4 pi Im tau)``."""
    return trace_phi0(multiply(fam.beta, adjoint(fam.beta))) / (4 * math.pi * fam.tau.imag)


def curvature(fam: CauchyRiemannFamily, depth: int = 4, cfg: QuadratureConfig = QuadratureConfig(),
              steps: Sequence[float] = DEFAULT_FD_STEPS) -> CurvatureReport:
    """Value A (residue-variation route) and value B (closed form) of the mixed second variation."""
    cert = certify(fam, radius=2 * max(steps))
    rv = res_variation(fam, depth, cfg, steps, check=False)
    value_A = 0.5 * trace_phi0(multiply(fam.beta, rv["finite_difference"]))
    value_B = curvature_closed_form(fam)
    disc = abs(value_A - value_B) / max(abs(value_B), 1e-300) if value_B != 0 else abs(value_A)
    return CurvatureReport(complex(value_A), complex(value_B), float(disc), rv["finite_difference"], rv["drift"], cert)


def normalized_curvature(fam: CauchyRiemannFamily) -> complex:
    """Curvature rescaled by ``Im tau`` (the normalization of the classical torus)."""
    return fam.tau.imag * curvature_closed_form(fam)


@dataclass
class Scenario:
    family: CauchyRiemannFamily
    depth: int = 4
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    fd_steps: Tuple[float, ...] = DEFAULT_FD_STEPS

    def to_json(self) -> dict:
        d = self.family.to_json()
        d.update({"depth": self.depth, "quadrature": self.quadrature.to_json(), "fd_steps": list(self.fd_steps)})
        return d

    @classmethod
    def from_json(cls, data) -> "Scenario":
        if isinstance(data, str):
            data = json.loads(data)
        fam = CauchyRiemannFamily.from_json(data)
        q = QuadratureConfig.from_json(data.get("quadrature", {}))
        steps = tuple(float(h) for h in data.get("fd_steps", DEFAULT_FD_STEPS))
        if not steps or any(h <= 0 for h in steps):
            raise ValueError("fd_steps must be positive")
        return cls(fam, int(data.get("depth", 4)), q, steps)
