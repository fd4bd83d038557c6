"""Batch command-line front end.

Each command runs a fixed set of checks and writes a JSON report plus a short
table on stdout.  Exit status: 0 all checks pass, 2 invalid input, 3 a
numerical method failed to converge, 4 at least one check failed.
"""

from __future__ import annotations

import argparse
import cmath
import json
import math
import sys
from typing import Callable, Dict, List, Optional

import numpy as np

from . import __version__
from .algebra import DEFAULT_THETA, AlgebraElement, adjoint, derive, multiply, trace_phi0
from .curvature import (CauchyRiemannFamily, FiniteDifferenceError, NotInvertibleError, Scenario,
                        compare_on_circle, curvature, default_family, log_inverse_identity, normalized_curvature)
from .oracle import build_matrix, lattice_symbol_sum, spectral_trace
from .quadrature import ConvergenceError, QuadratureConfig
from .symbols import Context, DepthError, adjoint_symbol, cauchy_riemann, complex_power, log_symbol, parametrix, star_product
from .trace import (Res, TR, circle_integral, fixture_cutoff_integral, laurent_at_zero, shifted_rho_power,
                    zeta_value)
from .xi import CoefficientFunction as CF

EXIT_OK, EXIT_VALIDATION, EXIT_CONVERGENCE, EXIT_CHECK = 0, 2, 3, 4
COMMANDS = ("algebra", "symbol", "trace", "zeta", "lemma52", "curvature", "oracle-compare", "suite")


class ValidationError(ValueError):
    pass


def _round(x):
    """Round floats to 12 significant digits for stable reports."""
    if isinstance(x, float):
        if not math.isfinite(x):
            return str(x)
        return float(f"{x:.12g}")
    if isinstance(x, complex):
        return {"re": _round(x.real), "im": _round(x.imag)}
    if isinstance(x, (np.floating, np.integer)):
        return _round(x.item())
    if isinstance(x, dict):
        return {str(k): _round(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round(v) for v in x]
    return x


class Report:
    def __init__(self, command: str, settings: dict):
        self.command = command
        self.settings = settings
        self.results: Dict[str, object] = {}
        self.checks: List[dict] = []

    def check(self, name: str, value, expected, tol: float, rel: bool = True, diagnostic=None) -> bool:
        value = complex(value)
        expected = complex(expected)
        err = abs(value - expected)
        if rel and expected != 0:
            err /= abs(expected)
        ok = bool(err <= tol)
        self.checks.append({"name": name, "value": value, "expected": expected, "error": err,
                            "tolerance": tol, "relative": rel, "pass": ok, "diagnostic": diagnostic})
        return ok

    def bound(self, name: str, value: float, tol: float, diagnostic=None) -> bool:
        ok = bool(abs(value) <= tol)
        self.checks.append({"name": name, "value": float(value), "expected": 0.0, "error": float(abs(value)),
                            "tolerance": tol, "relative": False, "pass": ok, "diagnostic": diagnostic})
        return ok

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks)

    def to_json(self) -> dict:
        return _round({"command": self.command, "version": __version__, "settings": self.settings,
                       "results": self.results, "checks": self.checks, "pass": self.passed})

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2)

    def table(self) -> str:
        rows = [f"{'check':<44} {'error':>12} {'tol':>9}  result"]
        for c in self.checks:
            rows.append(f"{c['name']:<44} {c['error']:>12.4g} {c['tolerance']:>9.1e}  {'pass' if c['pass'] else 'FAIL'}")
        return "\n".join(rows)


# ---------------------------------------------------------------------------
# settings


def _load_input(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read input {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError("input JSON must be an object")
    return data


def effective_settings(args) -> dict:
    data = _load_input(args.input)
    s = dict(data)
    if args.theta is not None:
        s["theta"] = args.theta
    s.setdefault("theta", DEFAULT_THETA)
    tau = dict(s.get("tau", {"re": 0.0, "im": 1.0}))
    if args.tau_re is not None:
        tau["re"] = args.tau_re
    if args.tau_im is not None:
        tau["im"] = args.tau_im
    if tau["im"] <= 0:
        raise ValidationError("Im(tau) must be positive")
    s["tau"] = tau
    q = dict(s.get("quadrature", {}))
    if args.circle_nodes is not None:
        q["circle_nodes"] = args.circle_nodes
    if args.tol is not None:
        q["tol"] = args.tol
    try:
        s["quadrature"] = QuadratureConfig.from_json(q).to_json()
    except (TypeError, ValueError) as exc:
        raise ValidationError(str(exc)) from exc
    if args.depth is not None:
        s["depth"] = args.depth
    s.setdefault("depth", 4)
    if args.lattice_M is not None:
        s["lattice_M"] = args.lattice_M
    s.setdefault("lattice_M", [16, 24, 32, 40])
    if isinstance(s["lattice_M"], int):
        s["lattice_M"] = [s["lattice_M"]]
    s["seed"] = args.seed if args.seed is not None else s.get("seed", 0)
    return s


def _ctx(s) -> Context:
    return Context(float(s["theta"]), complex(s["tau"]["re"], s["tau"]["im"]))


def _cfg(s) -> QuadratureConfig:
    return QuadratureConfig.from_json(s["quadrature"])


def _family(s) -> CauchyRiemannFamily:
    if "alpha0" in s or "beta" in s:
        return CauchyRiemannFamily.from_json(s)
    return default_family(complex(s["tau"]["re"], s["tau"]["im"]), "U", float(s["theta"]))


# ---------------------------------------------------------------------------
# commands


def run_algebra(s, rep: Report):
    th = float(s["theta"])
    tau = complex(s["tau"]["re"], s["tau"]["im"])
    a = AlgebraElement.from_json(s["a"], th) if "a" in s else AlgebraElement.monomial(0, 1, theta=th)
    b = AlgebraElement.from_json(s["b"], th) if "b" in s else AlgebraElement.monomial(1, 0, theta=th)
    ab = multiply(a, b)
    rep.results.update({"product": ab.to_json(), "adjoint_a": adjoint(a).to_json(),
                        "phi0_ab": trace_phi0(ab), "dbar_a": derive(a, "dbar", tau).to_json()})
    if "a" not in s and "b" not in s:
        rep.check("V U = e^{2 pi i theta} U V", ab.coeff(1, 1), cmath.exp(2j * math.pi * th), 1e-14)
    rep.check("phi0(ab) = phi0(ba)", trace_phi0(ab), trace_phi0(multiply(b, a)), 1e-12, rel=False)
    rep.check("(ab)* = b* a*", 0.0, (adjoint(ab) - multiply(adjoint(b), adjoint(a))).norm(), 1e-12, rel=False)


def run_symbol(s, rep: Report):
    ctx = _ctx(s)
    N = max(int(s["depth"]), 3)
    alpha = AlgebraElement.from_json(s["alpha0"], ctx.theta) if "alpha0" in s else \
        AlgebraElement({(0, 0): 0.3, (1, 0): 0.1, (0, 1): 0.05j}, ctx.theta)
    D = cauchy_riemann(alpha, ctx)
    Lap = star_product(adjoint_symbol(D), D)
    Dinv = parametrix(D, N, cutoff=False)
    got = Dinv.component_tensor(-2)
    want = {k: v for k, v in _tensor(CF.ell(ctx.tau, -2), alpha * -1.0).items()}
    pts = np.linspace(0, 2 * np.pi, 17)[:-1]
    rep.check("sigma_-2(D^-1) = -l^-2 alpha", compare_on_circle(got, want, ctx.tau, pts), 0.0, 1e-12, rel=False)
    P = complex_power(Lap, N, cutoff=False)
    rep.check("Delta^z at z=1 reproduces sigma_1(Delta)",
              compare_on_circle(P.at(1.0).component_tensor(1), Lap.component_tensor(1), ctx.tau, pts), 0.0, 1e-12, rel=False)
    L = log_symbol(Lap, N)
    want_log = _tensor_from_pairs([(CF.g(ctx.tau, -1) * cf, a) for cf, a in Lap.homogeneous_component(1)])
    rep.check("sigma_-1,0(log Delta) = g^-1 sigma_1(Delta)",
              compare_on_circle(L.component_tensor(-1, 0), want_log, ctx.tau, pts), 0.0, 1e-12, rel=False)
    rep.results.update({"laplacian": Lap.to_json(), "parametrix_D": Dinv.to_json()})


def _tensor(cf, a):
    from .symbols import t_from_cf
    return t_from_cf(cf, a)


def _tensor_from_pairs(pairs):
    out = {}
    for cf, a in pairs:
        for k, v in _tensor(cf, a).items():
            out[k] = out.get(k, 0.0) + v
    return out


def run_trace(s, rep: Report):
    cfg = _cfg(s)
    tau = complex(s["tau"]["re"], s["tau"]["im"])
    v = circle_integral(CF.g(tau, -1), cfg, theta=float(s["theta"])).coeff(0, 0)
    rep.results["circle_g_inverse"] = v
    rep.check("circle integral of g^-1 = 1/(2 pi Im tau)", v, 1 / (2 * math.pi * tau.imag), 1e-10)
    fx = shifted_rho_power(1.75)
    c = fixture_cutoff_integral(fx, cfg)
    rep.results["cutoff_(1+rho)^-1.75"] = c
    rep.check("cut-off integral (1+rho)^-1.75 = 1/(3 pi)", c, 1 / (3 * math.pi), 1e-8)
    c2 = fixture_cutoff_integral(fx, cfg.replace(r0=0.25, r1=0.75))
    rep.check("cutoff independence of c(sigma)", c2, c, 1e-8)


def run_zeta(s, rep: Report):
    ctx = _ctx(s)
    cfg = _cfg(s)
    N = max(int(s["depth"]), 4)
    fam = _family(s)
    Lap = CauchyRiemannFamily(ctx.theta, ctx.tau, fam.alpha0, fam.beta).Delta()
    A = parametrix(Lap, N)
    lau = laurent_at_zero(A, Lap, K=4, cfg=cfg, N=N)
    rep.results["laurent"] = {str(k): v for k, v in lau.coefficients.items()}
    rep.check("a_-1 = Res(A)/2 = 1/(4 pi Im tau)", lau.coefficients[-1], 1 / (4 * math.pi * ctx.tau.imag), 1e-6)
    for z in (0.05, -0.05, 0.1, -0.1):
        val = zeta_value(A, Lap, z, cfg, N)
        rep.results[f"zeta({z})"] = val
        rep.check(f"Laurent series vs zeta at z={z}", val, lau(z), 1e-5, rel=False)


def run_lemma52(s, rep: Report):
    fam = _family(s)
    rng = np.random.default_rng(int(s["seed"]))
    depth = max(int(s["depth"]), 2)
    d = log_inverse_identity(fam, depth=depth)
    pts = rng.uniform(0, 2 * np.pi, 32)
    err = compare_on_circle(d["computed"], d["closed_form"], fam.tau, pts)
    rep.results["max_relative_error"] = err
    rep.bound("sigma_-2,0(log Delta D^-1) closed form", err, 1e-8, diagnostic={"points": 32, "depth": depth})


def run_curvature(s, rep: Report):
    fam = _family(s)
    cfg = _cfg(s)
    steps = tuple(s.get("fd_steps", (1e-3, 1e-4)))
    r = curvature(fam, max(int(s["depth"]), 2), cfg, steps)
    rep.results.update(r.to_json())
    rep.results["normalized_value_B"] = normalized_curvature(fam)
    rep.check("value A = value B", r.value_A, r.value_B, 1e-5,
              diagnostic={"richardson_drift": r.drift, "sigma_min": r.certificate["sigma_min"][-1]})


def run_oracle_compare(s, rep: Report):
    cfg = _cfg(s)
    kappa = float(s.get("kappa", 4.0))
    fx = shifted_rho_power(1.75, kappa)
    sym = fixture_cutoff_integral(fx, cfg) * (2 * math.pi) ** 2
    lat = lattice_symbol_sum(fx.evaluate, s["lattice_M"])
    ctx = Context(float(s["theta"]), 1j)
    spec = spectral_trace(lambda M: build_matrix("Delta", M, ctx), lambda w: (kappa + w) ** -1.75,
                          sweep=s["lattice_M"], kernel_tol=-1.0)
    rep.results.update({"symbol_side": sym, "lattice_sum": lat["value"], "spectral_trace": spec["value"],
                        "gap": abs(sym - lat["value"]), "richardson_error": lat["error"]})
    rep.check("symbol trace vs lattice sum", sym, lat["value"], 1e-3, diagnostic={"richardson_error": lat["error"]})
    rep.check("lattice sum vs spectral trace", spec["value"], lat["value"], 1e-9)


RUNNERS: Dict[str, Callable] = {"algebra": run_algebra, "symbol": run_symbol, "trace": run_trace, "zeta": run_zeta,
                                "lemma52": run_lemma52, "curvature": run_curvature, "oracle-compare": run_oracle_compare}


def run(command: str, settings: dict) -> Report:
    rep = Report(command, settings)
    if command == "suite":
        for name, fn in RUNNERS.items():
            sub = Report(name, settings)
            fn(settings, sub)
            rep.results[name] = sub.to_json()["results"]
            for c in sub.checks:
                c = dict(c)
                c["name"] = f"{name}: {c['name']}"
                rep.checks.append(c)
        return rep
    RUNNERS[command](settings, rep)
    return rep


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nctorus", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--theta", type=float)
    p.add_argument("--tau-re", type=float)
    p.add_argument("--tau-im", type=float)
    p.add_argument("--input", help="scenario JSON file")
    p.add_argument("--output", help="report JSON path (stdout table only if omitted)")
    p.add_argument("--depth", type=int)
    p.add_argument("--circle-nodes", type=int)
    p.add_argument("--lattice-M", type=int, nargs="+")
    p.add_argument("--tol", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--json", action="store_true", help="print the JSON report to stdout")
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = effective_settings(args)
        rep = run(args.command, settings)
    except (ValidationError, KeyError, TypeError, NotInvertibleError, DepthError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ConvergenceError, FiniteDifferenceError) as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except ValueError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    text = rep.dumps()
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    if args.json:
        print(text)
    else:
        print(rep.table())
    return EXIT_OK if rep.passed else EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
