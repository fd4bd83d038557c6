import math

import numpy as np
import pytest

from nctorus.algebra import AlgebraElement
from nctorus.quadrature import ConvergenceError, QuadratureConfig, log_power_constant, radial_integral
from nctorus.symbols import (Context, adjoint_symbol, cauchy_riemann, complex_power, from_differential,
                             multiplication, parametrix, star_product, from_terms)
from nctorus.trace import (IntegrabilityError, PoleError, Res, TR, circle_integral, cutoff_integral,
                           fixture_cutoff_integral, laurent_at_zero, laurent_fit_contour, plane_integral,
                           res_density, rsweep_fit, shifted_g_power, shifted_rho_power, shifted_rho_power_log,
                           zeta_value)
from nctorus.xi import CoefficientFunction as CF, Cutoff

CFG = QuadratureConfig()


def lap(tau, alpha=None):
    ctx = Context(tau=tau)
    alpha = alpha if alpha is not None else AlgebraElement({}, ctx.theta)
    D = cauchy_riemann(alpha, ctx)
    return ctx, D, star_product(adjoint_symbol(D), D)


# quadrature plumbing ---------------------------------------------------------

def test_config_validation_and_json():
    cfg = QuadratureConfig(circle_nodes=512, tol=1e-10)
    assert QuadratureConfig.from_json(cfg.to_json()) == cfg
    for bad in ({"circle_nodes": 1000}, {"r0": 1.0, "r1": 0.5}, {"r1": 1.2}, {"tol": 0.0}):
        with pytest.raises(ValueError):
            QuadratureConfig(**bad)


def test_log_power_constant_against_numeric():
    # finite part of int_1^R r^{s-1} log^l r dr, s < 0 so the integral converges
    for s, l in [(-1.5, 0), (-1.7, 1), (-2.2, 3)]:
        val, _, _ = radial_integral(lambda r: r ** (s - 1) * np.log(r) ** l, [1.0], 64, 1e-10, tail=True)
        assert val == pytest.approx(log_power_constant(s, l), rel=1e-8)
    assert log_power_constant(0.0, 2) == 0.0


def test_radial_integral_raises_on_nonconvergence():
    with pytest.raises(ConvergenceError):
        radial_integral(lambda r: np.sin(1e4 * r), [0.0, 1.0], 8, 1e-14)


# circle integrals --------------------------------------------------------------

def test_circle_integral_oracles(oracle):
    for item in oracle["circle_g_inverse"]:
        tau = complex(*item["tau"])
        v = circle_integral(CF.g(tau, -1), CFG, theta=0.3).coeff(0, 0)
        assert v == pytest.approx(item["value"], rel=1e-12)
    assert circle_integral(CF.const(1.0, 1j), CFG, theta=0.3).coeff(0, 0) == pytest.approx(oracle["circle_one"])
    odd = CF.xi(1j, 1) * CF.xi(1j, 2) * CF.rho(1j, -1)
    assert abs(circle_integral(odd, CFG, theta=0.3).coeff(0, 0)) < 1e-15


def test_res_of_differential_operator_vanishes(rng):
    ctx, D, L = lap(0.3 + 1.2j, AlgebraElement.random(rng, 1, 3, 0.3))
    assert res_density(L, CFG).is_zero() or res_density(L, CFG).norm() < 1e-15


@pytest.mark.parametrize("tau", [1j, 0.3 + 1.2j, -0.5 + 0.8j])
def test_res_of_laplacian_parametrix(tau, rng):
    ctx, D, L = lap(tau, AlgebraElement.random(rng, 1, 3, 0.2))
    assert Res(parametrix(L, 4), CFG) == pytest.approx(1 / (2 * math.pi * tau.imag), rel=1e-12)


def test_res_vanishes_at_zero_potential():
    from nctorus.symbols import log_symbol
    ctx, D, L = lap(0.3 + 1.2j)
    sym = star_product(log_symbol(L, 4), parametrix(D, 4, cutoff=False), 4)
    assert res_density(sym, CFG).norm() < 1e-14


# cut-off integrals -----------------------------------------------------------------

def test_fixture_values(oracle):
    assert fixture_cutoff_integral(shifted_rho_power(1.75), CFG) == pytest.approx(oracle["cutoff_shifted_rho_1.75"], rel=1e-10)
    assert fixture_cutoff_integral(shifted_rho_power(0.6), CFG) == pytest.approx(oracle["cutoff_shifted_rho_0.6"], rel=1e-10)
    assert fixture_cutoff_integral(shifted_rho_power_log(1.75), CFG) == pytest.approx(
        oracle["cutoff_shifted_rho_log_1.75"], rel=1e-10)
    assert fixture_cutoff_integral(shifted_g_power(1.75, 0.3 + 1.2j), CFG) == pytest.approx(
        oracle["cutoff_shifted_g_1.75_tau_0.3_1.2"], rel=1e-10)


def test_fixture_needs_integrable_remainder():
    with pytest.raises(IntegrabilityError):
        fixture_cutoff_integral(shifted_rho_power(0.6), CFG, N=0)


def test_fixture_against_rsweep():
    fx = shifted_rho_power(1.75)
    exps = [(-3.5 - 2 * k, 0) for k in range(4)]
    fit = rsweep_fit(fx.evaluate, exps, CFG, inner_breaks=())
    assert fit["constant"] == pytest.approx(1 / (3 * math.pi), abs=1e-8)
    assert abs(fit["log_coefficient"]) < 1e-8


def test_order_minus_three_equals_plain_integral(oracle):
    ctx = Context(tau=1j)
    sym = from_terms(-3, {0: [(CF.basis(1j, chi=(1,), er=-1.5), AlgebraElement.scalar(1.0, ctx.theta))]}, ctx, depth=1)
    val = TR(sym, CFG)
    assert val == pytest.approx(oracle["plane_chi_rho_-1.5"], rel=1e-10)
    direct = plane_integral(lambda x1, x2: Cutoff()(np.hypot(x1, x2)) * (x1 ** 2 + x2 ** 2) ** -1.5,
                            [0.5, 1.0], CFG, tail=True)
    assert val == pytest.approx(direct, rel=1e-8)


def test_homogeneous_without_cutoff_is_rejected():
    ctx = Context(tau=1j)
    sym = from_terms(-3, {0: [(CF.rho(1j, -1.5), AlgebraElement.scalar(1.0, ctx.theta))]}, ctx, depth=1)
    with pytest.raises(IntegrabilityError):
        TR(sym, CFG)


def test_differential_operator_has_zero_cutoff_integral(rng):
    ctx, D, L = lap(0.3 + 1.2j, AlgebraElement.random(rng, 1, 3, 0.3))
    assert cutoff_integral(L, CFG).norm() == 0


def test_cutoff_independence_for_representatives(rng):
    ctx, D, L = lap(0.3 + 1.2j, AlgebraElement.random(rng, 1, 3, 0.2))
    sym = star_product(multiplication(AlgebraElement.random(rng, 1, 3, 1.0, ctx.theta), ctx),
                       complex_power(L, 5).at(-0.65), 5)
    a = cutoff_integral(sym, CFG)
    b = cutoff_integral(sym, CFG.replace(r0=0.25, r1=0.75))
    assert (a - b).norm() <= 1e-8 * max(1, a.norm())


def test_log_polyhomogeneous_representative_cutoff_independence(rng):
    from nctorus.symbols import log_symbol
    ctx, D, L = lap(0.3 + 1.2j, AlgebraElement.random(rng, 1, 3, 0.2))
    sym = star_product(log_symbol(L, 5, cutoff=True), parametrix(L, 5), 5)
    a = TR(sym, CFG)
    b = TR(sym, CFG.replace(r0=0.25, r1=0.75))
    assert abs(a - b) <= 1e-8 * max(1, abs(a))


# zeta functions -----------------------------------------------------------------

def test_zeta_at_two_against_rsweep():
    ctx, D, L = lap(1j)
    one = from_differential({(0, 0): 1.0}, ctx)
    val = zeta_value(one, L, 2.0, CFG, N=3)
    fit = rsweep_fit(lambda x1, x2: Cutoff()(np.hypot(x1, x2)) * (x1 ** 2 + x2 ** 2) ** -2.0, [(-4, 0)], CFG)
    assert val == pytest.approx(fit["constant"], abs=1e-8)


def test_zeta_holomorphic_off_poles(rng):
    ctx, D, L = lap(0.3 + 1.2j, AlgebraElement.random(rng, 1, 3, 0.2))
    A = multiplication(AlgebraElement.random(rng, 1, 3, 1.0, ctx.theta), ctx)
    z0, r = 0.3, 0.01
    pts = z0 + r * np.exp(2j * np.pi * np.arange(4) / 4)
    vals = np.array([zeta_value(A, L, z, CFG, 4) for z in pts])
    X = np.vander(pts - z0, 3, increasing=True)
    coef, *_ = np.linalg.lstsq(X, vals, rcond=None)
    assert np.max(np.abs(X @ coef - vals)) <= 1e-6


def test_pole_at_one_has_expected_residue():
    tau = 0.3 + 1.2j
    ctx, D, L = lap(tau)
    one = from_differential({(0, 0): 1.0}, ctx)
    fit = laurent_fit_contour(lambda z: zeta_value(one, L, z, CFG, 3), 1.0, 0.1, 12)
    assert fit[-1] == pytest.approx(1 / (4 * math.pi * tau.imag), rel=1e-9)


def test_pole_guard():
    ctx, D, L = lap(1j)
    one = from_differential({(0, 0): 1.0}, ctx)
    with pytest.raises(PoleError):
        zeta_value(one, L, 1.0 + 1e-10, CFG, 3)


def test_laurent_residue_and_regularity(rng):
    tau = 0.3 + 1.2j
    ctx, D, L = lap(tau, AlgebraElement.random(rng, 1, 3, 0.2))
    lau = laurent_at_zero(parametrix(L, 4), L, K=0, cfg=CFG, N=4)
    assert lau.coefficients[-1] == pytest.approx(1 / (4 * math.pi * tau.imag), rel=1e-12)
    Adiff = star_product(multiplication(AlgebraElement.random(rng, 1, 2, 1.0, ctx.theta), ctx), D)
    assert abs(laurent_at_zero(Adiff, L, K=0, cfg=CFG, N=4).coefficients[-1]) < 1e-12


def test_kernel_trace_shifts_constant_term(rng):
    ctx, D, L = lap(1j)
    A = multiplication(AlgebraElement({(0, 0): 2.0, (1, 0): 0.5}, ctx.theta), ctx)
    base = laurent_at_zero(A, L, K=0, cfg=CFG, N=3)
    shifted = laurent_at_zero(A, L, K=0, cfg=CFG, N=3, kernel_trace=2.0)
    assert shifted.coefficients[0] == pytest.approx(base.coefficients[0] - 2.0)
