import numpy as np
import pytest

from nctorus.algebra import AlgebraElement
from nctorus.curvature import compare_on_circle
from nctorus.oracle import apply_symbol_op
from nctorus.symbols import (Context, DepthError, EllipticityError, adjoint_symbol, cauchy_riemann, complex_power,
                             from_differential, identity, log_symbol, multiplication, parametrix, power_of,
                             resolvent_defect, resolvent_expansion, star_product, t_from_cf, z_derivative)
from nctorus.xi import CoefficientFunction as CF

TAUS = [1j, 0.3 + 1.2j]
PTS = np.linspace(0, 2 * np.pi, 23)[:-1]


def laplacian(ctx, alpha):
    D = cauchy_riemann(alpha, ctx)
    return D, star_product(adjoint_symbol(D), D)


@pytest.fixture(params=TAUS, ids=["tau=i", "tau=0.3+1.2i"])
def setup(request, rng):
    ctx = Context(tau=request.param)
    alpha = AlgebraElement.random(rng, radius=1, nterms=3, scale=0.3, theta=ctx.theta)
    D, L = laplacian(ctx, alpha)
    return ctx, alpha, D, L


def values(sym, x1, x2, js=None, z=None):
    return sym.evaluate(x1, x2, z=z, js=js)


def max_gap(a, b):
    keys = set(a) | set(b)
    return max((np.max(np.abs(a.get(k, 0) - b.get(k, 0))) for k in keys), default=0.0)


def test_parametrix_leading_terms(setup):
    ctx, alpha, D, _ = setup
    Q = parametrix(D, 3, cutoff=False)
    assert Q.order == -1
    want = t_from_cf(CF.ell(ctx.tau, -2), alpha * -1.0)
    assert compare_on_circle(Q.component_tensor(-2), want, ctx.tau, PTS) < 1e-13


def test_laplacian_is_exact_and_has_g_leading(setup):
    ctx, alpha, D, L = setup
    assert L.is_exact and L.order == 2
    want = t_from_cf(CF.g(ctx.tau), AlgebraElement.scalar(1.0, ctx.theta))
    assert compare_on_circle(L.component_tensor(2), want, ctx.tau, PTS) < 1e-14


def test_star_product_matches_operator_composition(setup, rng):
    ctx, alpha, D, L = setup
    a = AlgebraElement.random(rng, radius=3, nterms=8, theta=ctx.theta)
    Ds = adjoint_symbol(D)
    lhs = apply_symbol_op(L, a)
    rhs = apply_symbol_op(Ds, apply_symbol_op(D, a))
    assert (lhs - rhs).norm() <= 1e-12 * max(1.0, lhs.norm())


def test_adjoint_symbol_is_operator_adjoint(setup, rng):
    ctx, alpha, D, _ = setup
    a = AlgebraElement.random(rng, radius=2, nterms=5, theta=ctx.theta)
    b = AlgebraElement.random(rng, radius=2, nterms=5, theta=ctx.theta)
    from nctorus.algebra import inner
    lhs = inner(apply_symbol_op(D, a), b)
    rhs = inner(a, apply_symbol_op(adjoint_symbol(D), b))
    assert abs(lhs - rhs) < 1e-12


def test_parametrix_is_inverse_up_to_depth(setup, rng):
    ctx, _, _, L = setup
    N = 5
    Q = parametrix(L, N, cutoff=False)
    prod = star_product(L, Q, N)
    x1, x2 = rng.normal(size=(2, 6)) * 2
    got = values(prod, x1, x2)
    want = values(identity(ctx), x1, x2)
    assert max_gap(got, want) < 1e-12


def test_complex_power_endpoints(setup, rng):
    ctx, _, _, L = setup
    N = 5
    P = complex_power(L, N, cutoff=False)
    x1, x2 = rng.normal(size=(2, 6)) * 2
    assert max_gap(values(P.at(1.0), x1, x2), values(L, x1, x2)) < 1e-12
    assert max_gap(values(P.at(-1.0), x1, x2), values(parametrix(L, N, cutoff=False), x1, x2)) < 1e-12
    assert max_gap(values(P.at(0.0), x1, x2), values(identity(ctx), x1, x2)) < 1e-14


def test_complex_power_leading_and_first_components(setup):
    ctx, _, _, L = setup
    P = complex_power(L, 3, cutoff=False)
    z = 0.37 - 0.21j
    Pz = P.at(z)
    lead = t_from_cf(CF.basis(ctx.tau, eg=z), AlgebraElement.scalar(1.0, ctx.theta))
    assert compare_on_circle(Pz.component_tensor(2 * z), lead, ctx.tau, PTS) < 1e-13
    # b(z)_{2z-1} = z g^{z-1} sigma_1(Delta)
    want = {}
    for cf, a in L.homogeneous_component(1):
        for k, v in t_from_cf(CF.basis(ctx.tau, eg=z - 1, coeff=z) * cf, a).items():
            want[k] = want.get(k, 0) + v
    assert compare_on_circle(Pz.component_tensor(2 * z - 1), want, ctx.tau, PTS) < 1e-13


@pytest.mark.parametrize("z,w", [(0.3, -0.45), (-0.7 + 0.2j, 0.15j), (-1.2, 0.5)])
def test_group_property(setup, rng, z, w):
    ctx, _, _, L = setup
    N = 5
    P = complex_power(L, N, cutoff=False)
    lhs = star_product(P.at(z), P.at(w), N)
    rhs = P.at(z + w)
    r = rng.uniform(0.8, 3.0, 8)
    phi = rng.uniform(0, 2 * np.pi, 8)
    x1, x2 = r * np.cos(phi), r * np.sin(phi)
    for j in range(N):
        gap = max_gap(values(lhs, x1, x2, js=[j]), values(rhs, x1, x2, js=[j]))
        assert gap < 1e-11, j


def test_resolvent_defect(setup, rng):
    ctx, _, _, L = setup
    R = resolvent_expansion(L, 5)
    x1, x2 = rng.normal(size=(2, 7)) * 2
    for lam in (-3.0, 1.5 + 2j, -0.2 - 4j):
        assert max(resolvent_defect(L, R, lam, x1, x2)) < 1e-12


def test_resolvent_at_zero_is_minus_parametrix(setup, rng):
    ctx, _, _, L = setup
    R = resolvent_expansion(L, 4)
    Q = parametrix(L, 4, cutoff=False)
    x1, x2 = rng.normal(size=(2, 5)) * 2
    assert max_gap(R.evaluate(x1, x2, 0.0), {k: -v for k, v in values(Q, x1, x2).items()}) < 1e-12


def test_log_symbol_components(setup):
    ctx, alpha, _, L = setup
    Lg = log_symbol(L, 3)
    # sigma_{-1,0}(log Delta) = g^{-1} sigma_1(Delta)
    want = {}
    for cf, a in L.homogeneous_component(1):
        for k, v in t_from_cf(CF.g(ctx.tau, -1) * cf, a).items():
            want[k] = want.get(k, 0) + v
    assert compare_on_circle(Lg.component_tensor(-1, 0), want, ctx.tau, PTS) < 1e-13
    lead = t_from_cf(CF.L0(ctx.tau) * 2.0 + CF.Lambda(ctx.tau), AlgebraElement.scalar(1.0, ctx.theta))
    got = {**Lg.component_tensor(0, 0)}
    for k, v in Lg.component_tensor(0, 1).items():
        got[k] = got.get(k, 0) + v
    assert compare_on_circle(got, lead, ctx.tau, PTS + 0.01) < 1e-13


def test_log_symbol_is_derivative_of_power(setup, rng):
    ctx, _, _, L = setup
    N = 4
    lg = log_symbol(L, N)
    dz = z_derivative(complex_power(L, N, cutoff=False), 1)
    x1, x2 = rng.uniform(0.7, 2.5, (2, 6))
    assert max_gap(values(lg, x1, x2), values(dz, x1, x2)) < 1e-11


def test_log_squared_matches_second_z_derivative(setup, rng):
    ctx, _, _, L = setup
    N = 3
    lg = log_symbol(L, N)
    sq = star_product(lg, lg, N)
    d2 = z_derivative(complex_power(L, N, cutoff=False), 2)
    x1, x2 = rng.uniform(0.7, 2.5, (2, 6))
    assert max_gap(values(sq, x1, x2), values(d2, x1, x2)) < 1e-10


def test_depth_errors(setup):
    ctx, _, D, L = setup
    Q = parametrix(L, 3)
    with pytest.raises(DepthError):
        star_product(Q, Q, 5)
    with pytest.raises(DepthError):
        Q.component(3)
    from nctorus.symbols import from_terms
    exact = from_terms(-2, {0: [(CF.g(ctx.tau, -1), AlgebraElement.scalar(1.0, ctx.theta))]}, ctx)
    with pytest.raises(DepthError):
        star_product(exact, L)  # exact product needs polynomial symbols


def test_non_elliptic_leading_rejected():
    ctx = Context(tau=1j)
    sym = from_differential({(1, 0): 1.0}, ctx)  # xi1 alone is not elliptic
    with pytest.raises(EllipticityError):
        parametrix(star_product(sym, sym), 3)
    with pytest.raises(EllipticityError):
        resolvent_expansion(from_differential({(2, 0): 2.0, (0, 2): 2.0}, ctx), 3)


def test_power_of_and_differential_exactness(rng):
    ctx = Context(tau=0.3 + 1.2j)
    D = cauchy_riemann(AlgebraElement.random(rng, 1, 3, 0.3, ctx.theta), ctx)
    D3 = power_of(D, 3)
    a = AlgebraElement.random(rng, 2, 5, theta=ctx.theta)
    lhs = apply_symbol_op(D3, a)
    rhs = apply_symbol_op(D, apply_symbol_op(D, apply_symbol_op(D, a)))
    assert (lhs - rhs).norm() <= 1e-12 * max(1, lhs.norm())


def test_multiplication_symbol_composes_like_algebra(rng):
    ctx = Context()
    a = AlgebraElement.random(rng, 2, 4, theta=ctx.theta)
    b = AlgebraElement.random(rng, 2, 4, theta=ctx.theta)
    prod = star_product(multiplication(a, ctx), multiplication(b, ctx))
    x = AlgebraElement.scalar(1.0, ctx.theta)
    assert (apply_symbol_op(prod, x) - a * b).norm() < 1e-13


def test_json_dump_is_serializable(setup):
    import json
    ctx, _, D, _ = setup
    text = json.dumps(parametrix(D, 2).to_json())
    assert '"depth": 2' in text


def test_cutoff_representative_carries_chi():
    ctx = Context(tau=1j)
    D = cauchy_riemann(AlgebraElement.scalar(0.2, ctx.theta), ctx)
    Q = parametrix(D, 2)
    assert all(s.chi == (1,) for t in Q.comps.values() for (s, _, _, _) in t)
    assert Q.without_cutoff().homogeneous_component(-1)
