import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nctorus.algebra import (DEFAULT_THETA, AlgebraElement, ThetaMismatch, adjoint, derive, inner, multiply,
                             phase, trace_phi0)

TH = DEFAULT_THETA

coef = st.complex_numbers(max_magnitude=3.0, allow_nan=False, allow_infinity=False)
mode = st.tuples(st.integers(-3, 3), st.integers(-3, 3))
elements = st.dictionaries(mode, coef, max_size=5).map(lambda d: AlgebraElement(d, TH))


def close(a, b, tol=1e-11):
    return (a - b).norm() <= tol * max(1.0, a.norm(), b.norm())


def test_commutation_relation():
    U = AlgebraElement.monomial(1, 0)
    V = AlgebraElement.monomial(0, 1)
    vu = V * U
    assert vu.coeff(1, 1) == pytest.approx(cmath.exp(2j * math.pi * TH), abs=1e-15)
    assert (U * V).coeff(1, 1) == 1


def test_phase_uses_reduced_argument():
    k = 10 ** 9 + 7
    frac = math.fmod(k * TH, 1.0)
    assert phase(TH, k) == pytest.approx(cmath.exp(2j * math.pi * frac))
    assert abs(phase(TH, k)) == pytest.approx(1.0, abs=1e-15)


def test_monomial_adjoint_phase():
    a = AlgebraElement.monomial(2, 3, 1.5j)
    b = adjoint(a)
    assert b.coeff(-2, -3) == pytest.approx(-1.5j * cmath.exp(2j * math.pi * TH * 6))
    assert close(multiply(a, b), AlgebraElement.scalar(2.25))


@given(elements, elements, elements)
def test_associativity(a, b, c):
    assert close((a * b) * c, a * (b * c))


@given(elements, elements)
def test_phi0_trace_property(a, b):
    assert abs(trace_phi0(a * b) - trace_phi0(b * a)) <= 1e-11 * max(1.0, a.norm() * b.norm())


@given(elements, elements)
def test_adjoint_antimultiplicative(a, b):
    assert close(adjoint(a * b), adjoint(b) * adjoint(a))
    assert close(adjoint(adjoint(a)), a)


@given(elements)
def test_phi0_positive_and_faithful(a):
    v = trace_phi0(a * adjoint(a))
    assert abs(v.imag) < 1e-12 * max(1, a.norm() ** 2)
    assert v.real == pytest.approx(a.norm() ** 2, rel=1e-12, abs=1e-14)


@given(elements, elements, st.sampled_from(["delta1", "delta2", "dbar", "dbar_star"]))
def test_leibniz(a, b, which):
    tau = 0.3 + 1.2j
    lhs = derive(a * b, which, tau)
    rhs = derive(a, which, tau) * b + a * derive(b, which, tau)
    assert close(lhs, rhs)


@given(elements, elements, st.sampled_from(["delta1", "delta2"]))
def test_integration_by_parts(a, b, which):
    assert trace_phi0(derive(a, which)) == 0
    lhs = trace_phi0(derive(a, which) * b)
    rhs = -trace_phi0(a * derive(b, which))
    assert abs(lhs - rhs) <= 1e-11 * max(1.0, a.norm() * b.norm() * 6)


@given(elements)
def test_dbar_star_is_adjoint_of_dbar(a):
    tau = -0.4 + 0.7j
    b = AlgebraElement({(1, -1): 0.5, (0, 2): 1j, (0, 0): 2}, TH)
    lhs = inner(derive(a, "dbar", tau), b)
    rhs = inner(a, derive(b, "dbar_star", tau))
    assert abs(lhs - rhs) <= 1e-11 * max(1.0, a.norm() * 20)


def test_dbar_weights():
    a = AlgebraElement({(1, 0): 1.0, (0, 1): 1.0}, TH)
    d = derive(a, "dbar", 0.3 + 1.2j)
    assert d.coeff(1, 0) == 1 and d.coeff(0, 1) == 0.3 + 1.2j


def test_dbar_rejects_lower_half_plane():
    with pytest.raises(ValueError):
        derive(AlgebraElement.monomial(1, 0), "dbar", 0.3 - 1j)


def test_theta_mismatch():
    with pytest.raises(ThetaMismatch):
        AlgebraElement.monomial(1, 0, theta=0.1) * AlgebraElement.monomial(1, 0, theta=0.2)


def test_json_roundtrip(rng):
    a = AlgebraElement.random(rng, radius=3, nterms=6)
    assert AlgebraElement.from_json(a.to_json()) == a


def test_pruning_drops_tiny_amplitudes():
    a = AlgebraElement({(0, 0): 1.0, (1, 0): 1e-18})
    assert list(a.support) == [(0, 0)]


def test_immutable():
    a = AlgebraElement.scalar(1.0)
    with pytest.raises(AttributeError):
        a.theta = 0.3
