import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nctorus.xi import (CoefficientFunction as CF, Cutoff, Sig, XiGrid, normalize, sig_conj, sig_partial)

TAUS = [1j, 0.3 + 1.2j, -0.6 + 0.5j]


def fd_check(cf, axis, pts, z=None, h=1e-6):
    x1, x2 = pts
    d = cf.partial(axis).evaluate((x1, x2), z=z)
    if axis == 1:
        num = (cf.evaluate((x1 + h, x2), z=z) - cf.evaluate((x1 - h, x2), z=z)) / (2 * h)
    else:
        num = (cf.evaluate((x1, x2 + h), z=z) - cf.evaluate((x1, x2 - h), z=z)) / (2 * h)
    return np.max(np.abs(d - num)) / max(1.0, np.max(np.abs(d)))


SAMPLES = [
    lambda t: CF.g(t, -1),
    lambda t: CF.Lambda(t),
    lambda t: CF.L0(t, 2) * CF.rho(t, -0.75),
    lambda t: CF.ell(t, -2) * CF.ellbar(t, 1) * CF.xi(t, 1),
    lambda t: CF.basis(t, eg=-0.35, el=1) * CF.Lambda(t, 2),
    lambda t: CF.basis(t, chi=(1,)) * CF.rho(t, -1),
    lambda t: CF.basis(t, chi=(0, 1)) * CF.g(t, -1),
]


@pytest.mark.parametrize("tau", TAUS)
@pytest.mark.parametrize("k", range(len(SAMPLES)))
@pytest.mark.parametrize("axis", [1, 2])
def test_partial_matches_finite_difference(tau, k, axis, rng):
    cf = SAMPLES[k](tau)
    r = rng.uniform(0.6, 1.6, 12)
    phi = rng.uniform(0, 2 * np.pi, 12)
    assert fd_check(cf, axis, (r * np.cos(phi), r * np.sin(phi))) < 1e-7


def test_partial_of_z_power_matches_finite_difference(rng):
    tau = 0.3 + 1.2j
    cf = CF.g_z(tau, -1) * CF.basis(tau, zp=1)
    pts = rng.uniform(0.5, 2, (2, 10))
    assert fd_check(cf, 1, pts, z=0.37 - 0.2j) < 1e-7


@given(st.floats(0.3, 3.0), st.floats(0, 2 * np.pi), st.sampled_from(TAUS))
def test_g_factorization(r, phi, tau):
    grid = XiGrid(np.array([r * math.cos(phi)]), np.array([r * math.sin(phi)]), tau)
    g = CF.ell(tau) * CF.ellbar(tau)
    assert g.evaluate((grid.x1, grid.x2))[0] == pytest.approx(grid.g[0], rel=1e-13)


def test_tau_i_folds_g_into_rho():
    s = normalize(Sig(el=1, elb=1), True)
    assert s == Sig(er=1)
    assert normalize(Sig(pL=1), True) is None
    assert normalize(Sig(el=-2), True) == Sig(elb=2, er=-2)


def test_lambda_vanishes_at_tau_i():
    assert CF.Lambda(1j).is_zero()


def test_negative_power_of_monomial():
    tau = 0.3 + 1.2j
    inv = CF.g(tau) ** -1
    assert inv.terms == CF.g(tau, -1).terms
    with pytest.raises(ValueError):
        (CF.g(tau) + CF.rho(tau)) ** -1


def test_dz_at_zero_of_complex_power():
    tau = 0.3 + 1.2j
    f = CF.g_z(tau, -1) * CF.basis(tau, zp=1)  # z g^{z-1}
    d = f.dz_at_zero()
    x = (np.array([0.7, -1.1]), np.array([0.2, 0.9]))
    assert np.allclose(d.evaluate(x), CF.g(tau, -1).evaluate(x), rtol=1e-14)


def test_dz_at_zero_rejects_z_free():
    with pytest.raises(ValueError):
        CF.g(1j).dz_at_zero()


def test_conjugation_swaps_l_and_lbar():
    tau = 0.3 + 1.2j
    f = CF.ell(tau, 2) * CF.basis(tau, eg=0.5j)
    x = (np.array([0.4, 1.3]), np.array([-0.8, 0.5]))
    assert np.allclose(f.conj().evaluate(x), np.conj(f.evaluate(x)))
    assert sig_conj(Sig(el=1)) == Sig(elb=1)


def test_cutoff_profile_and_derivatives():
    c = Cutoff(0.5, 1.0)
    r = np.linspace(0.0, 1.5, 301)
    v = c(r)
    assert np.all(v[r <= 0.5] == 0) and np.all(v[r >= 1.0] == 1)
    assert np.all(np.diff(v) >= -1e-15)
    h = 1e-6
    rr = np.linspace(0.55, 0.95, 9)
    for k in range(3):
        num = (c.derivative(rr + h, k) - c.derivative(rr - h, k)) / (2 * h)
        assert np.allclose(c.derivative(rr, k + 1), num, rtol=1e-6, atol=1e-6)


def test_cutoff_validation():
    with pytest.raises(ValueError):
        Cutoff(0.8, 0.5)
    with pytest.raises(ValueError):
        Cutoff(0.5, 1.5)


def test_rejects_lower_half_plane():
    with pytest.raises(ValueError):
        CF.const(1.0, 0.5 - 1j)


def test_evaluate_reports_singularity():
    with pytest.raises(ZeroDivisionError):
        CF.g(1j, -1).evaluate((np.array([0.0]), np.array([0.0])))


def test_chi_masks_origin():
    f = CF.basis(1j, chi=(1,)) * CF.rho(1j, -2)
    assert f.evaluate((np.array([0.0, 0.2]), np.array([0.0, 0.1]))).tolist() == [0, 0]


def test_sig_partial_is_cached_tuple():
    out = sig_partial(Sig(er=-1), 0, 1j, True)
    assert isinstance(out, tuple) and out[0][2] == -2
