"""Recompute the frozen reference values in tests/oracle_values.json.

Everything here uses mpmath only (adaptive quadrature, special functions and
Poisson summation), so none of it shares code with the package under test.
"""

import json
import pathlib

import mpmath as mp

mp.mp.dps = 30
OUT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "oracle_values.json"

TAUS = [(0.0, 1.0), (0.3, 1.2), (-0.7, 0.4), (0.5, 2.0), (1.3, 0.8)]
SMOOTHNESS = 12


def circle_g_inverse(tr, ti):
    tau = mp.mpc(tr, ti)
    f = lambda p: 1 / abs(mp.cos(p) + tau * mp.sin(p)) ** 2
    return mp.quad(f, mp.linspace(0, 2 * mp.pi, 9)) / (4 * mp.pi ** 2)


def chi(r, r0=0.5, r1=1.0):
    if r <= r0:
        return mp.mpf(0)
    if r >= r1:
        return mp.mpf(1)
    t = (r - r0) / (r1 - r0)
    return mp.betainc(SMOOTHNESS + 1, SMOOTHNESS + 1, 0, t, regularized=True)


def plane_chi_rho_power(p):
    """int_{R^2} chi(|xi|) |xi|^{-2p} d xi with d xi = (2 pi)^{-2} d_L xi."""
    f = lambda r: chi(r) * r ** (1 - 2 * p)
    return (mp.quad(f, [0.5, 0.75, 1.0]) + mp.quad(lambda r: r ** (1 - 2 * p), [1, mp.inf])) / (2 * mp.pi)


def lattice_sum_poisson(kappa, s, kmax=12):
    """sum_{Z^2} (kappa + m^2 + n^2)^{-s} = sum_k fhat(2 pi k) (Poisson summation)."""
    a = mp.sqrt(kappa)
    main = mp.pi * kappa ** (1 - s) / (s - 1)
    tail = mp.mpf(0)
    for m in range(-kmax, kmax + 1):
        for n in range(-kmax, kmax + 1):
            if m == 0 and n == 0:
                continue
            b = 2 * mp.pi * mp.sqrt(m * m + n * n)
            tail += 2 * mp.pi * a ** (1 - s) * b ** (s - 1) * mp.besselk(s - 1, a * b) / (2 ** (s - 1) * mp.gamma(s))
    return main + tail, main


def main():
    vals = {}
    vals["circle_g_inverse"] = [{"tau": [tr, ti], "value": float(circle_g_inverse(tr, ti))} for tr, ti in TAUS]
    vals["circle_one"] = float(1 / (2 * mp.pi))
    vals["lattice_inverse_square_laplacian"] = float(4 * mp.zeta(2) * mp.catalan)
    vals["cutoff_shifted_rho_1.75"] = float(1 / (3 * mp.pi))
    vals["cutoff_shifted_rho_0.6"] = float(1 / (4 * mp.pi * (mp.mpf("0.6") - 1)))
    s = mp.mpf("1.75")
    vals["cutoff_shifted_rho_log_1.75"] = float(mp.diff(lambda u: -1 / (4 * mp.pi * (u - 1)), s))
    vals["cutoff_shifted_g_1.75_tau_0.3_1.2"] = float(1 / (4 * mp.pi * (s - 1) * mp.mpf("1.2")))
    vals["plane_chi_rho_-1.5"] = float(plane_chi_rho_power(mp.mpf("1.5")))
    lat, main_term = lattice_sum_poisson(4, s)
    vals["lattice_shifted_rho_kappa4_1.75"] = float(lat)
    vals["plane_shifted_rho_kappa4_1.75_lebesgue"] = float(main_term)
    vals["curvature_tau_i_beta_U"] = float(1 / (4 * mp.pi))
    vals["curvature_tau_0.3_1.2_beta_U+V"] = float(2 / (4 * mp.pi * mp.mpf("1.2")))
    OUT.write_text(json.dumps(vals, indent=2, sort_keys=True) + "\n")
    print(OUT.read_text())


if __name__ == "__main__":
    main()
