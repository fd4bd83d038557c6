"""Finite-lattice matrices on the GNS space for brute-force validation.

Basis vectors are ``e_mn = U^m V^n`` with ``|m|, |n| <= M``; the GNS inner
product makes them orthonormal.  Symbol operators act diagonally on Fourier
modes (``P_sigma(U^m V^n) = sigma(m, n) U^m V^n`` with the coefficient on the
left), which is exact and needs no quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from .algebra import AlgebraElement, phase
from .symbols import Context, OperatorSymbol, evaluate_tensor
from .xi import DEFAULT_CUTOFF, Cutoff, XiGrid

DEFAULT_SWEEP = (16, 24, 32, 40)


class BoundaryError(ValueError):
    """Lattice too small to hold the products an operator needs."""


def lattice_modes(M: int) -> np.ndarray:
    r = np.arange(-M, M + 1)
    mm, nn = np.meshgrid(r, r, indexing="ij")
    return np.stack([mm.ravel(), nn.ravel()], axis=1)


def mode_index(M: int, m: int, n: int) -> int:
    return (m + M) * (2 * M + 1) + (n + M)


@dataclass
class LatticeOperator:
    M: int
    matrix: np.ndarray
    meta: Dict = field(default_factory=dict)
    exact_columns: Optional[np.ndarray] = None

    @property
    def modes(self) -> np.ndarray:
        return lattice_modes(self.M)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, a: AlgebraElement) -> AlgebraElement:
        vec = to_vector(a, self.M)
        out = self.matrix @ vec
        return from_vector(out, self.M, a.theta)

    def is_exact_on(self, a: AlgebraElement) -> bool:
        if self.exact_columns is None:
            return True
        return all(self.exact_columns[mode_index(self.M, m, n)] for (m, n) in a.coeffs)


def to_vector(a: AlgebraElement, M: int) -> np.ndarray:
    vec = np.zeros((2 * M + 1) ** 2, dtype=complex)
    for (m, n), c in a.coeffs.items():
        if abs(m) > M or abs(n) > M:
            raise BoundaryError(f"mode {(m, n)} outside lattice radius {M}")
        vec[mode_index(M, m, n)] = c
    return vec


def from_vector(vec: np.ndarray, M: int, theta: float) -> AlgebraElement:
    modes = lattice_modes(M)
    nz = np.nonzero(vec)[0]
    return AlgebraElement({(int(modes[i, 0]), int(modes[i, 1])): vec[i] for i in nz}, theta, prune_rel=0.0)


# ---------------------------------------------------------------------------
# symbol operators


def apply_symbol_op(sym, a: AlgebraElement, z: complex | None = None, cutoff: Cutoff = DEFAULT_CUTOFF) -> AlgebraElement:
    """``P_sigma(a)`` for a symbol in closed form: ``U^m V^n -> sigma(m, n) U^m V^n``.

    ``sym`` may be an :class:`OperatorSymbol` (all stored components are used) or
    a scalar callable ``f(x1, x2)``.
    """
    modes = list(a.coeffs)
    if not modes:
        return AlgebraElement({}, a.theta)
    x1 = np.array([m for m, _ in modes], dtype=float)
    x2 = np.array([n for _, n in modes], dtype=float)
    if callable(sym) and not isinstance(sym, OperatorSymbol):
        vals = np.asarray(sym(x1, x2), dtype=complex)
        if not np.all(np.isfinite(vals)):
            raise ZeroDivisionError("symbol singular at a lattice point")
        return AlgebraElement({k: vals[i] * a.coeffs[k] for i, k in enumerate(modes)}, a.theta, prune_rel=0.0)
    if sym.ctx.theta != a.theta:
        raise ValueError("theta mismatch")
    grid = XiGrid(x1, x2, sym.ctx.tau, cutoff)
    t = {}
    for comp in sym.comps.values():
        for k, v in comp.items():
            t[k] = t.get(k, 0.0) + v
    vals = evaluate_tensor(t, grid, z)
    th = a.theta
    out: Dict[Tuple[int, int], complex] = {}
    for (p, q), arr in vals.items():
        for i, (m, n) in enumerate(modes):
            c = arr[i] * a.coeffs[(m, n)]
            if c == 0:
                continue
            key = (p + m, q + n)
            out[key] = out.get(key, 0.0) + c * phase(th, q * m)
    return AlgebraElement(out, th, prune_rel=0.0)


# ---------------------------------------------------------------------------
# matrices


def _derivation_matrix(M: int, tau: complex, conj: bool) -> np.ndarray:
    modes = lattice_modes(M)
    t = complex(tau).conjugate() if conj else complex(tau)
    return np.diag(modes[:, 0] + t * modes[:, 1]).astype(complex)


def _mult_matrix(a: AlgebraElement, M: int) -> Tuple[np.ndarray, np.ndarray]:
    modes = lattice_modes(M)
    dim = len(modes)
    mat = np.zeros((dim, dim), dtype=complex)
    exact = np.ones(dim, dtype=bool)
    th = a.theta
    for col, (m, n) in enumerate(modes):
        for (p, q), c in a.coeffs.items():
            mm, nn = p + m, q + n
            if abs(mm) > M or abs(nn) > M:
                exact[col] = False
                continue
            mat[mode_index(M, mm, nn), col] += c * phase(th, q * int(m))
    return mat, exact


def build_matrix(op: str, M: int, ctx: Context = Context(), alpha: AlgebraElement | None = None,
                 margin: Optional[int] = None) -> LatticeOperator:
    """Matrix of ``dbar``, ``dbar_star``, ``mult``, ``D`` or ``Delta`` on the radius-M lattice.

    ``Delta = D^dagger D`` is assembled from ``D`` on a larger lattice and then
    restricted, so its block is exact.  Mode-shifting operators report the
    columns where truncation dropped terms in ``exact_columns``.
    """
    if M < 0:
        raise ValueError("M must be non-negative")
    meta = {"op": op, "M": M, "theta": ctx.theta, "tau": [ctx.tau.real, ctx.tau.imag]}
    alpha = alpha if alpha is not None else AlgebraElement({}, ctx.theta)
    if alpha.theta != ctx.theta:
        raise ValueError("theta mismatch")
    if op == "dbar":
        return LatticeOperator(M, _derivation_matrix(M, ctx.tau, False), meta)
    if op == "dbar_star":
        return LatticeOperator(M, _derivation_matrix(M, ctx.tau, True), meta)
    if op == "mult":
        mat, exact = _mult_matrix(alpha, M)
        return LatticeOperator(M, mat, meta, exact)
    if op == "D":
        mat, exact = _mult_matrix(alpha, M)
        return LatticeOperator(M, _derivation_matrix(M, ctx.tau, False) + mat, meta, exact)
    if op == "Delta":
        r = alpha.max_mode() if margin is None else margin
        big = build_matrix("D", M + r, ctx, alpha)
        keep = np.array([max(abs(m), abs(n)) <= M for m, n in lattice_modes(M + r)])
        Dk = sparse.csr_matrix(big.matrix[:, keep])  # a few nonzeros per column
        return LatticeOperator(M, (Dk.conj().T @ Dk).toarray(), meta)
    raise ValueError(f"unknown operator {op!r}")


def eigh_checked(mat: np.ndarray, tol: float = 1e-10) -> Tuple[np.ndarray, np.ndarray]:
    """Hermitian eigendecomposition; diagonal matrices take a fast exact path."""
    if np.count_nonzero(mat - np.diag(np.diag(mat))) == 0:
        return np.diag(mat).real.copy(), None
    if not np.allclose(mat, mat.conj().T, atol=1e-12 * max(1.0, np.abs(mat).max())):
        raise ValueError("matrix is not Hermitian")
    w, v = np.linalg.eigh(mat)
    resid = np.linalg.norm(mat @ v - v * w, axis=0).max()
    if resid > tol * max(1.0, np.linalg.norm(mat, 2)):
        raise ValueError(f"eigensolver residual {resid:.2e} too large")
    return w, v


def richardson(Ms: Sequence[int], values: Sequence[complex], exponents: Sequence[float]) -> Tuple[complex, float]:
    """Fit ``T(M) = T_inf + sum_k c_k M^{-p_k}``; returns ``(T_inf, error estimate)``.

    The error estimate is the change of ``T_inf`` when the largest M is dropped.
    Square lattice sums of smooth symbols behave like integrals over the square
    of half-width ``M + 1/2`` up to even powers, hence the shift and even steps.
    """
    Ms = np.asarray(Ms, dtype=float) + 0.5  # midpoint rule: square sums behave like integrals to M + 1/2
    vals = np.asarray(values, dtype=complex)
    k = min(len(exponents), len(Ms) - 1)

    def fit(ms, vs, kk):
        A = np.stack([np.ones_like(ms)] + [ms ** (-p) for p in exponents[:kk]], axis=1)
        coef, *_ = np.linalg.lstsq(A.astype(complex), vs, rcond=None)
        return coef[0]

    best = fit(Ms, vals, k)
    prev = fit(Ms[:-1], vals[:-1], min(k, len(Ms) - 2)) if len(Ms) > 2 else vals[-1]
    return complex(best), float(abs(best - prev))


def spectral_trace(delta_builder: Callable[[int], LatticeOperator], f: Callable[[np.ndarray], np.ndarray],
                   A_builder: Optional[Callable[[int], LatticeOperator]] = None,
                   sweep: Sequence[int] = DEFAULT_SWEEP, decay: float = 3.5,
                   kernel_tol: float = 1e-10) -> Dict:
    """``Tr(A f(Delta))`` on a lattice sweep with Richardson extrapolation.

    Eigenvalues below ``kernel_tol`` are treated as kernel and excluded.
    ``decay`` is the decay order of ``f(Delta)`` in |xi| and fixes the tail exponents.
    """
    vals = []
    for M in sweep:
        dl = delta_builder(M)
        w, v = eigh_checked(dl.matrix)
        fw = np.where(w > kernel_tol, f(np.where(w > kernel_tol, w, 1.0)), 0.0)
        if A_builder is None:
            vals.append(complex(np.sum(fw)))
            continue
        A = A_builder(M).matrix
        if v is None:
            vals.append(complex(np.sum(np.diag(A) * fw)))
        else:
            diag = np.einsum("ij,ik,kj->j", v.conj(), A, v)
            vals.append(complex(np.sum(diag * fw)))
    base = decay - 2.0
    exps = [base + 2 * k for k in range(len(sweep) - 1)]
    value, err = richardson(sweep, vals, exps)
    return {"value": value, "error": err, "raw": vals, "sweep": list(sweep)}


def lattice_symbol_sum(func: Callable[[np.ndarray, np.ndarray], np.ndarray], sweep: Sequence[int] = DEFAULT_SWEEP,
                       decay: float = 3.5) -> Dict:
    """``sum_{|m|,|n| <= M} f(m, n)`` with Richardson extrapolation in M."""
    vals = []
    for M in sweep:
        modes = lattice_modes(M).astype(float)
        vals.append(complex(np.sum(func(modes[:, 0], modes[:, 1]))))
    exps = [decay - 2.0 + 2 * k for k in range(len(sweep) - 1)]
    value, err = richardson(sweep, vals, exps)
    return {"value": value, "error": err, "raw": vals, "sweep": list(sweep)}


def check_invertibility(ctx: Context, alpha: AlgebraElement, sweep: Sequence[int] = (2, 4, 6, 8),
                        threshold: float = 1e-6) -> Dict:
    """Smallest singular value of ``D = dbar + alpha`` restricted to growing lattices.

    The restriction to radius-M modes is computed exactly (image taken on the
    radius ``M + r`` lattice), so the values decrease monotonically toward the
    true infimum; invertibility is certified if they stay above ``threshold``
    and the last step changes them by less than half their size.
    """
    r = alpha.max_mode()
    smins = []
    for M in sweep:
        big = build_matrix("D", M + r, ctx, alpha)
        keep = np.array([max(abs(m), abs(n)) <= M for m, n in lattice_modes(M + r)])
        s = np.linalg.svd(big.matrix[:, keep], compute_uv=False)
        smins.append(float(s.min()))
    stable = len(smins) < 2 or (smins[-2] - smins[-1]) <= 0.5 * smins[-1]
    certified = min(smins) >= threshold and stable
    return {"sigma_min": smins, "sweep": list(sweep), "certified": bool(certified), "threshold": threshold}


def kernel_projection(delta: LatticeOperator, tol: float = 1e-10) -> np.ndarray:
    w, v = eigh_checked(delta.matrix)
    if v is None:
        v = np.eye(len(w), dtype=complex)
    vk = v[:, w <= tol]
    return vk @ vk.conj().T


def kernel_trace(A: LatticeOperator, delta: LatticeOperator, tol: float = 1e-10) -> complex:
    """``Tr(A Pi)`` with ``Pi`` the kernel projection of ``delta``."""
    return complex(np.trace(A.matrix @ kernel_projection(delta, tol)))
