"""Coefficient-level Hopf *-algebra interface and corepresentation utilities.

A *context* is any object exposing a Hopf *-algebra through flat coordinate
vectors:

* ``dim``: coordinate length,
* ``unit``: coordinates of 1,
* ``counit``: functional coefficients, eps(x) = counit @ x,
* ``haar``: functional coefficients of the invariant state,
* ``mul(x, y)``, ``star(x)``, ``antipode(x)``: coordinate maps,
* ``delta(x)``: coproduct in Kronecker coordinates of the two legs.

Everything in this file is written against that interface only, so the same
corepresentation diagnostics run over a finite quantum group and over a
truncated presented one.

A corepresentation on an n-dimensional space is stored as an array ``u`` of
shape (n, n, dim): ``u[i, j]`` are the coordinates of the matrix element
u_ij, with coaction v_i -> sum_j u_ij (x) v_j.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatch, ValidationFailure


class HopfContext:
    """Duck-typed base; subclasses fill in the coordinate operations."""

    dim: int

    def mul(self, x, y):
        raise NotImplementedError

    def star(self, x):
        raise NotImplementedError

    def delta(self, x):
        raise NotImplementedError

    def antipode(self, x):
        raise NotImplementedError

    # -- conveniences shared by all contexts ---------------------------

    def haar_value(self, x) -> complex:
        return complex(self.haar @ x)

    def haar_product(self, x, y) -> complex:
        """haar(x y)."""
        return complex(self.haar @ self.mul(x, y))

    def norm_estimate(self, x) -> float:
        """Default: L2 norm of the invariant-state GNS vector."""
        val = self.haar_product(self.star(x), x)
        return float(np.sqrt(max(val.real, 0.0)))


def check_corep_shape(ctx: HopfContext, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 3 or u.shape[0] != u.shape[1] or u.shape[2] != ctx.dim:
        raise ShapeMismatch(f"corepresentation array must be (n, n, {ctx.dim}), got {u.shape}")
    return u


def corep_defects(ctx: HopfContext, u: np.ndarray) -> dict[str, float]:
    """Residuals of the corepresentation identities.

    * comultiplication rule: delta(u_ij) = sum_k u_ik (x) u_kj
    * counit rule: eps(u_ij) = delta_ij
    * star-left orthogonality: sum_k u_ik* u_jk = delta_ij 1
    * star-right orthogonality: sum_k u_ki u_kj* = delta_ij 1
    """
    u = check_corep_shape(ctx, u)
    n = u.shape[0]
    one = ctx.unit
    d_comul = 0.0
    d_counit = 0.0
    d_left = 0.0
    d_right = 0.0
    for i in range(n):
        for j in range(n):
            want = sum(np.kron(u[i, k], u[k, j]) for k in range(n))
            d_comul = max(d_comul, float(np.linalg.norm(ctx.delta(u[i, j]) - want)))
            d_counit = max(
                d_counit, abs(complex(ctx.counit @ u[i, j]) - (1.0 if i == j else 0.0))
            )
            left = sum(ctx.mul(ctx.star(u[i, k]), u[j, k]) for k in range(n))
            right = sum(ctx.mul(u[k, i], ctx.star(u[k, j])) for k in range(n))
            target = one if i == j else 0 * one
            d_left = max(d_left, float(np.linalg.norm(left - target)))
            d_right = max(d_right, float(np.linalg.norm(right - target)))
    return {
        "comultiplication_rule": d_comul,
        "counit_rule": d_counit,
        "star_left_orthogonality": d_left,
        "star_right_orthogonality": d_right,
    }


def corep_character(u: np.ndarray) -> np.ndarray:
    return sum(u[i, i] for i in range(u.shape[0]))


@dataclass
class QMatrixResult:
    Q: np.ndarray
    gram: np.ndarray
    q_dimension: float
    trace_defect: float       # |Tr Q - Tr Q^{-1}|
    hermitian_defect: float


def q_matrix_from_corep(ctx: HopfContext, u: np.ndarray) -> QMatrixResult:
    """Recover the positive deformation matrix Q from the second-leg Gram.

    With M[i, j] = haar(u_ik u_jk*) summed over k, the matrix M equals
    n * transpose(Q^{-1}) / Tr(Q^{-1}), so Q = s * inverse(transpose(M))
    with the scale s fixed by Tr Q = Tr Q^{-1}.
    """
    u = check_corep_shape(ctx, u)
    n = u.shape[0]
    M = np.empty((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            M[i, j] = sum(
                ctx.haar_product(u[i, k], ctx.star(u[j, k])) for k in range(n)
            )
    herm = float(np.linalg.norm(M - M.conj().T))
    vals = np.linalg.eigvalsh(0.5 * (M + M.conj().T))
    if vals[0] <= 0:
        raise ValidationFailure(f"second-leg Gram not positive definite (min {vals[0]:.3e})")
    Minv = np.linalg.inv(M)
    s = np.sqrt(np.trace(M).real / np.trace(Minv).real)
    Q = s * np.linalg.inv(M.T)
    Q = 0.5 * (Q + Q.conj().T)
    trq = float(np.trace(Q).real)
    trqinv = float(np.trace(np.linalg.inv(Q)).real)
    return QMatrixResult(Q, M, trq, abs(trq - trqinv), herm)


def orthogonality_defects(ctx: HopfContext, u: np.ndarray, Q: np.ndarray) -> dict[str, float]:
    """Residuals of the two invariant-state orthogonality displays:

    haar(u_ij* u_kl) = delta_ik Q[l, j] / Tr Q
    haar(u_ij u_kl*) = delta_jl Q^{-1}[k, i] / Tr Q^{-1}
    """
    u = check_corep_shape(ctx, u)
    n = u.shape[0]
    Qinv = np.linalg.inv(Q)
    trq = np.trace(Q)
    trqinv = np.trace(Qinv)
    d1 = d2 = 0.0
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    got1 = ctx.haar_product(ctx.star(u[i, j]), u[k, l])
                    want1 = (Q[l, j] / trq) if i == k else 0.0
                    d1 = max(d1, abs(got1 - want1))
                    got2 = ctx.haar_product(u[i, j], ctx.star(u[k, l]))
                    want2 = (Qinv[k, i] / trqinv) if j == l else 0.0
                    d2 = max(d2, abs(got2 - want2))
    return {"star_first_orthogonality": d1, "star_second_orthogonality": d2}


def conjugate_corep(ctx: HopfContext, u: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Conjugate corepresentation Q^{1/2} ubar Q^{-1/2}, entrywise stars."""
    u = check_corep_shape(ctx, u)
    n = u.shape[0]
    vals, vecs = np.linalg.eigh(Q)
    if vals[0] <= 0:
        raise ValidationFailure("Q must be positive definite")
    Qh = vecs @ np.diag(np.sqrt(vals)) @ vecs.conj().T
    Qmh = vecs @ np.diag(1.0 / np.sqrt(vals)) @ vecs.conj().T
    ubar = np.empty_like(u)
    for i in range(n):
        for j in range(n):
            ubar[i, j] = ctx.star(u[i, j])
    return np.einsum("ia,abd,bj->ijd", Qh, ubar, Qmh)


def tensor_corep(u: np.ndarray, v: np.ndarray, ctx: HopfContext) -> np.ndarray:
    """Matrix elements of the tensor product corepresentation on H_u (x) H_v:
    w_(ia)(jb) = u_ij v_ab (products taken in the algebra)."""
    nu, nv = u.shape[0], v.shape[0]
    w = np.empty((nu * nv, nu * nv, ctx.dim), dtype=complex)
    for i in range(nu):
        for a in range(nv):
            for j in range(nu):
                for b in range(nv):
                    w[i * nv + a, j * nv + b] = ctx.mul(u[i, j], v[a, b])
    return w
