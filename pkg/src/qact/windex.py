"""Finite index analysis of fixed point inclusions twisted by a corepresentation.

Given a coaction alpha: A -> A (x) C(G) and a unitary corepresentation u on
H = C^n, the matrix amplification

    alpha_u(a (x) e_i e_j*) = sum_{k,l} a_(0) (x) e_k e_l* (x) u_ki* a_(1) u_lj

is again a coaction, now on A (x) B(H).  Its fixed point algebra C contains
the original fixed point algebra B as b -> b (x) 1, and integrating the
matrix leg with the invariant state theta of the adjoint corepresentation
yields a conditional expectation E: C -> B.  This module computes the
inclusion, reconstructing families for the spectral submodule
E = {(x_1 .. x_n) : alpha(x_j) = sum_k x_k (x) u_kj} of A^n, a quasi-basis
for E in the sense of Watatani, and the index element, which for a free
coaction and irreducible u equals the squared q-dimension of u times the
unit.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .action import Coaction
from .crossed import _psd_sqrt
from .errors import ShapeMismatch, ValidationFailure
from .fdlin import FdCStarAlgebra, contract_right, tensor_map
from .galois import galois_columns
from .hopf import (
    QMatrixResult,
    check_corep_shape,
    conjugate_corep,
    corep_character,
    corep_defects,
    q_matrix_from_corep,
)
from .projective import projectivity_witness
from .wedderburn import subspace_basis

__all__ = [
    "TwistedCoaction",
    "WassermannInclusion",
    "TwoSidedStructure",
    "QuasiBasis",
    "IndexTheoremReport",
    "EigenmatrixReport",
    "sweedler_coefficient",
    "adjoint_left_coaction",
    "adjoint_coaction_defects",
    "twisted_coaction",
    "build_inclusion",
    "two_sided_structure",
    "quasi_basis",
    "index_theorem_check",
    "eigenmatrix_check",
]


def _nullspace(M: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal kernel basis; the rank cut uses an absolute floor since
    every system solved here has O(1) coefficients."""
    _, sv, vh = np.linalg.svd(M)
    thresh = tol * max(1.0, float(sv[0]) if sv.size else 0.0)
    rank = int(np.sum(sv > thresh))
    return vh[rank:].conj().T


# -- coefficient contraction ------------------------------------------------


def sweedler_coefficient(act: Coaction, w: np.ndarray, x: np.ndarray) -> np.ndarray:
    """(id (x) phi_w) alpha(x) with phi_w = haar(w* .), as a vector in A.

    This single contraction underlies every coefficient computation below:
    rows of spectral vectors, reconstructing families, and the dual-unit
    expansions all pair the C(G) leg of alpha(x) against a coefficient w.
    """
    qg = act.qg
    GA = qg.A
    om = qg.haar @ GA.left_mult(GA.star_vec(w))
    return contract_right(act.alpha @ x, act.A.dim, qg.dim, om)


# -- the adjoint corepresentation on B(H) ------------------------------------


def adjoint_left_coaction(qg, u: np.ndarray) -> np.ndarray:
    """Matrix of E_ij -> sum_{k,l} u_ik u_jl* (x) E_kl, C(G) leg leading.

    Shape (dim G * n^2, n^2); domain coordinates are matrix units E_ij at
    index i*n+j, the codomain is C(G) (x) M_n in Kronecker coordinates.
    """
    u = check_corep_shape(qg, u)
    n, dG = u.shape[0], qg.dim
    ad = np.zeros((dG * n * n, n * n), dtype=complex)
    for i in range(n):
        for j in range(n):
            col = ad[:, i * n + j].reshape(dG, n * n)
            for k in range(n):
                for l in range(n):
                    col[:, k * n + l] = qg.mul(u[i, k], qg.star(u[j, l]))
            ad[:, i * n + j] = col.reshape(-1)
    return ad


def adjoint_coaction_defects(qg, u: np.ndarray,
                             ad: np.ndarray | None = None) -> dict[str, float]:
    """Residuals making the adjoint map a left coaction on M_n."""
    u = check_corep_shape(qg, u)
    n, dG = u.shape[0], qg.dim
    if ad is None:
        ad = adjoint_left_coaction(qg, u)
    Mn = FdCStarAlgebra((n,))
    GM = FdCStarAlgebra.tensor(qg.A, Mn)

    hom = 0.0
    for p in range(n * n):
        for q in range(n * n):
            lhs = GM.mul_vec(ad[:, p], ad[:, q])
            rhs = ad @ Mn.mul_vec(Mn.basis_vec(p), Mn.basis_vec(q))
            hom = max(hom, float(np.linalg.norm(lhs - rhs)))
    unital = float(np.linalg.norm(ad @ Mn.unit_vec() - GM.unit_vec()))
    star = float(np.linalg.norm(ad @ Mn.star_matrix() - GM.star_matrix() @ np.conj(ad)))
    # left comodule law (Delta (x) id) ad = (id (x) ad) ad
    lhs = tensor_map(qg.delta_mat, np.eye(n * n)) @ ad
    rhs = tensor_map(np.eye(dG), ad) @ ad
    comodule = float(np.linalg.norm(lhs - rhs))
    counit = float(np.linalg.norm(tensor_map(qg.epsilon[None, :], np.eye(n * n)) @ ad
                                  - np.eye(n * n)))
    return {
        "homomorphism": hom,
        "unital": unital,
        "star": star,
        "comodule_law": comodule,
        "counit_law": counit,
    }


# -- corepresentation resolution ---------------------------------------------


def _resolve_corep(act: Coaction, pi) -> tuple[np.ndarray, list, str]:
    """Normalise the pi argument to (corep, blocks, label).

    pi may be a component index into the regular decomposition, a sequence of
    such indices (direct sum), or an explicit corepresentation array.  Blocks
    are (offset, block corep, component index or None).
    """
    qg = act.qg
    if isinstance(pi, (int, np.integer)):
        pi = [int(pi)]
    if isinstance(pi, np.ndarray):
        u = check_corep_shape(qg, pi)
        return u, [(0, u, None)], "custom"
    if isinstance(pi, Sequence):
        irreps = act.regular().irreps
        parts = []
        for p in pi:
            p = int(p)
            if not 0 <= p < len(irreps):
                raise ShapeMismatch(f"component index {p} out of range")
            parts.append((p, irreps[p]))
        n = sum(ub.shape[0] for _, ub in parts)
        u = np.zeros((n, n, qg.dim), dtype=complex)
        blocks, off = [], 0
        for p, ub in parts:
            nb = ub.shape[0]
            u[off:off + nb, off:off + nb] = ub
            blocks.append((off, ub, p))
            off += nb
        return u, blocks, "+".join(str(p) for p, _ in parts)
    raise ShapeMismatch(f"cannot interpret pi={pi!r} as a corepresentation")


def _locate_component(act: Coaction, vectors: np.ndarray, tol: float = 1e-8) -> int:
    """Index of the regular component whose isotypic space contains the
    given columns.  Requires a unique match."""
    scale = max(1.0, float(np.linalg.norm(vectors)))
    hits = []
    for rho in range(len(act.regular().irreps)):
        E = act.spectral_projection(rho)
        if np.linalg.norm(E @ vectors - vectors) < tol * scale:
            hits.append(rho)
    if len(hits) != 1:
        raise ValidationFailure(
            f"coefficient vectors match {len(hits)} regular components; "
            "expected exactly one irreducible block"
        )
    return hits[0]


# -- twisted coaction ---------------------------------------------------------


@dataclass
class TwistedCoaction:
    """The coaction alpha_u on A (x) M_n together with the adjoint map."""

    base: Coaction
    corep: np.ndarray
    blocks: list
    label: str
    matrix_algebra: FdCStarAlgebra
    action: Coaction
    ad: np.ndarray

    @property
    def degree(self) -> int:
        return self.corep.shape[0]


def _twisted_matrix(act: Coaction, u: np.ndarray) -> np.ndarray:
    A, qg = act.A, act.qg
    dA, dG, n = A.dim, qg.dim, u.shape[0]
    GA = qg.A
    Ls = [[GA.left_mult(GA.star_vec(u[k, i])) for i in range(n)] for k in range(n)]
    Rs = [[GA.right_mult(u[l, j]) for j in range(n)] for l in range(n)]
    # coef[p, q] = C(G) part of alpha(e_p) at basis vector e_q of A
    coef = act.alpha.T.reshape(dA, dA, dG)
    out = np.zeros((dA, n, n, dG, dA, n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    sandwich = Ls[k][i] @ Rs[l][j]
                    # block[q, g, p] = (sandwich @ coef[p, q])_g
                    out[:, k, l, :, :, i, j] = (coef @ sandwich.T).transpose(1, 2, 0)
    return out.reshape(dA * n * n * dG, dA * n * n)


def twisted_coaction(act: Coaction, pi) -> TwistedCoaction:
    u, blocks, label = _resolve_corep(act, pi)
    n = u.shape[0]
    Mn = FdCStarAlgebra((n,))
    AM = FdCStarAlgebra.tensor(act.A, Mn)
    alpha_u = _twisted_matrix(act, u)
    name = f"{act.name or 'action'}(x)ad[{label}]"
    twisted = Coaction(act.qg, AM, alpha_u, name=name)
    ad = adjoint_left_coaction(act.qg, u)
    return TwistedCoaction(act, u, blocks, label, Mn, twisted, ad)


# -- invariant state of the adjoint corepresentation --------------------------


def _adjoint_invariant_state(qg, ad: np.ndarray, n: int,
                             irreducible: bool) -> tuple[np.ndarray, int, dict]:
    """Solve (id (x) theta) Ad = theta(.) 1 for a state theta on M_n.

    Returns (theta coefficients, solution space dimension, diagnostics).
    The solver is authoritative; closed-form candidates are only compared
    against it downstream.
    """
    dG = qg.dim
    R = ad.reshape(dG, n * n, n * n)
    con = R.transpose(0, 2, 1).reshape(dG * n * n, n * n).copy()
    con -= np.einsum("g,mk->gmk", qg.unit, np.eye(n * n)).reshape(dG * n * n, n * n)
    null = _nullspace(con)
    k = null.shape[1]
    if k == 0:
        raise ValidationFailure("the adjoint corepresentation has no invariant state")
    if irreducible and k != 1:
        raise ValidationFailure(
            f"invariant state of an irreducible block is {k}-dimensional; "
            "the corepresentation data is inconsistent"
        )
    Mn = FdCStarAlgebra((n,))
    tr = Mn.trace_state_vec()
    theta = null @ (null.conj().T @ tr)
    norm = theta @ Mn.unit_vec()
    if abs(norm) < 1e-12:
        raise ValidationFailure("invariant functional cannot be normalised to a state")
    theta = theta / norm
    invariance = float(np.linalg.norm(con @ theta))

    D = theta.reshape(n, n).T
    herm = float(np.linalg.norm(D - D.conj().T))
    vals = np.linalg.eigvalsh(0.5 * (D + D.conj().T))
    if herm > 1e-8 or vals[0] < -1e-10:
        raise ValidationFailure(
            f"invariant state is not positive (hermitian defect {herm:.2e}, "
            f"min eigenvalue {vals[0]:.2e})"
        )
    if vals[0] <= 1e-10 * max(1.0, vals[-1]):
        raise ValidationFailure(
            f"invariant state is not faithful (min eigenvalue {vals[0]:.2e})"
        )
    diag = {
        "theta_invariance": invariance,
        "theta_hermitian": herm,
        "theta_min_eig": float(vals[0]),
    }
    return theta, k, diag


# -- the inclusion B subset C -------------------------------------------------


@dataclass
class WassermannInclusion:
    """Fixed point inclusion B = A^G subset C = (A (x) M_n)^G with the
    conditional expectation E = (id (x) theta)|_C."""

    twisted: TwistedCoaction
    B: np.ndarray                  # orthonormal basis of B inside A
    C: np.ndarray                  # orthonormal basis of C inside A (x) M_n
    theta: np.ndarray              # invariant state coefficients on M_n
    theta_density: np.ndarray      # density matrix of theta
    theta_space_dim: int
    expectation_mat: np.ndarray    # (dim A, dim A * n^2)
    embed_mat: np.ndarray          # (dim A * n^2, dim A)
    irreducible: bool
    q_result: QMatrixResult
    diagnostics: dict[str, float] = field(default_factory=dict)

    @property
    def algebra(self) -> FdCStarAlgebra:
        return self.twisted.action.A

    @property
    def dim_fixed(self) -> int:
        return self.C.shape[1]

    def expectation(self, x: np.ndarray) -> np.ndarray:
        return self.expectation_mat @ x

    def embed(self, b: np.ndarray) -> np.ndarray:
        return self.embed_mat @ b


def build_inclusion(act: Coaction, pi, tol: float = 1e-8,
                    seed: int = 0) -> WassermannInclusion:
    """Construct the twisted inclusion, its invariant state and expectation.

    The fixed point algebra is computed twice, once from the twisted coaction
    and once as the solution space of the intertwining relation against the
    adjoint map; a disagreement aborts the construction.
    """
    tw = twisted_coaction(act, pi)
    qg, A = act.qg, act.A
    u, n = tw.corep, tw.degree
    dA, dG = A.dim, qg.dim
    diag: dict[str, float] = {}

    cd = corep_defects(qg, u)
    diag["corep"] = max(cd.values())
    if diag["corep"] > tol:
        raise ValidationFailure(f"not a unitary corepresentation: defects {cd}")

    rep = tw.action.verify()
    diag["twisted_axioms"] = rep.worst[1]
    if not rep.ok:
        raise ValidationFailure(f"twisted coaction fails axioms: {rep.residuals}")
    add = adjoint_coaction_defects(qg, u, tw.ad)
    diag["adjoint_coaction"] = max(add.values())
    if diag["adjoint_coaction"] > tol:
        raise ValidationFailure(f"adjoint map fails coaction axioms: {add}")

    irreducible = len(tw.blocks) == 1 and tw.blocks[0][2] is not None
    if not irreducible and len(tw.blocks) == 1:
        chi = corep_character(u)
        sq = qg.haar @ qg.mul(qg.star(chi), chi)
        irreducible = abs(sq - 1.0) < tol

    # fixed points, route one: kernel of alpha_u(x) - x (x) 1
    C1 = tw.action.fixed_point_basis()
    # route two: intertwiners between alpha on the A leg and Ad on the M_n leg
    M1 = tensor_map(act.alpha, np.eye(n * n))
    M2 = tensor_map(np.eye(dA), tw.ad)
    C2 = _nullspace(M1 - M2)
    if C1.shape[1] != C2.shape[1]:
        raise ValidationFailure(
            f"fixed point routes disagree on dimension: {C1.shape[1]} vs {C2.shape[1]}"
        )
    diag["route_agreement"] = float(
        np.linalg.norm(C1 @ C1.conj().T - C2 @ C2.conj().T)
    )
    if diag["route_agreement"] > tol:
        raise ValidationFailure(
            f"fixed point routes span different subspaces "
            f"(gap {diag['route_agreement']:.2e})"
        )

    theta, kdim, tdiag = _adjoint_invariant_state(qg, tw.ad, n, irreducible)
    diag.update(tdiag)

    qres = q_matrix_from_corep(qg, u)
    Qi = np.linalg.inv(qres.Q)
    trq = np.trace(qres.Q).real
    trqi = np.trace(Qi).real
    D = theta.reshape(n, n).T
    diag["theta_vs_qinv_trace"] = float(np.abs(D - Qi / trqi).max())
    diag["theta_vs_q_trace"] = float(np.abs(D - qres.Q / trq).max())

    B = act.fixed_point_basis()
    Emat = np.kron(np.eye(dA), theta[None, :])
    Mn = tw.matrix_algebra
    emb = np.kron(np.eye(dA), Mn.unit_vec()[:, None])
    AM = tw.action.A

    # conditional expectation certificates
    PB = B @ B.conj().T
    EC = Emat @ C1
    diag["exp_into_fixed"] = float(np.linalg.norm(EC - PB @ EC))
    diag["exp_unital"] = float(np.linalg.norm(Emat @ AM.unit_vec() - A.unit_vec()))
    diag["exp_idempotent"] = float(np.linalg.norm(Emat @ (emb @ EC) - EC))
    diag["embed_fixed"] = float(
        np.linalg.norm(emb @ B - (C1 @ C1.conj().T) @ (emb @ B))
    )

    rng = np.random.default_rng(seed)
    bim = 0.0
    for _ in range(4):
        b = B @ (rng.standard_normal(B.shape[1]) + 1j * rng.standard_normal(B.shape[1]))
        c = B @ (rng.standard_normal(B.shape[1]) + 1j * rng.standard_normal(B.shape[1]))
        x = C1 @ (rng.standard_normal(C1.shape[1]) + 1j * rng.standard_normal(C1.shape[1]))
        lhs = Emat @ AM.mul_vec(AM.mul_vec(emb @ b, x), emb @ c)
        rhs = A.mul_vec(b, A.mul_vec(Emat @ x, c))
        bim = max(bim, float(np.linalg.norm(lhs - rhs)))
    diag["exp_bimodular"] = bim
    if max(diag["exp_into_fixed"], diag["exp_unital"], diag["exp_idempotent"],
           diag["exp_bimodular"], diag["embed_fixed"]) > tol:
        raise ValidationFailure(f"conditional expectation certificates fail: {diag}")

    # faithfulness of E on C via the tracial GNS form
    F = np.empty((C1.shape[1], C1.shape[1]), dtype=complex)
    for s in range(C1.shape[1]):
        xs = AM.star_vec(C1[:, s])
        for t in range(C1.shape[1]):
            F[s, t] = A.trace_state(Emat @ AM.mul_vec(xs, C1[:, t]))
    fvals = np.linalg.eigvalsh(0.5 * (F + F.conj().T))
    diag["exp_faithful_min_eig"] = float(fvals[0])
    if fvals[0] <= 1e-10 * max(1.0, fvals[-1]):
        raise ValidationFailure("conditional expectation is not faithful on C")

    return WassermannInclusion(
        twisted=tw, B=B, C=C1, theta=theta, theta_density=D,
        theta_space_dim=kdim, expectation_mat=Emat, embed_mat=emb,
        irreducible=irreducible, q_result=qres, diagnostics=diag,
    )


# -- spectral submodule operations --------------------------------------------


def right_inner(A: FdCStarAlgebra, z: np.ndarray, w: np.ndarray) -> np.ndarray:
    """<z, w>_B = sum_i z_i* w_i, conjugate linear in the first argument."""
    out = np.zeros(A.dim, dtype=complex)
    for zi, wi in zip(z, w):
        out += A.mul_vec(A.star_vec(zi), wi)
    return out


def left_inner(A: FdCStarAlgebra, theta: np.ndarray, z: np.ndarray,
               w: np.ndarray) -> np.ndarray:
    """_B<z, w> = (id (x) theta)(z w*), linear in the first argument."""
    n = z.shape[0]
    out = np.zeros(A.dim, dtype=complex)
    for i in range(n):
        for j in range(n):
            out += theta[i * n + j] * A.mul_vec(z[i], A.star_vec(w[j]))
    return out


def outer_element(A: FdCStarAlgebra, z: np.ndarray, w: np.ndarray) -> np.ndarray:
    """z w* = sum_ij z_i w_j* (x) E_ij as a vector in A (x) M_n."""
    n = z.shape[0]
    out = np.zeros((A.dim, n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            out[:, i, j] = A.mul_vec(z[i], A.star_vec(w[j]))
    return out.reshape(-1)


def _right_scale(A: FdCStarAlgebra, z: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.stack([A.mul_vec(zi, b) for zi in z])


def _left_scale(A: FdCStarAlgebra, b: np.ndarray, z: np.ndarray) -> np.ndarray:
    return np.stack([A.mul_vec(b, zi) for zi in z])


def _module_star(A: FdCStarAlgebra, T: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Star of sum_r z_r (x) f_r where f_r = sum_k T[r,k] e_k*; result has
    components in the e basis."""
    stars = np.stack([A.star_vec(zr) for zr in z])
    return np.einsum("rk,rd->kd", np.conj(T), stars)


def _transport_pairs(act: Coaction, ub: np.ndarray, fams: np.ndarray,
                     gens: np.ndarray, tol: float):
    """Project a reconstructing frame of A onto the spectral subspace of ub
    and pull it back through z (x) omega -> sqrt(n) (id (x) omega Q^{-1}) z.

    Returns (full family, single-slice family, transport residual); both
    families consist of single vectors p with reconstructing pair (p, p).
    """
    qg = act.qg
    mb, nb, dA = fams.shape
    comp = _locate_component(act, fams.reshape(mb * nb, dA).T, tol)
    P = act.spectral_projection(comp) @ gens
    qres = q_matrix_from_corep(qg, ub)
    Qi = np.linalg.inv(qres.Q)
    _, gram_isqrt = _psd_sqrt(qres.gram)
    base = np.sqrt(nb) * np.einsum("ji,mid->mjd", Qi, fams)
    cols = np.einsum("jr,mjd->mrd", gram_isqrt, base)
    X = cols.reshape(mb * nb, dA).T
    sol, *_ = np.linalg.lstsq(X, P, rcond=None)
    residual = float(np.linalg.norm(X @ sol - P))
    if residual > tol * max(1.0, float(np.linalg.norm(P))):
        raise ValidationFailure(
            f"projected frame does not lie in the spectral submodule "
            f"(residual {residual:.2e}); the reconstruction transport failed"
        )
    vecs = np.einsum("mrs,mid->srid", sol.reshape(mb, nb, gens.shape[1]), fams)
    cutoff = 1e-12 * max(1.0, float(np.abs(vecs).max()))
    full, single = [], []
    for s in range(vecs.shape[0]):
        for r in range(nb):
            p = vecs[s, r]
            if np.linalg.norm(p) > cutoff:
                full.append(p / np.sqrt(nb))
        if np.linalg.norm(vecs[s, 0]) > cutoff:
            single.append(vecs[s, 0])
    return full, single, residual


@dataclass
class TwoSidedStructure:
    """Reconstructing families for both module structures on the spectral
    submodule E = {(x_1 .. x_n) : alpha(x_j) = sum_k x_k (x) u_kj}.

    right_pairs satisfy sum xi <eta, z>_B = z; left_pairs satisfy
    sum _B<z, xi> eta = z with _B<z, w> = (id (x) theta)(z w*).  The
    *_slice variants are smaller independent families used to certify that
    derived quantities do not depend on the chosen family.
    """

    inclusion: WassermannInclusion
    families: np.ndarray           # (mult, n, dim A), orthonormal kernel basis
    right_pairs: list
    left_pairs: list
    right_pairs_slice: list
    left_pairs_slice: list
    right_gram: np.ndarray
    left_gram: np.ndarray
    diagnostics: dict[str, float] = field(default_factory=dict)


def two_sided_structure(act: Coaction, pi,
                        inclusion: WassermannInclusion | None = None,
                        tol: float = 1e-8) -> TwoSidedStructure:
    incl = inclusion if inclusion is not None else build_inclusion(act, pi)
    tw = incl.twisted
    qg, A = act.qg, act.A
    n, dA = tw.degree, A.dim
    diag: dict[str, float] = {}

    wit = projectivity_witness(act)
    gens = wit.generators

    fam_parts = []
    right_pairs, right_slice = [], []
    left_pairs, left_slice = [], []
    transport = 0.0
    for off, ub, _ in tw.blocks:
        nb = ub.shape[0]
        fams_b = act.equivariant_families(ub)
        mb = fams_b.shape[0]
        if mb == 0:
            continue
        wide = np.zeros((mb, n, dA), dtype=complex)
        wide[:, off:off + nb, :] = fams_b
        fam_parts.append(wide)

        full, single, res = _transport_pairs(act, ub, fams_b, gens, tol)
        transport = max(transport, res)
        for p in full:
            v = np.zeros((n, dA), dtype=complex)
            v[off:off + nb] = p
            right_pairs.append((v, v))
        for p in single:
            v = np.zeros((n, dA), dtype=complex)
            v[off:off + nb] = p
            right_slice.append((v, v))

        # left module structure through the conjugate corepresentation
        qres = q_matrix_from_corep(qg, ub)
        vb = conjugate_corep(qg, ub, qres.Q)
        bar_fams = act.equivariant_families(vb)
        if bar_fams.shape[0] == 0:
            raise ValidationFailure(
                "conjugate spectral submodule is empty while the original is "
                "not; left reconstruction is impossible"
            )
        bfull, bsingle, bres = _transport_pairs(act, vb, bar_fams, gens, tol)
        transport = max(transport, bres)
        rt, _ = _psd_sqrt(qres.Q)
        T = np.sqrt(qres.q_dimension) * rt
        # weight of this block inside the global invariant state theta
        cb = sum(incl.theta[(off + i) * n + (off + i)] for i in range(nb)).real
        for p in bfull:
            s = _module_star(A, T, p)
            v = np.zeros((n, dA), dtype=complex)
            v[off:off + nb] = s
            left_pairs.append((v, v / cb))
        for p in bsingle:
            s = _module_star(A, T, p)
            v = np.zeros((n, dA), dtype=complex)
            v[off:off + nb] = s
            left_slice.append((v, v / cb))
    diag["transport_residual"] = transport

    if fam_parts:
        families = np.concatenate(fam_parts)
    else:
        families = np.zeros((0, n, dA), dtype=complex)

    def _right_defect(pairs):
        worst = 0.0
        for z in families:
            acc = np.zeros_like(z)
            for xi, eta in pairs:
                acc += _right_scale(A, xi, right_inner(A, eta, z))
            worst = max(worst, float(np.linalg.norm(acc - z)))
        return worst

    def _left_defect(pairs):
        worst = 0.0
        for z in families:
            acc = np.zeros_like(z)
            for xi, eta in pairs:
                acc += _left_scale(A, left_inner(A, incl.theta, z, xi), eta)
            worst = max(worst, float(np.linalg.norm(acc - z)))
        return worst

    diag["right_reconstruction"] = _right_defect(right_pairs)
    diag["right_reconstruction_slice"] = _right_defect(right_slice)
    diag["left_reconstruction"] = _left_defect(left_pairs)
    diag["left_reconstruction_slice"] = _left_defect(left_slice)
    worst = max(diag["right_reconstruction"], diag["right_reconstruction_slice"],
                diag["left_reconstruction"], diag["left_reconstruction_slice"])
    if worst > tol:
        raise ValidationFailure(
            f"reconstructing families fail to generate the spectral submodule "
            f"(worst residual {worst:.2e})"
        )

    m = families.shape[0]
    if m:
        right_gram, gram_defect = act.equivariant_gram(families)
        diag["gram_in_fixed"] = gram_defect
        left_gram = np.zeros((m, m, dA), dtype=complex)
        for s in range(m):
            for t in range(m):
                left_gram[s, t] = left_inner(A, incl.theta, families[s], families[t])
    else:
        right_gram = np.zeros((0, 0, dA), dtype=complex)
        left_gram = np.zeros((0, 0, dA), dtype=complex)
        diag["gram_in_fixed"] = 0.0

    rng = np.random.default_rng(7)
    rpos, lpos = 0.0, 0.0
    for _ in range(3 if m else 0):
        c = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        w = np.einsum("s,sid->id", c, families)
        ok_r, wit_r = A.is_positive_vec(right_inner(A, w, w), tol=1e-9)
        ok_l, wit_l = A.is_positive_vec(left_inner(A, incl.theta, w, w), tol=1e-9)
        if not ok_r:
            rpos = max(rpos, -wit_r.eigenvalue)
        if not ok_l:
            lpos = max(lpos, -wit_l.eigenvalue)
    diag["right_positivity_violation"] = rpos
    diag["left_positivity_violation"] = lpos
    if max(rpos, lpos) > 1e-9:
        raise ValidationFailure("module inner products are not positive")

    return TwoSidedStructure(
        inclusion=incl, families=families,
        right_pairs=right_pairs, left_pairs=left_pairs,
        right_pairs_slice=right_slice, left_pairs_slice=left_slice,
        right_gram=right_gram, left_gram=left_gram, diagnostics=diag,
    )


# -- quasi-basis assembly ------------------------------------------------------


def _assemble_pairs(incl: WassermannInclusion, right_pairs, left_pairs):
    """Watatani pairs (xi eta~*, xi~ eta*) from reconstructing families."""
    A = incl.twisted.base.A
    AM = incl.algebra
    pairs = []
    raw = []
    vmax = 0.0
    for lxi, leta in left_pairs:
        for rxi, reta in right_pairs:
            v = outer_element(A, rxi, leta)
            w = outer_element(A, lxi, reta)
            nv, nw = float(np.linalg.norm(v)), float(np.linalg.norm(w))
            vmax = max(vmax, nv, nw)
            raw.append((v, w, nv, nw))
    cutoff = 1e-16 * (1.0 + vmax) ** 2
    for v, w, nv, nw in raw:
        if nv * nw > cutoff:
            pairs.append((v, w))
    index = np.zeros(AM.dim, dtype=complex)
    for v, w in pairs:
        index += AM.mul_vec(v, w)
    return pairs, index


def _pair_diagnostics(incl: WassermannInclusion, pairs, index) -> dict[str, float]:
    """Reconstruction identities, membership and centrality for given pairs."""
    AM = incl.algebra
    C, Emat, emb = incl.C, incl.expectation_mat, incl.embed_mat
    PC = C @ C.conj().T

    right = np.zeros_like(C)
    left = np.zeros_like(C)
    members = 0.0
    for v, w in pairs:
        members = max(
            members,
            float(np.linalg.norm(v - PC @ v)),
            float(np.linalg.norm(w - PC @ w)),
        )
        right += AM.left_mult(v) @ (emb @ (Emat @ (AM.left_mult(w) @ C)))
        left += AM.right_mult(w) @ (emb @ (Emat @ (AM.right_mult(v) @ C)))
    diag = {
        "reconstruction_right": float(np.linalg.norm(right - C)),
        "reconstruction_left": float(np.linalg.norm(left - C)),
        "pairs_in_fixed": members,
        "index_in_fixed": float(np.linalg.norm(index - PC @ index)),
        "index_central": float(
            np.linalg.norm((AM.left_mult(index) - AM.right_mult(index)) @ C)
        ),
        "index_selfadjoint": float(np.linalg.norm(AM.star_vec(index) - index)),
    }
    return diag


@dataclass
class QuasiBasis:
    """A Watatani quasi-basis for E: C -> B and its index element."""

    inclusion: WassermannInclusion
    pairs: list
    index_element: np.ndarray
    dim_module_span: int
    generation_rank: int
    diagnostics: dict[str, float] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.pairs)


def quasi_basis(act: Coaction, pi,
                structure: TwoSidedStructure | None = None,
                alternate: bool = False, tol: float = 1e-8) -> QuasiBasis:
    """Quasi-basis for the conditional expectation E: C -> B.

    Pairs are built as (xi eta~*, xi~ eta*) from right and left
    reconstructing families of the spectral submodule.  Requires the outer
    products of the submodule to span all of C; a shortfall means the
    expectation has no finite quasi-basis of this form and is reported as a
    validation failure (typical for non-free, non-ergodic inputs).
    """
    st = structure if structure is not None else two_sided_structure(act, pi)
    incl = st.inclusion
    A = act.A
    AM = incl.algebra
    fams = st.families
    m = fams.shape[0]

    outers = [
        outer_element(A, fams[s], fams[t]) for s in range(m) for t in range(m)
    ]
    if outers:
        stack = np.column_stack(outers)
        keep = stack[:, np.linalg.norm(stack, axis=0) > 1e-12]
        span = subspace_basis(keep) if keep.shape[1] else stack[:, :0]
    else:
        span = np.zeros((AM.dim, 0), dtype=complex)
    dim_span = span.shape[1]
    if dim_span != incl.dim_fixed:
        raise ValidationFailure(
            f"outer products of the spectral submodule span {dim_span} of "
            f"{incl.dim_fixed} fixed point dimensions; the coaction does not "
            "admit a quasi-basis of reconstructing type for this "
            "corepresentation"
        )
    PC = incl.C @ incl.C.conj().T
    span_defect = float(np.linalg.norm(span - PC @ span))

    right = st.right_pairs_slice if alternate else st.right_pairs
    left = st.left_pairs_slice if alternate else st.left_pairs
    pairs, index = _assemble_pairs(incl, right, left)
    diag = _pair_diagnostics(incl, pairs, index)
    diag["module_span_defect"] = span_defect
    worst = max(diag["reconstruction_right"], diag["reconstruction_left"],
                diag["pairs_in_fixed"], diag["index_in_fixed"], span_defect)
    if worst > tol:
        raise ValidationFailure(
            f"quasi-basis identities fail (worst residual {worst:.2e})"
        )

    # the pairs generate C as a module over the embedded fixed point algebra
    gen_cols = []
    for v, _ in pairs:
        gen_cols.append(AM.left_mult(v) @ (incl.embed_mat @ incl.B))
    if gen_cols:
        gen = np.column_stack(gen_cols)
        gen = gen[:, np.linalg.norm(gen, axis=0) > 1e-12]
        gen_rank = subspace_basis(gen).shape[1] if gen.shape[1] else 0
    else:
        gen_rank = 0

    return QuasiBasis(
        inclusion=incl, pairs=pairs, index_element=index,
        dim_module_span=dim_span, generation_rank=gen_rank, diagnostics=diag,
    )


# -- dual unit expansion and the index formula ---------------------------------


def _dual_unit_solve(qg, u: np.ndarray):
    """Minimal-norm h in C(G) with haar(u_ij* h) = delta_ij, plus a kernel
    basis of the defining system for independence experiments."""
    n, dG = u.shape[0], qg.dim
    GA = qg.A
    rows = np.empty((n * n, dG), dtype=complex)
    for i in range(n):
        for j in range(n):
            rows[i * n + j] = qg.haar @ GA.left_mult(GA.star_vec(u[i, j]))
    rhs = np.eye(n, dtype=complex).reshape(-1)
    h, *_ = np.linalg.lstsq(rows, rhs, rcond=None)
    residual = float(np.linalg.norm(rows @ h - rhs))
    if residual > 1e-9 * n:
        raise ValidationFailure(
            f"no dual unit for the corepresentation coefficients "
            f"(residual {residual:.2e})"
        )
    kernel = _nullspace(rows)
    return h, residual, kernel


def _galois_decompose(act: Coaction, h: np.ndarray, tol: float):
    """Pairs (x_k, y_k) with 1 (x) h = sum_k alpha(x_k)(y_k* (x) 1)."""
    A, qg = act.A, act.qg
    dA = A.dim
    G = galois_columns(act, np.eye(dA), np.eye(dA))
    target = np.kron(A.unit_vec(), h)
    t, *_ = np.linalg.lstsq(G, target, rcond=None)
    residual = float(np.linalg.norm(G @ t - target))
    if residual > tol * max(1.0, float(np.linalg.norm(target))):
        raise ValidationFailure(
            f"1 (x) h is not in the range of the multiplication map "
            f"(residual {residual:.2e}); the coaction is not free"
        )
    t = t.reshape(dA, dA)
    cutoff = 1e-12 * max(1.0, float(np.abs(t).max()))
    pairs = []
    for p in range(dA):
        for q in range(dA):
            if abs(t[p, q]) > cutoff:
                x = t[p, q] * A.basis_vec(p)
                y = A.star_vec(A.basis_vec(q))
                pairs.append((x, y))
    return pairs, residual


def _theorem_right_family(act: Coaction, u: np.ndarray, pairs_xy):
    """Families xi_{i,k} = sum_p phi(u_pi* x_k(1)) x_k(0) (x) e_p and the
    same with y_k."""
    n = u.shape[0]
    out = []
    for x, y in pairs_xy:
        for i in range(n):
            xi = np.stack([sweedler_coefficient(act, u[p, i], x) for p in range(n)])
            eta = np.stack([sweedler_coefficient(act, u[p, i], y) for p in range(n)])
            out.append((xi, eta))
    return out


def _theorem_left_family(act: Coaction, v: np.ndarray, T: np.ndarray, pairs_wz):
    """Families xi~_{i,l} = sum_p phi(z_l(1)* v_pi) z_l(0)* (x) f_p* pulled
    back to the e basis through f_p* = sum_k conj(T[p,k]) e_k."""
    A = act.A
    n = v.shape[0]
    out = []
    for w, z in pairs_wz:
        for i in range(n):
            sz = np.stack([
                A.star_vec(sweedler_coefficient(act, v[p, i], z)) for p in range(n)
            ])
            sw = np.stack([
                A.star_vec(sweedler_coefficient(act, v[p, i], w)) for p in range(n)
            ])
            xi = np.einsum("pk,pd->kd", np.conj(T), sz)
            eta = np.einsum("pk,pd->kd", np.conj(T), sw)
            out.append((xi, eta))
    return out


@dataclass
class IndexTheoremReport:
    """Numerical certificate that the index element equals the squared
    q-dimension of the corepresentation times the unit."""

    inclusion: WassermannInclusion
    q_dimension: float
    index_element: np.ndarray
    quasi_basis_size: int
    residual: float
    intermediate_identity: float
    solution_independence: float
    diagnostics: dict[str, float] = field(default_factory=dict)


def index_theorem_check(act: Coaction, pi, tol: float = 1e-8) -> IndexTheoremReport:
    """Build the quasi-basis from dual unit expansions and compare the index
    element with q-dim^2 times the unit.

    Only available for irreducible corepresentations; the identity has no
    scalar form in the reducible case.  The dual units h and g are the
    minimal-norm solutions of their defining linear systems; the report
    includes the largest deviation of the index element when h or g is
    shifted by a kernel direction of those systems.
    """
    incl = build_inclusion(act, pi, tol=tol)
    if not incl.irreducible:
        raise ValidationFailure(
            "index theorem check requires an irreducible corepresentation; "
            f"got blocks {incl.twisted.label}"
        )
    qg, A = act.qg, act.A
    AM = incl.algebra
    u = incl.twisted.corep
    n = incl.twisted.degree
    Q = incl.q_result.Q
    qdim = incl.q_result.q_dimension
    v = conjugate_corep(qg, u, Q)
    rt, _ = _psd_sqrt(Q)
    T = np.sqrt(qdim) * rt
    diag: dict[str, float] = {}

    h, h_res, h_kernel = _dual_unit_solve(qg, u)
    g, g_res, g_kernel = _dual_unit_solve(qg, v)
    diag["dual_unit_residual"] = max(h_res, g_res)
    # closed form Tr(Q) sum_kl Qinv[k,l] u_kl solves the same system
    Qi = np.linalg.inv(Q)
    h_closed = np.trace(Q).real * sum(
        Qi[k, l] * u[k, l] for k in range(n) for l in range(n)
    )
    rows = np.empty((n * n, qg.dim), dtype=complex)
    for i in range(n):
        for j in range(n):
            rows[i * n + j] = qg.haar @ qg.A.left_mult(qg.A.star_vec(u[i, j]))
    diag["closed_form_residual"] = float(
        np.linalg.norm(rows @ h_closed - np.eye(n).reshape(-1))
    )

    pairs_xy, dres_h = _galois_decompose(act, h, tol)
    pairs_wz, dres_g = _galois_decompose(act, g, tol)
    diag["decomposition_residual"] = max(dres_h, dres_g)

    right = _theorem_right_family(act, u, pairs_xy)
    left = _theorem_left_family(act, v, T, pairs_wz)
    pairs, index = _assemble_pairs(incl, right, left)
    diag.update(_pair_diagnostics(incl, pairs, index))

    # middle factor of the index expansion: sum <eta~, xi~>_B = qdim^2
    mid = np.zeros(A.dim, dtype=complex)
    for lxi, leta in left:
        mid += right_inner(A, leta, lxi)
    inter = float(np.linalg.norm(mid - qdim * qdim * A.unit_vec()))

    residual = float(np.linalg.norm(index - qdim * qdim * AM.unit_vec()))

    variants = []
    if h_kernel.shape[1]:
        variants.append((h + max(1.0, np.linalg.norm(h)) * h_kernel[:, 0], g))
    if g_kernel.shape[1]:
        variants.append((h, g + max(1.0, np.linalg.norm(g)) * g_kernel[:, 0]))
    indep = 0.0
    for hv, gv in variants:
        pxy, _ = _galois_decompose(act, hv, tol)
        pwz, _ = _galois_decompose(act, gv, tol)
        rv = _theorem_right_family(act, u, pxy)
        lv = _theorem_left_family(act, v, T, pwz)
        _, index_v = _assemble_pairs(incl, rv, lv)
        indep = max(indep, float(np.linalg.norm(index_v - index)))
    diag["independence_variants"] = float(len(variants))

    return IndexTheoremReport(
        inclusion=incl, q_dimension=qdim, index_element=index,
        quasi_basis_size=len(pairs), residual=residual,
        intermediate_identity=inter, solution_independence=indep,
        diagnostics=diag,
    )


# -- eigenmatrix span ----------------------------------------------------------


@dataclass
class EigenmatrixReport:
    """Span comparison between products of eigenmatrices and the twisted
    fixed point algebra.

    Eigenmatrices are the elements X of A (x) M_n with
    alpha(X_ij) = sum_k X_ik (x) u_kj; their products X Y* always lie in the
    fixed point algebra, and for a free coaction they exhaust it."""

    dim_eigenmatrices: int
    dim_products: int
    dim_fixed: int
    containment_defect: float
    projection_gap: float


def eigenmatrix_check(act: Coaction, pi) -> EigenmatrixReport:
    tw = twisted_coaction(act, pi)
    A = act.A
    AM = tw.action.A
    n, dA = tw.degree, A.dim
    C = tw.action.fixed_point_basis()
    PC = C @ C.conj().T

    fams = act.equivariant_families(tw.corep)
    m = fams.shape[0]
    eigen = []
    for s in range(m):
        for j in range(n):
            X = np.zeros((dA, n, n), dtype=complex)
            X[:, :, j] = fams[s].T
            eigen.append(X.reshape(-1))
    dim_eigen = len(eigen)

    if eigen:
        products = []
        for X in eigen:
            sX = AM.star_vec(X)
            for Y in eigen:
                products.append(AM.mul_vec(Y, sX))
        stack = np.column_stack(products)
        stack = stack[:, np.linalg.norm(stack, axis=0) > 1e-12]
        span = subspace_basis(stack) if stack.shape[1] else stack[:, :0]
    else:
        span = np.zeros((AM.dim, 0), dtype=complex)

    containment = float(np.linalg.norm(span - PC @ span)) if span.shape[1] else 0.0
    PS = span @ span.conj().T
    gap = float(np.linalg.norm(PS - PC))
    return EigenmatrixReport(
        dim_eigenmatrices=dim_eigen,
        dim_products=span.shape[1],
        dim_fixed=C.shape[1],
        containment_defect=containment,
        projection_gap=gap,
    )
