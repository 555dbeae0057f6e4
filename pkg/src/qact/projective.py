"""Finite generation and projectivity of A over the fixed point algebra.

A Parseval frame for the B-valued form <x, y>_B = E_B(x* y) is produced by
pushing any spanning family through the inverse square root of its frame
operator F(a) = sum_i x_i E_B(x_i* a).  The Gram matrix p_ij = E_B(g_i* g_j)
of the resulting frame is then an orthogonal projection in M_N(B), and

    a = sum_i g_i E_B(g_i* a)

reconstructs every element, which exhibits A as the image of p, a finitely
generated projective right B-module.  The frame also yields a quasi-basis
for E_B, whose index element sum_i g_i g_i* is reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .action import Coaction
from .errors import NumericalRankFailure
from .fdlin import FdCStarAlgebra

_CUTOFF = 0.5


@dataclass
class ProjectivityWitness:
    generators: np.ndarray          # (dA, N) frame vectors, columns
    gram: np.ndarray                # (N, N, dA) entries E_B(g_i* g_j)
    index_element: np.ndarray       # (dA,) sum_i g_i g_i*
    frame_spectrum: np.ndarray      # eigenvalues of the frame operator
    diagnostics: dict[str, float] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.generators.shape[1]


def _gns_data(act: Coaction):
    A = act.A
    EB = act.conditional_expectation()
    omega = A.trace_state_vec() @ EB
    K = A.star_matrix()
    gram = np.empty((A.dim, A.dim), dtype=complex)
    for p in range(A.dim):
        gram[p, :] = omega @ A.left_mult(K[:, p])
    gram = 0.5 * (gram + gram.conj().T)
    vals, vecs = np.linalg.eigh(gram)
    if vals[0] <= 1e-12 * max(1.0, vals[-1]):
        raise NumericalRankFailure("GNS form of trace . E_B is degenerate")
    Gw = vecs @ np.diag(np.sqrt(vals)) @ vecs.conj().T
    Gwi = vecs @ np.diag(1.0 / np.sqrt(vals)) @ vecs.conj().T
    return EB, Gw, Gwi


def projectivity_witness(act: Coaction, tol: float = 1e-9) -> ProjectivityWitness:
    A = act.A
    EB, Gw, Gwi = _gns_data(act)
    N = A.dim
    frame = np.eye(N, dtype=complex)  # start from the coordinate basis of A

    F = np.zeros((N, N), dtype=complex)
    for i in range(N):
        xi = frame[:, i]
        F += A.left_mult(xi) @ EB @ A.left_mult(A.star_vec(xi))
    Ft = Gw @ F @ Gwi
    herm = float(np.linalg.norm(Ft - Ft.conj().T))
    vals, vecs = np.linalg.eigh(0.5 * (Ft + Ft.conj().T))
    if vals[0] <= tol:
        raise NumericalRankFailure(
            f"frame operator is not invertible (min eigenvalue {vals[0]:.3e})"
        )
    Fti = vecs @ np.diag(1.0 / np.sqrt(vals)) @ vecs.conj().T
    Fmh = Gwi @ Fti @ Gw
    gens = Fmh @ frame

    gram = np.empty((N, N, A.dim), dtype=complex)
    for i in range(N):
        gi_star = A.star_vec(gens[:, i])
        L = A.left_mult(gi_star)
        for j in range(N):
            gram[i, j] = EB @ (L @ gens[:, j])
    index_element = np.zeros(A.dim, dtype=complex)
    for i in range(N):
        index_element += A.mul_vec(gens[:, i], A.star_vec(gens[:, i]))
    wit = ProjectivityWitness(
        generators=gens,
        gram=gram,
        index_element=index_element,
        frame_spectrum=vals,
        diagnostics={"frame_hermitian_defect": herm},
    )
    wit.diagnostics.update(verify_witness(act, wit, tol=tol))
    return wit


def gram_as_matrix_algebra_element(act: Coaction, wit: ProjectivityWitness):
    """The Gram projection as an element of M_N (x) A."""
    N = wit.size
    MN = FdCStarAlgebra([N])
    MNA = FdCStarAlgebra.tensor(MN, act.A)
    vec = np.zeros(MNA.dim, dtype=complex)
    for i in range(N):
        for j in range(N):
            vec += np.kron(MN.basis_vec(i * N + j), wit.gram[i, j])
    return MNA, vec


def verify_witness(act: Coaction, wit: ProjectivityWitness,
                   tol: float = 1e-9, trials: int = 20, seed: int = 0) -> dict[str, float]:
    """Recompute all witness certificates from the stored generators."""
    A = act.A
    EB = act.conditional_expectation()
    N = wit.size
    gens = wit.generators

    gram = np.empty((N, N, A.dim), dtype=complex)
    for i in range(N):
        L = A.left_mult(A.star_vec(gens[:, i]))
        for j in range(N):
            gram[i, j] = EB @ (L @ gens[:, j])
    gram_drift = float(np.abs(gram - wit.gram).max())

    # all certificates below use the recomputed Gram, so a tampered witness
    # cannot hide behind stale stored entries
    from dataclasses import replace

    MNA, pvec = gram_as_matrix_algebra_element(act, replace(wit, gram=gram))
    idem = float(np.linalg.norm(MNA.mul_vec(pvec, pvec) - pvec))
    star = float(np.linalg.norm(MNA.star_vec(pvec) - pvec))

    # every entry must live in the fixed point algebra
    fix = 0.0
    for i in range(N):
        for j in range(N):
            v = gram[i, j]
            fix = max(fix, float(np.linalg.norm(act.alpha @ v - np.kron(v, act.qg.unit))))

    rng = np.random.default_rng(seed)
    recon = 0.0
    for _ in range(trials):
        a = A.random_vec(rng)
        out = np.zeros(A.dim, dtype=complex)
        for i in range(N):
            out += A.mul_vec(gens[:, i], EB @ A.mul_vec(A.star_vec(gens[:, i]), a))
        recon = max(recon, float(np.linalg.norm(out - a)) / max(1.0, float(np.linalg.norm(a))))

    # spectrum of p must sit hard against {0, 1}; anything drifting toward
    # the cut at 1/2 means the witness is numerically meaningless
    blocks = MNA.to_blocks(pvec)
    spread = 0.0
    for blk in blocks:
        ev = np.linalg.eigvalsh(0.5 * (blk + blk.conj().T))
        dist = np.minimum(np.abs(ev), np.abs(ev - 1.0))
        spread = max(spread, float(dist.max()))
    if spread > _CUTOFF / 10:
        raise NumericalRankFailure(
            f"Gram spectrum strays into the cut band (worst distance {spread:.3e})"
        )

    idx_comm = 0.0
    B = act.fixed_point_basis()
    for k in range(B.shape[1]):
        idx_comm = max(idx_comm, float(np.linalg.norm(
            A.mul_vec(wit.index_element, B[:, k]) - A.mul_vec(B[:, k], wit.index_element)
        )))

    return {
        "gram_drift": gram_drift,
        "idempotent": idem,
        "selfadjoint": star,
        "entries_fixed": fix,
        "reconstruction": recon,
        "spectrum_spread": spread,
        "index_commutes_with_b": idx_comm,
    }
