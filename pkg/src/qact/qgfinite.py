"""Finite quantum groups: a Hopf *-structure on a multi-matrix algebra.

The structure maps are stored as matrices over the canonical coordinates of
the underlying ``FdCStarAlgebra``:

* ``delta``: (dim^2, dim), coproduct into Kronecker coordinates of A (x) A,
* ``epsilon``: (dim,), counit functional coefficients,
* ``antipode``: (dim, dim).

The invariant (Haar) state is not part of the input data; it is computed as
the one-dimensional joint null space of the two invariance operators and
certified positive through its Gram matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .consts import DEFAULT_TOL
from .errors import ShapeMismatch, ValidationFailure
from .fdlin import FdCStarAlgebra, tensor_map
from .hopf import HopfContext, corep_defects
from .wedderburn import AbstractFdAlgebra, WedderburnDecomposition, wedderburn


@dataclass
class AxiomReport:
    residuals: dict[str, float]
    tol: float

    @property
    def ok(self) -> bool:
        return all(v <= self.tol for v in self.residuals.values())

    @property
    def worst(self) -> tuple[str, float]:
        name = max(self.residuals, key=self.residuals.get)
        return name, self.residuals[name]


@dataclass
class HaarReport:
    state: np.ndarray
    invariance_residual: float
    gram_min_eigenvalue: float
    nullspace_dimension: int


class FiniteQuantumGroup(HopfContext):
    def __init__(self, algebra: FdCStarAlgebra, delta: np.ndarray,
                 epsilon: np.ndarray, antipode: np.ndarray, name: str = ""):
        self.A = algebra
        self.dim = algebra.dim
        d = self.dim
        self.delta_mat = np.asarray(delta, dtype=complex)
        self.epsilon = np.asarray(epsilon, dtype=complex)
        self.antipode_mat = np.asarray(antipode, dtype=complex)
        self.name = name
        if self.delta_mat.shape != (d * d, d):
            raise ShapeMismatch(f"delta must be ({d * d}, {d}), got {self.delta_mat.shape}")
        if self.epsilon.shape != (d,):
            raise ShapeMismatch(f"epsilon must be ({d},), got {self.epsilon.shape}")
        if self.antipode_mat.shape != (d, d):
            raise ShapeMismatch(f"antipode must be ({d}, {d}), got {self.antipode_mat.shape}")
        self.A2 = FdCStarAlgebra.tensor(algebra, algebra)
        self._haar_report = None

    # -- HopfContext interface -----------------------------------------

    @property
    def unit(self) -> np.ndarray:
        return self.A.unit_vec()

    @property
    def counit(self) -> np.ndarray:
        return self.epsilon

    @property
    def haar(self) -> np.ndarray:
        return self.haar_report().state

    def mul(self, x, y):
        return self.A.mul_vec(x, y)

    def star(self, x):
        return self.A.star_vec(x)

    def delta(self, x):
        return self.delta_mat @ np.asarray(x, dtype=complex)

    def antipode(self, x):
        return self.antipode_mat @ np.asarray(x, dtype=complex)

    def norm_estimate(self, x) -> float:
        return self.A.operator_norm_vec(x)

    # -- axioms ----------------------------------------------------------

    def check_axioms(self, tol: float = DEFAULT_TOL) -> AxiomReport:
        A, A2, d = self.A, self.A2, self.dim
        D, S, eps = self.delta_mat, self.antipode_mat, self.epsilon
        I = np.eye(d)
        res: dict[str, float] = {}

        res["coassociativity"] = float(
            np.linalg.norm(tensor_map(D, I) @ D - tensor_map(I, D) @ D)
        )
        res["counit_left"] = float(np.linalg.norm(np.kron(eps, I) @ D - I))
        res["counit_right"] = float(np.linalg.norm(np.kron(I, eps) @ D - I))

        hom = 0.0
        for p in range(d):
            ep = A.basis_vec(p)
            dep = D @ ep
            for q in range(d):
                eq = A.basis_vec(q)
                lhs = D @ A.mul_vec(ep, eq)
                rhs = A2.mul_vec(dep, D @ eq)
                hom = max(hom, float(np.linalg.norm(lhs - rhs)))
        res["comultiplication_homomorphism"] = hom
        res["comultiplication_unital"] = float(
            np.linalg.norm(D @ A.unit_vec() - A2.unit_vec())
        )
        K, K2 = A.star_matrix(), A2.star_matrix()
        res["comultiplication_star"] = float(np.linalg.norm(D @ K - K2 @ np.conj(D)))

        # counit is a *-character
        char = abs(eps @ A.unit_vec() - 1.0)
        for p in range(d):
            ep = A.basis_vec(p)
            char = max(char, abs(eps @ (K @ np.conj(ep)) - np.conj(eps[p])))
            for q in range(d):
                char = max(
                    char,
                    abs(eps @ A.mul_vec(ep, A.basis_vec(q)) - eps[p] * eps[q]),
                )
        res["counit_character"] = float(char)

        # m(S (x) id)Delta = eps(.)1 = m(id (x) S)Delta, columnwise
        mm = A.mul_matrix()
        target = A.unit_vec()[:, None] * eps[None, :]
        res["antipode_left"] = float(np.linalg.norm(mm @ tensor_map(S, I) @ D - target))
        res["antipode_right"] = float(np.linalg.norm(mm @ tensor_map(I, S) @ D - target))
        SK = S @ K
        res["antipode_star_involution"] = float(np.linalg.norm(SK @ np.conj(SK) - I))
        return AxiomReport(res, tol)

    # -- invariant state --------------------------------------------------

    def haar_report(self, tol: float = DEFAULT_TOL) -> HaarReport:
        if self._haar_report is not None:
            return self._haar_report
        A, d = self.A, self.dim
        one = A.unit_vec()
        T = np.transpose(self.delta_mat.reshape(d, d, d), (2, 0, 1)).copy()
        for p in range(d):
            T[p, :, p] -= one
        right_inv = T.reshape(d * d, d)
        T2 = np.transpose(self.delta_mat.reshape(d, d, d), (2, 1, 0)).copy()
        for p in range(d):
            T2[p, :, p] -= one
        left_inv = T2.reshape(d * d, d)
        stacked = np.vstack([right_inv, left_inv])
        _, sv, vh = np.linalg.svd(stacked)
        nullity = int(np.sum(sv < 1e-10 * max(1.0, sv[0])))
        if nullity != 1:
            raise ValidationFailure(
                f"invariant state space has dimension {nullity}, expected 1"
            )
        f = vh[-1].conj()
        norm_val = f @ one
        if abs(norm_val) < 1e-12:
            raise ValidationFailure("invariant functional does not see the unit")
        f = f / norm_val

        resid = max(
            float(np.linalg.norm(right_inv @ f)), float(np.linalg.norm(left_inv @ f))
        )
        gram = np.empty((d, d), dtype=complex)
        K = A.star_matrix()
        for p in range(d):
            sp = K[:, p]  # star of the p-th basis vector
            for q in range(d):
                gram[p, q] = f @ A.mul_vec(sp, A.basis_vec(q))
        herm = float(np.linalg.norm(gram - gram.conj().T))
        min_eig = float(np.linalg.eigvalsh(0.5 * (gram + gram.conj().T))[0])
        if herm > 1e-8 or min_eig < -1e-10:
            raise ValidationFailure(
                f"invariant state is not positive (min Gram eigenvalue {min_eig:.3e})"
            )
        self._haar_report = HaarReport(f, resid, min_eig, nullity)
        return self._haar_report

    # -- dual algebra and irreducible corepresentations -------------------

    def dual_algebra(self) -> AbstractFdAlgebra:
        """Convolution algebra on the dual space, with omega* = conj(omega(S(.)*))."""
        d = self.dim
        mhat = np.transpose(self.delta_mat.reshape(d, d, d), (2, 0, 1))
        star_hat = np.conj((self.A.star_matrix() @ np.conj(self.antipode_mat)).T)
        return AbstractFdAlgebra(mhat, star_hat, self.epsilon.copy())

    def decompose_regular(self, seed: int = 0) -> "RegularDecomposition":
        dual = self.dual_algebra()
        dec = wedderburn(dual, seed=seed)
        target = dec.target
        irreps = []
        for off, n in zip(target.offsets, target.block_dims):
            u = np.empty((n, n, self.dim), dtype=complex)
            for i in range(n):
                for j in range(n):
                    u[i, j] = dec.iso[off + i * n + j, :]
            irreps.append(u)
        worst = max(
            max(corep_defects(self, u).values()) for u in irreps
        )
        return RegularDecomposition(self, irreps, dec, worst)

    def convolve(self, omega: np.ndarray, nu: np.ndarray) -> np.ndarray:
        """Product of functionals through the coproduct."""
        d = self.dim
        out = np.empty(d, dtype=complex)
        for p in range(d):
            out[p] = omega @ self.delta_mat[:, p].reshape(d, d) @ nu
        return out


@dataclass
class RegularDecomposition:
    qg: FiniteQuantumGroup
    irreps: list[np.ndarray]
    dual: WedderburnDecomposition
    corep_residual: float

    @property
    def dimensions(self) -> tuple[int, ...]:
        return tuple(u.shape[0] for u in self.irreps)

    def trivial_index(self) -> int:
        one = self.qg.unit
        for idx, u in enumerate(self.irreps):
            if u.shape[0] == 1 and np.linalg.norm(u[0, 0] - one) < 1e-8:
                return idx
        raise ValidationFailure("no trivial corepresentation found in the regular decomposition")


@dataclass
class CharacterData:
    pi_index: int
    chi: np.ndarray            # element coordinates
    omega: np.ndarray          # functional coefficients haar(chi .)
    solve_residual: float


def quantum_characters(dec: RegularDecomposition) -> list[CharacterData]:
    """For each irreducible block pi, the element chi_pi with
    haar(chi_pi u^rho_ij) = delta(rho, pi) delta(i, j), and the induced
    functional omega_pi.  The omega_pi are the central support projections
    of the blocks in the dual algebra."""
    qg = dec.qg
    d = qg.dim
    haar = qg.haar
    rows = []
    labels = []
    for r, u in enumerate(dec.irreps):
        n = u.shape[0]
        for i in range(n):
            for j in range(n):
                rows.append(u[i, j])
                labels.append((r, i, j))
    # F[(rho,i,j), p] = haar(e_p u^rho_ij)
    F = np.empty((len(rows), d), dtype=complex)
    for r_idx, coef in enumerate(rows):
        R = qg.A.right_mult(coef)  # e_p -> e_p * u_ij
        F[r_idx] = haar @ R
    out = []
    for pi in range(len(dec.irreps)):
        rhs = np.array(
            [1.0 if (lab[0] == pi and lab[1] == lab[2]) else 0.0 for lab in labels],
            dtype=complex,
        )
        chi, *_ = np.linalg.lstsq(F, rhs, rcond=None)
        resid = float(np.linalg.norm(F @ chi - rhs))
        omega = haar @ qg.A.left_mult(chi)
        out.append(CharacterData(pi, chi, omega, resid))
    return out


def character_defects(qg: FiniteQuantumGroup, chars: list[CharacterData],
                      rng: np.random.Generator | None = None) -> dict[str, float]:
    """The functionals omega_pi form a complete orthogonal family of central
    idempotents for convolution."""
    rng = rng or np.random.default_rng(0)
    d = qg.dim
    res = {"idempotent": 0.0, "orthogonal": 0.0, "complete": 0.0, "central": 0.0,
           "selfadjoint": 0.0}
    dual = qg.dual_algebra()
    for c in chars:
        res["idempotent"] = max(
            res["idempotent"],
            float(np.linalg.norm(qg.convolve(c.omega, c.omega) - c.omega)),
        )
        res["selfadjoint"] = max(
            res["selfadjoint"], float(np.linalg.norm(dual.star(c.omega) - c.omega))
        )
        for c2 in chars:
            if c2.pi_index != c.pi_index:
                res["orthogonal"] = max(
                    res["orthogonal"],
                    float(np.linalg.norm(qg.convolve(c.omega, c2.omega))),
                )
        for _ in range(3):
            om = rng.standard_normal(d) + 1j * rng.standard_normal(d)
            res["central"] = max(
                res["central"],
                float(np.linalg.norm(qg.convolve(c.omega, om) - qg.convolve(om, c.omega))),
            )
    total = sum(c.omega for c in chars)
    res["complete"] = float(np.linalg.norm(total - qg.epsilon))
    return res
