"""Coactions of finite quantum groups on multi-matrix algebras.

A coaction is a unital *-homomorphism alpha: A -> A (x) C(G) satisfying the
comodule law (alpha (x) id) alpha = (id (x) Delta) alpha and the counit law
(id (x) eps) alpha = id.  It is stored as a matrix over canonical (Kronecker)
coordinates, shape (dim A * dim G, dim A).

Spectral theory: for every irreducible corepresentation pi the functional
omega_pi from the quantum character induces the isotypic projection
E_pi = (id (x) omega_pi) alpha; the trivial one is the invariant conditional
expectation E_B = (id (x) haar) alpha onto the fixed point algebra.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .consts import DEFAULT_TOL
from .errors import ShapeMismatch, ValidationFailure
from .fdlin import FdCStarAlgebra, tensor_map
from .qgfinite import AxiomReport, FiniteQuantumGroup, quantum_characters
from .wedderburn import AbstractFdAlgebra, subspace_basis, wedderburn


class Coaction:
    def __init__(self, qg: FiniteQuantumGroup, algebra: FdCStarAlgebra,
                 alpha: np.ndarray, name: str = ""):
        self.qg = qg
        self.A = algebra
        self.alpha = np.asarray(alpha, dtype=complex)
        self.name = name
        dA, dG = algebra.dim, qg.dim
        if self.alpha.shape != (dA * dG, dA):
            raise ShapeMismatch(
                f"coaction matrix must be ({dA * dG}, {dA}), got {self.alpha.shape}"
            )
        self.AG = FdCStarAlgebra.tensor(algebra, qg.A)
        self._eb = None
        self._fixed = None
        self._regular = None
        self._characters = None

    # -- cached spectral data -------------------------------------------

    def regular(self, seed: int = 0):
        if self._regular is None:
            self._regular = self.qg.decompose_regular(seed=seed)
        return self._regular

    def characters(self):
        if self._characters is None:
            self._characters = quantum_characters(self.regular())
        return self._characters

    # -- axioms -----------------------------------------------------------

    def verify(self, tol: float = DEFAULT_TOL) -> AxiomReport:
        A, AG, qg = self.A, self.AG, self.qg
        dA, dG = A.dim, qg.dim
        al = self.alpha
        res: dict[str, float] = {}

        hom = 0.0
        for p in range(dA):
            ap = al[:, p]
            for q in range(dA):
                lhs = al @ A.mul_vec(A.basis_vec(p), A.basis_vec(q))
                rhs = AG.mul_vec(ap, al[:, q])
                hom = max(hom, float(np.linalg.norm(lhs - rhs)))
        res["homomorphism"] = hom
        res["unital"] = float(np.linalg.norm(al @ A.unit_vec() - AG.unit_vec()))
        res["star"] = float(
            np.linalg.norm(al @ A.star_matrix() - AG.star_matrix() @ np.conj(al))
        )
        res["comodule_law"] = float(np.linalg.norm(
            tensor_map(al, np.eye(dG)) @ al - tensor_map(np.eye(dA), qg.delta_mat) @ al
        ))
        res["counit_law"] = float(
            np.linalg.norm(np.kron(np.eye(dA), qg.epsilon) @ al - np.eye(dA))
        )
        return AxiomReport(res, tol)

    # -- conditional expectation and fixed points -------------------------

    def conditional_expectation(self) -> np.ndarray:
        """Matrix of E_B = (id (x) haar) alpha."""
        if self._eb is None:
            dA, dG = self.A.dim, self.qg.dim
            self._eb = np.einsum(
                "ikj,k->ij", self.alpha.reshape(dA, dG, dA), self.qg.haar
            )
        return self._eb

    def fixed_point_basis(self) -> np.ndarray:
        """Orthonormal basis (columns) of the fixed point algebra B."""
        if self._fixed is None:
            dA = self.A.dim
            J = np.kron(np.eye(dA), self.qg.unit[:, None])
            _, sv, vh = np.linalg.svd(self.alpha - J)
            nullity = int(np.sum(sv < 1e-9 * max(1.0, sv[0])))
            if nullity == 0:
                raise ValidationFailure("coaction has no fixed points, not even the unit")
            self._fixed = vh[-nullity:].conj().T
        return self._fixed

    def is_ergodic(self) -> bool:
        return self.fixed_point_basis().shape[1] == 1

    def fixed_point_blocks(self, seed: int = 0):
        alg = AbstractFdAlgebra.from_subspace(self.A, self.fixed_point_basis())
        return wedderburn(alg, seed=seed)

    def expectation_defects(self, rng: np.random.Generator | None = None) -> dict[str, float]:
        rng = rng or np.random.default_rng(0)
        A = self.A
        EB = self.conditional_expectation()
        B = self.fixed_point_basis()
        res = {
            "idempotent": float(np.linalg.norm(EB @ EB - EB)),
            "unital": float(np.linalg.norm(EB @ A.unit_vec() - A.unit_vec())),
            "range_in_fixed": float(np.linalg.norm((EB @ EB) - EB)),
        }
        # range of E_B is exactly B
        proj_B = B @ B.conj().T
        res["range_in_fixed"] = float(np.linalg.norm(proj_B @ EB - EB))
        res["fixes_B"] = float(np.linalg.norm(EB @ B - B))
        bimod = 0.0
        pos = 0.0
        for _ in range(8):
            x = A.random_vec(rng)
            b = B @ rng.standard_normal(B.shape[1])
            c = B @ rng.standard_normal(B.shape[1])
            lhs = EB @ A.mul_vec(A.mul_vec(b, x), c)
            rhs = A.mul_vec(A.mul_vec(b, EB @ x), c)
            bimod = max(bimod, float(np.linalg.norm(lhs - rhs)))
            sq = A.mul_vec(A.star_vec(x), x)
            ok, wit = A.is_positive_vec(EB @ sq, tol=1e-9)
            if not ok:
                pos = max(pos, -wit.eigenvalue)
        res["bimodule"] = bimod
        res["positivity"] = pos
        return res

    # -- isotypic decomposition -------------------------------------------

    def spectral_projection(self, pi: int) -> np.ndarray:
        omega = self.characters()[pi].omega
        dA, dG = self.A.dim, self.qg.dim
        return np.einsum("ikj,k->ij", self.alpha.reshape(dA, dG, dA), omega)

    def isotypic_dimension(self, pi: int) -> int:
        return int(round(np.trace(self.spectral_projection(pi)).real))

    def isotypic_basis(self, pi: int) -> np.ndarray:
        E = self.spectral_projection(pi)
        r = int(round(np.trace(E).real))
        if r == 0:
            return np.zeros((self.A.dim, 0), dtype=complex)
        u, s, _ = np.linalg.svd(E)
        if s[r - 1] < 1e-8 or (r < len(s) and s[r] > 1e-6):
            raise ValidationFailure(
                f"isotypic rank of component {pi} is ambiguous: singular values "
                f"{s[max(r - 1, 0)]:.3e} / {s[r] if r < len(s) else 0.0:.3e}"
            )
        return u[:, :r]

    def spectral_defects(self, rng: np.random.Generator | None = None) -> dict[str, float]:
        """Residuals making the E_pi a complete orthogonal family of
        B-bimodule projections refining E_B."""
        rng = rng or np.random.default_rng(0)
        A = self.A
        dec = self.regular()
        projs = [self.spectral_projection(pi) for pi in range(len(dec.irreps))]
        res = {"mutually_orthogonal": 0.0, "complete": 0.0, "bimodule": 0.0}
        for i, Ei in enumerate(projs):
            for j, Ej in enumerate(projs):
                target = Ei if i == j else np.zeros_like(Ei)
                res["mutually_orthogonal"] = max(
                    res["mutually_orthogonal"], float(np.linalg.norm(Ei @ Ej - target))
                )
        res["complete"] = float(np.linalg.norm(sum(projs) - np.eye(A.dim)))
        res["trivial_is_expectation"] = float(
            np.linalg.norm(projs[dec.trivial_index()] - self.conditional_expectation())
        )
        B = self.fixed_point_basis()
        bimod = 0.0
        for E in projs:
            for _ in range(4):
                x = A.random_vec(rng)
                b = B @ rng.standard_normal(B.shape[1])
                lhs = E @ A.mul_vec(b, x)
                rhs = A.mul_vec(b, E @ x)
                lhs2 = E @ A.mul_vec(x, b)
                rhs2 = A.mul_vec(E @ x, b)
                bimod = max(
                    bimod,
                    float(np.linalg.norm(lhs - rhs)),
                    float(np.linalg.norm(lhs2 - rhs2)),
                )
        res["bimodule"] = bimod
        return res

    def coefficient_support_defect(self, pi: int) -> float:
        """How far alpha(A_pi) sticks out of A (x) C_pi, where C_pi is the
        coefficient subspace of the block pi inside C(G)."""
        dec = self.regular()
        u = dec.irreps[pi]
        n = u.shape[0]
        coeffs = np.column_stack([u[i, j] for i in range(n) for j in range(n)])
        Cpi = subspace_basis(coeffs)
        basis = self.isotypic_basis(pi)
        if basis.shape[1] == 0:
            return 0.0
        dA, dG = self.A.dim, self.qg.dim
        P = Cpi @ Cpi.conj().T
        worst = 0.0
        for k in range(basis.shape[1]):
            z = (self.alpha @ basis[:, k]).reshape(dA, dG)
            worst = max(worst, float(np.linalg.norm(z - z @ P.T)))
        return worst

    # -- equivariant vectors ------------------------------------------------

    def equivariant_families(self, u: np.ndarray) -> np.ndarray:
        """All families (x_1 ... x_n) in A with alpha(x_j) = sum_k x_k (x) u_kj.

        Returns an array of shape (mult, n, dim A), orthonormal as vectors in
        A^n under the flat inner product.
        """
        n = u.shape[0]
        dA, dG = self.A.dim, self.qg.dim
        M = np.zeros((n * dA * dG, n * dA), dtype=complex)
        for j in range(n):
            rows = slice(j * dA * dG, (j + 1) * dA * dG)
            M[rows, j * dA : (j + 1) * dA] += self.alpha
            for k in range(n):
                M[rows, k * dA : (k + 1) * dA] -= np.kron(np.eye(dA), u[k, j][:, None])
        _, sv, vh = np.linalg.svd(M)
        sv = np.concatenate([sv, np.zeros(n * dA - sv.size)])
        nullity = int(np.sum(sv < 1e-9 * max(1.0, sv[0])))
        fams = vh[len(vh) - nullity :].conj()
        return fams.reshape(nullity, n, dA) if nullity else np.zeros((0, n, dA))

    def equivariant_gram(self, fams: np.ndarray) -> tuple[np.ndarray, float]:
        """B-valued Gram <xi, eta> = sum_i xi_i* eta_i of equivariant
        families, plus the residual of membership in the fixed points."""
        A = self.A
        m = fams.shape[0]
        gram = np.zeros((m, m, A.dim), dtype=complex)
        EB = self.conditional_expectation()
        defect = 0.0
        for s in range(m):
            for t in range(m):
                val = sum(
                    A.mul_vec(A.star_vec(fams[s, i]), fams[t, i])
                    for i in range(fams.shape[1])
                )
                gram[s, t] = val
                defect = max(defect, float(np.linalg.norm(EB @ val - val)))
        return gram, defect


@dataclass
class PimsnerPopaReport:
    lam: float
    min_slack: float
    trials: int

    @property
    def ok(self) -> bool:
        return self.min_slack >= -1e-9


def pimsner_popa_check(act: Coaction, trials: int = 200, seed: int = 0,
                       lam: float | None = None) -> PimsnerPopaReport:
    """Sample the inequality E_B(x*x) >= lam x*x.

    The default constant is 1/dim C(G): the invariant state dominates
    (1/dim) of the counit on positive elements, blockwise, which transports
    through (id (x) .) applied to alpha(x)* alpha(x).  For the translation
    action the bound is attained.
    """
    if lam is None:
        lam = 1.0 / act.qg.dim
    A = act.A
    EB = act.conditional_expectation()
    rng = np.random.default_rng(seed)
    worst = np.inf
    for _ in range(trials):
        x = A.random_vec(rng)
        sq = A.mul_vec(A.star_vec(x), x)
        gap = EB @ sq - lam * sq
        blocks = A.to_blocks(gap)
        low = min(np.linalg.eigvalsh(0.5 * (b + b.conj().T))[0] for b in blocks)
        scale = max(1.0, A.operator_norm_vec(sq))
        worst = min(worst, float(low) / scale)
    return PimsnerPopaReport(lam, worst, trials)


def conjugate_partners(act: Coaction) -> list[tuple[int, float]]:
    """For each component pi, the component rho whose isotypic space contains
    A_pi*, together with the containment defect."""
    K = act.A.star_matrix()
    npi = len(act.regular().irreps)
    out = []
    for pi in range(npi):
        basis = act.isotypic_basis(pi)
        if basis.shape[1] == 0:
            out.append((pi, 0.0))
            continue
        sb = K @ np.conj(basis)
        best, best_def = -1, np.inf
        for rho in range(npi):
            E = act.spectral_projection(rho)
            d = float(np.linalg.norm(E @ sb - sb))
            if d < best_def:
                best, best_def = rho, d
        out.append((best, best_def))
    return out


def fusion_multiplicities(qg: FiniteQuantumGroup, seed: int = 0) -> np.ndarray:
    """mult[pi, rho, sigma] of sigma inside pi (x) rho, from characters."""
    dec = qg.decompose_regular(seed=seed)
    chars = quantum_characters(dec)
    npi = len(dec.irreps)
    chi = [sum(u[i, i] for i in range(u.shape[0])) for u in dec.irreps]
    mult = np.zeros((npi, npi, npi))
    for a in range(npi):
        for b in range(npi):
            prod = qg.mul(chi[a], chi[b])
            for c in range(npi):
                val = (chars[c].omega @ prod) / dec.irreps[c].shape[0]
                mult[a, b, c] = val.real
    return mult


def module_product_defect(act: Coaction, tol_mult: float = 0.5) -> float:
    """A_pi A_rho must land inside the isotypic spaces of the components of
    pi (x) rho."""
    A = act.A
    dec = act.regular()
    npi = len(dec.irreps)
    mult = fusion_multiplicities(act.qg)
    projs = [act.spectral_projection(s) for s in range(npi)]
    worst = 0.0
    for a in range(npi):
        Ba = act.isotypic_basis(a)
        for b in range(npi):
            Bb = act.isotypic_basis(b)
            if Ba.shape[1] == 0 or Bb.shape[1] == 0:
                continue
            allowed = sum(projs[c] for c in range(npi) if mult[a, b, c] > tol_mult)
            for i in range(Ba.shape[1]):
                for j in range(Bb.shape[1]):
                    prod = A.mul_vec(Ba[:, i], Bb[:, j])
                    worst = max(worst, float(np.linalg.norm(allowed @ prod - prod)))
    return worst


# -- builders ---------------------------------------------------------------


def translation_action(qg: FiniteQuantumGroup) -> Coaction:
    return Coaction(qg, qg.A, qg.delta_mat.copy(), name="translation")


def trivial_action(qg: FiniteQuantumGroup, algebra: FdCStarAlgebra) -> Coaction:
    J = np.kron(np.eye(algebra.dim), qg.unit[:, None])
    return Coaction(qg, algebra, J, name="trivial")


def group_rep_corep(qg: FiniteQuantumGroup, coeff_of_group: np.ndarray,
                    matrices: list[np.ndarray]) -> np.ndarray:
    """Corepresentation of a function algebra C(G) from a unitary
    representation of G: u_ij = sum_g M_g[i, j] e_g.

    ``coeff_of_group[:, g]`` are the coordinates of the indicator of g.
    """
    n = matrices[0].shape[0]
    u = np.zeros((n, n, qg.dim), dtype=complex)
    for g, Mg in enumerate(matrices):
        for i in range(n):
            for j in range(n):
                u[i, j] += Mg[i, j] * coeff_of_group[:, g]
    return u


def ad_action(qg: FiniteQuantumGroup, u: np.ndarray, name: str = "ad") -> Coaction:
    """Inner coaction on B(H_pi): T -> V*(T (x) 1)V with V = sum E_ij (x) u_ji.

    On matrix units: alpha(E_ab) = sum_{j,l} E_jl (x) u_ja* u_lb.
    """
    n = u.shape[0]
    A = FdCStarAlgebra([n])
    dG = qg.dim
    alpha = np.zeros((n * n * dG, n * n), dtype=complex)
    for a in range(n):
        for b in range(n):
            col = np.zeros(n * n * dG, dtype=complex)
            for j in range(n):
                for l in range(n):
                    coeff = qg.mul(qg.star(u[j, a]), u[l, b])
                    col += np.kron(A.basis_vec(j * n + l), coeff)
            alpha[:, a * n + b] = col
    return Coaction(qg, A, alpha, name=name)


def direct_sum_action(act1: Coaction, act2: Coaction, name: str = "") -> Coaction:
    if act1.qg is not act2.qg and act1.qg.delta_mat.shape != act2.qg.delta_mat.shape:
        raise ValidationFailure("direct sum requires the same quantum group")
    A = FdCStarAlgebra.direct_sum(act1.A, act2.A)
    d1, d2, dG = act1.A.dim, act2.A.dim, act1.qg.dim
    alpha = np.zeros(((d1 + d2) * dG, d1 + d2), dtype=complex)
    alpha[: d1 * dG, :d1] = act1.alpha
    alpha[d1 * dG :, d1:] = act2.alpha
    return Coaction(act1.qg, A, alpha, name=name)
