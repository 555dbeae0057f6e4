"""Freeness of a coaction through the Galois map.

The one underlying map is G(x (x) y) = alpha(x)(y (x) 1).  Restricted to a
spectral subspace it lands in A (x) C_pi, descends to the balanced tensor
product over the fixed point algebra B, and is isometric for

    <x (x) y, x' (x) y'>  =  y* E_B(x* x') y'     (A-valued)

against <z, w> = (id (x) haar)(z* w) on the target.  Freeness is exactly
surjectivity, globally or component by component; the global defect splits
as the sum of the per-component defects because alpha(A_pi) lies inside
A (x) C_pi.

The range projection P_pi of the component map is computed two ways here
(orthogonal projections for the scalarised A-valued and B-valued inner
products, which agree with the module projection since the scalarising
states are faithful) and a third way in the crossed product module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .action import Coaction
from .errors import NumericalRankFailure, ValidationFailure
from .fdlin import FdCStarAlgebra
from .wedderburn import subspace_basis

_RANK_TOL = 1e-8


def _rank(mat: np.ndarray, tol: float = _RANK_TOL) -> int:
    if mat.size == 0:
        return 0
    s = np.linalg.svd(mat, compute_uv=False)
    r = int(np.sum(s > tol * max(1.0, s[0])))
    if 0 < r < s.size and s[r] > 0.1 * s[r - 1]:
        raise NumericalRankFailure("ambiguous rank in Galois computation")
    return r


# -- balanced tensor product ------------------------------------------------


@dataclass
class BalancedTensor:
    """Quotient of X (x) Y by the B-balancing relations, inside Kronecker
    coordinates of the two coefficient spaces."""

    basis: np.ndarray          # (nx*ny, q) orthonormal complement of relations
    relation_rank: int
    form_null_residual: float  # |Gram form| on the relation span


def balanced_tensor(act: Coaction, X: np.ndarray, Y: np.ndarray) -> BalancedTensor:
    A = act.A
    B = act.fixed_point_basis()
    EB = act.conditional_expectation()
    nx, ny, nb = X.shape[1], Y.shape[1], B.shape[1]
    rel = []
    for i in range(nx):
        for k in range(nb):
            xb = A.mul_vec(X[:, i], B[:, k])
            cx, *_ = np.linalg.lstsq(X, xb, rcond=None)
            if np.linalg.norm(X @ cx - xb) > 1e-8:
                raise ValidationFailure("left space is not a right B-module")
            for j in range(ny):
                by = A.mul_vec(B[:, k], Y[:, j])
                cy, *_ = np.linalg.lstsq(Y, by, rcond=None)
                if np.linalg.norm(Y @ cy - by) > 1e-8:
                    raise ValidationFailure("right space is not a left B-module")
                v = np.kron(cx, _unit_coeff(ny, j)) - np.kron(_unit_coeff(nx, i), cy)
                rel.append(v)
    rel = np.column_stack(rel) if rel else np.zeros((nx * ny, 0), dtype=complex)
    if rel.shape[1]:
        # drop relations that cancelled exactly (central b), they carry no rank
        keep = np.linalg.norm(rel, axis=0) > 1e-12
        rel = rel[:, keep]
    W = subspace_basis(rel) if rel.shape[1] else rel
    # the semidefinite form <x(x)y, x'(x)y'> = trace(y* E_B(x*x') y') kills W
    form = np.zeros((nx * ny, nx * ny), dtype=complex)
    psi = A.trace_state_vec()
    for i in range(nx):
        for ip in range(nx):
            e = EB @ A.mul_vec(A.star_vec(X[:, i]), X[:, ip])
            for j in range(ny):
                for jp in range(ny):
                    val = psi @ A.mul_vec(
                        A.star_vec(Y[:, j]), A.mul_vec(e, Y[:, jp])
                    )
                    form[i * ny + j, ip * ny + jp] = val
    null_res = float(np.linalg.norm(form @ W)) if W.shape[1] else 0.0
    full = np.eye(nx * ny)
    if W.shape[1]:
        comp = full - W @ W.conj().T
        basis = subspace_basis(comp)
    else:
        basis = np.eye(nx * ny, dtype=complex)
    return BalancedTensor(basis, W.shape[1], null_res)


def _unit_coeff(n, j):
    v = np.zeros(n, dtype=complex)
    v[j] = 1.0
    return v


# -- the Galois map ----------------------------------------------------------


def galois_columns(act: Coaction, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Matrix with columns G(x_i (x) y_j) = alpha(x_i)(y_j (x) 1), ordered
    with the second index fastest."""
    AG = act.AG
    cols = []
    for i in range(X.shape[1]):
        ax = act.alpha @ X[:, i]
        for j in range(Y.shape[1]):
            cols.append(AG.mul_vec(ax, np.kron(Y[:, j], act.qg.unit)))
    return np.column_stack(cols)


def galois_isometry_defect(act: Coaction, pi: int | None = None,
                           trials: int = 50, seed: int = 0) -> float:
    """Residual of (id (x) haar)(G(x,y)* G(x',y')) = y* E_B(x* x') y'."""
    A, AG = act.A, act.AG
    dA, dG = A.dim, act.qg.dim
    haar = act.qg.haar
    EB = act.conditional_expectation()
    X = act.isotypic_basis(pi) if pi is not None else np.eye(dA, dtype=complex)
    if X.shape[1] == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        x = X @ rng.standard_normal(X.shape[1])
        xp = X @ rng.standard_normal(X.shape[1])
        y, yp = A.random_vec(rng), A.random_vec(rng)
        gx = AG.mul_vec(act.alpha @ x, np.kron(y, act.qg.unit))
        gxp = AG.mul_vec(act.alpha @ xp, np.kron(yp, act.qg.unit))
        prod = AG.mul_vec(AG.star_vec(gx), gxp)
        lhs = prod.reshape(dA, dG) @ haar
        rhs = A.mul_vec(
            A.star_vec(y), A.mul_vec(EB @ A.mul_vec(A.star_vec(x), xp), yp)
        )
        worst = max(worst, float(np.linalg.norm(lhs - rhs)))
    return worst


def galois_balanced_injectivity(act: Coaction, pi: int) -> float:
    """The component map must be injective on the balanced quotient: its rank
    there equals the quotient dimension.  Returns rank defect (0 is good)."""
    X = act.isotypic_basis(pi)
    Y = np.eye(act.A.dim, dtype=complex)
    if X.shape[1] == 0:
        return 0.0
    bt = balanced_tensor(act, X, Y)
    G = galois_columns(act, X, Y)
    return bt.basis.shape[1] - _rank(G @ bt.basis)


# -- Ellwood surjectivity ----------------------------------------------------


@dataclass
class EllwoodReport:
    per_component_defect: list[int]
    per_component_target: list[int]
    global_defect: int
    additive: bool

    @property
    def free(self) -> bool:
        return self.global_defect == 0


def ellwood_report(act: Coaction) -> EllwoodReport:
    A = act.A
    dA, dG = A.dim, act.qg.dim
    Y = np.eye(dA, dtype=complex)
    G_global = galois_columns(act, np.eye(dA, dtype=complex), Y)
    global_defect = dA * dG - _rank(G_global)
    defects = []
    targets = []
    for pi, u in enumerate(act.regular().irreps):
        n = u.shape[0]
        X = act.isotypic_basis(pi)
        target = dA * n * n
        if X.shape[1] == 0:
            defects.append(target)
            targets.append(target)
            continue
        r = _rank(galois_columns(act, X, Y))
        defects.append(target - r)
        targets.append(target)
    return EllwoodReport(defects, targets, global_defect, sum(defects) == global_defect)


# -- saturation ---------------------------------------------------------------


@dataclass
class SaturationReport:
    ideal_dimension: int
    full_dimension: int

    @property
    def saturated(self) -> bool:
        return self.ideal_dimension == self.full_dimension


def saturation_report(act: Coaction) -> SaturationReport:
    """Rieffel-type saturation: the two-sided ideal generated by the Jones
    projection inside the crossed product is everything."""
    from .crossed import crossed_product

    cp = crossed_product(act)
    return SaturationReport(cp.ideal_basis().shape[1], act.A.dim * act.qg.dim)


# -- range projections --------------------------------------------------------


def _weighted_projection(vectors: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Projection onto span(columns), orthogonal for the PD form M."""
    V = subspace_basis(vectors)
    if V.shape[1] == 0:
        return np.zeros((M.shape[0], M.shape[0]), dtype=complex)
    G = V.conj().T @ M @ V
    return V @ np.linalg.solve(G, V.conj().T @ M)


def _state_gram(act: Coaction, a_state: np.ndarray) -> np.ndarray:
    """Gram matrix of the AG basis under (a_state (x) haar)(z* w)."""
    AG = act.AG
    s = np.kron(a_state, act.qg.haar)
    K = AG.star_matrix()
    d = AG.dim
    G = np.empty((d, d), dtype=complex)
    for p in range(d):
        G[p, :] = s @ AG.left_mult(K[:, p])
    return 0.5 * (G + G.conj().T)


def range_projection(act: Coaction, pi: int, method: str = "avalued") -> np.ndarray:
    """Projection (on A (x) C(G) coordinates) onto the range of the component
    Galois map, orthogonal for the chosen scalarised inner product.

    methods: "avalued" scalarises the A-valued product with the trace state
    of A; "bvalued" scalarises the B-valued one with the trace state after
    E_B; "crossed" transports the central support of the Jones ideal from
    the crossed product.
    """
    if method == "crossed":
        from .crossed import crossed_product

        cp = crossed_product(act)
        P = cp.free_part_projection()
        # compress to the component: P preserves A (x) C_pi
        return _component_compress(act, pi, P)
    X = act.isotypic_basis(pi)
    Y = np.eye(act.A.dim, dtype=complex)
    cols = (
        galois_columns(act, X, Y)
        if X.shape[1]
        else np.zeros((act.AG.dim, 0), dtype=complex)
    )
    if method == "avalued":
        state = act.A.trace_state_vec()
    elif method == "bvalued":
        state = act.A.trace_state_vec() @ act.conditional_expectation()
    else:
        raise ValidationFailure(f"unknown range projection method {method!r}")
    M = _state_gram(act, state)
    vals = np.linalg.eigvalsh(M)
    if vals[0] <= 1e-12 * vals[-1]:
        raise NumericalRankFailure("scalarising state produced a singular Gram")
    return _weighted_projection(cols, M)


def component_projection(act: Coaction, pi: int) -> np.ndarray:
    """Idempotent on A (x) C(G) coordinates cutting out A (x) C_pi.

    Built from the character functional, (id (x) id (x) omega_pi)(id (x) Delta),
    so the components are split the way the Haar metric splits them; the
    family sums to the identity because the omega_pi sum to the counit.
    """
    qg = act.qg
    d = qg.dim
    D3 = qg.delta_mat.reshape(d, d, d)
    omega = act.characters()[pi].omega
    Q = np.einsum("ikj,k->ij", D3, omega)
    return np.kron(np.eye(act.A.dim, dtype=complex), Q)


def _component_compress(act: Coaction, pi: int, P: np.ndarray) -> np.ndarray:
    comp = component_projection(act, pi)
    return comp @ P @ comp


@dataclass
class RangeProjectionReport:
    pi: int
    rank: int
    target_dimension: int
    idempotent: float
    agreement_bvalued: float
    agreement_crossed: float
    module_commutation: float
    corner_centrality: float

    @property
    def is_full(self) -> bool:
        return self.rank == self.target_dimension

    @property
    def is_zero(self) -> bool:
        return self.rank == 0


def range_projection_report(act: Coaction, pi: int, seed: int = 0) -> RangeProjectionReport:
    from .crossed import crossed_product

    A, AG = act.A, act.AG
    Pa = range_projection(act, pi, "avalued")
    Pb = range_projection(act, pi, "bvalued")
    Pc = range_projection(act, pi, "crossed")
    n = act.regular().irreps[pi].shape[0]
    rank = int(round(np.trace(Pa).real))

    # the range is a module over B (acting through alpha on the left) and
    # over A (acting on the right leg); its projection must commute with both
    rng = np.random.default_rng(seed)
    B = act.fixed_point_basis()
    comm = 0.0
    for _ in range(6):
        a = A.random_vec(rng)
        Rb = AG.right_mult(np.kron(a, act.qg.unit))
        comm = max(comm, float(np.linalg.norm(Pa @ Rb - Rb @ Pa)))
    for k in range(B.shape[1]):
        Lb = AG.left_mult(act.alpha @ B[:, k])
        comm = max(comm, float(np.linalg.norm(Pa @ Lb - Lb @ Pa)))

    # in the crossed product, ideal_unit . (1 (x) lam(omega_pi)) lies in the
    # centre of the corner cut out by the dual central projection
    cp = crossed_product(act)
    AM = cp.AM
    qvec = cp.dual_vec(act.characters()[pi].omega)
    c = AM.mul_vec(cp.ideal_unit, qvec)
    central = 0.0
    for _ in range(6):
        w = cp.basis @ rng.standard_normal(cp.basis.shape[1])
        qwq = AM.mul_vec(qvec, AM.mul_vec(w, qvec))
        central = max(
            central,
            float(np.linalg.norm(AM.mul_vec(c, qwq) - AM.mul_vec(qwq, c)))
            / max(1.0, float(np.linalg.norm(qwq))),
        )
    return RangeProjectionReport(
        pi=pi,
        rank=rank,
        target_dimension=A.dim * n * n,
        idempotent=float(np.linalg.norm(Pa @ Pa - Pa)),
        agreement_bvalued=float(np.linalg.norm(Pa - Pb)),
        agreement_crossed=float(np.linalg.norm(Pa - Pc)),
        module_commutation=comm,
        corner_centrality=central,
    )


# -- the equivalence theorem ---------------------------------------------------


@dataclass
class FreenessEquivalenceReport:
    ellwood_free: bool
    saturated: bool
    all_components_full: bool
    isometry_defect: float

    @property
    def consistent(self) -> bool:
        return self.ellwood_free == self.saturated == self.all_components_full


def freeness_equivalence_report(act: Coaction, seed: int = 0) -> FreenessEquivalenceReport:
    ell = ellwood_report(act)
    sat = saturation_report(act)
    full = all(
        range_projection_report(act, pi, seed=seed).is_full
        for pi in range(len(act.regular().irreps))
    )
    iso = galois_isometry_defect(act, trials=20, seed=seed)
    return FreenessEquivalenceReport(ell.free, sat.saturated, full, iso)
