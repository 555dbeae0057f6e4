"""Twisted fixed point inclusions, quasi-bases, and the index element.

Oracles worked out by hand:

* For the trivial corepresentation the twisted algebra is A (x) M_1, the
  inclusion collapses to B = C, and the only quasi-basis value is 1.
* On a cyclic translation the coefficient contraction has the characters as
  eigenvectors: with chi_k(t) = w^{kt} and x = delta_g one gets
  sum phi(chi_k* x_(1)) x_(0) = w^{-kg} chi_k / n.
* All battery quantum groups are Kac, so the invariant state of the adjoint
  corepresentation must be the normalised trace and both deformation
  orientations agree with it.
* For a free translation and an irreducible block of dimension n the fixed
  point algebra C has dimension dim(A) n^2 / dim(C(G)) and the index element
  is n^2 times the unit; for C(S3) and n = 2 that gives dim C = 4 and
  index 4.
* For the direct sum of the trivial and the two-dimensional block on C(S3)
  the invariant state is the trace on M_3, so the index must come out
  (1 + 2)^2 = 9 times the unit.
* The dual unit system haar(u_ij* h) = delta_ij has solution space of
  dimension dim(C(G)) - n^2, giving genuinely distinct solutions to test
  independence on (2 kernel directions for the S3 two-dimensional block).
* The inner S3 action on M_2 is ergodic but not free: the two-dimensional
  spectral submodule has multiplicity one, so outer products span a single
  dimension while the twisted fixed point algebra is the commutant of the
  tensor square, of dimension 3.  Reconstruction still works; the
  quasi-basis must refuse.
* For a trivial action and a nontrivial block the eigenmatrix space is zero
  while C = B (x) 1 is not, so the projection gap is the Frobenius norm of
  the fixed point projection, sqrt(dim C).
"""

import numpy as np
import pytest

from qact import windex
from qact.action import trivial_action
from qact.errors import ValidationFailure
from qact.examples import finite_action, quantum_group
from qact.fdlin import FdCStarAlgebra

TOL = 1e-9
IDX_TOL = 1e-7


@pytest.fixture(scope="module")
def s3():
    return finite_action("c_s3_translation")


@pytest.fixture(scope="module")
def s3_two(s3):
    return [i for i, n in enumerate(s3.regular().dimensions) if n == 2][0]


@pytest.fixture(scope="module")
def s3_inclusion(s3, s3_two):
    return windex.build_inclusion(s3, s3_two)


@pytest.fixture(scope="module")
def s3_structure(s3, s3_two, s3_inclusion):
    return windex.two_sided_structure(s3, s3_two, inclusion=s3_inclusion)


# -- coefficient contraction ---------------------------------------------------


def test_sweedler_contraction_on_cyclic_characters():
    act = finite_action("c_z3_translation")
    w = np.exp(2j * np.pi / 3)
    for k in range(3):
        chi = np.array([w ** (k * t) for t in range(3)], dtype=complex)
        for g in range(3):
            out = windex.sweedler_coefficient(act, chi, np.eye(3)[g])
            assert np.allclose(out, w ** (-k * g) * chi / 3.0, atol=TOL)


def test_sweedler_reproduces_conditional_expectation(s3):
    # the contraction against the unit coefficient is E_B
    unit = s3.qg.unit
    EB = s3.conditional_expectation()
    for p in range(s3.A.dim):
        out = windex.sweedler_coefficient(s3, unit, np.eye(s3.A.dim)[p])
        assert np.allclose(out, EB[:, p], atol=TOL)


# -- adjoint corepresentation ---------------------------------------------------


def test_adjoint_is_left_coaction(s3, s3_two):
    u = s3.regular().irreps[s3_two]
    defects = windex.adjoint_coaction_defects(s3.qg, u)
    assert max(defects.values()) < TOL


def test_invariant_state_is_trace_for_kac(s3_inclusion):
    n = s3_inclusion.twisted.degree
    assert s3_inclusion.theta_space_dim == 1
    assert np.allclose(s3_inclusion.theta_density, np.eye(n) / n, atol=TOL)
    assert s3_inclusion.diagnostics["theta_vs_qinv_trace"] < TOL
    assert s3_inclusion.diagnostics["theta_vs_q_trace"] < TOL


def test_nonunitary_corep_rejected(s3, s3_two):
    u = 2.0 * s3.regular().irreps[s3_two]
    with pytest.raises(ValidationFailure):
        windex.build_inclusion(s3, u)


# -- the inclusion ---------------------------------------------------------------


def test_inclusion_certificates(s3_inclusion):
    diag = s3_inclusion.diagnostics
    for key in ("corep", "twisted_axioms", "adjoint_coaction", "route_agreement",
                "theta_invariance", "exp_into_fixed", "exp_unital",
                "exp_idempotent", "exp_bimodular", "embed_fixed"):
        assert diag[key] < TOL, (key, diag[key])
    assert diag["exp_faithful_min_eig"] > 1e-10


def test_fixed_point_dimension_of_free_twist(s3, s3_two, s3_inclusion):
    n = s3_inclusion.twisted.degree
    expected = s3.A.dim * n * n // s3.qg.dim
    assert s3_inclusion.dim_fixed == expected == 4


def test_trivial_component_collapses_to_base():
    act = finite_action("c_z2_translation")
    incl = windex.build_inclusion(act, act.regular().trivial_index())
    assert incl.dim_fixed == incl.B.shape[1]
    # E is the identity on C once pulled through the embedding
    assert np.linalg.norm(incl.embed_mat @ incl.expectation_mat @ incl.C
                          - incl.C) < TOL
    qb = windex.quasi_basis(act, act.regular().trivial_index())
    AM = qb.inclusion.algebra
    assert np.linalg.norm(qb.index_element - AM.unit_vec()) < IDX_TOL


# -- two-sided module structure ---------------------------------------------------


def test_two_sided_reconstruction(s3_structure):
    diag = s3_structure.diagnostics
    for key in ("transport_residual", "right_reconstruction",
                "right_reconstruction_slice", "left_reconstruction",
                "left_reconstruction_slice", "gram_in_fixed",
                "right_positivity_violation", "left_positivity_violation"):
        assert diag[key] < TOL, (key, diag[key])


def test_gram_symmetries(s3, s3_structure):
    A = s3.A
    right, left = s3_structure.right_gram, s3_structure.left_gram
    m = right.shape[0]
    for s in range(m):
        for t in range(m):
            assert np.allclose(right[s, t], A.star_vec(right[t, s]), atol=TOL)
            assert np.allclose(left[s, t], A.star_vec(left[t, s]), atol=TOL)


def test_module_inner_products_positive(s3, s3_inclusion, s3_structure):
    rng = np.random.default_rng(3)
    fams = s3_structure.families
    c = rng.standard_normal(fams.shape[0]) + 1j * rng.standard_normal(fams.shape[0])
    z = np.einsum("s,sid->id", c, fams)
    ok_r, _ = s3.A.is_positive_vec(windex.right_inner(s3.A, z, z), tol=1e-8)
    ok_l, _ = s3.A.is_positive_vec(
        windex.left_inner(s3.A, s3_inclusion.theta, z, z), tol=1e-8)
    assert ok_r and ok_l


# -- quasi-basis -------------------------------------------------------------------


def test_quasi_basis_identities(s3, s3_two, s3_structure):
    qb = windex.quasi_basis(s3, s3_two, structure=s3_structure)
    diag = qb.diagnostics
    assert diag["reconstruction_right"] < 1e-8
    assert diag["reconstruction_left"] < 1e-8
    assert diag["pairs_in_fixed"] < 1e-8
    assert diag["index_in_fixed"] < 1e-8
    assert diag["index_central"] < 1e-8
    assert diag["index_selfadjoint"] < 1e-8
    assert qb.dim_module_span == qb.inclusion.dim_fixed


def test_index_is_squared_q_dimension(s3, s3_two, s3_structure):
    qb = windex.quasi_basis(s3, s3_two, structure=s3_structure)
    AM = qb.inclusion.algebra
    assert np.linalg.norm(qb.index_element - 4.0 * AM.unit_vec()) < IDX_TOL


def test_independent_quasi_bases_agree(s3, s3_two, s3_structure):
    qb = windex.quasi_basis(s3, s3_two, structure=s3_structure)
    alt = windex.quasi_basis(s3, s3_two, structure=s3_structure, alternate=True)
    assert alt.size != qb.size  # genuinely different families
    assert np.linalg.norm(qb.index_element - alt.index_element) < 1e-8


def test_quasi_basis_generates_fixed_algebra(s3, s3_two, s3_structure):
    qb = windex.quasi_basis(s3, s3_two, structure=s3_structure)
    assert qb.generation_rank == qb.inclusion.dim_fixed


# -- index theorem ------------------------------------------------------------------


@pytest.mark.parametrize("name,pick", [
    ("c_z2_translation", "sign"),
    ("c_z3_translation", 1),
    ("c_s3_translation", "two"),
    ("dual_s3_translation", 3),
    ("swap2", "sign"),
])
def test_index_theorem(name, pick):
    act = finite_action(name)
    dec = act.regular()
    if pick == "sign":
        pi = 1 - dec.trivial_index()
    elif pick == "two":
        pi = [i for i, n in enumerate(dec.dimensions) if n == 2][0]
    else:
        pi = pick
    rep = windex.index_theorem_check(act, pi)
    n = dec.dimensions[pi]
    assert abs(rep.q_dimension - n) < 1e-8  # Kac
    assert rep.residual < IDX_TOL
    assert rep.intermediate_identity < 1e-8
    assert rep.solution_independence < 1e-8
    assert rep.diagnostics["closed_form_residual"] < TOL
    assert rep.diagnostics["decomposition_residual"] < 1e-8
    assert rep.diagnostics["reconstruction_right"] < 1e-8
    assert rep.diagnostics["reconstruction_left"] < 1e-8


def test_index_agrees_across_all_routes(s3, s3_two, s3_structure):
    qb = windex.quasi_basis(s3, s3_two, structure=s3_structure)
    rep = windex.index_theorem_check(s3, s3_two)
    assert np.linalg.norm(qb.index_element - rep.index_element) < 1e-8


def test_dual_unit_solution_space(s3, s3_two):
    u = s3.regular().irreps[s3_two]
    h, res, kernel = windex._dual_unit_solve(s3.qg, u)
    assert res < TOL
    assert kernel.shape[1] == s3.qg.dim - 4
    # minimal norm: no shorter solution than the row-space projection
    closed = 2.0 * (u[0, 0] + u[1, 1])
    rows = np.stack([
        s3.qg.haar @ s3.qg.A.left_mult(s3.qg.A.star_vec(u[i, j]))
        for i in range(2) for j in range(2)
    ])
    assert np.linalg.norm(rows @ closed - np.eye(2).reshape(-1)) < TOL
    assert np.linalg.norm(h) <= np.linalg.norm(closed) + TOL


def test_custom_corep_array_matches_component(s3, s3_two, s3_structure):
    u = s3.regular().irreps[s3_two]
    rep_arr = windex.index_theorem_check(s3, np.array(u))
    rep_int = windex.index_theorem_check(s3, s3_two)
    assert np.linalg.norm(rep_arr.index_element - rep_int.index_element) < 1e-8


# -- reducible corepresentations ------------------------------------------------------


def test_direct_sum_quasi_basis(s3, s3_two):
    tri = s3.regular().trivial_index()
    qb = windex.quasi_basis(s3, [tri, s3_two])
    AM = qb.inclusion.algebra
    assert qb.inclusion.twisted.degree == 3
    assert qb.diagnostics["reconstruction_right"] < 1e-8
    assert qb.diagnostics["reconstruction_left"] < 1e-8
    assert qb.diagnostics["index_central"] < 1e-8
    # trace weights on M_3: index (1 + 2)^2
    assert np.linalg.norm(qb.index_element - 9.0 * AM.unit_vec()) < IDX_TOL


def test_direct_sum_refuses_index_theorem(s3, s3_two):
    tri = s3.regular().trivial_index()
    with pytest.raises(ValidationFailure):
        windex.index_theorem_check(s3, [tri, s3_two])


def test_repeated_block_direct_sum():
    act = finite_action("c_z2_translation")
    sign = 1 - act.regular().trivial_index()
    qb = windex.quasi_basis(act, [sign, sign])
    AM = qb.inclusion.algebra
    assert qb.diagnostics["reconstruction_right"] < 1e-8
    assert np.linalg.norm(qb.index_element - 4.0 * AM.unit_vec()) < IDX_TOL


# -- non-free inputs --------------------------------------------------------------------


def test_ergodic_not_free_reconstructs_but_has_no_quasi_basis():
    act = finite_action("c_s3_ad_m2")
    two = [i for i, n in enumerate(act.regular().dimensions) if n == 2][0]
    st = windex.two_sided_structure(act, two)
    assert st.diagnostics["right_reconstruction"] < TOL
    assert st.diagnostics["left_reconstruction"] < TOL
    assert st.inclusion.dim_fixed == 3
    with pytest.raises(ValidationFailure, match="span 1 of 3"):
        windex.quasi_basis(act, two, structure=st)


def test_trivial_summand_blocks_quasi_basis():
    act = finite_action("c_z2_trivial_c2")
    sign = 1 - act.regular().trivial_index()
    with pytest.raises(ValidationFailure, match="span 0 of 2"):
        windex.quasi_basis(act, sign)


def test_trivial_action_has_no_spectral_module():
    qg = quantum_group("c_s3")
    act = trivial_action(qg, FdCStarAlgebra((2,)))
    incl = windex.build_inclusion(act, 2)
    assert incl.dim_fixed == incl.B.shape[1] == 4
    with pytest.raises(ValidationFailure):
        windex.quasi_basis(act, 2)


# -- eigenmatrices ------------------------------------------------------------------------


@pytest.mark.parametrize("name", [
    "c_z2_translation", "c_z3_translation", "c_s3_translation",
    "dual_s3_translation", "swap2",
])
def test_eigenmatrices_exhaust_fixed_algebra_when_free(name):
    act = finite_action(name)
    for pi in range(len(act.regular().dimensions)):
        em = windex.eigenmatrix_check(act, pi)
        assert em.containment_defect < 1e-8
        assert em.projection_gap < 1e-8
        assert em.dim_products == em.dim_fixed


def test_eigenmatrices_miss_fixed_algebra_for_trivial_action():
    qg = quantum_group("c_s3")
    act = trivial_action(qg, FdCStarAlgebra((2,)))
    em = windex.eigenmatrix_check(act, 2)
    assert em.dim_eigenmatrices == 0
    assert em.dim_fixed == 4
    assert abs(em.projection_gap - 2.0) < 1e-8


def test_eigenmatrix_products_always_land_in_fixed_algebra():
    act = finite_action("c_s3_ad_m2")
    two = [i for i, n in enumerate(act.regular().dimensions) if n == 2][0]
    em = windex.eigenmatrix_check(act, two)
    assert em.containment_defect < 1e-8
    assert em.dim_products < em.dim_fixed  # strict shortfall: not free
