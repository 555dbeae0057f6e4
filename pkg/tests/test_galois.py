"""Galois map, crossed product, and projectivity witnesses.

Freeness verdicts used as oracles below are forced by dimension counting
and block structure worked out by hand:

* translations are free (the Galois map is the multiplication unitary),
* the inner Z2 action on M_2 is free: the sign spectral subspace is the
  span of the off-diagonal flip part and already multiplies onto B,
* the inner S3 action on M_2 cannot be free: the source of the Galois map
  has dimension dim(A)^2 = 16 while the target needs dim(A)*dim(C(G)) = 24,
* a trivial summand contributes its full sign-component defect.

Crossed product shapes: translation gives all of End(L2(G)); a trivial
action gives A (x) dual; an inner group action untwists, so
M_2 x_(Ad pi) S3 = M_2 (x) C[S3] with blocks (2,2,4).
"""

import numpy as np
import pytest

from qact import galois
from qact.crossed import CrossedProduct
from qact.errors import NumericalRankFailure, ValidationFailure
from qact.examples import finite_action, finite_action_names
from qact.projective import projectivity_witness, verify_witness

FREE = {
    "c_z2_translation",
    "c_z3_translation",
    "c_s3_translation",
    "dual_s3_translation",
    "swap2",
}
NOT_FREE = {"c_z2_trivial_c2", "c_z2_free_plus_trivial", "c_s3_ad_m2"}


@pytest.fixture(scope="module")
def actions():
    return {name: finite_action(name) for name in finite_action_names()}


def test_battery_covers_both_verdicts():
    assert FREE | NOT_FREE == set(finite_action_names())


# -- balanced tensor product --------------------------------------------------


def test_balancing_is_trivial_over_scalars(actions):
    act = actions["c_z2_translation"]
    X = act.isotypic_basis(1)
    Y = np.eye(act.A.dim, dtype=complex)
    bt = galois.balanced_tensor(act, X, Y)
    assert bt.relation_rank == 0
    assert bt.basis.shape[1] == X.shape[1] * act.A.dim


def test_balanced_quotient_swap2(actions):
    # A is a free B-module of rank 2 and the sign subspace has B-rank 1,
    # so the balanced product must come out 4-dimensional
    act = actions["swap2"]
    X = act.isotypic_basis(1)
    Y = np.eye(act.A.dim, dtype=complex)
    bt = galois.balanced_tensor(act, X, Y)
    assert X.shape[1] == 2
    assert bt.basis.shape[1] == 4
    assert bt.relation_rank == 4
    assert bt.form_null_residual < 1e-9


def test_galois_injective_on_balanced_quotient(actions):
    for name in ["c_z2_translation", "c_s3_translation", "swap2"]:
        act = actions[name]
        for pi in range(len(act.regular().irreps)):
            assert galois.galois_balanced_injectivity(act, pi) == 0


# -- isometry of the Galois map ------------------------------------------------


def test_galois_isometry_identity(actions):
    for name, act in actions.items():
        assert galois.galois_isometry_defect(act, trials=30) < 1e-9, name
        for pi in range(len(act.regular().irreps)):
            assert galois.galois_isometry_defect(act, pi=pi, trials=10) < 1e-9


# -- Ellwood surjectivity -------------------------------------------------------


def test_ellwood_verdicts(actions):
    for name, act in actions.items():
        rep = galois.ellwood_report(act)
        assert rep.free == (name in FREE), name
        assert rep.additive, name


def test_ellwood_defect_locations(actions):
    rep = galois.ellwood_report(actions["c_z2_trivial_c2"])
    assert rep.per_component_defect == [0, 2]
    rep = galois.ellwood_report(actions["c_z2_free_plus_trivial"])
    assert rep.per_component_defect == [0, 2]
    rep = galois.ellwood_report(actions["c_s3_ad_m2"])
    assert rep.per_component_defect == [0, 0, 8]
    assert rep.per_component_target == [4, 4, 16]


# -- saturation ------------------------------------------------------------------


def test_saturation_dimensions(actions):
    expected = {
        "c_z2_translation": (4, 4),
        "c_z3_translation": (9, 9),
        "c_s3_translation": (36, 36),
        "dual_s3_translation": (36, 36),
        "swap2": (8, 8),
        "c_s3_ad_m2": (16, 24),
        "c_z2_trivial_c2": (2, 4),
        "c_z2_free_plus_trivial": (6, 8),
    }
    for name, act in actions.items():
        rep = galois.saturation_report(act)
        assert (rep.ideal_dimension, rep.full_dimension) == expected[name], name
        assert rep.saturated == (name in FREE)


# -- the equivalence theorem -------------------------------------------------------


def test_freeness_equivalence(actions):
    for name, act in actions.items():
        rep = galois.freeness_equivalence_report(act)
        assert rep.consistent, name
        assert rep.ellwood_free == (name in FREE), name
        assert rep.isometry_defect < 1e-9


# -- crossed product ----------------------------------------------------------------


def test_crossed_product_shapes(actions):
    expected = {
        "c_z2_translation": (2,),
        "c_z3_translation": (3,),
        "c_s3_translation": (6,),
        "dual_s3_translation": (6,),
        "swap2": (2, 2),
        "c_s3_ad_m2": (2, 2, 4),
        "c_z2_trivial_c2": (1, 1, 1, 1),
        "c_z2_free_plus_trivial": (1, 1, 1, 1, 2),
    }
    for name, act in actions.items():
        dec = CrossedProduct(act).decomposition()
        assert dec.block_dims == expected[name], name
        assert dec.residual < 1e-7


def test_dual_rep_is_star_homomorphism(actions):
    act = actions["c_s3_translation"]
    cp = CrossedProduct(act)
    qg = act.qg
    rng = np.random.default_rng(3)
    dual = qg.dual_algebra()
    for _ in range(5):
        om = rng.standard_normal(qg.dim) + 1j * rng.standard_normal(qg.dim)
        nu = rng.standard_normal(qg.dim) + 1j * rng.standard_normal(qg.dim)
        assert np.linalg.norm(
            cp.dual_rep(qg.convolve(om, nu)) - cp.dual_rep(om) @ cp.dual_rep(nu)
        ) < 1e-10
        assert np.linalg.norm(
            cp.dual_rep(dual.star(om)) - cp.dual_rep(om).conj().T
        ) < 1e-10


def test_compressed_representation_intertwines(actions):
    rng = np.random.default_rng(11)
    for name in ["c_s3_translation", "c_s3_ad_m2", "c_z2_free_plus_trivial"]:
        act = actions[name]
        cp = CrossedProduct(act)
        V = cp.isometry
        assert np.linalg.norm(V.conj().T @ V - np.eye(act.A.dim)) < 1e-10
        a = act.A.random_vec(rng)
        assert np.linalg.norm(cp.pi_red(cp.rho_vec(a)) - cp.gns_left(a)) < 1e-9
        eb = cp.jones_gns()
        assert np.linalg.norm(cp.pi_red(cp.jones_vec) - eb) < 1e-9
        assert np.linalg.norm(eb @ eb - eb) < 1e-10
        # the Jones projection compresses to the expectation's GNS projection
        assert abs(np.trace(eb).real - act.fixed_point_basis().shape[1]) < 1e-8
        x, y = act.A.random_vec(rng), act.A.random_vec(rng)
        theta = cp.gns_left(x) @ eb @ cp.gns_left(y).conj().T
        assert np.linalg.norm(cp.pi_red(cp.basic_vec(x, y)) - theta) < 1e-9
        # multiplicativity on the crossed product span
        w1 = cp.basis @ rng.standard_normal(cp.basis.shape[1])
        w2 = cp.basis @ rng.standard_normal(cp.basis.shape[1])
        assert np.linalg.norm(
            cp.pi_red(cp.AM.mul_vec(w1, w2)) - cp.pi_red(w1) @ cp.pi_red(w2)
        ) < 1e-8


def test_free_part_projection_structure(actions):
    for name, act in actions.items():
        cp = CrossedProduct(act)
        P = cp.free_part_projection()
        assert np.linalg.norm(P @ P - P) < 1e-8, name
        ideal_dim = cp.ideal_basis().shape[1]
        assert abs(np.trace(P).real - ideal_dim) < 1e-7, name
        # block structure: compressions to the components add up to P
        total = np.zeros_like(P)
        for pi in range(len(act.regular().irreps)):
            comp = galois.component_projection(act, pi)
            total += comp @ P @ comp
        assert np.linalg.norm(total - P) < 1e-8, name


def test_zeta_rejects_vectors_outside_span(actions):
    act = actions["c_z2_trivial_c2"]
    cp = CrossedProduct(act)
    rng = np.random.default_rng(0)
    w = rng.standard_normal(cp.AM.dim)
    with pytest.raises(ValidationFailure):
        cp.zeta_solve(w[:, None])


# -- range projections --------------------------------------------------------------


def test_range_projection_values(actions):
    expected_rank = {
        ("c_z2_translation", 0): 2,
        ("c_z2_translation", 1): 2,
        ("c_z2_trivial_c2", 0): 2,
        ("c_z2_trivial_c2", 1): 0,
        ("c_z2_free_plus_trivial", 0): 4,
        ("c_z2_free_plus_trivial", 1): 2,
        ("swap2", 0): 4,
        ("swap2", 1): 4,
        ("c_s3_ad_m2", 0): 4,
        ("c_s3_ad_m2", 1): 4,
        ("c_s3_ad_m2", 2): 8,
    }
    for (name, pi), rank in expected_rank.items():
        rep = galois.range_projection_report(actions[name], pi)
        assert rep.rank == rank, (name, pi)
        assert rep.idempotent < 1e-8
        assert rep.agreement_bvalued < 1e-8
        assert rep.agreement_crossed < 1e-8
        assert rep.module_commutation < 1e-8
        assert rep.corner_centrality < 1e-8


def test_range_projection_full_iff_free(actions):
    for name, act in actions.items():
        full = all(
            galois.range_projection_report(act, pi).is_full
            for pi in range(len(act.regular().irreps))
        )
        assert full == (name in FREE), name


def test_range_projection_unknown_method(actions):
    with pytest.raises(ValidationFailure):
        galois.range_projection(actions["c_z2_translation"], 0, "sideways")


# -- projectivity witnesses -----------------------------------------------------------


def test_projectivity_witness_certificates(actions):
    for name, act in actions.items():
        wit = projectivity_witness(act)
        d = wit.diagnostics
        for key in ("idempotent", "selfadjoint", "entries_fixed", "reconstruction",
                    "spectrum_spread"):
            assert d[key] < 1e-9, (name, key, d[key])
        assert d["index_commutes_with_b"] < 1e-9


def test_index_element_for_translations(actions):
    # quasi-basis index of the Haar expectation onto scalars is dim C(G)
    for name in ["c_z2_translation", "c_z3_translation", "c_s3_translation"]:
        act = actions[name]
        wit = projectivity_witness(act)
        expected = act.qg.dim * act.A.unit_vec()
        assert np.linalg.norm(wit.index_element - expected) < 1e-8


def test_index_element_swap2(actions):
    act = actions["swap2"]
    wit = projectivity_witness(act)
    assert np.linalg.norm(wit.index_element - 2.0 * act.A.unit_vec()) < 1e-8


def test_witness_verification_catches_tampering(actions):
    act = actions["c_s3_translation"]
    wit = projectivity_witness(act)
    bad = wit.generators.copy()
    bad[:, 0] *= 1.3
    from dataclasses import replace

    tampered = replace(wit, generators=bad)
    try:
        report = verify_witness(act, tampered)
    except NumericalRankFailure:
        return  # spectrum guard fired, also acceptable
    assert report["reconstruction"] > 1e-3 or report["idempotent"] > 1e-3


def test_witness_spectrum_guard_fires(actions):
    act = actions["c_z2_translation"]
    wit = projectivity_witness(act)
    from dataclasses import replace

    shrunk = replace(wit, generators=wit.generators * np.sqrt(0.5))
    with pytest.raises(NumericalRankFailure):
        verify_witness(act, shrunk)
