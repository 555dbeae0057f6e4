import json

import numpy as np
import pytest

from qact.errors import DegreeOverflow, ValidationFailure
from qact.hopf import corep_defects, orthogonality_defects
from qact.pbw import (
    PresentedQG,
    RewriteRule,
    TruncatedContext,
    coefficient_spaces,
    compute_Q,
    presented_from_dict,
    presented_to_dict,
    strong_left_invariance_check,
    suq2_presentation,
    truncated_haar,
)

QPAR = 0.5
T = 1.0 / (1.0 + QPAR**2)  # value of the invariant state on c c*


@pytest.fixture(scope="module")
def su():
    return suq2_presentation(QPAR)


def z2_presentation():
    one = ()
    rules = [
        RewriteRule(("g*",), ((1.0, ("g",)),)),
        RewriteRule(("g", "g"), ((1.0, one),)),
    ]
    return PresentedQG(
        ["g"],
        rules,
        coproduct={"g": [(1.0, ("g",), ("g",))]},
        counit={"g": 1.0},
        antipode={"g": {("g",): 1.0}},
        fundamental=[[{(): 1.0}, {}], [{}, {("g",): 1.0}]],
        truncation=3,
        name="z2",
    )


def z3_presentation():
    one = ()
    rules = [
        RewriteRule(("w*",), ((1.0, ("w", "w")),)),
        RewriteRule(("w", "w", "w"), ((1.0, one),)),
    ]
    return PresentedQG(
        ["w"],
        rules,
        coproduct={"w": [(1.0, ("w",), ("w",))]},
        counit={"w": 1.0},
        antipode={"w": {("w", "w"): 1.0}},
        fundamental=[
            [{(): 1.0}, {}, {}],
            [{}, {("w",): 1.0}, {}],
            [{}, {}, {("w", "w"): 1.0}],
        ],
        truncation=3,
        name="z3",
    )


def lc_close(x, y, tol=1e-12):
    keys = set(x) | set(y)
    return max((abs(x.get(k, 0j) - y.get(k, 0j)) for k in keys), default=0.0) <= tol


# -- rewriting ----------------------------------------------------------


def test_normal_form_swaps_letters(su):
    nf_ca = su.normal_form("ca")
    nf_ac = su.normal_form("ac")
    assert nf_ca == {("a", "c"): QPAR}
    assert set(nf_ac) == {("a", "c")}
    # the two orderings agree up to exactly one factor of the parameter
    assert abs(nf_ca[("a", "c")] - QPAR * nf_ac[("a", "c")]) == 0.0


def test_normal_form_empty_word(su):
    assert su.normal_form("") == {(): 1.0 + 0j}


def test_relations_collapse_to_zero(su):
    assert su.normal_form({"a* a": 1.0, "c c*": QPAR**2, "": -1.0}) == {}
    assert su.normal_form({"a a*": 1.0, "c c*": 1.0, "": -1.0}) == {}


def test_normal_form_idempotent(su):
    rng = np.random.default_rng(3)
    letters = list(su.letters)
    for _ in range(25):
        w = tuple(rng.choice(letters) for _ in range(rng.integers(0, 7)))
        lc = su.normal_form(w)
        for nw in lc:
            assert su.is_normal(nw)
        assert lc_close(su.normal_form(lc), lc)


def test_parse_variants(su):
    assert su.parse("c a*") == su.parse("ca*") == su.parse(("c", "a*"))
    with pytest.raises(ValidationFailure):
        su.parse("xY")


def test_degree_overflow(su):
    with pytest.raises(DegreeOverflow):
        su.normal_form("c" * 13)
    x = su.parse("c" * 7)
    with pytest.raises(DegreeOverflow):
        su.mul(x, x)


def test_basis_counts(su):
    # dimension of the span of words of degree <= d is sum of squares
    # 1 + 4 + 9 + ... over the blocks that fit
    assert len(su.basis(2)) == 14
    assert len(su.basis(3)) == 30
    assert len(su.basis(4)) == 55
    assert len(su.basis(6)) == 140
    assert su.basis(4)[:14] == su.basis(2)  # degree-major order nests


def test_returned_combinations_are_fresh(su):
    lc = su.normal_form("ca")
    lc[("a", "c")] = 99.0
    assert su.normal_form("ca") == {("a", "c"): QPAR}


# -- structural axioms ---------------------------------------------------


def test_presentation_defects(su):
    rep = su.verify(tol=1e-9)
    assert rep.ok, rep.residuals
    assert max(rep.residuals.values()) < 1e-12


def test_star_involution_and_antimultiplicativity(su):
    rng = np.random.default_rng(5)
    words = su.basis(3)

    def rand_elem():
        out = {}
        for _ in range(4):
            w = words[rng.integers(len(words))]
            out[w] = complex(rng.standard_normal(), rng.standard_normal())
        return su.parse(out)

    for _ in range(5):
        x, y = rand_elem(), rand_elem()
        assert lc_close(su.star(su.star(x)), x, 1e-10)
        assert lc_close(su.star(su.mul(x, y)), su.mul(su.star(y), su.star(x)), 1e-10)


def test_coproduct_is_multiplicative(su):
    for sx, sy in [("a", "c"), ("ac", "c*"), ("a*", "a")]:
        x, y = su.parse(sx), su.parse(sy)
        got = su.coproduct(su.mul(x, y))
        want = {}
        for (w1, w2), c in su.coproduct(x).items():
            for (v1, v2), cc in su.coproduct(y).items():
                for p1, c1 in su.mul({w1: 1.0}, {v1: 1.0}).items():
                    for p2, c2 in su.mul({w2: 1.0}, {v2: 1.0}).items():
                        key = (p1, p2)
                        want[key] = want.get(key, 0j) + c * cc * c1 * c2
        keys = set(got) | set(want)
        assert max(abs(got.get(k, 0j) - want.get(k, 0j)) for k in keys) < 1e-12


def test_counit_is_multiplicative(su):
    rng = np.random.default_rng(7)
    words = su.basis(3)
    for _ in range(5):
        w1 = words[rng.integers(len(words))]
        w2 = words[rng.integers(len(words))]
        x, y = su.parse({w1: 1.2}), su.parse({w2: 0.7 - 0.3j})
        assert abs(su.counit_value(su.mul(x, y)) - su.counit_value(x) * su.counit_value(y)) < 1e-12


def test_antipode_values(su):
    assert lc_close(su.antipode("a"), {("a*",): 1.0})
    assert lc_close(su.antipode("c"), {("c",): -1.0 / QPAR})
    assert lc_close(su.antipode("c*"), {("c*",): -QPAR})
    # antihomomorphism
    assert lc_close(su.antipode("ac"), su.mul(su.antipode("c"), su.antipode("a")))


def test_antipode_inverts_fundamental(su):
    u = su.fundamental
    for i in range(2):
        for j in range(2):
            acc = {}
            for k in range(2):
                for w, c in su.mul(su.antipode(u[i][k]), u[k][j]).items():
                    acc[w] = acc.get(w, 0j) + c
            want = su.unit() if i == j else {}
            assert lc_close(acc, want, 1e-12)


# -- invariant state -----------------------------------------------------


def test_haar_basic_values(su):
    h = truncated_haar(su, 2)
    assert abs(h(su.unit()) - 1.0) < 1e-12
    for g in ["a", "a*", "c", "c*", "ac"]:
        assert abs(h(g)) < 1e-10
    assert abs(h("c c*") - T) < 1e-10
    assert abs(h("a* a") - T) < 1e-10
    assert abs(h("a a*") - QPAR**2 * T) < 1e-10


def test_haar_cross_degree_consistency(su):
    h2 = truncated_haar(su, 2)
    h4 = truncated_haar(su, 4)
    for w in su.basis(2):
        assert abs(h2({w: 1.0}) - h4({w: 1.0})) < 1e-10


def test_haar_is_positive(su):
    h4 = truncated_haar(su, 4)
    words = su.basis(2)
    G = np.zeros((len(words), len(words)), dtype=complex)
    for i, wi in enumerate(words):
        for j, wj in enumerate(words):
            G[i, j] = h4(su.mul(su.star({wi: 1.0}), {wj: 1.0}))
    vals = np.linalg.eigvalsh(0.5 * (G + G.conj().T))
    assert vals[0] > -1e-10


def test_haar_invariance_residual(su):
    h4 = truncated_haar(su, 4)
    rng = np.random.default_rng(11)
    words = su.basis(4)
    for _ in range(3):
        x = {}
        for _ in range(5):
            w = words[rng.integers(len(words))]
            x[w] = complex(rng.standard_normal(), rng.standard_normal())
        x = su.parse(x)
        acc = {}
        for (w1, w2), c in su.coproduct(x).items():
            acc[w1] = acc.get(w1, 0j) + c * h4({w2: 1.0})
        want = {(): h4(x)}
        keys = set(acc) | set(want)
        assert max(abs(acc.get(k, 0j) - want.get(k, 0j)) for k in keys) < 1e-9


def test_haar_domain_overflow(su):
    h = truncated_haar(su, 2)
    with pytest.raises(DegreeOverflow):
        h("c c c")


def test_haar_not_unique_raises():
    # a deliberately broken coproduct for which invariance says nothing
    # about the generator, so the solution space is two-dimensional
    bad = PresentedQG(
        ["g"],
        [RewriteRule(("g*",), ((1.0, ("g",)),)),
         RewriteRule(("g", "g"), ((1.0, ()),))],
        coproduct={"g": [(1.0, (), ("g",))]},
        counit={"g": 1.0},
        antipode={"g": {("g",): 1.0}},
        fundamental=[[{("g",): 1.0}]],
        truncation=2,
    )
    with pytest.raises(ValidationFailure, match="unique"):
        truncated_haar(bad, 1)


# -- deformation matrix --------------------------------------------------


def test_q_matrix_of_fundamental(su):
    r = compute_Q(su)
    assert np.allclose(r.Q, np.diag([1.0 / QPAR, QPAR]), atol=1e-8)
    assert abs(r.q_dimension - (QPAR + 1.0 / QPAR)) < 1e-9
    assert r.trace_defect < 1e-9
    assert r.hermitian_defect < 1e-10


def test_orthogonality_displays_of_fundamental(su):
    ctx = TruncatedContext(su, 2)
    u = ctx.fundamental_corep()
    r = compute_Q(su, context=ctx)
    d = orthogonality_defects(ctx, u, r.Q)
    assert max(d.values()) < 1e-9, d
    cd = corep_defects(ctx, u)
    assert max(cd.values()) < 1e-12, cd


def test_q_dimension_exceeds_dimension(su):
    # strictly deformed: quantum dimension is strictly above the vector
    # space dimension; the undeformed matrix has it equal
    r = compute_Q(su)
    assert r.q_dimension > 2.0 + 0.4
    z2 = z2_presentation()
    rz = compute_Q(z2)
    assert np.allclose(rz.Q, np.eye(2), atol=1e-9)
    assert abs(rz.q_dimension - 2.0) < 1e-9


# -- coefficient blocks --------------------------------------------------


@pytest.fixture(scope="module")
def su_spaces(su):
    return coefficient_spaces(su, 2)


def test_block_dimensions_and_labels(su, su_spaces):
    assert [s.dim for s in su_spaces] == [1, 2, 3]
    assert [s.label for s in su_spaces] == ["pi0", "pi1", "pi2"]
    assert su_spaces[0].is_trivial
    assert lc_close(su_spaces[0].corep[0][0], su.unit(), 1e-8)
    assert sum(s.dim**2 for s in su_spaces) == len(su.basis(2))


def test_block_defects(su_spaces):
    for s in su_spaces:
        assert max(s.defects.values()) < 1e-8, (s.label, s.defects)


def test_block_characters(su, su_spaces):
    chi_half = su.parse({"a": 1.0, "a*": 1.0})
    assert lc_close(su_spaces[1].character(), chi_half, 1e-8)
    chi_one = su.parse({"aa": 1.0, "a*a*": 1.0, "": 1.0,
                        "c c*": -(1.0 + QPAR**2)})
    assert lc_close(su_spaces[2].character(), chi_one, 1e-8)


def test_haar_kills_nontrivial_blocks(su, su_spaces):
    h = truncated_haar(su, 2)
    for s in su_spaces[1:]:
        for e in s.basis:
            assert abs(h(e)) < 1e-9


def test_spin_one_q_matrix(su, su_spaces):
    r = compute_Q(su, su_spaces[2])
    want_qdim = (QPAR + 1.0 / QPAR) ** 2 - 1.0
    assert abs(r.q_dimension - want_qdim) < 1e-8
    eigs = np.sort(np.linalg.eigvalsh(r.Q))
    assert np.allclose(eigs, [QPAR**2, 1.0, 1.0 / QPAR**2], atol=1e-7)


def test_block_degree_guard(su):
    with pytest.raises(DegreeOverflow):
        coefficient_spaces(su, 7)


# -- strong invariance ---------------------------------------------------


def test_strong_left_invariance_trivial(su):
    assert strong_left_invariance_check(su, su.unit(), su.unit()) < 1e-14


def test_strong_left_invariance_on_generators(su):
    assert strong_left_invariance_check(su, "c*", "c") < 1e-12
    assert strong_left_invariance_check(su, "a", "a*") < 1e-12
    rng = np.random.default_rng(13)
    gens = ["a", "a*", "c", "c*"]
    for _ in range(4):
        g = {(l,): complex(*rng.standard_normal(2)) for l in gens}
        h = {(l,): complex(*rng.standard_normal(2)) for l in gens}
        assert strong_left_invariance_check(su, g, h) < 1e-8


# -- finite groups as presentations --------------------------------------


def test_z2_presented():
    z2 = z2_presentation()
    rep = z2.verify(tol=1e-9)
    assert rep.ok, rep.residuals
    spaces = coefficient_spaces(z2, 1)
    assert [s.dim for s in spaces] == [1, 1]
    assert spaces[0].is_trivial and not spaces[1].is_trivial
    assert lc_close(spaces[1].character(), {("g",): 1.0}, 1e-8)
    h = truncated_haar(z2, 1)
    assert abs(h("g")) < 1e-10 and abs(h("") - 1.0) < 1e-12


def test_z3_presented():
    z3 = z3_presentation()
    rep = z3.verify(tol=1e-9)
    assert rep.ok, rep.residuals
    # the adjoint letter is eliminated by a degree-raising rule, and the
    # antipode sends the generator to its square
    assert lc_close(z3.normal_form("w*"), {("w", "w"): 1.0})
    assert lc_close(z3.antipode("w"), {("w", "w"): 1.0})
    spaces = coefficient_spaces(z3, 2)
    assert [s.dim for s in spaces] == [1, 1, 1]
    chars = sorted(tuple(sorted(s.character())) for s in spaces)
    assert chars == [((),), (("w",),), (("w", "w"),)]
    h = truncated_haar(z3, 2)
    assert abs(h("w")) < 1e-10 and abs(h("ww")) < 1e-10
    r = compute_Q(z3)
    assert np.allclose(r.Q, np.eye(3), atol=1e-9)
    assert abs(r.q_dimension - 3.0) < 1e-9


# -- truncation windows --------------------------------------------------


def test_small_truncation_window():
    small = suq2_presentation(QPAR, truncation=2)
    assert len(small.basis(4)) == 55
    with pytest.raises(DegreeOverflow):
        small.normal_form("c" * 5)
    h = truncated_haar(small, 2)
    assert abs(h("c c*") - T) < 1e-10


def test_bad_parameter_rejected():
    for bad in [0.0, 1.0, 1.2, -0.5]:
        with pytest.raises(ValidationFailure):
            suq2_presentation(bad)


# -- serialization -------------------------------------------------------


def test_dict_roundtrip(su):
    data = presented_to_dict(su)
    json.dumps(data)  # JSON-safe payload
    back = presented_from_dict(data)
    assert back.normal_form("ca") == {("a", "c"): QPAR}
    rep = back.verify(tol=1e-9)
    assert rep.ok, rep.residuals
    assert abs(truncated_haar(back, 2)("c c*") - T) < 1e-10


def test_dict_roundtrip_z2():
    z2 = z2_presentation()
    back = presented_from_dict(presented_to_dict(z2))
    assert back.verify(tol=1e-9).ok
    assert lc_close(back.normal_form("g*"), {("g",): 1.0})


def test_dict_kind_guard():
    with pytest.raises(ValidationFailure):
        presented_from_dict({"kind": "finite"})
