import numpy as np
import pytest

from qact.action import (
    Coaction,
    conjugate_partners,
    fusion_multiplicities,
    module_product_defect,
    pimsner_popa_check,
    translation_action,
)
from qact.examples import finite_action, finite_action_names, quantum_group


@pytest.fixture(scope="module")
def acts():
    return {name: finite_action(name) for name in finite_action_names()}


def test_all_bundled_actions_satisfy_axioms(acts):
    for name, act in acts.items():
        rep = act.verify()
        assert rep.ok, (name, rep.residuals)


def test_translation_expectation_is_invariant_state(acts):
    act = acts["c_s3_translation"]
    EB = act.conditional_expectation()
    want = np.outer(act.A.unit_vec(), act.qg.haar)
    assert np.allclose(EB, want, atol=1e-10)
    assert act.is_ergodic()


def test_expectation_properties(acts):
    for name in ("c_s3_translation", "swap2", "c_z2_free_plus_trivial", "dual_s3_translation"):
        defs = acts[name].expectation_defects()
        assert max(defs.values()) < 1e-8, (name, defs)


def test_fixed_point_dimensions(acts):
    assert acts["c_z2_translation"].fixed_point_basis().shape[1] == 1
    assert acts["dual_s3_translation"].fixed_point_basis().shape[1] == 1
    assert acts["swap2"].fixed_point_basis().shape[1] == 2
    assert acts["c_z2_trivial_c2"].fixed_point_basis().shape[1] == 2
    assert acts["c_z2_free_plus_trivial"].fixed_point_basis().shape[1] == 3
    assert acts["c_s3_ad_m2"].is_ergodic()


def test_fixed_point_blocks(acts):
    assert acts["swap2"].fixed_point_blocks().block_dims == (1, 1)
    assert acts["c_z2_free_plus_trivial"].fixed_point_blocks().block_dims == (1, 1, 1)


def test_isotypic_dimensions_translation(acts):
    act = acts["c_s3_translation"]
    dims = [act.isotypic_dimension(pi) for pi in range(3)]
    ns = [u.shape[0] for u in act.regular().irreps]
    assert sorted(dims) == sorted(n * n for n in ns)
    assert sum(dims) == act.A.dim


def test_isotypic_dimensions_other(acts):
    act = acts["c_z2_trivial_c2"]
    triv = act.regular().trivial_index()
    sign = 1 - triv
    assert act.isotypic_dimension(triv) == 2
    assert act.isotypic_dimension(sign) == 0
    assert act.isotypic_basis(sign).shape == (2, 0)

    swap = acts["swap2"]
    t2 = swap.regular().trivial_index()
    assert swap.isotypic_dimension(t2) == 2
    assert swap.isotypic_dimension(1 - t2) == 2


def test_spectral_defects(acts):
    for name in ("c_s3_translation", "swap2", "c_z2_free_plus_trivial",
                  "dual_s3_translation", "c_s3_ad_m2"):
        defs = acts[name].spectral_defects()
        assert max(defs.values()) < 1e-8, (name, defs)


def test_coefficient_support(acts):
    act = acts["c_s3_translation"]
    for pi in range(3):
        assert act.coefficient_support_defect(pi) < 1e-8


def test_conjugate_partners_z3(acts):
    act = acts["c_z3_translation"]
    partners = conjugate_partners(act)
    assert all(d < 1e-8 for _, d in partners)
    perm = [p for p, _ in partners]
    assert sorted(perm) == [0, 1, 2]
    triv = act.regular().trivial_index()
    assert perm[triv] == triv
    others = [p for i, p in enumerate(perm) if i != triv]
    # the two nontrivial characters of Z_3 are swapped by conjugation
    assert set(others) == {i for i in range(3) if i != triv}
    assert all(perm[p] != p for p in range(3) if p != triv)


def test_conjugate_partners_s3(acts):
    # all irreducible components of S_3 are self-conjugate
    partners = conjugate_partners(acts["c_s3_translation"])
    assert all(d < 1e-8 for _, d in partners)
    assert [p for p, _ in partners] == [0, 1, 2]


def test_fusion_s3():
    qg = quantum_group("c_s3")
    mult = fusion_multiplicities(qg)
    assert np.allclose(mult, np.round(mult), atol=1e-8)
    dec = qg.decompose_regular(seed=0)
    two = next(i for i, u in enumerate(dec.irreps) if u.shape[0] == 2)
    ones = [i for i in range(3) if i != two]
    # 2 (x) 2 = 1 + 1' + 2
    got = sorted(int(round(mult[two, two, c])) for c in range(3))
    assert got == [1, 1, 1]
    for c in ones:
        assert int(round(mult[c, c, dec.trivial_index()])) == 1


def test_module_product_inclusion(acts):
    for name in ("c_s3_translation", "swap2", "c_z2_free_plus_trivial"):
        assert module_product_defect(acts[name]) < 1e-8, name


def test_equivariant_families_translation(acts):
    act = acts["c_s3_translation"]
    u2 = next(u for u in act.regular().irreps if u.shape[0] == 2)
    fams = act.equivariant_families(u2)
    assert fams.shape[0] == 2  # multiplicity inside C(S_3) equals dim
    # each family really is equivariant
    dA, dG = act.A.dim, act.qg.dim
    for s in range(fams.shape[0]):
        for j in range(2):
            lhs = act.alpha @ fams[s, j]
            rhs = sum(np.kron(fams[s, k], u2[k, j]) for k in range(2))
            assert np.linalg.norm(lhs - rhs) < 1e-9
    gram, defect = act.equivariant_gram(fams)
    assert defect < 1e-9
    # ergodic action: Gram entries are scalars
    one = act.A.unit_vec()
    for s in range(2):
        for t in range(2):
            g = gram[s, t]
            scal = (one @ g) / (one @ one)
            assert np.linalg.norm(g - scal * one) < 1e-9


def test_equivariant_families_trivial_component(acts):
    act = acts["c_z2_trivial_c2"]
    sign = 1 - act.regular().trivial_index()
    u = act.regular().irreps[sign]
    fams = act.equivariant_families(u)
    assert fams.shape[0] == 0


def test_pimsner_popa(acts):
    for name in ("c_s3_translation", "c_z2_translation", "dual_s3_translation",
                  "swap2", "c_z2_trivial_c2", "c_z2_free_plus_trivial", "c_s3_ad_m2"):
        rep = pimsner_popa_check(acts[name], trials=60, seed=3)
        assert rep.ok, (name, rep.min_slack)
    # translation attains the bound: some trial comes close to zero slack
    rep = pimsner_popa_check(acts["c_z2_translation"], trials=200, seed=1)
    assert rep.min_slack < 0.2


def test_ad_action_is_ergodic_for_irreducible(acts):
    act = acts["c_s3_ad_m2"]
    assert act.is_ergodic()
    assert act.verify().ok
    dims = [act.isotypic_dimension(pi) for pi in range(3)]
    assert sum(dims) == 4
    two = next(i for i, u in enumerate(act.regular().irreps) if u.shape[0] == 2)
    assert dims[act.regular().trivial_index()] == 1
    assert dims[two] == 2


def test_direct_sum_blockstructure(acts):
    act = acts["c_z2_free_plus_trivial"]
    assert act.A.block_dims == (1, 1, 1, 1)
    assert act.verify().ok
