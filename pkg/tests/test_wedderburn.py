import itertools

import numpy as np
import pytest

from qact.errors import NumericalRankFailure, ValidationFailure
from qact.fdlin import FdCStarAlgebra
from qact.wedderburn import AbstractFdAlgebra, WedderburnDecomposition, subspace_basis, wedderburn

RNG = np.random.default_rng(11)


def perm_group_algebra(perms):
    """Group algebra of a permutation group, basis indexed by the group list."""
    n = len(perms)
    index = {p: i for i, p in enumerate(perms)}

    def compose(p, q):  # (p o q)(i) = p[q[i]]
        return tuple(p[j] for j in q)

    m = np.zeros((n, n, n), dtype=complex)
    star = np.zeros((n, n), dtype=complex)
    for i, p in enumerate(perms):
        for j, q in enumerate(perms):
            m[index[compose(p, q)], i, j] = 1.0
        inv = tuple(np.argsort(p))
        star[index[inv], i] = 1.0
    unit = np.zeros(n, dtype=complex)
    unit[index[tuple(range(len(perms[0])))]] = 1.0
    return AbstractFdAlgebra(m, star, unit)


def check_iso(alg, dec, rng, trials=10):
    for _ in range(trials):
        x = rng.standard_normal(alg.dim) + 1j * rng.standard_normal(alg.dim)
        y = rng.standard_normal(alg.dim) + 1j * rng.standard_normal(alg.dim)
        assert np.allclose(
            dec.iso @ alg.mul(x, y),
            dec.target.mul_vec(dec.iso @ x, dec.iso @ y),
            atol=1e-8,
        )
        assert np.allclose(dec.iso @ alg.star(x), dec.target.star_vec(dec.iso @ x), atol=1e-8)
        assert np.allclose(dec.iso_inv @ (dec.iso @ x), x, atol=1e-8)
    assert np.allclose(dec.iso @ alg.unit, dec.target.unit_vec(), atol=1e-8)


def test_s3_group_algebra_blocks():
    perms = list(itertools.permutations(range(3)))
    alg = perm_group_algebra(perms)
    dec = wedderburn(alg, seed=5)
    assert dec.block_dims == (1, 1, 2)
    check_iso(alg, dec, np.random.default_rng(2))


def test_full_matrix_algebra_single_block():
    M3 = FdCStarAlgebra([3])
    alg = AbstractFdAlgebra.from_subspace(M3, np.eye(9, dtype=complex))
    dec = wedderburn(alg, seed=1)
    assert dec.block_dims == (3,)
    check_iso(alg, dec, np.random.default_rng(3))


def test_commutative_algebra_all_ones():
    C4 = FdCStarAlgebra([1, 1, 1, 1])
    alg = AbstractFdAlgebra.from_subspace(C4, np.eye(4, dtype=complex))
    dec = wedderburn(alg, seed=0)
    assert dec.block_dims == (1, 1, 1, 1)


def test_scrambled_basis_recovered():
    # C + M_2 seen through a random invertible basis change
    A = FdCStarAlgebra([1, 2])
    rng = np.random.default_rng(4)
    T = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    alg = AbstractFdAlgebra.from_subspace(A, T @ np.eye(5))
    dec = wedderburn(alg, seed=9)
    assert dec.block_dims == (1, 2)
    check_iso(alg, dec, rng)


def test_proper_subalgebra_of_matrices():
    # diagonal 2x2 matrices inside M_2: two one-dimensional blocks
    M2 = FdCStarAlgebra([2])
    basis = np.zeros((4, 2), dtype=complex)
    basis[0, 0] = 1.0  # e_11
    basis[3, 1] = 1.0  # e_22
    alg = AbstractFdAlgebra.from_subspace(M2, basis)
    dec = wedderburn(alg, seed=0)
    assert dec.block_dims == (1, 1)


def test_from_subspace_rejects_non_closed():
    M2 = FdCStarAlgebra([2])
    basis = np.zeros((4, 2), dtype=complex)
    basis[0, 0] = 1.0  # e_11
    basis[1, 1] = 1.0  # e_12, not closed under star
    with pytest.raises(ValidationFailure):
        AbstractFdAlgebra.from_subspace(M2, basis)


def test_validate_rejects_broken_star():
    C2 = FdCStarAlgebra([1, 1])
    m = np.zeros((2, 2, 2), dtype=complex)
    m[0, 0, 0] = m[1, 1, 1] = 1.0
    bad_star = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)  # swaps the two points
    with pytest.raises(ValidationFailure):
        # swapping star breaks positivity of the trace form downstream
        alg = AbstractFdAlgebra(m, bad_star, np.ones(2, dtype=complex))
        wedderburn(alg)


def test_subspace_basis_rank():
    rng = np.random.default_rng(0)
    v = rng.standard_normal((6, 2))
    mat = np.column_stack([v[:, 0], v[:, 1], v[:, 0] + v[:, 1]])
    assert subspace_basis(mat).shape == (6, 2)


def test_tensor_product_blocks():
    # (C + M_2) tensor M_2 has blocks 2 and 4
    A = FdCStarAlgebra.tensor(FdCStarAlgebra([1, 2]), FdCStarAlgebra([2]))
    alg = AbstractFdAlgebra.from_subspace(A, np.eye(A.dim, dtype=complex))
    dec = wedderburn(alg, seed=3)
    assert dec.block_dims == (2, 4)
    check_iso(alg, dec, np.random.default_rng(8), trials=4)
