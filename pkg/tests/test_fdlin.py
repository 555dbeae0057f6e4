import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qact.errors import ShapeMismatch, ValidationFailure
from qact.fdlin import (
    FdCStarAlgebra,
    assert_same_algebra,
    contract_left,
    contract_right,
    tensor_map,
)

RNG = np.random.default_rng(20240817)


def random_alg(rng, max_blocks=3, max_dim=3):
    k = int(rng.integers(1, max_blocks + 1))
    return FdCStarAlgebra([int(rng.integers(1, max_dim + 1)) for _ in range(k)])


def test_block_roundtrip():
    A = FdCStarAlgebra([2, 1, 3])
    x = A.random_vec(RNG)
    assert np.allclose(A.from_blocks(A.to_blocks(x)), x)


def test_mul_matches_direct_matmul():
    A = FdCStarAlgebra([2, 3])
    for _ in range(20):
        x, y = A.random_vec(RNG), A.random_vec(RNG)
        got = A.to_blocks(A.mul_vec(x, y))
        want = [a @ b for a, b in zip(A.to_blocks(x), A.to_blocks(y))]
        for g, w in zip(got, want):
            assert np.allclose(g, w)


def test_unit_and_star():
    A = FdCStarAlgebra([3, 2])
    one = A.unit_vec()
    x = A.random_vec(RNG)
    assert np.allclose(A.mul_vec(one, x), x)
    assert np.allclose(A.mul_vec(x, one), x)
    assert np.allclose(A.star_vec(A.star_vec(x)), x)
    y = A.random_vec(RNG)
    # (xy)* = y* x*
    assert np.allclose(
        A.star_vec(A.mul_vec(x, y)), A.mul_vec(A.star_vec(y), A.star_vec(x))
    )


def test_cstar_identity_random_elements():
    rng = np.random.default_rng(7)
    for _ in range(100):
        A = random_alg(rng)
        x = A.random_vec(rng)
        lhs = A.operator_norm_vec(A.mul_vec(A.star_vec(x), x))
        rhs = A.operator_norm_vec(x) ** 2
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


def test_operator_norm_oracles():
    A = FdCStarAlgebra([2])
    assert A.operator_norm_vec(A.unit_vec()) == pytest.approx(1.0)
    d = A.from_blocks([np.diag([3.0, -4.0])])
    assert A.operator_norm_vec(d) == pytest.approx(4.0)


def test_positivity():
    A = FdCStarAlgebra([2, 1])
    x = A.random_vec(RNG)
    sq = A.mul_vec(A.star_vec(x), x)
    ok, wit = A.is_positive_vec(sq)
    assert ok and wit is None

    neg = A.from_blocks([np.diag([1.0, -0.5]), np.array([[2.0]])])
    ok, wit = A.is_positive_vec(neg)
    assert not ok
    assert wit.block == 0
    assert wit.eigenvalue == pytest.approx(-0.5)

    nonsa = A.from_blocks([np.array([[0, 1], [0, 0]], dtype=complex), np.eye(1)])
    ok, wit = A.is_positive_vec(nonsa)
    assert not ok and wit.selfadjoint_defect > 0.5


def test_trace_state():
    A = FdCStarAlgebra([2, 1])
    x = A.from_blocks([np.diag([1.0, 2.0]), np.array([[6.0]])])
    assert A.trace_state(x) == pytest.approx(3.0)
    t = A.trace_state_vec()
    assert t @ x == pytest.approx(3.0)
    assert A.trace_state(A.unit_vec()) == pytest.approx(1.0)


def test_left_right_mult_matrices():
    A = FdCStarAlgebra([2, 3])
    x, y = A.random_vec(RNG), A.random_vec(RNG)
    assert np.allclose(A.left_mult(x) @ y, A.mul_vec(x, y))
    assert np.allclose(A.right_mult(x) @ y, A.mul_vec(y, x))
    # left and right multiplications commute
    L, R = A.left_mult(x), A.right_mult(y)
    assert np.allclose(L @ R, R @ L)


def test_star_matrix():
    A = FdCStarAlgebra.tensor(FdCStarAlgebra([2, 1]), FdCStarAlgebra([2]))
    K = A.star_matrix()
    x = A.random_vec(RNG)
    assert np.allclose(K @ x.conj(), A.star_vec(x))


def test_mul_matrix_and_guard():
    A = FdCStarAlgebra([2, 1])
    M = A.mul_matrix()
    x, y = A.random_vec(RNG), A.random_vec(RNG)
    assert np.allclose(M @ np.kron(x, y), A.mul_vec(x, y))
    big = FdCStarAlgebra([9])
    with pytest.raises(ValidationFailure):
        big.mul_matrix()


def test_tensor_elements_are_kron():
    A1 = FdCStarAlgebra([2, 1])
    A2 = FdCStarAlgebra([3])
    T = FdCStarAlgebra.tensor(A1, A2)
    assert T.block_dims == (6, 3)
    x, y = A1.random_vec(RNG), A2.random_vec(RNG)
    xt = np.kron(x, A2.unit_vec())
    yt = np.kron(A1.unit_vec(), y)
    # (x (x) 1)(1 (x) y) = x (x) y, comparing against block-level Kronecker
    prod = T.mul_vec(xt, yt)
    assert np.allclose(prod, np.kron(x, y))
    assert np.allclose(prod, T.mul_vec(yt, xt))
    xb, yb = A1.to_blocks(x), A2.to_blocks(y)
    want = [np.kron(a, b) for a in xb for b in yb]
    for g, w in zip(T.to_blocks(prod), want):
        assert np.allclose(g, w)


def test_tensor_mul_is_factorwise():
    A1 = FdCStarAlgebra([2])
    A2 = FdCStarAlgebra([1, 2])
    T = FdCStarAlgebra.tensor(A1, A2)
    x1, x2 = A1.random_vec(RNG), A1.random_vec(RNG)
    y1, y2 = A2.random_vec(RNG), A2.random_vec(RNG)
    lhs = T.mul_vec(np.kron(x1, y1), np.kron(x2, y2))
    rhs = np.kron(A1.mul_vec(x1, x2), A2.mul_vec(y1, y2))
    assert np.allclose(lhs, rhs)
    assert np.allclose(T.star_vec(np.kron(x1, y1)), np.kron(A1.star_vec(x1), A2.star_vec(y1)))


def test_tensor_associativity_exact():
    A = FdCStarAlgebra([2, 1])
    B = FdCStarAlgebra([2])
    C = FdCStarAlgebra([1, 1])
    left = FdCStarAlgebra.tensor(FdCStarAlgebra.tensor(A, B), C)
    right = FdCStarAlgebra.tensor(A, FdCStarAlgebra.tensor(B, C))
    assert left.block_dims == right.block_dims
    assert np.array_equal(left.mat_perm, right.mat_perm)
    assert left == right


def test_tensor_map_is_kron():
    A1 = FdCStarAlgebra([2])
    A2 = FdCStarAlgebra([2, 1])
    T = FdCStarAlgebra.tensor(A1, A2)
    rng = np.random.default_rng(3)
    F = rng.standard_normal((A1.dim, A1.dim)) + 1j * rng.standard_normal((A1.dim, A1.dim))
    G = rng.standard_normal((A2.dim, A2.dim)) + 1j * rng.standard_normal((A2.dim, A2.dim))
    x, y = A1.random_vec(rng), A2.random_vec(rng)
    assert np.allclose(tensor_map(F, G) @ np.kron(x, y), np.kron(F @ x, G @ y))
    assert tensor_map(F, G).shape == (T.dim, T.dim)


def test_contractions():
    A1 = FdCStarAlgebra([2])
    A2 = FdCStarAlgebra([1, 1])
    x, y = A1.random_vec(RNG), A2.random_vec(RNG)
    f2 = A2.trace_state_vec()
    f1 = A1.trace_state_vec()
    z = np.kron(x, y)
    assert np.allclose(contract_right(z, A1.dim, A2.dim, f2), (f2 @ y) * x)
    assert np.allclose(contract_left(z, A1.dim, A2.dim, f1), (f1 @ x) * y)


def test_direct_sum():
    A1 = FdCStarAlgebra([2])
    A2 = FdCStarAlgebra([1, 1])
    S = FdCStarAlgebra.direct_sum(A1, A2)
    assert S.block_dims == (2, 1, 1)
    x1, y1 = A1.random_vec(RNG), A1.random_vec(RNG)
    x2, y2 = A2.random_vec(RNG), A2.random_vec(RNG)
    x = np.concatenate([x1, x2])
    y = np.concatenate([y1, y2])
    assert np.allclose(
        S.mul_vec(x, y), np.concatenate([A1.mul_vec(x1, y1), A2.mul_vec(x2, y2)])
    )


def test_shape_and_mismatch_errors():
    A = FdCStarAlgebra([2])
    B = FdCStarAlgebra([1, 1])
    with pytest.raises(ShapeMismatch):
        A.mul_vec(np.zeros(3), np.zeros(4))
    with pytest.raises(ValidationFailure):
        FdCStarAlgebra([])
    with pytest.raises(Exception):
        assert_same_algebra(A, B)
    assert_same_algebra(A, FdCStarAlgebra([2]))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(min_value=1, max_value=3), min_size=1, max_size=3), st.integers(0, 2**32 - 1))
def test_algebra_laws_property(dims, seed):
    A = FdCStarAlgebra(dims)
    rng = np.random.default_rng(seed)
    x, y, z = (A.random_vec(rng) for _ in range(3))
    assert np.allclose(A.mul_vec(A.mul_vec(x, y), z), A.mul_vec(x, A.mul_vec(y, z)))
    assert np.allclose(A.mul_vec(x + y, z), A.mul_vec(x, z) + A.mul_vec(y, z))
    nx = A.operator_norm_vec(x)
    ny = A.operator_norm_vec(y)
    assert A.operator_norm_vec(A.mul_vec(x, y)) <= nx * ny + 1e-9
    assert A.operator_norm_vec(A.star_vec(x)) == pytest.approx(nx)
