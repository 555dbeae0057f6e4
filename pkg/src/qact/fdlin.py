"""Finite-dimensional C*-algebras as multi-matrix blocks.

An algebra ``A = M_{n_1} + ... + M_{n_r}`` is stored by its block dimensions.
Elements live in a flat complex coordinate vector of length ``sum(n_i^2)``.

Two coordinate systems are in play:

* *mat* coordinates: blocks concatenated, each block row-major.  This is what
  ``to_blocks`` / ``from_blocks`` convert to and from.
* *canonical* coordinates: what every public function consumes and returns.
  For an algebra built directly from block dimensions the two coincide.  For
  a tensor product algebra the canonical coordinates are Kronecker
  coordinates: ``can(x (x) y) = np.kron(can(x), can(y))``.  The permutation
  ``mat_perm`` records how to pass between the two, ``mat = can[mat_perm]``.

Keeping tensor products in Kronecker coordinates makes a tensor product of
linear maps literally ``np.kron`` of their matrices, and makes the two ways
of parenthesising a triple tensor product agree exactly, index by index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .consts import DEFAULT_TOL, MUL_MATRIX_MAX_DIM
from .errors import AlgebraMismatch, ShapeMismatch, ValidationFailure


@dataclass(frozen=True)
class PositivityWitness:
    """Where positivity fails: most negative eigenvalue and its location."""

    block: int
    eigenvalue: float
    vector: np.ndarray
    selfadjoint_defect: float


class FdCStarAlgebra:
    def __init__(self, block_dims, _mat_perm=None, _factors=None):
        dims = tuple(int(n) for n in block_dims)
        if not dims or any(n < 1 for n in dims):
            raise ValidationFailure(f"invalid block dimensions {block_dims!r}")
        self.block_dims = dims
        sizes = [n * n for n in dims]
        self.dim = int(sum(sizes))
        self.offsets = tuple(int(o) for o in np.concatenate([[0], np.cumsum(sizes)[:-1]]))
        if _mat_perm is None:
            _mat_perm = np.arange(self.dim, dtype=np.int64)
        self.mat_perm = _mat_perm
        self.factors = _factors

    # -- construction -------------------------------------------------

    @classmethod
    def tensor(cls, A1: "FdCStarAlgebra", A2: "FdCStarAlgebra") -> "FdCStarAlgebra":
        """Tensor product, canonical coordinates = Kronecker coordinates."""
        dims = []
        parts = []
        for oi, n in zip(A1.offsets, A1.block_dims):
            s1 = A1.mat_perm[oi : oi + n * n].reshape(n, n)
            for oj, m in zip(A2.offsets, A2.block_dims):
                s2 = A2.mat_perm[oj : oj + m * m].reshape(m, m)
                dims.append(n * m)
                chunk = s1[:, None, :, None] * A2.dim + s2[None, :, None, :]
                parts.append(chunk.reshape(-1))
        return cls(dims, _mat_perm=np.concatenate(parts), _factors=(A1, A2))

    @classmethod
    def direct_sum(cls, A1: "FdCStarAlgebra", A2: "FdCStarAlgebra") -> "FdCStarAlgebra":
        """Direct sum; canonical coordinates are the two factors concatenated."""
        sigma = np.concatenate([A1.mat_perm, A2.mat_perm + A1.dim])
        return cls(A1.block_dims + A2.block_dims, _mat_perm=sigma)

    # -- coordinate plumbing ------------------------------------------

    def _expect(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=complex)
        if v.shape != (self.dim,):
            raise ShapeMismatch(f"expected vector of shape ({self.dim},), got {v.shape}")
        return v

    def to_blocks(self, v) -> list[np.ndarray]:
        w = self._expect(v)[self.mat_perm]
        return [
            w[o : o + n * n].reshape(n, n)
            for o, n in zip(self.offsets, self.block_dims)
        ]

    def from_blocks(self, blocks) -> np.ndarray:
        if len(blocks) != len(self.block_dims):
            raise ShapeMismatch(f"expected {len(self.block_dims)} blocks, got {len(blocks)}")
        flat = []
        for b, n in zip(blocks, self.block_dims):
            b = np.asarray(b, dtype=complex)
            if b.shape != (n, n):
                raise ShapeMismatch(f"block of shape {b.shape}, expected ({n}, {n})")
            flat.append(b.reshape(-1))
        out = np.empty(self.dim, dtype=complex)
        out[self.mat_perm] = np.concatenate(flat)
        return out

    element = from_blocks

    # -- distinguished elements ---------------------------------------

    def unit_vec(self) -> np.ndarray:
        return self.from_blocks([np.eye(n) for n in self.block_dims])

    def zero_vec(self) -> np.ndarray:
        return np.zeros(self.dim, dtype=complex)

    def basis_vec(self, k: int) -> np.ndarray:
        out = self.zero_vec()
        out[k] = 1.0
        return out

    def random_vec(self, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal(self.dim) + 1j * rng.standard_normal(self.dim)

    def random_selfadjoint_vec(self, rng: np.random.Generator) -> np.ndarray:
        x = self.random_vec(rng)
        return 0.5 * (x + self.star_vec(x))

    # -- algebra operations -------------------------------------------

    def mul_vec(self, x, y) -> np.ndarray:
        xb = self.to_blocks(x)
        yb = self.to_blocks(y)
        return self.from_blocks([a @ b for a, b in zip(xb, yb)])

    def star_vec(self, x) -> np.ndarray:
        return self.from_blocks([b.conj().T for b in self.to_blocks(x)])

    def trace_state(self, x) -> complex:
        """Normalised trace: sum of block traces over sum of block sizes."""
        total = sum(np.trace(b) for b in self.to_blocks(x))
        return total / sum(self.block_dims)

    def trace_state_vec(self) -> np.ndarray:
        # functional coefficients transform like element coordinates under
        # a permutation, so this is just the unit rescaled
        return self.unit_vec() / sum(self.block_dims)

    def operator_norm_vec(self, x) -> float:
        return max(np.linalg.norm(b, 2) for b in self.to_blocks(x))

    def is_positive_vec(self, x, tol: float = DEFAULT_TOL):
        """Check x = x* >= 0.  Returns (ok, witness); witness is None when ok."""
        blocks = self.to_blocks(x)
        sa_defect = max(np.linalg.norm(b - b.conj().T, 2) for b in blocks)
        worst = (0, np.inf, None)
        for i, b in enumerate(blocks):
            h = 0.5 * (b + b.conj().T)
            vals, vecs = np.linalg.eigh(h)
            if vals[0] < worst[1]:
                worst = (i, float(vals[0]), vecs[:, 0])
        ok = sa_defect <= tol and worst[1] >= -tol
        if ok:
            return True, None
        return False, PositivityWitness(worst[0], worst[1], worst[2], float(sa_defect))

    # -- multiplication as linear maps --------------------------------

    def _lift_blockwise(self, blocks_of_maps) -> np.ndarray:
        """Assemble a canonical-coordinate matrix from per-block maps on mat
        coordinates."""
        dim = self.dim
        mat = np.zeros((dim, dim), dtype=complex)
        for o, n, m in zip(self.offsets, self.block_dims, blocks_of_maps):
            mat[o : o + n * n, o : o + n * n] = m
        out = np.zeros_like(mat)
        out[np.ix_(self.mat_perm, self.mat_perm)] = mat
        return out

    def left_mult(self, x) -> np.ndarray:
        """Matrix of y -> x y."""
        return self._lift_blockwise(
            [np.kron(b, np.eye(n)) for b, n in zip(self.to_blocks(x), self.block_dims)]
        )

    def right_mult(self, x) -> np.ndarray:
        """Matrix of y -> y x."""
        return self._lift_blockwise(
            [np.kron(np.eye(n), b.T) for b, n in zip(self.to_blocks(x), self.block_dims)]
        )

    def star_matrix(self) -> np.ndarray:
        """Matrix K with can(x*) = K @ conj(can(x))."""
        maps = []
        for n in self.block_dims:
            t = np.zeros((n * n, n * n))
            for a in range(n):
                for b in range(n):
                    t[a * n + b, b * n + a] = 1.0
            maps.append(t)
        return self._lift_blockwise(maps)

    def mul_matrix(self) -> np.ndarray:
        """Multiplication as a map A (x) A -> A in Kronecker coordinates.

        Column p*dim+q is mul(e_p, e_q).  Dense, so guarded by size.
        """
        if self.dim > MUL_MATRIX_MAX_DIM:
            raise ValidationFailure(
                f"mul_matrix limited to dim <= {MUL_MATRIX_MAX_DIM}, have {self.dim}"
            )
        out = np.zeros((self.dim, self.dim * self.dim), dtype=complex)
        for p in range(self.dim):
            lp = self.left_mult(self.basis_vec(p))
            out[:, p * self.dim : (p + 1) * self.dim] = lp
        return out

    # -- misc ----------------------------------------------------------

    def __eq__(self, other):
        return (
            isinstance(other, FdCStarAlgebra)
            and self.block_dims == other.block_dims
            and np.array_equal(self.mat_perm, other.mat_perm)
        )

    def __hash__(self):
        return hash((self.block_dims, self.mat_perm.tobytes()))

    def __repr__(self):
        return f"FdCStarAlgebra({list(self.block_dims)!r})"


# -- helpers on raw coordinate arrays ----------------------------------


def tensor_map(F: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Tensor product of linear maps, valid because canonical coordinates of
    tensor product algebras are Kronecker coordinates."""
    return np.kron(F, G)


def contract_right(z: np.ndarray, d1: int, d2: int, f: np.ndarray) -> np.ndarray:
    """(id (x) f)(z) for z in the d1*d2 Kronecker coordinates, f a functional
    coefficient vector on the right factor."""
    return np.asarray(z).reshape(d1, d2) @ np.asarray(f)


def contract_left(z: np.ndarray, d1: int, d2: int, f: np.ndarray) -> np.ndarray:
    """(f (x) id)(z)."""
    return np.asarray(f) @ np.asarray(z).reshape(d1, d2)


def assert_same_algebra(A: FdCStarAlgebra, B: FdCStarAlgebra, what: str = "operands"):
    if A != B:
        raise AlgebraMismatch(f"{what} live in different algebras: {A!r} vs {B!r}")
