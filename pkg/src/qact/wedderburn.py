"""Block decomposition of an abstract finite-dimensional C*-algebra.

Input is an algebra presented by a structure tensor, a star matrix and a
unit vector, in some fixed linear basis.  Output is a *-isomorphism onto an
explicit multi-matrix algebra, found numerically:

1. validate the C*-structure and orthonormalise against the trace of the
   left regular representation (faithful, so the Gram matrix must be
   positive definite),
2. split off the centre through commutant equations, pick a random
   self-adjoint central element, and read the block ideals from the
   eigenspace clusters of its left multiplication operator,
3. inside each block, the eigenspace clusters of a right multiplication
   operator by a random self-adjoint element give a minimal left ideal;
   the left action on it is the block's irreducible representation, and
   matrix units come from inverting that representation on the block.

Randomised steps retry with fresh draws when clusters come out degenerate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .consts import DEFAULT_TOL
from .errors import NumericalRankFailure, ShapeMismatch, ValidationFailure
from .fdlin import FdCStarAlgebra

_MAX_TRIES = 6
_CLUSTER_REL_GAP = 1e-6


class AbstractFdAlgebra:
    """A unital *-algebra given by structure data in a linear basis.

    ``m[:, p, q]`` holds the coordinates of e_p e_q, ``star_mat`` satisfies
    coords(x*) = star_mat @ conj(coords(x)), ``unit`` is the unit's
    coordinate vector.
    """

    def __init__(self, m: np.ndarray, star_mat: np.ndarray, unit: np.ndarray,
                 validate: bool = True, tol: float = 1e-8):
        m = np.asarray(m, dtype=complex)
        if m.ndim != 3 or m.shape[0] != m.shape[1] or m.shape[1] != m.shape[2]:
            raise ShapeMismatch(f"structure tensor must be (d,d,d), got {m.shape}")
        self.dim = m.shape[0]
        self.m = m
        self.star_mat = np.asarray(star_mat, dtype=complex)
        self.unit = np.asarray(unit, dtype=complex)
        if self.star_mat.shape != (self.dim, self.dim) or self.unit.shape != (self.dim,):
            raise ShapeMismatch("star matrix or unit has wrong shape")
        if validate:
            self._validate(tol)

    # coords of x y
    def mul(self, x, y):
        return np.einsum("ipq,p,q->i", self.m, x, y)

    def star(self, x):
        return self.star_mat @ np.conj(x)

    def left_mult(self, x):
        return np.einsum("ipq,p->iq", self.m, x)

    def right_mult(self, x):
        return np.einsum("ipq,q->ip", self.m, x)

    def trace_functional(self) -> np.ndarray:
        """Normalised trace of the left regular representation."""
        raw = np.einsum("ipi->p", self.m)
        return raw / (raw @ self.unit)

    def _validate(self, tol: float):
        d = self.dim
        scale = max(1.0, np.abs(self.m).max())
        rng = np.random.default_rng(0)
        for _ in range(4):
            x = rng.standard_normal(d) + 1j * rng.standard_normal(d)
            y = rng.standard_normal(d) + 1j * rng.standard_normal(d)
            z = rng.standard_normal(d) + 1j * rng.standard_normal(d)
            if np.linalg.norm(self.mul(self.mul(x, y), z) - self.mul(x, self.mul(y, z))) > tol * scale**2 * 100:
                raise ValidationFailure("multiplication is not associative")
            if np.linalg.norm(self.star(self.mul(x, y)) - self.mul(self.star(y), self.star(x))) > tol * scale * 100:
                raise ValidationFailure("star is not antimultiplicative")
            if np.linalg.norm(self.mul(self.unit, x) - x) > tol * scale * 100:
                raise ValidationFailure("unit fails on the left")
            if np.linalg.norm(self.mul(x, self.unit) - x) > tol * scale * 100:
                raise ValidationFailure("unit fails on the right")
            if np.linalg.norm(self.star(self.star(x)) - x) > tol * 100:
                raise ValidationFailure("star is not an involution")

    @classmethod
    def from_subspace(cls, ambient: FdCStarAlgebra, basis: np.ndarray,
                      tol: float = 1e-8) -> "AbstractFdAlgebra":
        """Restrict a concrete algebra to the span of the given basis columns.

        Raises ValidationFailure when the span is not closed under
        multiplication and star, or does not contain the unit.
        """
        basis = np.asarray(basis, dtype=complex)
        if basis.ndim != 2 or basis.shape[0] != ambient.dim:
            raise ShapeMismatch(f"basis must be ({ambient.dim}, d), got {basis.shape}")
        d = basis.shape[1]
        pinv = np.linalg.pinv(basis)
        scale = max(1.0, np.linalg.norm(basis, 2))

        def coords(vecs):
            c = pinv @ vecs
            resid = np.linalg.norm(basis @ c - vecs)
            if resid > tol * scale * max(1.0, np.linalg.norm(vecs)):
                raise ValidationFailure(
                    f"span is not closed (residual {resid:.3e})"
                )
            return c

        m = np.empty((d, d, d), dtype=complex)
        for p in range(d):
            prods = ambient.left_mult(basis[:, p]) @ basis
            m[:, p, :] = coords(prods)
        star_cols = np.column_stack([ambient.star_vec(basis[:, p]) for p in range(d)])
        star_mat = coords(star_cols)
        unit = coords(ambient.unit_vec()[:, None])[:, 0]
        return cls(m, star_mat, unit, validate=False, tol=tol)


@dataclass
class WedderburnDecomposition:
    block_dims: tuple[int, ...]
    target: FdCStarAlgebra
    iso: np.ndarray        # (target.dim, d) in the input basis coordinates
    iso_inv: np.ndarray
    residual: float


def subspace_basis(vectors: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (columns) of the column span, rank cut by SVD."""
    vectors = np.asarray(vectors, dtype=complex)
    u, s, _ = np.linalg.svd(vectors, full_matrices=False)
    if s.size == 0:
        return u[:, :0]
    rank = int(np.sum(s > tol * s[0]))
    gap_ok = rank == s.size or s[rank - 1] > 10 * s[rank] if rank > 0 else True
    if not gap_ok and s[rank] > 1e-8 * s[0]:
        raise NumericalRankFailure(
            f"ambiguous rank: singular values {s[rank-1]:.3e} vs {s[rank]:.3e}"
        )
    return u[:, :rank]


def _cluster(vals: np.ndarray) -> list[np.ndarray]:
    """Group sorted eigenvalues into clusters separated by a relative gap."""
    order = np.argsort(vals)
    sorted_vals = vals[order]
    spread = max(1.0, float(sorted_vals[-1] - sorted_vals[0]))
    groups = [[order[0]]]
    for prev, idx in zip(sorted_vals[:-1], order[1:]):
        if vals[idx] - prev > _CLUSTER_REL_GAP * spread:
            groups.append([])
        groups[-1].append(idx)
    return [np.array(g) for g in groups]


def wedderburn(alg: AbstractFdAlgebra, seed: int = 0,
               tol: float = DEFAULT_TOL) -> WedderburnDecomposition:
    d = alg.dim
    tau = alg.trace_functional()

    # Gram of the trace form; positive definiteness certifies faithfulness
    T2 = np.einsum("i,ipq->pq", tau, alg.m)  # tau(e_p e_q)
    G0 = alg.star_mat.T @ T2
    G0 = 0.5 * (G0 + G0.conj().T)
    vals, vecs = np.linalg.eigh(G0)
    if vals[0] <= 1e-10 * max(1.0, vals[-1]):
        raise ValidationFailure(
            f"trace form is not positive definite (min eigenvalue {vals[0]:.3e})"
        )
    B = vecs @ np.diag(1.0 / np.sqrt(vals))
    Binv = np.diag(np.sqrt(vals)) @ vecs.conj().T

    # structure transported to the orthonormal basis; left regular action
    # becomes a faithful *-representation there
    Lmats = np.einsum("irq,rp->piq", alg.m, B)
    L = np.einsum("ij,pjk,kl->pil", Binv, Lmats, B)
    Rmats = np.einsum("iqr,rp->piq", alg.m, B)
    R = np.einsum("ij,pjk,kl->pil", Binv, Rmats, B)
    Ks = Binv @ alg.star_mat @ np.conj(B)
    unit = Binv @ alg.unit

    def onb_mul(x, y):
        return np.einsum("piq,p,q->i", L, x, y)

    def onb_star(x):
        return Ks @ np.conj(x)

    def onb_left(x):
        return np.einsum("piq,p->iq", L, x)

    # centre: null space of all commutators
    stack = (L - R).transpose(1, 0, 2).reshape(d * d, d)
    _, sv, vh = np.linalg.svd(stack)
    sv = np.concatenate([sv, np.zeros(d - sv.size)])
    ncenter = int(np.sum(sv < 1e-8 * max(1.0, sv[0])))
    if ncenter == 0:
        raise ValidationFailure("unital algebra has trivial centre dimension 0")
    Z = vh[d - ncenter :].conj().T  # (d, ncenter)

    rng = np.random.default_rng(seed)
    # column p is vec(L_p), for inverting x -> L_x by least squares
    Pi = np.column_stack([L[p].reshape(-1) for p in range(d)])

    last_err = None
    for _ in range(_MAX_TRIES):
        try:
            # the centre is star-closed, so the self-adjoint part of a random
            # central element is still central
            z = Z @ (rng.standard_normal(ncenter) + 1j * rng.standard_normal(ncenter))
            z = 0.5 * (z + onb_star(z))
            Lz = onb_left(z)
            Lz = 0.5 * (Lz + Lz.conj().T)
            evals, evecs = np.linalg.eigh(Lz)
            clusters = _cluster(evals)
            if len(clusters) != ncenter:
                raise NumericalRankFailure("central element failed to separate blocks")
            sizes = [len(c) for c in clusters]
            ns = []
            for s in sizes:
                n = int(round(np.sqrt(s)))
                if n * n != s:
                    raise NumericalRankFailure(f"cluster size {s} is not a square")
                ns.append(n)
            if sum(sizes) != d:
                raise NumericalRankFailure("clusters do not exhaust the algebra")

            blocks = []
            for cl, n in zip(clusters, ns):
                W = evecs[:, cl]  # ONB of the ideal inside the GNS space
                # the block unit: left multiplication by it is the orthogonal
                # projection onto the ideal
                Pj = W @ W.conj().T
                pj, *_ = np.linalg.lstsq(Pi, Pj.reshape(-1), rcond=None)
                pj = 0.5 * (pj + onb_star(pj))
                for _ in range(3):  # idempotent polish
                    pj2 = onb_mul(pj, pj)
                    pj = 3 * pj2 - 2 * onb_mul(pj2, pj)
                if np.linalg.norm(onb_mul(pj, pj) - pj) > 1e-7:
                    raise NumericalRankFailure("block unit failed to converge")
                blocks.append((W, n, pj))

            order = sorted(range(len(blocks)), key=lambda j: (blocks[j][1], j))
            block_dims = tuple(blocks[j][1] for j in order)
            target = FdCStarAlgebra(block_dims)

            reps = []
            for j in order:
                W, n, pj = blocks[j]
                if n == 1:
                    V = W
                else:
                    h = W @ (rng.standard_normal(n * n) + 1j * rng.standard_normal(n * n))
                    h = 0.5 * (h + onb_star(h))
                    h = onb_mul(onb_mul(pj, h), pj)
                    # right multiplication by h restricted to the ideal
                    Rh = W.conj().T @ np.einsum("piq,p->iq", R, h) @ W
                    Rh = 0.5 * (Rh + Rh.conj().T)
                    rvals, rvecs = np.linalg.eigh(Rh)
                    rcl = _cluster(rvals)
                    if len(rcl) != n or any(len(c) != n for c in rcl):
                        raise NumericalRankFailure("right clusters degenerate inside block")
                    V = W @ rvecs[:, rcl[0]]
                reps.append((V, n))

            # assemble the *-isomorphism: x -> direct sum of V_j^H L_x V_j
            rows = []
            for p in range(d):
                Lp = L[p]
                rows.append(target.from_blocks([V.conj().T @ Lp @ V for V, _ in reps]))
            Phi_onb = np.column_stack(rows)
            Phi = Phi_onb @ Binv
            Phi_inv = np.linalg.inv(Phi)

            polished = _polish_iso(alg, target, Phi, Phi_inv)
            if polished is not None and _iso_residual(
                    alg, target, polished, rng) < _iso_residual(
                    alg, target, Phi, rng):
                Phi = polished
                Phi_inv = np.linalg.inv(Phi)

            resid = _iso_residual(alg, target, Phi, rng)
            if resid > 1e-7:
                raise NumericalRankFailure(f"isomorphism residual {resid:.3e}")
            return WedderburnDecomposition(block_dims, target, Phi, Phi_inv, resid)
        except NumericalRankFailure as err:
            last_err = err
    raise NumericalRankFailure(f"decomposition failed after retries: {last_err}")


def _polish_iso(alg: AbstractFdAlgebra, target: FdCStarAlgebra,
                Phi: np.ndarray, Phi_inv: np.ndarray) -> np.ndarray | None:
    """Newton-refine the matrix units behind an approximate *-isomorphism.

    Eigenvector-based matrix units inherit the precision of the spectral
    gaps they came from.  Their defining relations are quadratic, so a few
    refinement steps with the exact structure tensor push the units to
    machine accuracy; the iso rows are then rebuilt from the trace pairing.
    """
    tau = alg.trace_functional()
    T2 = np.einsum("i,ipq->pq", tau, alg.m)
    rows = np.empty_like(Phi)
    offset = 0
    for nb in target.block_dims:
        g = [[Phi_inv[:, offset + i * nb + j] for j in range(nb)]
             for i in range(nb)]
        proj = []
        for i in range(nb):
            p = g[i][i]
            p = 0.5 * (p + alg.star(p))
            for _ in range(3):
                p2 = alg.mul(p, p)
                p = 3 * p2 - 2 * alg.mul(p2, p)
            proj.append(p)
        cols = [proj[0]]
        for i in range(1, nb):
            f = alg.mul(proj[i], alg.mul(g[i][0], proj[0]))
            for _ in range(2):
                mu = tau @ alg.mul(alg.star(f), f)
                norm = tau @ proj[0]
                if not (mu.real > 0 and norm.real > 0):
                    return None
                f = f / np.sqrt(mu.real / norm.real)
            cols.append(f)
        c = tau @ proj[0]
        for i in range(nb):
            for j in range(nb):
                unit_ji = alg.mul(cols[j], alg.star(cols[i]))
                rows[offset + i * nb + j] = (unit_ji @ T2) / c
        offset += nb * nb
    return rows


def _iso_residual(alg: AbstractFdAlgebra, target: FdCStarAlgebra,
                  Phi: np.ndarray, rng: np.random.Generator) -> float:
    d = alg.dim
    worst = 0.0
    worst = max(worst, float(np.linalg.norm(Phi @ alg.unit - target.unit_vec())))
    for _ in range(5):
        x = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        y = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        worst = max(worst, float(np.linalg.norm(
            Phi @ alg.mul(x, y) - target.mul_vec(Phi @ x, Phi @ y))) / max(1.0, np.linalg.norm(x) * np.linalg.norm(y)))
        worst = max(worst, float(np.linalg.norm(
            Phi @ alg.star(x) - target.star_vec(Phi @ x))) / max(1.0, np.linalg.norm(x)))
    return worst
