"""Crossed product of a coaction, realised inside A (x) M_d.

The copy of A is rho(a) = (id (x) m)alpha(a) with m the multiplication
representation of C(G) on the Haar space, and the dual acts by

    lam(omega) = Gh . [(id (x) omega) Delta] . Gh^{-1},    Gh = Gram(haar)^{1/2}.

The crossed product is the linear span of lam(dual) rho(A); the map

    zeta : a (x) k  |->  (1 (x) lam(haar(S^{-1}(k) . ))) rho(a)

is a linear bijection from A (x) C(G) onto it.  The Jones projection is
1 (x) lam(haar), the ideal it generates is spanned by
rho(x)(1 (x) lam(haar))rho(y)*, and the unit of that ideal transported back
through zeta is the free-part projection of the coaction.

Restricting the natural representation to the alpha-twisted copy of A gives
the compression pi_red; it carries rho(a) to the Haar-space picture of a and
the Jones projection to the conditional expectation, so the ideal above is
the image of the basic construction.
"""

from __future__ import annotations

import weakref
from functools import cached_property

import numpy as np

from .action import Coaction
from .errors import NumericalRankFailure, ValidationFailure
from .fdlin import FdCStarAlgebra
from .wedderburn import AbstractFdAlgebra, WedderburnDecomposition, subspace_basis, wedderburn


_CACHE: "weakref.WeakKeyDictionary[Coaction, CrossedProduct]" = weakref.WeakKeyDictionary()


def crossed_product(act: Coaction) -> "CrossedProduct":
    """Memoised constructor; the crossed product is pure function of the action."""
    cp = _CACHE.get(act)
    if cp is None:
        cp = CrossedProduct(act)
        _CACHE[act] = cp
    return cp


def _psd_sqrt(G: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    G = 0.5 * (G + G.conj().T)
    vals, vecs = np.linalg.eigh(G)
    if vals[0] <= 1e-12 * max(1.0, vals[-1]):
        raise NumericalRankFailure("Gram matrix is numerically singular")
    rt = vecs @ np.diag(np.sqrt(vals)) @ vecs.conj().T
    rti = vecs @ np.diag(1.0 / np.sqrt(vals)) @ vecs.conj().T
    return rt, rti


class CrossedProduct:
    """Crossed product data for a finite quantum group coaction."""

    def __init__(self, act: Coaction, tol: float = 1e-8):
        self.act = act
        self.tol = tol
        self.A = act.A
        self.qg = act.qg
        dA, dG = self.A.dim, self.qg.dim
        self.AM = FdCStarAlgebra.tensor(self.A, FdCStarAlgebra([dG]))
        GA = self.qg.A
        K = GA.star_matrix()
        gram = np.empty((dG, dG), dtype=complex)
        for p in range(dG):
            gram[p, :] = self.qg.haar @ GA.left_mult(K[:, p])
        self._Gh, self._Ghi = _psd_sqrt(gram)
        self._LG = np.stack([GA.left_mult(GA.basis_vec(k)) for k in range(dG)])
        self._D3 = self.qg.delta_mat.reshape(dG, dG, dG)

    # -- generators ------------------------------------------------------

    def multiplication_rep(self, f: np.ndarray) -> np.ndarray:
        """C(G) acting on its Haar space."""
        Lf = np.tensordot(f, self._LG, axes=(0, 0))
        return self._Gh @ Lf @ self._Ghi

    def dual_rep(self, omega: np.ndarray) -> np.ndarray:
        """The dual algebra acting on the Haar space by lam."""
        return self._Gh @ np.einsum("ikj,k->ij", self._D3, omega) @ self._Ghi

    @cached_property
    def rho(self) -> np.ndarray:
        """Columns rho(e_p) in A (x) M_d coordinates."""
        dA, dG = self.A.dim, self.qg.dim
        out = np.zeros((self.AM.dim, dA), dtype=complex)
        for p in range(dA):
            ap = (self.act.alpha @ self.A.basis_vec(p)).reshape(dA, dG)
            for i in range(dA):
                M = self.multiplication_rep(ap[i])
                out[i * dG * dG:(i + 1) * dG * dG, p] = M.reshape(-1)
        return out

    def rho_vec(self, a: np.ndarray) -> np.ndarray:
        return self.rho @ a

    def dual_vec(self, omega: np.ndarray) -> np.ndarray:
        """1 (x) lam(omega) as an element of A (x) M_d."""
        return np.kron(self.A.unit_vec(), self.dual_rep(omega).reshape(-1))

    @cached_property
    def jones_vec(self) -> np.ndarray:
        return self.dual_vec(self.qg.haar)

    # -- the linear chart zeta ---------------------------------------------

    @cached_property
    def zeta(self) -> np.ndarray:
        """(dim AM, dA*dG) matrix of zeta(e_p (x) e_q)."""
        dA, dG = self.A.dim, self.qg.dim
        GA = self.qg.A
        Sinv = np.linalg.inv(self.qg.antipode_mat)
        cols = np.empty((self.AM.dim, dA * dG), dtype=complex)
        lam_cols = []
        for q in range(dG):
            omega_q = self.qg.haar @ GA.left_mult(Sinv[:, q])
            lam_cols.append(self.dual_vec(omega_q))
        for p in range(dA):
            rp = self.rho[:, p]
            for q in range(dG):
                cols[:, p * dG + q] = self.AM.mul_vec(lam_cols[q], rp)
        s = np.linalg.svd(cols, compute_uv=False)
        if s[-1] <= 1e-8 * s[0]:
            raise NumericalRankFailure("zeta chart is numerically degenerate")
        return cols

    def zeta_solve(self, vecs: np.ndarray) -> np.ndarray:
        sol, *_ = np.linalg.lstsq(self.zeta, vecs, rcond=None)
        res = np.linalg.norm(self.zeta @ sol - vecs)
        if res > 1e-7 * max(1.0, np.linalg.norm(vecs)):
            raise ValidationFailure(
                f"vector outside the crossed product span (residual {res:.2e})"
            )
        return sol

    # -- the algebra -------------------------------------------------------

    @cached_property
    def basis(self) -> np.ndarray:
        return subspace_basis(self.zeta)

    def as_abstract(self) -> AbstractFdAlgebra:
        return AbstractFdAlgebra.from_subspace(self.AM, self.basis, tol=self.tol)

    def decomposition(self, seed: int = 0) -> WedderburnDecomposition:
        return wedderburn(self.as_abstract(), seed=seed)

    # -- Jones ideal ---------------------------------------------------------

    def basic_vec(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """rho(x) (1 (x) lam(haar)) rho(y)*."""
        e = self.AM.mul_vec(self.jones_vec, self.AM.star_vec(self.rho_vec(y)))
        return self.AM.mul_vec(self.rho_vec(x), e)

    @cached_property
    def ideal_basis_(self) -> np.ndarray:
        dA = self.A.dim
        cols = np.column_stack(
            [
                self.basic_vec(self.A.basis_vec(a), self.A.basis_vec(b))
                for a in range(dA)
                for b in range(dA)
            ]
        )
        return subspace_basis(cols)

    def ideal_basis(self) -> np.ndarray:
        return self.ideal_basis_

    @cached_property
    def ideal_unit(self) -> np.ndarray:
        """Unit of the Jones ideal, as an A (x) M_d coordinate vector."""
        V = self.ideal_basis_
        k = V.shape[1]
        if k == 0:
            return self.AM.zero_vec()
        rows = []
        rhs = []
        for i in range(V.shape[1]):
            Lv = self.AM.right_mult(V[:, i])  # z . v_i as function of z
            rows.append(Lv @ V)
            rhs.append(V[:, i])
            Rv = self.AM.left_mult(V[:, i])   # v_i . z
            rows.append(Rv @ V)
            rhs.append(V[:, i])
        M = np.vstack(rows)
        b = np.concatenate(rhs)
        c, *_ = np.linalg.lstsq(M, b, rcond=None)
        z = V @ c
        # certify
        herm = np.linalg.norm(self.AM.star_vec(z) - z)
        idem = np.linalg.norm(self.AM.mul_vec(z, z) - z)
        acts = max(
            np.linalg.norm(self.AM.mul_vec(z, V[:, i]) - V[:, i]) for i in range(k)
        )
        if max(herm, idem, acts) > 1e-7:
            raise NumericalRankFailure(
                f"ideal unit failed certification (residual {max(herm, idem, acts):.2e})"
            )
        return z

    def free_part_projection(self) -> np.ndarray:
        """zeta^{-1} (ideal_unit . ) zeta on A (x) C(G) coordinates."""
        Lz = self.AM.left_mult(self.ideal_unit)
        return self.zeta_solve(Lz @ self.zeta)

    # -- the compressed representation ----------------------------------------

    @cached_property
    def _gns_data(self):
        A = self.A
        EB = self.act.conditional_expectation()
        omega = A.trace_state_vec() @ EB
        K = A.star_matrix()
        gram = np.empty((A.dim, A.dim), dtype=complex)
        for p in range(A.dim):
            gram[p, :] = omega @ A.left_mult(K[:, p])
        Gw, Gwi = _psd_sqrt(gram)
        return EB, Gw, Gwi

    def gns_left(self, a: np.ndarray) -> np.ndarray:
        """a acting on the GNS space of trace . E_B."""
        _, Gw, Gwi = self._gns_data
        return Gw @ self.A.left_mult(a) @ Gwi

    def jones_gns(self) -> np.ndarray:
        EB, Gw, Gwi = self._gns_data
        return Gw @ EB @ Gwi

    @cached_property
    def isometry(self) -> np.ndarray:
        """V : GNS(A) -> A (x) Haar space carrying a to alpha(a)."""
        _, Gw, Gwi = self._gns_data
        V = np.kron(Gw, self._Gh) @ self.act.alpha @ Gwi
        if np.linalg.norm(V.conj().T @ V - np.eye(self.A.dim)) > 1e-8:
            raise NumericalRankFailure("alpha-twisted embedding is not isometric")
        return V

    def represent(self, T: np.ndarray) -> np.ndarray:
        """A (x) M_d acting on GNS(A) (x) Haar space."""
        dA, dG = self.A.dim, self.qg.dim
        blocks = T.reshape(dA, dG, dG)
        out = np.zeros((dA * dG, dA * dG), dtype=complex)
        for p in range(dA):
            out += np.kron(self.gns_left(self.A.basis_vec(p)), blocks[p])
        return out

    def pi_red(self, T: np.ndarray) -> np.ndarray:
        V = self.isometry
        return V.conj().T @ self.represent(T) @ V
