"""Bundled example quantum groups and actions.

Groups are lists of permutation tuples; the two generic constructions are
the function algebra C(G) (commutative, coproduct from the group law) and
the group algebra viewed as a quantum group (cocommutative, group elements
grouplike).  The latter is presented on its concrete block decomposition.
"""

from __future__ import annotations

import itertools

import numpy as np

from .errors import ValidationFailure
from .fdlin import FdCStarAlgebra
from .qgfinite import FiniteQuantumGroup
from .wedderburn import AbstractFdAlgebra, wedderburn


# -- finite groups as permutation tuples --------------------------------


def cyclic_group(n: int) -> list[tuple[int, ...]]:
    return [tuple((i + k) % n for i in range(n)) for k in range(n)]


def symmetric_group(n: int) -> list[tuple[int, ...]]:
    perms = sorted(itertools.permutations(range(n)))
    # identity first; the rest keep lexicographic order
    ident = tuple(range(n))
    return [ident] + [p for p in perms if p != ident]


def compose(p: tuple[int, ...], q: tuple[int, ...]) -> tuple[int, ...]:
    """(p o q)(i) = p(q(i))."""
    return tuple(p[j] for j in q)


def inverse(p: tuple[int, ...]) -> tuple[int, ...]:
    return tuple(int(i) for i in np.argsort(p))


# -- quantum groups from groups ------------------------------------------


def function_algebra_qg(perms: list[tuple[int, ...]], name: str = "") -> FiniteQuantumGroup:
    """C(G) with delta(e_g) = sum over h k = g of e_h (x) e_k."""
    n = len(perms)
    index = {p: i for i, p in enumerate(perms)}
    A = FdCStarAlgebra([1] * n)
    D = np.zeros((n * n, n), dtype=complex)
    for h in range(n):
        for k in range(n):
            D[h * n + k, index[compose(perms[h], perms[k])]] = 1.0
    eps = np.zeros(n, dtype=complex)
    eps[index[tuple(range(len(perms[0])))]] = 1.0
    S = np.zeros((n, n), dtype=complex)
    for g in range(n):
        S[index[inverse(perms[g])], g] = 1.0
    return FiniteQuantumGroup(A, D, eps, S, name=name)


def group_algebra_qg(perms: list[tuple[int, ...]], name: str = "",
                     seed: int = 0) -> FiniteQuantumGroup:
    """The group algebra as a quantum group, on its block decomposition.

    Group elements are grouplike: delta(g) = g (x) g, eps(g) = 1,
    antipode(g) = g^{-1}.  Coordinates come from a computed *-isomorphism
    of the abstract group algebra onto block form.
    """
    n = len(perms)
    index = {p: i for i, p in enumerate(perms)}
    m = np.zeros((n, n, n), dtype=complex)
    star = np.zeros((n, n), dtype=complex)
    for i, p in enumerate(perms):
        for j, q in enumerate(perms):
            m[index[compose(p, q)], i, j] = 1.0
        star[index[inverse(p)], i] = 1.0
    unit = np.zeros(n, dtype=complex)
    unit[index[tuple(range(len(perms[0])))]] = 1.0
    dec = wedderburn(AbstractFdAlgebra(m, star, unit), seed=seed)

    phi = dec.iso           # group coords -> block coords
    phi_inv = dec.iso_inv
    D = np.column_stack([np.kron(phi[:, g], phi[:, g]) for g in range(n)]) @ phi_inv
    eps = np.ones(n, dtype=complex) @ phi_inv
    P_inv = np.zeros((n, n), dtype=complex)
    for g, p in enumerate(perms):
        P_inv[index[inverse(p)], g] = 1.0
    S = phi @ P_inv @ phi_inv
    return FiniteQuantumGroup(dec.target, D, eps, S, name=name)


_QG_BUILDERS = {
    "c_z2": lambda: function_algebra_qg(cyclic_group(2), "c_z2"),
    "c_z3": lambda: function_algebra_qg(cyclic_group(3), "c_z3"),
    "c_s3": lambda: function_algebra_qg(symmetric_group(3), "c_s3"),
    "dual_s3": lambda: group_algebra_qg(symmetric_group(3), "dual_s3"),
}


def quantum_group(name: str) -> FiniteQuantumGroup:
    try:
        return _QG_BUILDERS[name]()
    except KeyError:
        raise ValidationFailure(
            f"unknown quantum group {name!r}; available: {sorted(_QG_BUILDERS)}"
        ) from None


def quantum_group_names() -> list[str]:
    return sorted(_QG_BUILDERS)


# -- bundled actions -------------------------------------------------------


def _swap2():
    from .action import ad_action, group_rep_corep

    qg = quantum_group("c_z2")
    flip = np.array([[0.0, 1.0], [1.0, 0.0]])
    u = group_rep_corep(qg, np.eye(2, dtype=complex), [np.eye(2), flip])
    return ad_action(qg, u, name="swap2")


def _c_s3_ad_m2():
    from .action import ad_action

    qg = quantum_group("c_s3")
    dec = qg.decompose_regular(seed=0)
    u2 = next(u for u in dec.irreps if u.shape[0] == 2)
    return ad_action(qg, u2, name="c_s3_ad_m2")


def _c_z2_trivial_c2():
    from .action import trivial_action

    qg = quantum_group("c_z2")
    act = trivial_action(qg, FdCStarAlgebra([1, 1]))
    act.name = "c_z2_trivial_c2"
    return act


def _c_z2_free_plus_trivial():
    from .action import direct_sum_action, translation_action, trivial_action

    qg = quantum_group("c_z2")
    free = translation_action(qg)
    triv = trivial_action(qg, FdCStarAlgebra([1, 1]))
    return direct_sum_action(free, triv, name="c_z2_free_plus_trivial")


def _translation(qg_name):
    from .action import translation_action

    act = translation_action(quantum_group(qg_name))
    act.name = f"{qg_name}_translation"
    return act


_ACTION_BUILDERS = {
    "c_z2_translation": lambda: _translation("c_z2"),
    "c_z3_translation": lambda: _translation("c_z3"),
    "c_s3_translation": lambda: _translation("c_s3"),
    "dual_s3_translation": lambda: _translation("dual_s3"),
    "swap2": _swap2,
    "c_s3_ad_m2": _c_s3_ad_m2,
    "c_z2_trivial_c2": _c_z2_trivial_c2,
    "c_z2_free_plus_trivial": _c_z2_free_plus_trivial,
}


def finite_action(name: str):
    try:
        return _ACTION_BUILDERS[name]()
    except KeyError:
        raise ValidationFailure(
            f"unknown action {name!r}; available: {sorted(_ACTION_BUILDERS)}"
        ) from None


def finite_action_names() -> list[str]:
    return sorted(_ACTION_BUILDERS)
