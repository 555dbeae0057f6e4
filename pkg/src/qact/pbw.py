"""Presented compact quantum groups with degree-truncated exact computation.

A presentation is a finite set of generators (each paired with a formal
adjoint letter), an ordered list of oriented rewrite rules, a coproduct /
counit / antipode given on letters, and a distinguished fundamental
corepresentation matrix.  Words that contain no rule left-hand side form
the normal basis; every computation below reduces to linear algebra over
that basis, restricted to a degree window.

With truncation degree L, products and rewrites are guaranteed exact up to
word degree 2L, and anything beyond raises DegreeOverflow rather than
returning silently truncated data.  The invariant state is recovered by
solving the invariance equations (id (x) phi) Delta = phi(.) 1 on the
degree-d span; for a consistent presentation that system has a
one-dimensional solution space, which is the uniqueness check.

Irreducible coefficient blocks come from the dual side: the degree-d span
is a finite-dimensional coalgebra, its dual is an associative *-algebra
under convolution, and the block decomposition of that dual (the same
machinery used for abstract finite-dimensional C*-algebras) hands back the
corepresentation matrices directly -- the row of the isomorphism dual to a
matrix unit f_ij is the coefficient u_ij.  Blocks are then conjugated into
unitary form using the invariant-state Gram matrix.

The shipped SU_q(2) presentation (0 < q < 1) uses generators a, c with

    ca = q ac,   c*a = q ac*,   ca* = q^{-1} a*c,   c*a* = q^{-1} a*c*,
    c*c = cc*,   a*a = 1 - q^2 cc*,   aa* = 1 - cc*,

fundamental matrix [[a, -q c*], [c, a*]], coproduct
Delta(a) = a(x)a - q c*(x)c, Delta(c) = c(x)a + a*(x)c, and antipode
S(a) = a*, S(c) = -q^{-1} c, S(c*) = -q c*.  The orientation is the one
that makes the rows of the fundamental matrix isometric
(sum_k u_ik* u_jk = delta_ij) and is forced by the coproduct together with
the antipode axiom; the checker verifies it rather than trusting it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .consts import DEFAULT_TOL
from .errors import DegreeOverflow, ShapeMismatch, ValidationFailure
from .hopf import HopfContext, QMatrixResult, q_matrix_from_corep
from .qgfinite import AxiomReport
from .wedderburn import AbstractFdAlgebra, wedderburn

__all__ = [
    "RewriteRule",
    "PresentedQG",
    "HaarFunctional",
    "TruncatedContext",
    "CoefficientSpace",
    "truncated_haar",
    "coefficient_spaces",
    "compute_Q",
    "strong_left_invariance_check",
    "suq2_presentation",
    "presented_from_dict",
    "presented_to_dict",
]

Word = tuple[str, ...]
LinComb = dict[Word, complex]

_PRUNE = 1e-14          # relative floor for dropping cancelled coefficients
_BLOCK_PRUNE = 1e-13    # relative floor for numerically extracted block entries
_FUEL_PER_WORD = 200_000


# ---------------------------------------------------------------------------
# linear-combination helpers (plain dicts keyed by words)

def _lc_axpy(out: LinComb, x: LinComb, c: complex) -> None:
    for w, v in x.items():
        out[w] = out.get(w, 0j) + c * v


def _lc_clean(x: LinComb) -> LinComb:
    if not x:
        return {}
    top = max(abs(v) for v in x.values())
    if top == 0.0:
        return {}
    floor = _PRUNE * max(1.0, top)
    return {w: v for w, v in x.items() if abs(v) > floor}


def _lc_dist(x: LinComb, y: LinComb) -> float:
    worst = 0.0
    for w in set(x) | set(y):
        worst = max(worst, abs(x.get(w, 0j) - y.get(w, 0j)))
    return worst


def _lc_norm(x: LinComb) -> float:
    return max((abs(v) for v in x.values()), default=0.0)


@dataclass(frozen=True)
class RewriteRule:
    """Oriented relation lhs -> sum of coeff * word."""

    lhs: Word
    rhs: tuple[tuple[complex, Word], ...]


class PresentedQG:
    """Generators-and-relations model of a compact quantum group algebra.

    ``letters`` interleaves each generator with its adjoint; normal order
    is ascending letter index, and rules are expected (and checked, not
    assumed) to rewrite confluently toward it within the degree window.
    """

    def __init__(self, generators: list[str], rules: list[RewriteRule],
                 coproduct: dict[str, list[tuple[complex, Word, Word]]],
                 counit: dict[str, complex],
                 antipode: dict[str, LinComb],
                 fundamental: list[list[LinComb]],
                 truncation: int = 6,
                 degree: dict[str, int] | None = None,
                 name: str = "presented"):
        if truncation < 1:
            raise ValidationFailure("truncation degree must be at least 1")
        self.generators = list(generators)
        self.letters: list[str] = []
        for g in self.generators:
            if g.endswith("*") or " " in g or not g:
                raise ValidationFailure(f"bad generator name {g!r}")
            self.letters.extend([g, g + "*"])
        self._letter_index = {l: i for i, l in enumerate(self.letters)}
        if len(self._letter_index) != len(self.letters):
            raise ValidationFailure("duplicate generator names")
        self.adjoint = {}
        for g in self.generators:
            self.adjoint[g] = g + "*"
            self.adjoint[g + "*"] = g
        self.truncation = int(truncation)
        self.name = name

        self.degree = {l: 1 for l in self.letters}
        if degree:
            for g, d in degree.items():
                self._require_letter(g)
                if int(d) < 1:
                    raise ValidationFailure("letter degrees must be positive")
                self.degree[g] = int(d)
                self.degree[self.adjoint[g]] = int(d)

        self.rules = list(rules)
        for r in self.rules:
            for l in r.lhs:
                self._require_letter(l)
            if not r.lhs:
                raise ValidationFailure("rewrite rule with empty left side")
            for _, w in r.rhs:
                for l in w:
                    self._require_letter(l)
        # rules indexed by leading letter for the leftmost-match scan
        self._rules_by_head: dict[str, list[RewriteRule]] = {}
        for r in self.rules:
            self._rules_by_head.setdefault(r.lhs[0], []).append(r)

        # coproduct / counit / antipode are stored per letter; adjoint
        # letters default to the *-derived images when not given
        self._coproduct: dict[str, list[tuple[complex, Word, Word]]] = {}
        self._counit: dict[str, complex] = {}
        self._antipode_letter: dict[str, LinComb] = {}
        for g, terms in coproduct.items():
            self._require_letter(g)
            self._coproduct[g] = [(complex(c), tuple(w1), tuple(w2)) for c, w1, w2 in terms]
        for g, v in counit.items():
            self._require_letter(g)
            self._counit[g] = complex(v)
        for g, lc in antipode.items():
            self._require_letter(g)
            self._antipode_letter[g] = {tuple(w): complex(c) for w, c in lc.items()}
        for g in self.generators:
            adj = self.adjoint[g]
            if g not in self._coproduct:
                raise ValidationFailure(f"coproduct missing for generator {g!r}")
            if adj not in self._coproduct:
                # Delta is a *-homomorphism: Delta(x*) = Delta(x)^{*(x)*}
                self._coproduct[adj] = [
                    (np.conj(c), self._star_word(w1), self._star_word(w2))
                    for c, w1, w2 in self._coproduct[g]
                ]
            if g not in self._counit:
                raise ValidationFailure(f"counit missing for generator {g!r}")
            if adj not in self._counit:
                self._counit[adj] = np.conj(self._counit[g])
            if g not in self._antipode_letter:
                raise ValidationFailure(f"antipode missing for generator {g!r}")
            if adj not in self._antipode_letter:
                # involutive-antipode fallback S(x*) = S(x)*; wrong guesses
                # are caught by the antipode-axiom residual in defects()
                self._antipode_letter[adj] = {
                    self._star_word(w): np.conj(c)
                    for w, c in self._antipode_letter[g].items()
                }

        self.fundamental = [[{tuple(w): complex(c) for w, c in e.items()} for e in row]
                            for row in fundamental]
        n = len(self.fundamental)
        if n == 0 or any(len(row) != n for row in self.fundamental):
            raise ShapeMismatch("fundamental corepresentation must be a square matrix")

        self._nf_cache: dict[Word, LinComb] = {}
        self._delta_cache: dict[Word, dict[tuple[Word, Word], complex]] = {}
        self._antipode_cache: dict[Word, LinComb] = {}
        self._basis_cache: dict[int, list[Word]] = {}
        self._haar_cache: dict[int, "HaarFunctional"] = {}

    # -- words ----------------------------------------------------------

    def _require_letter(self, l: str) -> None:
        if l not in self._letter_index:
            raise ValidationFailure(f"unknown letter {l!r}")

    def _star_word(self, w: Word) -> Word:
        return tuple(self.adjoint[l] for l in reversed(w))

    def word_degree(self, w: Word) -> int:
        return sum(self.degree[l] for l in w)

    def element_degree(self, x: LinComb) -> int:
        return max((self.word_degree(w) for w in x), default=0)

    @property
    def window(self) -> int:
        """Largest word degree with guaranteed-exact arithmetic."""
        return 2 * self.truncation

    def parse(self, x) -> LinComb:
        """Coerce a string / word / mapping to a normal-form combination.

        Strings may separate letters with whitespace; without whitespace
        they are tokenized greedily against the letter set, longest match
        first, so \"ca\" and \"c a*\" both work.
        """
        if isinstance(x, dict):
            out: LinComb = {}
            for w, c in x.items():
                _lc_axpy(out, self._nf_word(self._as_word(w)), complex(c))
            return _lc_clean(out)
        return dict(self._nf_word(self._as_word(x)))

    def _as_word(self, x) -> Word:
        if isinstance(x, tuple):
            for l in x:
                self._require_letter(l)
            return x
        if isinstance(x, str):
            if x.strip() == "":
                return ()
            if any(ch.isspace() for ch in x.strip()):
                w = tuple(x.split())
                for l in w:
                    self._require_letter(l)
                return w
            by_len = sorted(self.letters, key=len, reverse=True)
            out, rest = [], x
            while rest:
                for l in by_len:
                    if rest.startswith(l):
                        out.append(l)
                        rest = rest[len(l):]
                        break
                else:
                    raise ValidationFailure(f"cannot tokenize {x!r} at {rest!r}")
            return tuple(out)
        raise ValidationFailure(f"cannot interpret {x!r} as a word")

    # -- rewriting ------------------------------------------------------

    def _leftmost_match(self, w: Word):
        for pos in range(len(w)):
            rules = self._rules_by_head.get(w[pos])
            if not rules:
                continue
            for r in rules:
                k = len(r.lhs)
                if w[pos:pos + k] == r.lhs:
                    return pos, r
        return None

    def _nf_word(self, word: Word) -> LinComb:
        if self.word_degree(word) > self.window:
            raise DegreeOverflow(
                f"word degree {self.word_degree(word)} exceeds the exact window "
                f"{self.window} (truncation {self.truncation})")
        cached = self._nf_cache.get(word)
        if cached is not None:
            return cached
        out: LinComb = {}
        work: LinComb = {word: 1.0 + 0j}
        fuel = _FUEL_PER_WORD
        while work:
            w, coeff = work.popitem()
            hit = self._nf_cache.get(w)
            if hit is not None:
                _lc_axpy(out, hit, coeff)
                continue
            m = self._leftmost_match(w)
            if m is None:
                out[w] = out.get(w, 0j) + coeff
                continue
            pos, rule = m
            pre, post = w[:pos], w[pos + len(rule.lhs):]
            for rc, rw in rule.rhs:
                nw = pre + rw + post
                work[nw] = work.get(nw, 0j) + coeff * rc
            fuel -= 1
            if fuel <= 0:
                raise ValidationFailure(
                    f"rewriting of {word!r} exceeded the step budget; "
                    "the rule system does not appear to terminate")
        out = _lc_clean(out)
        self._nf_cache[word] = out
        return out

    def normal_form(self, x) -> LinComb:
        return self.parse(x)

    def is_normal(self, w: Word) -> bool:
        return self._leftmost_match(w) is None

    def unit(self) -> LinComb:
        return {(): 1.0 + 0j}

    def mul(self, x, y) -> LinComb:
        x, y = self.parse(x), self.parse(y)
        out: LinComb = {}
        for wx, cx in x.items():
            dx = self.word_degree(wx)
            for wy, cy in y.items():
                if dx + self.word_degree(wy) > self.window:
                    raise DegreeOverflow(
                        f"product degree {dx + self.word_degree(wy)} exceeds the "
                        f"exact window {self.window}")
                _lc_axpy(out, self._nf_word(wx + wy), cx * cy)
        return _lc_clean(out)

    def star(self, x) -> LinComb:
        x = self.parse(x)
        out: LinComb = {}
        for w, c in x.items():
            _lc_axpy(out, self._nf_word(self._star_word(w)), np.conj(c))
        return _lc_clean(out)

    def counit_value(self, x) -> complex:
        x = self.parse(x)
        total = 0j
        for w, c in x.items():
            val = 1.0 + 0j
            for l in w:
                val *= self._counit[l]
            total += c * val
        return total

    def antipode(self, x) -> LinComb:
        x = self.parse(x)
        out: LinComb = {}
        for w, c in x.items():
            _lc_axpy(out, self._antipode_word(w), c)
        return _lc_clean(out)

    def _antipode_word(self, w: Word) -> LinComb:
        cached = self._antipode_cache.get(w)
        if cached is not None:
            return cached
        # antihomomorphism: S(l1 ... lk) = S(lk) ... S(l1)
        acc = self.unit()
        for l in reversed(w):
            acc = self.mul(acc, self._antipode_letter[l])
        self._antipode_cache[w] = acc
        return acc

    def coproduct(self, x) -> dict[tuple[Word, Word], complex]:
        """Coproduct with both legs in normal form, keyed by word pairs."""
        x = self.parse(x)
        out: dict[tuple[Word, Word], complex] = {}
        hist: dict[tuple[Word, Word], float] = {}
        for w, c in x.items():
            for pair, v in self._delta_word(w).items():
                term = c * v
                out[pair] = out.get(pair, 0j) + term
                mag = abs(term)
                if mag > hist.get(pair, 0.0):
                    hist[pair] = mag
        return {p: v for p, v in out.items()
                if abs(v) > _PRUNE * max(1.0, hist[p])}

    def _delta_word(self, w: Word) -> dict[tuple[Word, Word], complex]:
        cached = self._delta_cache.get(w)
        if cached is not None:
            return cached
        if not w:
            cur = {((), ()): 1.0 + 0j}
            self._delta_cache[w] = cur
            return cur
        # prefixes of normal words are normal, so recursing on the prefix
        # shares work across an entire degree window
        prev = self._delta_word(w[:-1])
        l = w[-1]
        nxt: dict[tuple[Word, Word], complex] = {}
        # coefficients span many orders of magnitude near the window edge, so
        # cancellation dust must be judged against each pair's own accumulation
        # history rather than a single global floor
        hist: dict[tuple[Word, Word], float] = {}
        for (w1, w2), c in prev.items():
            for dc, d1, d2 in self._coproduct[l]:
                left = self._nf_word(w1 + d1)
                right = self._nf_word(w2 + d2)
                for v1, c1 in left.items():
                    cv = c * dc * c1
                    for v2, c2 in right.items():
                        key = (v1, v2)
                        term = cv * c2
                        nxt[key] = nxt.get(key, 0j) + term
                        mag = abs(term)
                        if mag > hist.get(key, 0.0):
                            hist[key] = mag
        cur = {p: v for p, v in nxt.items()
               if abs(v) > _PRUNE * max(1.0, hist[p])}
        self._delta_cache[w] = cur
        return cur

    # -- normal basis ----------------------------------------------------

    def basis(self, degree: int) -> list[Word]:
        """All normal words of degree <= degree, sorted degree-major.

        The sort makes basis(d') a prefix of basis(d) for d' <= d.
        """
        if degree < 0 or degree > self.window:
            raise DegreeOverflow(f"basis degree must lie in [0, {self.window}]")
        if degree in self._basis_cache:
            return self._basis_cache[degree]
        found: list[Word] = []
        frontier: list[Word] = [()]
        while frontier:
            found.extend(frontier)
            nxt = []
            for w in frontier:
                for l in self.letters:
                    if self.word_degree(w) + self.degree[l] > degree:
                        continue
                    cand = w + (l,)
                    if self.is_normal(cand):
                        nxt.append(cand)
            frontier = nxt
        found.sort(key=lambda w: (self.word_degree(w), len(w),
                                  tuple(self._letter_index[l] for l in w)))
        self._basis_cache[degree] = found
        return found

    # -- presentation checks ----------------------------------------------

    def defects(self) -> dict[str, float]:
        """Residuals of the structural axioms on the presentation.

        Covers confluence of all rule overlaps (critical pairs), the
        compatibility of star / coproduct / counit / antipode with every
        relation, the Hopf axioms on letters, and the corepresentation
        identities of the fundamental matrix.
        """
        res = {
            "confluence": self._confluence_defect(),
            "relation_star": 0.0,
            "relation_coproduct": 0.0,
            "relation_counit": 0.0,
            "relation_antipode": 0.0,
            "counit_axiom": 0.0,
            "antipode_axiom": 0.0,
            "coassociativity": 0.0,
            "star_coproduct": 0.0,
        }
        for r in self.rules:
            lhs = {r.lhs: 1.0 + 0j}
            rhs: LinComb = {}
            for c, w in r.rhs:
                rhs[w] = rhs.get(w, 0j) + c
            res["relation_star"] = max(
                res["relation_star"], _lc_dist(self.star(lhs), self.star(rhs)))
            dl, dr = self.coproduct(lhs), self.coproduct(rhs)
            res["relation_coproduct"] = max(
                res["relation_coproduct"],
                max((abs(dl.get(p, 0j) - dr.get(p, 0j)) for p in set(dl) | set(dr)),
                    default=0.0))
            res["relation_counit"] = max(
                res["relation_counit"],
                abs(self.counit_value(lhs) - self.counit_value(rhs)))
            res["relation_antipode"] = max(
                res["relation_antipode"],
                _lc_dist(self.antipode(lhs), self.antipode(rhs)))
        for l in self.letters:
            x = {(l,): 1.0 + 0j}
            dl = self.coproduct(x)
            # (eps (x) id) Delta = id = (id (x) eps) Delta
            left: LinComb = {}
            right: LinComb = {}
            for (w1, w2), c in dl.items():
                e1 = c * self.counit_value({w1: 1.0})
                e2 = c * self.counit_value({w2: 1.0})
                if abs(e1) > 0:
                    right[w2] = right.get(w2, 0j) + e1
                if abs(e2) > 0:
                    left[w1] = left.get(w1, 0j) + e2
            nf = self.parse(x)
            res["counit_axiom"] = max(res["counit_axiom"],
                                      _lc_dist(left, nf), _lc_dist(right, nf))
            # m (S (x) id) Delta = eps(.) 1 = m (id (x) S) Delta
            conv_l: LinComb = {}
            conv_r: LinComb = {}
            for (w1, w2), c in dl.items():
                _lc_axpy(conv_l, self.mul(self._antipode_word(w1), {w2: 1.0}), c)
                _lc_axpy(conv_r, self.mul({w1: 1.0}, self._antipode_word(w2)), c)
            target = {(): self.counit_value(x)}
            res["antipode_axiom"] = max(res["antipode_axiom"],
                                        _lc_dist(_lc_clean(conv_l), _lc_clean(target)),
                                        _lc_dist(_lc_clean(conv_r), _lc_clean(target)))
            # (Delta (x) id) Delta = (id (x) Delta) Delta
            lhs3: dict[tuple[Word, Word, Word], complex] = {}
            rhs3: dict[tuple[Word, Word, Word], complex] = {}
            for (w1, w2), c in dl.items():
                for (v1, v2), cc in self._delta_word(w1).items():
                    key = (v1, v2, w2)
                    lhs3[key] = lhs3.get(key, 0j) + c * cc
                for (v1, v2), cc in self._delta_word(w2).items():
                    key = (w1, v1, v2)
                    rhs3[key] = rhs3.get(key, 0j) + c * cc
            res["coassociativity"] = max(
                res["coassociativity"],
                max((abs(lhs3.get(p, 0j) - rhs3.get(p, 0j))
                     for p in set(lhs3) | set(rhs3)), default=0.0))
            # Delta(x*) agrees with the entrywise star of Delta(x)
            ds = self.coproduct(self.star(x))
            want: dict[tuple[Word, Word], complex] = {}
            for (w1, w2), c in dl.items():
                s1, s2 = self.star({w1: 1.0}), self.star({w2: 1.0})
                for v1, c1 in s1.items():
                    for v2, c2 in s2.items():
                        key = (v1, v2)
                        want[key] = want.get(key, 0j) + np.conj(c) * c1 * c2
            res["star_coproduct"] = max(
                res["star_coproduct"],
                max((abs(ds.get(p, 0j) - want.get(p, 0j))
                     for p in set(ds) | set(want)), default=0.0))
        res.update(self._fundamental_defects())
        return res

    def verify(self, tol: float = DEFAULT_TOL) -> AxiomReport:
        return AxiomReport(self.defects(), tol)

    def _confluence_defect(self) -> float:
        worst = 0.0
        for r1 in self.rules:
            for r2 in self.rules:
                l1, l2 = r1.lhs, r2.lhs
                # proper overlaps: a suffix of l1 equals a prefix of l2
                for k in range(1, min(len(l1), len(l2))):
                    if l1[-k:] != l2[:k]:
                        continue
                    word = l1 + l2[k:]
                    if self.word_degree(word) > self.window:
                        continue
                    worst = max(worst, self._resolve(word, 0, r1, len(l1) - k, r2))
                # containment: l2 occurs strictly inside l1
                if r1 is not r2 and len(l2) < len(l1):
                    for pos in range(len(l1) - len(l2) + 1):
                        if l1[pos:pos + len(l2)] == l2:
                            worst = max(worst, self._resolve(l1, 0, r1, pos, r2))
        return worst

    def _resolve(self, word: Word, p1: int, r1: RewriteRule,
                 p2: int, r2: RewriteRule) -> float:
        def one_step(pos: int, rule: RewriteRule) -> LinComb:
            pre, post = word[:pos], word[pos + len(rule.lhs):]
            out: LinComb = {}
            for c, w in rule.rhs:
                _lc_axpy(out, self._nf_word(pre + w + post), c)
            return _lc_clean(out)

        return _lc_dist(one_step(p1, r1), one_step(p2, r2))

    def _fundamental_defects(self) -> dict[str, float]:
        u = self.fundamental
        n = len(u)
        d_comul = d_counit = d_left = d_right = 0.0
        for i in range(n):
            for j in range(n):
                got = self.coproduct(u[i][j])
                want: dict[tuple[Word, Word], complex] = {}
                for k in range(n):
                    for w1, c1 in self.parse(u[i][k]).items():
                        for w2, c2 in self.parse(u[k][j]).items():
                            key = (w1, w2)
                            want[key] = want.get(key, 0j) + c1 * c2
                d_comul = max(d_comul,
                              max((abs(got.get(p, 0j) - want.get(p, 0j))
                                   for p in set(got) | set(want)), default=0.0))
                d_counit = max(d_counit,
                               abs(self.counit_value(u[i][j]) - (1.0 if i == j else 0.0)))
                left: LinComb = {}
                right: LinComb = {}
                for k in range(n):
                    _lc_axpy(left, self.mul(self.star(u[i][k]), u[j][k]), 1.0)
                    _lc_axpy(right, self.mul(u[k][i], self.star(u[k][j])), 1.0)
                target = self.unit() if i == j else {}
                d_left = max(d_left, _lc_dist(_lc_clean(left), target))
                d_right = max(d_right, _lc_dist(_lc_clean(right), target))
        return {
            "fundamental_comultiplication": d_comul,
            "fundamental_counit": d_counit,
            "fundamental_row_isometry": d_left,
            "fundamental_column_isometry": d_right,
        }


# ---------------------------------------------------------------------------
# invariant state on a degree window


@dataclass
class HaarFunctional:
    """The invariant state restricted to the degree <= degree span."""

    pqg: PresentedQG
    degree: int
    words: tuple[Word, ...]
    vector: np.ndarray          # value on each basis word

    def __post_init__(self):
        self.values = {w: complex(v) for w, v in zip(self.words, self.vector)}

    def __call__(self, x) -> complex:
        x = self.pqg.parse(x)
        total = 0j
        for w, c in x.items():
            if w not in self.values:
                raise DegreeOverflow(
                    f"word of degree {self.pqg.word_degree(w)} is outside the "
                    f"degree-{self.degree} domain of this functional")
            total += c * self.values[w]
        return total


def truncated_haar(pqg: PresentedQG, degree: int) -> HaarFunctional:
    """Solve (id (x) phi) Delta = phi(.) 1 on the degree window.

    For every basis word w and every left leg v of Delta(w) there is one
    linear equation in the unknowns phi(.); the solution space must be
    one-dimensional and must not vanish at the unit.  Anything else
    signals an inconsistent presentation or a truncation that cuts a
    coefficient block in half.  Cost grows steeply with degree.
    """
    if degree < 0 or degree > pqg.window:
        raise DegreeOverflow(f"haar degree must lie in [0, {pqg.window}]")
    cached = pqg._haar_cache.get(degree)
    if cached is not None:
        return cached
    words = pqg.basis(degree)
    index = {w: i for i, w in enumerate(words)}
    n = len(words)
    unit_row = index[()]

    row_dicts: list[dict[int, complex]] = []
    for w in words:
        grouped: dict[Word, dict[int, complex]] = {}
        for (w1, w2), c in pqg._delta_word(w).items():
            d = grouped.setdefault(w1, {})
            j = index[w2]
            d[j] = d.get(j, 0j) + c
        tgt = grouped.setdefault((), {})
        tgt[index[w]] = tgt.get(index[w], 0j) - 1.0
        row_dicts.extend(grouped.values())
    nrows = len(row_dicts)  # >= n: every word contributes its unit-leg row

    # Row norms span many orders of magnitude (normal-form coefficients grow
    # like q^-degree), which poisons the nullspace of the raw system.  Scaling
    # each equation to unit norm leaves the solution set untouched and keeps
    # the spectrum O(1).  Rows are reduced in bounded memory by stacking onto
    # a running triangular factor, so only an n x n SVD remains at the end.
    step = 4096
    R = np.zeros((0, n), dtype=complex)
    for lo in range(0, nrows, step):
        hi = min(lo + step, nrows)
        chunk = np.zeros((hi - lo, n), dtype=complex)
        for r in range(lo, hi):
            for j, c in row_dicts[r].items():
                chunk[r - lo, j] = c
        norms = np.linalg.norm(chunk, axis=1, keepdims=True)
        chunk /= np.where(norms > 0, norms, 1.0)
        R = np.linalg.qr(np.vstack([R, chunk]), mode="r")
    sv, vh = np.linalg.svd(R, full_matrices=False)[1:]
    thresh = 1e-10 * max(1.0, float(sv[0]))
    rank = int(np.sum(sv > thresh))
    null = vh[rank:].conj().T
    k = null.shape[1]
    if k == 0:
        raise ValidationFailure(
            f"no invariant functional exists on the degree-{degree} span; "
            "the presentation is inconsistent")
    if k > 1:
        raise ValidationFailure(
            f"invariant functional on the degree-{degree} span is not unique "
            f"(solution space has dimension {k}); the presentation is "
            "inconsistent or the truncation is too small")
    vec = null[:, 0]
    if abs(vec[unit_row]) < 1e-10 * np.linalg.norm(vec):
        raise ValidationFailure(
            "the invariant functional vanishes at the unit and cannot be "
            "normalized to a state")
    vec = vec / vec[unit_row]
    vec[unit_row] = 1.0
    haar = HaarFunctional(pqg, degree, tuple(words), vec)
    pqg._haar_cache[degree] = haar
    return haar


# ---------------------------------------------------------------------------
# coordinate context over a degree window


class TruncatedContext(HopfContext):
    """Coordinates over the normal words of degree <= degree.

    Implements the coefficient-level Hopf interface, so every
    corepresentation diagnostic written against that interface runs
    unchanged over a presented quantum group.  Products whose normal form
    leaves the window raise DegreeOverflow.
    """

    def __init__(self, pqg: PresentedQG, degree: int):
        self.pqg = pqg
        self.degree = degree
        self.words = tuple(pqg.basis(degree))
        self.index = {w: i for i, w in enumerate(self.words)}
        self.dim = len(self.words)
        self.unit = self.vec(pqg.unit())
        self.counit = np.array([pqg.counit_value({w: 1.0}) for w in self.words])
        self.haar = truncated_haar(pqg, degree).vector.copy()

    def vec(self, x) -> np.ndarray:
        x = self.pqg.parse(x)
        out = np.zeros(self.dim, dtype=complex)
        for w, c in x.items():
            i = self.index.get(w)
            if i is None:
                raise DegreeOverflow(
                    f"element of degree {self.pqg.word_degree(w)} does not fit "
                    f"the degree-{self.degree} window")
            out[i] = c
        return out

    def lincomb(self, v: np.ndarray) -> LinComb:
        v = np.asarray(v, dtype=complex)
        if v.shape != (self.dim,):
            raise ShapeMismatch(f"expected coordinates of length {self.dim}")
        return _lc_clean({w: complex(c) for w, c in zip(self.words, v)})

    def mul(self, x, y):
        return self.vec(self.pqg.mul(self.lincomb(x), self.lincomb(y)))

    def star(self, x):
        return self.vec(self.pqg.star(self.lincomb(x)))

    def antipode(self, x):
        return self.vec(self.pqg.antipode(self.lincomb(x)))

    def delta(self, x):
        out = np.zeros(self.dim * self.dim, dtype=complex)
        for (w1, w2), c in self.pqg.coproduct(self.lincomb(x)).items():
            i, j = self.index.get(w1), self.index.get(w2)
            if i is None or j is None:
                raise DegreeOverflow("coproduct leg left the degree window")
            out[i * self.dim + j] += c
        return out

    def fundamental_corep(self) -> np.ndarray:
        u = self.pqg.fundamental
        n = len(u)
        out = np.zeros((n, n, self.dim), dtype=complex)
        for i in range(n):
            for j in range(n):
                out[i, j] = self.vec(u[i][j])
        return out


# ---------------------------------------------------------------------------
# coefficient blocks through the dual algebra


@dataclass
class CoefficientSpace:
    """One irreducible coefficient block of the degree-truncated coalgebra."""

    label: str
    dim: int
    degree: int                  # largest word degree among the entries
    corep: list[list[LinComb]]   # unitary corepresentation matrix, normal forms
    basis: list[LinComb]         # the n^2 entries, row-major
    is_trivial: bool
    defects: dict[str, float] = field(default_factory=dict)

    def character(self) -> LinComb:
        out: LinComb = {}
        for i in range(self.dim):
            _lc_axpy(out, self.corep[i][i], 1.0)
        return _lc_clean(out)

    def coords(self, ctx: TruncatedContext) -> np.ndarray:
        out = np.zeros((self.dim, self.dim, ctx.dim), dtype=complex)
        for i in range(self.dim):
            for j in range(self.dim):
                out[i, j] = ctx.vec(self.corep[i][j])
        return out


def _prune_block(x: LinComb, floor: float) -> LinComb:
    top = max((abs(v) for v in x.values()), default=0.0)
    if top == 0.0:
        return {}
    return {w: v for w, v in x.items() if abs(v) > floor * top}


def coefficient_spaces(pqg: PresentedQG, degree: int, seed: int = 0,
                       tol: float = 1e-8) -> list[CoefficientSpace]:
    """Decompose the degree window into irreducible coefficient blocks.

    The window span is a finite-dimensional coalgebra; its dual under
    convolution, with f*(x) = conj f(S(x)*), is an abstract C*-algebra
    whose block decomposition yields dual matrix units f_ij.  The
    coefficient u_ij dual to f_ij is read off the rows of the resulting
    isomorphism, and each block is conjugated to unitary form with the
    inverse square root of its invariant-state Gram matrix.  Requires
    degree <= truncation so the Gram products stay inside the window.
    """
    if degree < 1 or degree > pqg.truncation:
        raise DegreeOverflow(
            f"block degree must lie in [1, {pqg.truncation}] so Gram products "
            "stay inside the exact window")
    words = pqg.basis(degree)
    n = len(words)
    index = {w: i for i, w in enumerate(words)}
    haar2 = truncated_haar(pqg, 2 * degree)

    # dual convolution algebra: (f_p f_q)(w) = Delta(w)[p, q]
    m = np.zeros((n, n, n), dtype=complex)
    for w in words:
        wi = index[w]
        for (w1, w2), c in pqg._delta_word(w).items():
            m[wi, index[w1], index[w2]] = c
    star_mat = np.zeros((n, n), dtype=complex)
    for w in words:
        img = pqg.star(pqg.antipode({w: 1.0}))
        for v, c in img.items():
            i = index.get(v)
            if i is None:
                raise DegreeOverflow(
                    "the antipode leaves the degree window; increase the "
                    "block degree")
            star_mat[index[w], i] = np.conj(c)
    eps = np.array([pqg.counit_value({w: 1.0}) for w in words])
    # (f_p f_q)(w) = Delta(w)[p, q], so the f_w-coefficient of f_p f_q is
    # exactly m[w, p, q] -- already the layout AbstractFdAlgebra expects
    dual = AbstractFdAlgebra(m, star_mat, eps, validate=True)
    dec = wedderburn(dual, seed=seed)

    raw_blocks = []
    offset = 0
    for nb in dec.block_dims:
        entries = [[None] * nb for _ in range(nb)]
        for i in range(nb):
            for j in range(nb):
                row = dec.iso[offset + i * nb + j]
                entries[i][j] = _prune_block(
                    {w: complex(c) for w, c in zip(words, row) if c != 0},
                    _BLOCK_PRUNE)
        raw_blocks.append(entries)
        offset += nb * nb

    spaces = []
    for entries in raw_blocks:
        nb = len(entries)
        # invariant Gram B_ij = sum_k phi(u_ik* u_jk); invariance of phi
        # gives conj(u) B u^T = B, so conjugating by (B^T)^{+-1/2} makes
        # the rows isometric.  For an already-unitary block B = 1.  The
        # raw units carry an arbitrary diagonal scaling that can span
        # several orders of magnitude, so one conjugation pass leaves a
        # residual; iterating squares it away.
        unitary = entries
        for _ in range(4):
            gram = np.zeros((nb, nb), dtype=complex)
            for i in range(nb):
                for j in range(nb):
                    gram[i, j] = sum(
                        haar2(pqg.mul(pqg.star(unitary[i][k]), unitary[j][k]))
                        for k in range(nb))
            gram = 0.5 * (gram.T + gram.conj())
            if float(np.abs(gram - np.eye(nb)).max()) < 1e-13:
                break
            vals, vecs = np.linalg.eigh(gram)
            if vals[0] <= 1e-10 * max(1.0, vals[-1]):
                raise ValidationFailure(
                    f"coefficient-block Gram matrix is not positive definite "
                    f"(min eigenvalue {vals[0]:.3e})")
            rt = vecs @ np.diag(np.sqrt(vals)) @ vecs.conj().T
            rti = vecs @ np.diag(1.0 / np.sqrt(vals)) @ vecs.conj().T
            refined = [[None] * nb for _ in range(nb)]
            for i in range(nb):
                for j in range(nb):
                    acc: LinComb = {}
                    for p in range(nb):
                        if abs(rti[i, p]) < 1e-15:
                            continue
                        for q in range(nb):
                            c = rti[i, p] * rt[q, j]
                            if abs(c) > 1e-15:
                                _lc_axpy(acc, unitary[p][q], c)
                    refined[i][j] = _prune_block(_lc_clean(acc), _BLOCK_PRUNE)
            unitary = refined

        blk_defects = _block_defects(pqg, unitary)
        worst = max(blk_defects.values())
        if worst > tol:
            raise ValidationFailure(
                f"extracted coefficient block fails the corepresentation "
                f"identities (worst residual {worst:.3e})")
        deg_b = max(pqg.element_degree(unitary[i][j])
                    for i in range(nb) for j in range(nb))
        flat = [unitary[i][j] for i in range(nb) for j in range(nb)]
        trivial = nb == 1 and _lc_dist(unitary[0][0], pqg.unit()) <= tol
        spaces.append(CoefficientSpace("", nb, deg_b, unitary, flat,
                                       trivial, blk_defects))

    spaces.sort(key=lambda s: (s.degree, s.dim, _character_key(s)))
    for k, s in enumerate(spaces):
        s.label = f"pi{k}"
    if sum(s.dim ** 2 for s in spaces) != n:
        raise ValidationFailure(
            "coefficient blocks do not exhaust the degree window; the "
            "truncation cuts a block in half")
    return spaces


def _character_key(s: CoefficientSpace) -> str:
    ch = s.character()
    return ";".join(f"{'.'.join(w)}:{ch[w].real:.6f},{ch[w].imag:.6f}"
                    for w in sorted(ch))


def _block_defects(pqg: PresentedQG, u: list[list[LinComb]]) -> dict[str, float]:
    nb = len(u)
    d_comul = d_counit = d_left = d_right = 0.0
    for i in range(nb):
        for j in range(nb):
            got = pqg.coproduct(u[i][j])
            want: dict[tuple[Word, Word], complex] = {}
            for k in range(nb):
                for w1, c1 in u[i][k].items():
                    for w2, c2 in u[k][j].items():
                        key = (w1, w2)
                        want[key] = want.get(key, 0j) + c1 * c2
            d_comul = max(d_comul,
                          max((abs(got.get(p, 0j) - want.get(p, 0j))
                               for p in set(got) | set(want)), default=0.0))
            d_counit = max(d_counit,
                           abs(pqg.counit_value(u[i][j]) - (1.0 if i == j else 0.0)))
            acc: LinComb = {}
            acc2: LinComb = {}
            for k in range(nb):
                _lc_axpy(acc, pqg.mul(pqg.star(u[i][k]), u[j][k]), 1.0)
                _lc_axpy(acc2, pqg.mul(u[k][i], pqg.star(u[k][j])), 1.0)
            target = pqg.unit() if i == j else {}
            d_left = max(d_left, _lc_dist(_lc_clean(acc), target))
            d_right = max(d_right, _lc_dist(_lc_clean(acc2), target))
    return {
        "comultiplication_rule": d_comul,
        "counit_rule": d_counit,
        "row_isometry": d_left,
        "column_isometry": d_right,
    }


# ---------------------------------------------------------------------------
# deformation matrix and invariance identities


def compute_Q(pqg: PresentedQG, pi: CoefficientSpace | None = None,
              context: TruncatedContext | None = None) -> QMatrixResult:
    """Positive matrix Q and quantum dimension of a coefficient block.

    With pi omitted the fundamental corepresentation is used.  The Gram
    matrix G[i, j] = haar(sum_k u_ik u_jk*) of the modified inner product
    determines Q up to the trace normalization Tr Q = Tr Q^{-1}; the
    quantum dimension is Tr Q >= dim, with equality exactly when Q = 1.
    """
    if pi is None:
        entries = pqg.fundamental
        deg = max(pqg.element_degree(pqg.parse(e)) for row in entries for e in row)
    else:
        entries = pi.corep
        deg = pi.degree
    if context is None:
        context = TruncatedContext(pqg, 2 * deg)
    ncor = len(entries)
    u = np.zeros((ncor, ncor, context.dim), dtype=complex)
    for i in range(ncor):
        for j in range(ncor):
            u[i, j] = context.vec(entries[i][j])
    return q_matrix_from_corep(context, u)


def strong_left_invariance_check(pqg: PresentedQG, g, h,
                                 haar: HaarFunctional | None = None) -> float:
    """Residual of phi(g h_(2)) h_(1) = phi(g_(2) h) S(g_(1)).

    Both elements must fit the window jointly: the products under phi have
    degree deg(g) + deg(h).
    """
    g, h = pqg.parse(g), pqg.parse(h)
    need = pqg.element_degree(g) + pqg.element_degree(h)
    if need > pqg.window:
        raise DegreeOverflow(
            f"combined degree {need} exceeds the exact window {pqg.window}")
    if haar is None:
        haar = truncated_haar(pqg, need)
    lhs: LinComb = {}
    for (w1, w2), c in pqg.coproduct(h).items():
        val = haar(pqg.mul(g, {w2: 1.0}))
        if abs(val) > 0:
            _lc_axpy(lhs, pqg.parse({w1: 1.0}), c * val)
    rhs: LinComb = {}
    for (w1, w2), c in pqg.coproduct(g).items():
        val = haar(pqg.mul({w2: 1.0}, h))
        if abs(val) > 0:
            _lc_axpy(rhs, pqg._antipode_word(w1), c * val)
    return _lc_dist(_lc_clean(lhs), _lc_clean(rhs))


# ---------------------------------------------------------------------------
# the shipped q-deformed example


def suq2_presentation(q: float, truncation: int = 6) -> PresentedQG:
    """The q-deformed 2x2 special unitary group, 0 < q < 1.

    Normal words are a^m c^j c*^k and a*^m c^j c*^k; the degree-d basis
    has C(d+3, 3) + C(d+2, 3) words.  The fundamental corepresentation is
    [[a, -q c*], [c, a*]] with row-isometric rows, deformation matrix
    Q = diag(q^{-1}, q) and quantum dimension q + q^{-1}.
    """
    q = float(q)
    if not 0.0 < q < 1.0:
        raise ValidationFailure(f"deformation parameter must satisfy 0 < q < 1, got {q}")
    a, A, c, C = "a", "a*", "c", "c*"
    one: Word = ()
    rules = [
        RewriteRule((A, a), ((1.0, one), (-q * q, (c, C)))),
        RewriteRule((a, A), ((1.0, one), (-1.0, (c, C)))),
        RewriteRule((c, a), ((q, (a, c)),)),
        RewriteRule((C, a), ((q, (a, C)),)),
        RewriteRule((c, A), ((1.0 / q, (A, c)),)),
        RewriteRule((C, A), ((1.0 / q, (A, C)),)),
        RewriteRule((C, c), ((1.0, (c, C)),)),
    ]
    coproduct = {
        a: [(1.0, (a,), (a,)), (-q, (C,), (c,))],
        c: [(1.0, (c,), (a,)), (1.0, (A,), (c,))],
    }
    counit = {a: 1.0, c: 0.0}
    antipode = {
        a: {(A,): 1.0},
        A: {(a,): 1.0},
        c: {(c,): -1.0 / q},
        C: {(C,): -q},
    }
    fundamental = [
        [{(a,): 1.0}, {(C,): -q}],
        [{(c,): 1.0}, {(A,): 1.0}],
    ]
    return PresentedQG(["a", "c"], rules, coproduct, counit, antipode,
                       fundamental, truncation=truncation, name="suq2")


# ---------------------------------------------------------------------------
# dict form (used by the JSON layer)


def _coeff_from(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    return complex(v)


def _coeff_to(v: complex) -> list[float]:
    return [float(np.real(v)), float(np.imag(v))]


def presented_from_dict(data: dict) -> PresentedQG:
    """Build a presentation from its dict form.

    Words are strings (whitespace-separated letters, or run together when
    unambiguous); coefficients are numbers or [re, im] pairs.  The
    ``fundamental`` entry is a square matrix of linear combinations; it is
    required, since every downstream computation is anchored to it.
    """
    if data.get("kind") != "presented":
        raise ValidationFailure(f"expected kind 'presented', got {data.get('kind')!r}")
    generators = list(data["generators"])
    truncation = int(data.get("truncation", 6))
    name = data.get("name", "presented")

    def parse_word(s) -> Word:
        if isinstance(s, (list, tuple)):
            return tuple(s)
        s = str(s)
        if s.strip() == "":
            return ()
        if any(ch.isspace() for ch in s.strip()):
            return tuple(s.split())
        letters = []
        for g in generators:
            letters.extend([g, g + "*"])
        by_len = sorted(letters, key=len, reverse=True)
        out, rest = [], s
        while rest:
            for l in by_len:
                if rest.startswith(l):
                    out.append(l)
                    rest = rest[len(l):]
                    break
            else:
                raise ValidationFailure(f"cannot tokenize word {s!r}")
        return tuple(out)

    rules = []
    for rel in data.get("relations", []):
        rhs = tuple((_coeff_from(c), parse_word(w)) for c, w in rel["rhs"])
        rules.append(RewriteRule(parse_word(rel["lhs"]), rhs))
    coproduct = {
        g: [(_coeff_from(c), parse_word(w1), parse_word(w2)) for c, w1, w2 in terms]
        for g, terms in data["coproduct"].items()
    }
    counit = {g: _coeff_from(v) for g, v in data["counit"].items()}
    antipode = {
        g: {parse_word(w): _coeff_from(c) for c, w in terms}
        for g, terms in data["antipode"].items()
    }
    if "fundamental" not in data:
        raise ValidationFailure("presentation dict lacks the fundamental corepresentation")
    fundamental = [
        [{parse_word(w): _coeff_from(c) for c, w in entry} for entry in row]
        for row in data["fundamental"]
    ]
    degree = {g: int(d) for g, d in data.get("degree", {}).items()} or None
    return PresentedQG(generators, rules, coproduct, counit, antipode,
                       fundamental, truncation=truncation, degree=degree,
                       name=name)


def presented_to_dict(pqg: PresentedQG) -> dict:
    def word_str(w: Word) -> str:
        return " ".join(w)

    return {
        "kind": "presented",
        "name": pqg.name,
        "generators": list(pqg.generators),
        "truncation": pqg.truncation,
        "degree": {g: pqg.degree[g] for g in pqg.generators},
        "relations": [
            {"lhs": word_str(r.lhs),
             "rhs": [[_coeff_to(c), word_str(w)] for c, w in r.rhs]}
            for r in pqg.rules
        ],
        "coproduct": {
            l: [[_coeff_to(c), word_str(w1), word_str(w2)] for c, w1, w2 in terms]
            for l, terms in pqg._coproduct.items()
        },
        "counit": {l: _coeff_to(v) for l, v in pqg._counit.items()},
        "antipode": {
            l: [[_coeff_to(c), word_str(w)] for w, c in sorted(lc.items())]
            for l, lc in pqg._antipode_letter.items()
        },
        "fundamental": [
            [[[_coeff_to(c), word_str(w)] for w, c in sorted(e.items())]
             for e in row]
            for row in pqg.fundamental
        ],
    }
