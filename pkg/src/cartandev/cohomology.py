"""Lie algebra cohomology machinery for the ambient algebra g = n + h.

Implements the Chevalley-Eilenberg differential on hom(^k n, g), its
Gram-adjoint, and the two normal-module constructions (orthogonal to the
trace module, and Morimoto's ker of the adjoint), all in exact rational
arithmetic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from . import ratlinalg as rl
from .errors import IntersectionNonTrivial

ZERO = Fraction(0)
ONE = Fraction(1)


def _sort_sign(t):
    """Sort a tuple of indices, returning (sorted tuple, permutation sign).

    Returns sign 0 when the tuple has a repeated index.
    """
    t = list(t)
    sign = 1
    for i in range(1, len(t)):
        j = i
        while j > 0 and t[j - 1] > t[j]:
            t[j - 1], t[j] = t[j], t[j - 1]
            sign = -sign
            j -= 1
    for a, b in zip(t, t[1:]):
        if a == b:
            return tuple(t), 0
    return tuple(t), sign


@dataclass(frozen=True)
class HomElement:
    """An element of hom(^k n, g) with rational coefficients.

    coeffs maps (a, (j_1 < ... < j_k)) to the coefficient of the basis
    monomial e_a (x) e^{j_1} ^ ... ^ e^{j_k}. Zero coefficients are never
    stored.
    """

    arity: int
    coeffs: dict = field(hash=False)

    def __post_init__(self):
        object.__setattr__(self, "coeffs",
                           {m: c for m, c in self.coeffs.items() if c != 0})

    def is_zero(self):
        return not self.coeffs

    def __add__(self, other):
        out = dict(self.coeffs)
        for m, c in other.coeffs.items():
            out[m] = out.get(m, ZERO) + c
        return HomElement(self.arity, out)

    def __sub__(self, other):
        return self + other.scale(Fraction(-1))

    def scale(self, f):
        return HomElement(self.arity, {m: f * c for m, c in self.coeffs.items()})

    def __eq__(self, other):
        return (isinstance(other, HomElement) and self.arity == other.arity
                and self.coeffs == other.coeffs)

    def serialize(self):
        """Monomial -> "p/q" map with 1-based indices, keys sorted."""
        out = {}
        for (a, js), c in self.coeffs.items():
            key = f"{a + 1}:" + ",".join(str(j + 1) for j in js)
            out[key] = str(c)
        return dict(sorted(out.items()))


def hom_element(arity, terms):
    """Build a HomElement from (a, js, coeff) triples, normalizing the wedge."""
    coeffs = {}
    for a, js, c in terms:
        js, sign = _sort_sign(tuple(js))
        if sign == 0:
            continue
        m = (a, js)
        coeffs[m] = coeffs.get(m, ZERO) + sign * Fraction(c)
    return HomElement(arity, coeffs)


@dataclass
class HomSubspace:
    """A subspace of positive-degree hom(^k n, g), with an echelon certificate."""

    arity: int
    elements: list                 # HomElements (echelonized basis)
    matrix: list                   # rows over the positive-monomial coordinates
    monomials: list                # the positive-monomial coordinate order

    @property
    def dim(self):
        return len(self.elements)


class Cohomology:
    """All cohomological operations for one ambient algebra with its metric.

    Caches monomial enumerations, Gram blocks and monomial differentials.
    """

    def __init__(self, amb, metric):
        self.amb = amb
        self.metric = metric
        self.n = amb.nil.dim
        self.N = amb.dim
        self._monomials = {}
        self._gram_g = None
        self._gram_n_dual = None
        self._blocks = {}
        self._mono_diff = {}

    # -- bookkeeping --------------------------------------------------------

    def degree_of_monomial(self, m):
        a, js = m
        return self.amb.degree_of(a) + sum(self.amb.nil.degree[j] for j in js)

    def monomials(self, arity):
        """All basis monomials of hom(^arity n, g), in canonical order."""
        if arity not in self._monomials:
            self._monomials[arity] = [
                (a, js) for a in range(self.N)
                for js in itertools.combinations(range(self.n), arity)]
        return self._monomials[arity]

    def positive_monomials(self, arity):
        return [m for m in self.monomials(arity) if self.degree_of_monomial(m) > 0]

    def degree_part(self, elem):
        """Map degree -> HomElement, splitting a HomElement by monomial degree."""
        parts = {}
        for m, c in elem.coeffs.items():
            d = self.degree_of_monomial(m)
            parts.setdefault(d, {})[m] = c
        return {d: HomElement(elem.arity, cs) for d, cs in parts.items()}

    # -- metric -------------------------------------------------------------

    def gram_g(self):
        """Gram matrix on g: extended metric on n, identity on h."""
        if self._gram_g is None:
            g = self.metric.gram()
            N = self.N
            full = [[ZERO] * N for _ in range(N)]
            for i in range(self.n):
                for j in range(self.n):
                    full[i][j] = g[i][j]
            for i in range(self.n, N):
                full[i][i] = ONE
            self._gram_g = full
        return self._gram_g

    def gram_n_dual(self):
        """Gram matrix on n*: blockwise inverse of the metric on n."""
        if self._gram_n_dual is None:
            n = self.n
            full = [[ZERO] * n for _ in range(n)]
            off = 0
            for b in self.metric.blocks:
                inv = rl.invert([list(r) for r in b])
                for i, row in enumerate(inv):
                    for j, v in enumerate(row):
                        full[off + i][off + j] = v
                off += len(b)
            self._gram_n_dual = full
        return self._gram_n_dual

    def wedge_gram(self, js, ks):
        """<e^{j_1}^...^e^{j_k}, e^{k_1}^...^e^{k_k}> = det(g^{j_r k_s}) / k!"""
        gd = self.gram_n_dual()
        k = len(js)
        if k == 0:
            return ONE
        if k == 1:
            return gd[js[0]][ks[0]]
        if k == 2:
            return Fraction(1, 2) * (gd[js[0]][ks[0]] * gd[js[1]][ks[1]]
                                     - gd[js[0]][ks[1]] * gd[js[1]][ks[0]])
        total = ZERO
        for perm in itertools.permutations(range(k)):
            _, sign = _sort_sign(perm)
            term = ONE
            for r in range(k):
                term *= gd[js[r]][ks[perm[r]]]
            total += sign * term
        fact = 1
        for i in range(2, k + 1):
            fact *= i
        return total / fact

    def inner(self, x, y):
        """Exact inner product of two HomElements of equal arity."""
        assert x.arity == y.arity
        gg = self.gram_g()
        total = ZERO
        for (a, js), cx in x.coeffs.items():
            for (b, ks), cy in y.coeffs.items():
                if gg[a][b] == 0:
                    continue
                w = self.wedge_gram(js, ks)
                if w != 0:
                    total += cx * cy * gg[a][b] * w
        return total

    def _block_key(self, m):
        a, js = m
        alayer = self.amb.nil.degree[a] if a < self.n else 0
        return (alayer, tuple(sorted(self.amb.nil.degree[j] for j in js)))

    def _gram_blocks(self, arity):
        """Per-block Gram inverses for the monomial basis of one arity."""
        if arity in self._blocks:
            return self._blocks[arity]
        groups = {}
        for m in self.monomials(arity):
            groups.setdefault(self._block_key(m), []).append(m)
        blocks = {}
        for key, ms in groups.items():
            gram = [[self.inner(HomElement(arity, {m1: ONE}),
                                HomElement(arity, {m2: ONE})) for m2 in ms]
                    for m1 in ms]
            blocks[key] = (ms, rl.invert(gram))
        self._blocks[arity] = blocks
        return blocks

    # -- differential and adjoint -------------------------------------------

    def identity_hom(self):
        """The identity of n as an arity-1 element: sum_j e_j (x) e^j."""
        return HomElement(1, {(j, (j,)): ONE for j in range(self.n)})

    def evaluate(self, elem, args):
        """elem evaluated on a tuple of n-basis indices; a sparse g-vector."""
        js, sign = _sort_sign(args)
        if sign == 0:
            return {}
        out = {}
        for (a, ks), c in elem.coeffs.items():
            if ks == js:
                out[a] = out.get(a, ZERO) + sign * c
        return out

    def differential(self, elem):
        """Chevalley-Eilenberg differential hom(^k n, g) -> hom(^{k+1} n, g)."""
        k = elem.arity
        amb = self.amb
        out = {}
        for tup in itertools.combinations(range(self.n), k + 1):
            val = {}
            for i in range(k + 1):
                rest = tup[:i] + tup[i + 1:]
                inner_val = self.evaluate(elem, rest)
                if not inner_val:
                    continue
                s = ONE if i % 2 == 0 else -ONE
                for a, c in inner_val.items():
                    for b, w in amb.bracket_basis(tup[i], a).items():
                        val[b] = val.get(b, ZERO) + s * c * w
            for i in range(k + 1):
                for j in range(i + 1, k + 1):
                    rest = tup[:i] + tup[i + 1:j] + tup[j + 1:]
                    s = -ONE if (i + j) % 2 == 1 else ONE
                    for l, c in amb.nil.bracket_basis(tup[i], tup[j]).items():
                        for a, w in self.evaluate(elem, (l,) + rest).items():
                            val[a] = val.get(a, ZERO) + s * c * w
            for a, c in val.items():
                if c != 0:
                    out[(a, tup)] = c
        return HomElement(k + 1, out)

    def _monomial_differential(self, arity, m):
        key = (arity, m)
        if key not in self._mono_diff:
            self._mono_diff[key] = self.differential(HomElement(arity, {m: ONE}))
        return self._mono_diff[key]

    def codifferential(self, beta):
        """Gram-adjoint of the differential: <d a, b> = <a, d* b> exactly."""
        k = beta.arity - 1
        y = {}
        for m in self.monomials(k):
            v = self.inner(self._monomial_differential(k, m), beta)
            if v != 0:
                y[m] = v
        out = {}
        for key, (ms, graminv) in self._gram_blocks(k).items():
            yv = [y.get(m, ZERO) for m in ms]
            if all(v == 0 for v in yv):
                continue
            xv = rl.matvec(graminv, yv)
            for m, v in zip(ms, xv):
                if v != 0:
                    out[m] = v
        return HomElement(k, out)

    # -- subspaces of positive-degree hom(^2 n, g) ---------------------------

    def _coords(self, elem, monos):
        index = {m: i for i, m in enumerate(monos)}
        row = [ZERO] * len(monos)
        for m, c in elem.coeffs.items():
            if m not in index:
                raise ValueError(f"element not supported on the expected monomials: {m}")
            row[index[m]] = c
        return row

    def _from_coords(self, arity, row, monos):
        return HomElement(arity, {m: c for m, c in zip(monos, row) if c != 0})

    def _subspace(self, arity, rows, monos):
        basis = rl.row_basis(rows)
        elems = [self._from_coords(arity, r, monos) for r in basis]
        return HomSubspace(arity=arity, elements=elems, matrix=basis, monomials=monos)

    def _gram_restricted(self, monos):
        key = ("restr", tuple(monos))
        if key not in self._blocks:
            m = [[self.inner(HomElement(2, {m1: ONE}), HomElement(2, {m2: ONE}))
                  for m2 in monos] for m1 in monos]
            self._blocks[key] = m
        return self._blocks[key]

    def _ortho_complement(self, rows, monos):
        """Orthocomplement of a row span within the span of monos."""
        if not rows:
            return rl.identity(len(monos))
        g = self._gram_restricted(monos)
        return rl.nullspace(rl.matmul(rows, g))

    def image_partial_plus(self):
        """Basis of the differential's image of positive-degree hom(n, g)."""
        monos = self.positive_monomials(2)
        rows = []
        for m in self.positive_monomials(1):
            d = self._monomial_differential(1, m)
            if not d.is_zero():
                rows.append(self._coords(d, monos))
        return self._subspace(2, rows, monos)

    def s_module(self):
        """The trace module S spanned by id ^ phi over covectors phi of (ker h)-perp."""
        monos = self.positive_monomials(2)
        sym = self.amb.sym
        k1 = sym.k1
        if sym.kerH:
            phis = rl.nullspace([list(v) for v in sym.kerH])
        else:
            phis = rl.identity(k1)
        rows = []
        for phi in phis:
            terms = []
            for j in range(self.n):
                for i in range(k1):
                    if phi[i] != 0 and i != j:
                        terms.append((j, (j, i), phi[i]))
            elem = hom_element(2, terms)
            rows.append(self._coords(elem, monos))
        return self._subspace(2, rows, monos)

    def h_action(self, alpha, elem):
        """Induced symmetry action on hom(^2 n, g):
        (A.f)(v, w) = A f(v, w) - f(Av, w) - f(v, Aw)."""
        amb = self.amb
        mat = amb.sym.basis[alpha]
        ea = self.n + alpha
        out = {}
        for p in range(self.n):
            for q in range(p + 1, self.n):
                val = {}
                for a, c in self.evaluate(elem, (p, q)).items():
                    for b, w in amb.bracket_basis(ea, a).items():
                        val[b] = val.get(b, ZERO) + c * w
                for r in range(self.n):
                    if mat[r][p] != 0:
                        for a, c in self.evaluate(elem, (r, q)).items():
                            val[a] = val.get(a, ZERO) - mat[r][p] * c
                    if mat[r][q] != 0:
                        for a, c in self.evaluate(elem, (p, r)).items():
                            val[a] = val.get(a, ZERO) - mat[r][q] * c
                for a, c in val.items():
                    if c != 0:
                        out[(a, (p, q))] = c
        return HomElement(2, out)

    def _check_h_invariant(self, rows, monos):
        for alpha in range(self.amb.sym.dimH):
            for r in rows:
                acted = self.h_action(alpha, self._from_coords(2, r, monos))
                if not rl.in_span(rows, self._coords(acted, monos)):
                    return False
        return True

    def normal_module_popp(self):
        """Normal module orthogonal to the trace module S.

        Returns (HomSubspace, feasible). Raises IntersectionNonTrivial with a
        witness when S meets the orthocomplement of the differential's image.
        """
        monos = self.positive_monomials(2)
        im = self.image_partial_plus()
        s = self.s_module()
        operp = self._ortho_complement(im.matrix, monos)
        inter = rl.span_intersection(s.matrix, operp)
        if inter:
            witness = self._from_coords(2, inter[0], monos)
            raise IntersectionNonTrivial(
                "the trace module meets the orthocomplement of im d+", witness)
        t = rl.span_sum(s.matrix, operp)
        tperp = self._ortho_complement(t, monos)
        nperp = rl.span_sum(s.matrix, tperp)
        nrows = rl.row_basis(self._ortho_complement(nperp, monos))
        # exact verification: N + im d+ = hom_+, N is h-invariant
        assert not rl.span_intersection(nrows, im.matrix)
        assert len(nrows) + im.dim == len(monos)
        assert self._check_h_invariant(nrows, monos)
        return self._subspace(2, nrows, monos)

    def normal_module_morimoto(self):
        """Morimoto's normal module: ker d* in positive degree.

        Equals the orthocomplement of im d+ within hom_+ because the metric
        blocks are degree-homogeneous.
        """
        monos = self.positive_monomials(2)
        im = self.image_partial_plus()
        rows = rl.row_basis(self._ortho_complement(im.matrix, monos))
        assert len(rows) + im.dim == len(monos)
        assert not rl.span_intersection(rows, im.matrix)
        return self._subspace(2, rows, monos)

    def morimoto_popp_obstruction(self, i):
        """The arity-3 element d(sum_j e_j (x) e^j) ^ e^i for a generator index i.

        A zero return is the necessary condition for Morimoto's normalisation
        to reproduce the Popp development in direction i (0-based).
        """
        d = self.differential(self.identity_hom())
        terms = []
        for (a, js), c in d.coeffs.items():
            terms.append((a, js + (i,), c))
        return hom_element(3, terms)

    def report(self):
        """JSON-friendly summary used by the CLI."""
        monos = self.positive_monomials(2)
        im = self.image_partial_plus()
        try:
            npopp = self.normal_module_popp()
            feasible = True
            witness = None
            dim_n = npopp.dim
        except IntersectionNonTrivial as e:
            feasible = False
            witness = e.witness.serialize()
            dim_n = None
        obstruction = [not self.morimoto_popp_obstruction(i).is_zero()
                       for i in range(self.amb.sym.k1)]
        out = {
            "dim_hom_plus": len(monos),
            "dim_im_partial_plus": im.dim,
            "dim_N": dim_n,
            "feasible": feasible,
            "obstruction_nonzero": obstruction,
        }
        if witness is not None:
            out["witness"] = witness
        return out
