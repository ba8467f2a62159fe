"""Exact symbolic layer: polynomials, PBW operators, difference structure.

All coefficients are ``fractions.Fraction``; every identity in this module
is exact.  Multi-index conventions:

* monomial key ``(i, j, k)`` = p^i q^j t^k, homogeneous degree i + j + 2k;
* PBW key ``beta = (b1, b2, b3)`` = the operator X^b1 Y^b2 T^b3 (rightmost
  factor applied first), homogeneous degree b1 + b2 + 2 b3.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

Mono = Tuple[int, ...]
PBWIndex = Tuple[int, int, int]

ZERO = Fraction(0)
ONE = Fraction(1)

#: dilation weight of each coordinate / generator
GEN_WEIGHTS = (1, 1, 2)


def homogeneous_degree(idx: Sequence[int]) -> int:
    """Weighted degree of a monomial or PBW multi-index."""
    return idx[0] + idx[1] + 2 * idx[2]


def index_order(idx: Sequence[int]) -> int:
    """Total number of generator letters |beta|."""
    return sum(idx)


class Poly:
    """Sparse polynomial over Fraction in ``nvars`` variables."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: Mapping[Mono, Fraction] | None = None):
        self.nvars = nvars
        self.terms: Dict[Mono, Fraction] = {}
        if terms:
            for m, c in terms.items():
                c = Fraction(c)
                if c != 0:
                    self.terms[tuple(m)] = c

    # -- constructors -------------------------------------------------
    @classmethod
    def zero(cls, nvars: int = 3) -> "Poly":
        return cls(nvars)

    @classmethod
    def const(cls, c, nvars: int = 3) -> "Poly":
        return cls(nvars, {tuple([0] * nvars): Fraction(c)})

    @classmethod
    def monomial(cls, idx: Mono, c=1, nvars: int | None = None) -> "Poly":
        nv = len(idx) if nvars is None else nvars
        return cls(nv, {tuple(idx): Fraction(c)})

    @classmethod
    def var(cls, i: int, nvars: int = 3) -> "Poly":
        idx = [0] * nvars
        idx[i] = 1
        return cls(nvars, {tuple(idx): ONE})

    # -- ring operations ----------------------------------------------
    def copy(self) -> "Poly":
        p = Poly(self.nvars)
        p.terms = dict(self.terms)
        return p

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Poly):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def __add__(self, other: "Poly") -> "Poly":
        assert self.nvars == other.nvars
        out = dict(self.terms)
        for m, c in other.terms.items():
            s = out.get(m, ZERO) + c
            if s:
                out[m] = s
            else:
                out.pop(m, None)
        r = Poly(self.nvars)
        r.terms = out
        return r

    def __neg__(self) -> "Poly":
        r = Poly(self.nvars)
        r.terms = {m: -c for m, c in self.terms.items()}
        return r

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def scale(self, c) -> "Poly":
        c = Fraction(c)
        r = Poly(self.nvars)
        if c != 0:
            r.terms = {m: c * v for m, v in self.terms.items()}
        return r

    def __mul__(self, other):
        if isinstance(other, Poly):
            assert self.nvars == other.nvars
            out: Dict[Mono, Fraction] = {}
            for m1, c1 in self.terms.items():
                for m2, c2 in other.terms.items():
                    m = tuple(a + b for a, b in zip(m1, m2))
                    s = out.get(m, ZERO) + c1 * c2
                    if s:
                        out[m] = s
                    else:
                        out.pop(m, None)
            r = Poly(self.nvars)
            r.terms = out
            return r
        return self.scale(other)

    __rmul__ = __mul__

    def pow(self, k: int) -> "Poly":
        r = Poly.const(1, self.nvars)
        base = self
        while k:
            if k & 1:
                r = r * base
            base = base * base
            k >>= 1
        return r

    # -- calculus -----------------------------------------------------
    def diff(self, var: int) -> "Poly":
        out: Dict[Mono, Fraction] = {}
        for m, c in self.terms.items():
            e = m[var]
            if e:
                m2 = list(m)
                m2[var] = e - 1
                key = tuple(m2)
                s = out.get(key, ZERO) + c * e
                if s:
                    out[key] = s
                else:
                    out.pop(key, None)
        r = Poly(self.nvars)
        r.terms = out
        return r

    def evaluate(self, point: Sequence) -> object:
        """Exact if point entries are Fraction/int, float otherwise."""
        total = None
        for m, c in self.terms.items():
            v = c
            for x, e in zip(point, m):
                if e:
                    v = v * (x**e)
            total = v if total is None else total + v
        if total is None:
            return ZERO if all(not isinstance(x, float) for x in point) else 0.0
        return total

    # -- structure ----------------------------------------------------
    def weighted_degree(self) -> int:
        """Max homogeneous degree of the support (3-var only); -1 if zero."""
        assert self.nvars == 3
        return max((homogeneous_degree(m) for m in self.terms), default=-1)

    def homogeneous_part(self, d: int) -> "Poly":
        assert self.nvars == 3
        r = Poly(3)
        r.terms = {
            m: c for m, c in self.terms.items() if homogeneous_degree(m) == d
        }
        return r

    def homogeneous_degrees(self) -> List[int]:
        assert self.nvars == 3
        return sorted({homogeneous_degree(m) for m in self.terms})

    def compose_inverse(self) -> "Poly":
        """q(x) -> q(x^{-1}): flips the sign of every coordinate."""
        assert self.nvars == 3
        r = Poly(3)
        r.terms = {
            m: (c if sum(m) % 2 == 0 else -c) for m, c in self.terms.items()
        }
        return r

    def shift_vars(self, offset: int, new_nvars: int) -> "Poly":
        """Embed into a larger variable set, moving var i to i+offset."""
        r = Poly(new_nvars)
        for m, c in self.terms.items():
            key = [0] * new_nvars
            for i, e in enumerate(m):
                key[i + offset] = e
            r.terms[tuple(key)] = c
        return r

    def substitute(self, images: Sequence["Poly"]) -> "Poly":
        """Polynomial composition: replace var i by images[i]."""
        nv = images[0].nvars
        out = Poly.zero(nv)
        for m, c in self.terms.items():
            term = Poly.const(c, nv)
            for img, e in zip(images, m):
                if e:
                    term = term * img.pow(e)
            out = out + term
        return out

    def __repr__(self):
        if not self.terms:
            return "Poly<0>"
        names = ["p", "q", "t", "p'", "q'", "t'"][: self.nvars]
        parts = []
        for m in sorted(self.terms):
            c = self.terms[m]
            mono = "*".join(
                f"{names[i]}^{e}" if e > 1 else names[i]
                for i, e in enumerate(m)
                if e
            )
            parts.append(f"{c}" + (f"*{mono}" if mono else ""))
        return "Poly<" + " + ".join(parts) + ">"


# ---------------------------------------------------------------------
# left-invariant vector fields on 3-var polynomials
# ---------------------------------------------------------------------

def apply_generator(gen: int, f: Poly) -> Poly:
    """Apply X (gen=0), Y (gen=1) or T (gen=2) to a polynomial."""
    assert f.nvars == 3
    if gen == 0:  # X = d/dp - (q/2) d/dt
        return f.diff(0) - Poly.var(1) * f.diff(2).scale(Fraction(1, 2))
    if gen == 1:  # Y = d/dq + (p/2) d/dt
        return f.diff(1) + Poly.var(0) * f.diff(2).scale(Fraction(1, 2))
    if gen == 2:  # T = d/dt
        return f.diff(2)
    raise ValueError(f"unknown generator {gen}")


def apply_pbw_monomial(beta: PBWIndex, f: Poly) -> Poly:
    """X^beta f with the rightmost factor acting first: T's, then Y's, then X's."""
    for _ in range(beta[2]):
        f = apply_generator(2, f)
    for _ in range(beta[1]):
        f = apply_generator(1, f)
    for _ in range(beta[0]):
        f = apply_generator(0, f)
    return f


def apply_pbw_transpose(beta: PBWIndex, f: Poly) -> Poly:
    """(X^beta)^t f = (-1)^{|beta|} X's first, then Y's, then T's."""
    for _ in range(beta[0]):
        f = apply_generator(0, f)
    for _ in range(beta[1]):
        f = apply_generator(1, f)
    for _ in range(beta[2]):
        f = apply_generator(2, f)
    if index_order(beta) % 2:
        f = -f
    return f


# ---------------------------------------------------------------------
# enveloping-algebra operators with polynomial coefficients
# ---------------------------------------------------------------------

class EnvelopingOperator:
    """Finite sum  sum_beta c_beta(x) X^beta  in PBW normal form."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[PBWIndex, Poly] | None = None):
        self.terms: Dict[PBWIndex, Poly] = {}
        if terms:
            for b, c in terms.items():
                if isinstance(c, (int, Fraction)):
                    c = Poly.const(c)
                if c:
                    self.terms[tuple(b)] = c

    # -- constructors -------------------------------------------------
    @classmethod
    def zero(cls) -> "EnvelopingOperator":
        return cls()

    @classmethod
    def identity(cls) -> "EnvelopingOperator":
        return cls({(0, 0, 0): Poly.const(1)})

    @classmethod
    def generator(cls, gen: int) -> "EnvelopingOperator":
        idx = [0, 0, 0]
        idx[gen] = 1
        return cls({tuple(idx): Poly.const(1)})

    @classmethod
    def monomial(cls, beta: PBWIndex, coeff=1) -> "EnvelopingOperator":
        c = coeff if isinstance(coeff, Poly) else Poly.const(coeff)
        return cls({tuple(beta): c})

    # -- basic algebra ------------------------------------------------
    def copy(self) -> "EnvelopingOperator":
        r = EnvelopingOperator()
        r.terms = {b: c.copy() for b, c in self.terms.items()}
        return r

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        if not isinstance(other, EnvelopingOperator):
            return NotImplemented
        return self.terms == other.terms

    def __add__(self, other: "EnvelopingOperator") -> "EnvelopingOperator":
        r = self.copy()
        for b, c in other.terms.items():
            s = r.terms.get(b)
            s = c if s is None else s + c
            if s:
                r.terms[b] = s
            else:
                r.terms.pop(b, None)
        return r

    def __neg__(self) -> "EnvelopingOperator":
        r = EnvelopingOperator()
        r.terms = {b: -c for b, c in self.terms.items()}
        return r

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "EnvelopingOperator":
        r = EnvelopingOperator()
        for b, v in self.terms.items():
            w = v.scale(c) if not isinstance(c, Poly) else c * v
            if w:
                r.terms[b] = w
        return r

    def apply(self, f: Poly) -> Poly:
        out = Poly.zero(3)
        for b, c in self.terms.items():
            out = out + c * apply_pbw_monomial(b, f)
        return out

    def apply_transpose(self, f: Poly) -> Poly:
        """Formal transpose applied to f: sum (X^beta)^t (c_beta f)."""
        out = Poly.zero(3)
        for b, c in self.terms.items():
            out = out + apply_pbw_transpose(b, c * f)
        return out

    def max_homogeneous_degree(self) -> int:
        return max((homogeneous_degree(b) for b in self.terms), default=-1)

    def __repr__(self):
        parts = [f"{c!r}·XYT^{b}" for b, c in sorted(self.terms.items())]
        return "EnvOp<" + " + ".join(parts) + ">" if parts else "EnvOp<0>"


def _left_mult_generator(gen: int, gamma: PBWIndex) -> List[Tuple[PBWIndex, Fraction]]:
    """Normal ordering of Z · X^gamma for a single generator Z."""
    g1, g2, g3 = gamma
    if gen == 0:  # X · X^gamma
        return [((g1 + 1, g2, g3), ONE)]
    if gen == 1:  # Y X^{g1} = X^{g1} Y - g1 X^{g1-1} T
        out = [((g1, g2 + 1, g3), ONE)]
        if g1:
            out.append(((g1 - 1, g2, g3 + 1), Fraction(-g1)))
        return out
    if gen == 2:  # T central
        return [((g1, g2, g3 + 1), ONE)]
    raise ValueError(gen)


def _compose_monomial_with(beta: PBWIndex, d: Poly, gamma: PBWIndex) -> "EnvelopingOperator":
    """X^beta ∘ (d(x)·X^gamma) in normal form, by peeling generators."""
    if beta == (0, 0, 0):
        return EnvelopingOperator({gamma: d})
    # rightmost factor of X^beta acts first: T, then Y, then X
    if beta[2] > 0:
        gen, rest = 2, (beta[0], beta[1], beta[2] - 1)
    elif beta[1] > 0:
        gen, rest = 1, (beta[0], beta[1] - 1, 0)
    else:
        gen, rest = 0, (beta[0] - 1, 0, 0)
    # Z ∘ (d X^gamma) = (Z d) X^gamma + d · (Z ∘ X^gamma)
    pieces = EnvelopingOperator({gamma: apply_generator(gen, d)})
    for g2, coef in _left_mult_generator(gen, gamma):
        pieces = pieces + EnvelopingOperator({g2: d.scale(coef)})
    out = EnvelopingOperator.zero()
    for g2, c2 in pieces.terms.items():
        out = out + _compose_monomial_with(rest, c2, g2)
    return out


def compose(op1: EnvelopingOperator, op2: EnvelopingOperator) -> EnvelopingOperator:
    """Operator composition op1 ∘ op2 in PBW normal form (exact)."""
    out = EnvelopingOperator.zero()
    for beta, c in op1.terms.items():
        for gamma, d in op2.terms.items():
            inner = _compose_monomial_with(beta, d, gamma)
            out = out + inner.scale(c) if isinstance(c, Poly) else out + inner.scale(c)
    return out


def reversed_monomial(beta: PBWIndex) -> EnvelopingOperator:
    """The operator T^{b3} Y^{b2} X^{b1} in normal form."""
    cur = EnvelopingOperator.monomial((beta[0], 0, 0))
    for _ in range(beta[1]):
        cur = compose(EnvelopingOperator.generator(1), cur)
    for _ in range(beta[2]):
        cur = compose(EnvelopingOperator.generator(2), cur)
    return cur


def transpose(op: EnvelopingOperator) -> EnvelopingOperator:
    """Formal transpose: (c X^beta)^t = (-1)^{|beta|} T^.. Y^.. X^.. ∘ c."""
    out = EnvelopingOperator.zero()
    for beta, c in op.terms.items():
        rev = reversed_monomial(beta)
        sign = -1 if index_order(beta) % 2 else 1
        out = out + compose(rev, EnvelopingOperator({(0, 0, 0): c})).scale(sign)
    return out


def from_generator_word(word: Iterable[int]) -> EnvelopingOperator:
    """Normal form of a product of generators given left-to-right.

    ``word=[0,1]`` means the operator X∘Y (Y applied first).
    """
    cur = EnvelopingOperator.identity()
    for gen in reversed(list(word)):
        cur = compose(EnvelopingOperator.generator(gen), cur)
    return cur


# ---------------------------------------------------------------------
# exact linear algebra
# ---------------------------------------------------------------------

class SingularSystemError(ValueError):
    pass


def exact_solve(A: List[List[Fraction]], B: List[List[Fraction]]) -> List[List[Fraction]]:
    """Solve A X = B over Fraction by Gaussian elimination."""
    n = len(A)
    m = len(B[0]) if B else 0
    M = [list(map(Fraction, row)) + list(map(Fraction, brow)) for row, brow in zip(A, B)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            raise SingularSystemError(f"singular system at column {col}")
        M[col], M[piv] = M[piv], M[col]
        pv = M[col][col]
        M[col] = [v / pv for v in M[col]]
        for r in range(n):
            if r != col and M[r][col]:
                f = M[r][col]
                M[r] = [a - f * b for a, b in zip(M[r], M[col])]
    return [row[n : n + m] for row in M]


# ---------------------------------------------------------------------
# dual polynomial basis and origin distributions
# ---------------------------------------------------------------------

MAX_DEGREE_CAP = 6


def pbw_indices_of_degree(d: int) -> List[PBWIndex]:
    """All beta with homogeneous degree d, canonical order."""
    out = []
    for b3 in range(d // 2 + 1):
        rem = d - 2 * b3
        for b1 in range(rem + 1):
            out.append((b1, rem - b1, b3))
    return sorted(out)


def monomials_of_degree(d: int) -> List[Mono]:
    """All (i,j,k) with i + j + 2k = d, canonical order."""
    out = []
    for k in range(d // 2 + 1):
        rem = d - 2 * k
        for i in range(rem + 1):
            out.append((i, rem - i, k))
    return sorted(out)


def pbw_indices_up_to(cap: int) -> List[PBWIndex]:
    out: List[PBWIndex] = []
    for d in range(cap + 1):
        out.extend(pbw_indices_of_degree(d))
    return out


@lru_cache(maxsize=None)
def dual_basis(cap: int = MAX_DEGREE_CAP) -> Dict[PBWIndex, Poly]:
    """q_alpha with X^{alpha'} q_alpha(0) = delta, for [alpha] <= cap.

    Raises SingularSystemError if the duality system degenerates (it never
    does for this group, but the contract requires the signal).
    """
    if cap > MAX_DEGREE_CAP:
        raise ValueError(
            f"degree cap {cap} exceeds the configured maximum {MAX_DEGREE_CAP}"
        )
    basis: Dict[PBWIndex, Poly] = {}
    for d in range(cap + 1):
        betas = pbw_indices_of_degree(d)
        monos = monomials_of_degree(d)
        # A[b][m] = X^beta (monomial m) at 0
        A = []
        for b in betas:
            row = []
            for m in monos:
                val = apply_pbw_monomial(b, Poly.monomial(m)).evaluate((ZERO, ZERO, ZERO))
                row.append(Fraction(val))
            A.append(row)
        n = len(betas)
        I = [[ONE if i == j else ZERO for j in range(n)] for i in range(n)]
        C = exact_solve(A, I)  # columns give coefficient vectors
        for j, alpha in enumerate(betas):
            poly = Poly.zero(3)
            for i, m in enumerate(monos):
                if C[i][j]:
                    poly = poly + Poly.monomial(m, C[i][j])
            basis[alpha] = poly
    return basis


@dataclass
class OriginDistribution:
    """Finite combination  sum_gamma c_gamma X^gamma delta_0.

    The pairing contract is <X^gamma delta_0, f> = ((X^gamma)^t f)(0).
    """

    coeffs: Dict[PBWIndex, Fraction]

    def __post_init__(self):
        self.coeffs = {tuple(g): Fraction(c) for g, c in self.coeffs.items() if c != 0}

    def pair(self, f: Poly):
        total = ZERO
        for gamma, c in self.coeffs.items():
            total += c * Fraction(apply_pbw_transpose(gamma, f).evaluate((ZERO, ZERO, ZERO)))
        return total

    def is_zero(self) -> bool:
        return not self.coeffs

    def degrees(self) -> List[int]:
        return sorted({homogeneous_degree(g) for g in self.coeffs})


def _pairing_value(gamma: PBWIndex, f: Poly) -> Fraction:
    return Fraction(apply_pbw_transpose(gamma, f).evaluate((ZERO, ZERO, ZERO)))


@lru_cache(maxsize=None)
def _pairing_matrix(d: int) -> Tuple[Tuple[PBWIndex, ...], List[List[Fraction]]]:
    """M[g][g'] = <X^gamma delta_0, q_{gamma'}> for [gamma]=[gamma']=d."""
    gammas = tuple(pbw_indices_of_degree(d))
    qb = dual_basis(MAX_DEGREE_CAP)
    M = [[_pairing_value(g, qb[gp]) for gp in gammas] for g in gammas]
    return gammas, M


def expand_origin_distribution(qpoly: Poly, beta: PBWIndex) -> OriginDistribution:
    """Expand  qpoly(x) · X^beta delta_0  in the basis {X^gamma delta_0}.

    Works degree by degree: a homogeneous factor of degree d contributes
    only to gamma with [gamma] = [beta] - d (pairings against other degrees
    vanish by homogeneity).
    """
    db = homogeneous_degree(beta)
    target_degrees = sorted(
        {db - d for d in qpoly.homogeneous_degrees() if db - d >= 0}
    )
    coeffs: Dict[PBWIndex, Fraction] = {}
    for dg in target_degrees:
        gammas, M = _pairing_matrix(dg)
        qb = dual_basis(MAX_DEGREE_CAP)
        # v[g'] = <qpoly X^beta delta_0, q_{g'}> = ((X^beta)^t (qpoly q_{g'}))(0)
        v = [_pairing_value(beta, qpoly * qb[gp]) for gp in gammas]
        # solve sum_g M[g][g'] c_g = v[g']  i.e.  M^T c = v
        n = len(gammas)
        MT = [[M[g][gp] for g in range(n)] for gp in range(n)]
        sol = exact_solve(MT, [[x] for x in v])
        for g, row in zip(gammas, sol):
            if row[0]:
                coeffs[g] = coeffs.get(g, ZERO) + row[0]
    return OriginDistribution(coeffs)


@lru_cache(maxsize=None)
def difference_structure_constants(alpha: PBWIndex, beta: PBWIndex) -> OriginDistribution:
    """Expansion of  q_alpha(x^{-1}) · X^beta delta_0  over {X^gamma delta_0}.

    Zero when [alpha] > [beta]; otherwise every surviving gamma satisfies
    [gamma] = [beta] - [alpha].
    """
    if homogeneous_degree(alpha) > homogeneous_degree(beta):
        return OriginDistribution({})
    qt = dual_basis(MAX_DEGREE_CAP)[alpha].compose_inverse()
    return expand_origin_distribution(qt, tuple(beta))


@lru_cache(maxsize=None)
def leibniz_constants(alpha: PBWIndex) -> Dict[Tuple[PBWIndex, PBWIndex], Fraction]:
    """Constants c_{a1,a2} of the expansion of q_alpha over a product.

    c_{a1,a2} = [X^{a2} X^{a1} q_alpha](0), nonzero only for
    [a1] + [a2] = [alpha].  These are the structure constants of the
    product rule for difference operators.
    """
    d = homogeneous_degree(alpha)
    q = dual_basis(MAX_DEGREE_CAP)[alpha]
    out: Dict[Tuple[PBWIndex, PBWIndex], Fraction] = {}
    for d1 in range(d + 1):
        for a1 in pbw_indices_of_degree(d1):
            f1 = apply_pbw_monomial(a1, q)
            if not f1:
                continue
            for a2 in pbw_indices_of_degree(d - d1):
                val = Fraction(
                    apply_pbw_monomial(a2, f1).evaluate((ZERO, ZERO, ZERO))
                )
                if val:
                    out[(a1, a2)] = val
    return out


# ---------------------------------------------------------------------
# structured-text export of the tables
# ---------------------------------------------------------------------

def format_index(idx: Sequence[int]) -> str:
    return "(" + ",".join(str(i) for i in idx) + ")"


def difference_table_text(max_alpha: int, max_beta: int) -> str:
    """Structured-text dump of difference structure constants."""
    lines = ["difference-structure-constants:"]
    for da in range(max_alpha + 1):
        for alpha in pbw_indices_of_degree(da):
            for db in range(max_beta + 1):
                for beta in pbw_indices_of_degree(db):
                    dist = difference_structure_constants(alpha, beta)
                    if dist.is_zero():
                        continue
                    ent = ", ".join(
                        f"{format_index(g)}: {c}" for g, c in sorted(dist.coeffs.items())
                    )
                    lines.append(
                        f"  alpha={format_index(alpha)} beta={format_index(beta)}: {ent}"
                    )
    return "\n".join(lines) + "\n"


def leibniz_table_text(max_alpha: int) -> str:
    lines = ["product-rule-constants:"]
    for da in range(max_alpha + 1):
        for alpha in pbw_indices_of_degree(da):
            cs = leibniz_constants(alpha)
            ent = ", ".join(
                f"{format_index(a1)}x{format_index(a2)}: {c}"
                for (a1, a2), c in sorted(cs.items())
            )
            lines.append(f"  alpha={format_index(alpha)}: {ent}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------
# six-variable helpers for product expansions
# ---------------------------------------------------------------------

def product_coordinates() -> Tuple[Poly, Poly, Poly]:
    """Coordinates of x·y as 6-var polynomials (x = vars 0..2, y = 3..5)."""
    x1, x2, x3 = (Poly.var(i, 6) for i in range(3))
    y1, y2, y3 = (Poly.var(i, 6) for i in range(3, 6))
    tw = (x1 * y2 - x2 * y1).scale(Fraction(1, 2))
    return (x1 + y1, x2 + y2, x3 + y3 + tw)


def polynomial_of_product(qpoly: Poly) -> Poly:
    """q(xy) as a 6-var polynomial."""
    return qpoly.substitute(list(product_coordinates()))


def leibniz_expansion_6var(alpha: PBWIndex) -> Poly:
    """sum c_{a1,a2} q_{a1}(y) q_{a2}(x) as a 6-var polynomial."""
    qb = dual_basis(MAX_DEGREE_CAP)
    out = Poly.zero(6)
    for (a1, a2), c in leibniz_constants(alpha).items():
        qy = qb[a1].shift_vars(3, 6)
        qx = qb[a2].shift_vars(0, 6)
        out = out + (qy * qx).scale(c)
    return out
