"""Differential symbols sum_beta c_beta(x) Xhat^beta and their calculus.

Coefficients come in two modes:

* exact mode: sparse rational polynomials (`polys.Poly`, real rational);
  all algebraic identities (composition, adjoint, semiclassical expansion)
  are decidable and tested exactly;
* smooth mode: sympy expressions in (p, q, t) with a declared bound on how
  many left-derivatives may still be taken; evaluation goes through cached
  lambdified callables.

Semiclassical families carry an integer epsilon-power tag per term, so a
term ((beta, e) -> c) stands for  eps^e * c(x) * Xhat^beta.  The dilated
symbol (Fourier argument scaled by eps) adds [beta] to each tag, which
makes "identical in eps" checks exact term-by-term comparisons.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import sympy as sp

from .group import GroupElement
from . import polys
from .polys import (
    EnvelopingOperator,
    PBWIndex,
    Poly,
    difference_structure_constants,
    homogeneous_degree,
    index_order,
    pbw_indices_up_to,
)
from .rep import RepresentationSlice, monomial_matrix, sub_laplacian_matrix, weight_matrix

_P, _Q, _T = sp.symbols("p q t", real=True)


class DerivativeOrderError(ValueError):
    """A smooth coefficient was asked for more derivatives than declared."""


# ---------------------------------------------------------------------
# coefficient layer
# ---------------------------------------------------------------------

class SmoothCoefficient:
    """Smooth-mode coefficient: sympy expression with a derivative budget."""

    __slots__ = ("expr", "deriv_budget", "compact_support", "_fn")

    def __init__(self, expr, deriv_budget: float = math.inf, compact_support: bool = False):
        self.expr = sp.sympify(expr)
        self.deriv_budget = deriv_budget
        self.compact_support = compact_support
        self._fn = None

    def _callable(self):
        if self._fn is None:
            self._fn = sp.lambdify((_P, _Q, _T), self.expr, modules="numpy")
        return self._fn

    def evaluate(self, x: GroupElement) -> complex:
        return complex(self._callable()(float(x.p), float(x.q), float(x.t)))

    def deriv(self, gen: int) -> "SmoothCoefficient":
        if self.deriv_budget < 1:
            raise DerivativeOrderError(
                "smooth coefficient has exhausted its declared derivative order"
            )
        if gen == 0:
            e = sp.diff(self.expr, _P) - (_Q / 2) * sp.diff(self.expr, _T)
        elif gen == 1:
            e = sp.diff(self.expr, _Q) + (_P / 2) * sp.diff(self.expr, _T)
        elif gen == 2:
            e = sp.diff(self.expr, _T)
        else:
            raise ValueError(f"unknown generator {gen}")
        return SmoothCoefficient(e, self.deriv_budget - 1, self.compact_support)

    def __repr__(self):
        return f"SmoothCoefficient({self.expr})"


Coefficient = object  # Poly | SmoothCoefficient (duck-typed below)


def _poly_to_sympy(c: Poly):
    e = sp.Integer(0)
    for mono, fr in c.terms.items():
        e += sp.Rational(fr.numerator, fr.denominator) * _P ** mono[0] * _Q ** mono[1] * _T ** mono[2]
    return e


def as_coefficient(c) -> Coefficient:
    if isinstance(c, (Poly, SmoothCoefficient)):
        return c
    if isinstance(c, (int, Fraction)):
        return Poly.const(c)
    if isinstance(c, float):
        return SmoothCoefficient(sp.Float(c))
    if isinstance(c, sp.Expr):
        return SmoothCoefficient(c)
    raise TypeError(f"cannot interpret {c!r} as a symbol coefficient")


def _promote(c1, c2):
    """Bring two coefficients to a common mode (exact stays exact)."""
    if isinstance(c1, Poly) and isinstance(c2, Poly):
        return c1, c2
    if isinstance(c1, Poly):
        c1 = SmoothCoefficient(_poly_to_sympy(c1))
    if isinstance(c2, Poly):
        c2 = SmoothCoefficient(_poly_to_sympy(c2))
    return c1, c2


def c_add(c1, c2):
    a, b = _promote(c1, c2)
    if isinstance(a, Poly):
        return a + b
    return SmoothCoefficient(
        a.expr + b.expr,
        min(a.deriv_budget, b.deriv_budget),
        a.compact_support and b.compact_support,
    )


def c_mul(c1, c2):
    a, b = _promote(c1, c2)
    if isinstance(a, Poly):
        return a * b
    return SmoothCoefficient(
        a.expr * b.expr,
        min(a.deriv_budget, b.deriv_budget),
        a.compact_support or b.compact_support,
    )


def c_scale(c, s):
    if isinstance(c, Poly):
        if isinstance(s, (int, Fraction)):
            return c.scale(s)
        return SmoothCoefficient(_poly_to_sympy(c) * sp.sympify(s))
    return SmoothCoefficient(c.expr * sp.sympify(s), c.deriv_budget, c.compact_support)


def c_deriv(gen: int, c):
    if isinstance(c, Poly):
        return polys.apply_generator(gen, c)
    return c.deriv(gen)


def c_deriv_word(beta: PBWIndex, c):
    """X^beta on a coefficient (rightmost generator first: T, then Y, then X)."""
    for _ in range(beta[2]):
        c = c_deriv(2, c)
    for _ in range(beta[1]):
        c = c_deriv(1, c)
    for _ in range(beta[0]):
        c = c_deriv(0, c)
    return c


def c_conj(c):
    if isinstance(c, Poly):
        return c  # exact mode is real rational
    return SmoothCoefficient(sp.conjugate(c.expr), c.deriv_budget, c.compact_support)


def c_eval(c, x: GroupElement) -> complex:
    if isinstance(c, Poly):
        return complex(c.evaluate([Fraction(v) if isinstance(v, (int, Fraction)) else v
                                   for v in x.coords()]))
    return c.evaluate(x)


def c_is_zero(c) -> bool:
    if isinstance(c, Poly):
        return not bool(c)
    return sp.simplify(c.expr) == 0


# ---------------------------------------------------------------------
# the symbol type
# ---------------------------------------------------------------------

TermKey = Tuple[PBWIndex, int]  # (beta, epsilon-power tag)


@dataclass
class DifferentialSymbol:
    """Finite sum over (beta, e): eps^e c(x) Xhat^beta with declared order."""

    terms: Dict[TermKey, Coefficient] = field(default_factory=dict)
    order: int = 0

    def __post_init__(self):
        clean: Dict[TermKey, Coefficient] = {}
        for (beta, e), c in self.terms.items():
            c = as_coefficient(c)
            if isinstance(c, Poly) and not c:
                continue
            clean[(tuple(beta), int(e))] = c
        self.terms = clean
        mx = self.max_degree()
        if self.order < mx:
            raise ValueError(
                f"declared order {self.order} below largest term degree {mx}"
            )

    # -- constructors --------------------------------------------------
    @classmethod
    def zero(cls) -> "DifferentialSymbol":
        return cls({}, 0)

    @classmethod
    def identity(cls) -> "DifferentialSymbol":
        return cls({((0, 0, 0), 0): Poly.const(1)}, 0)

    @classmethod
    def from_monomial(cls, beta: PBWIndex, coeff=1, epow: int = 0) -> "DifferentialSymbol":
        beta = tuple(beta)
        return cls({(beta, epow): as_coefficient(coeff)}, homogeneous_degree(beta))

    @classmethod
    def generator(cls, gen: int) -> "DifferentialSymbol":
        beta = tuple(1 if i == gen else 0 for i in range(3))
        return cls.from_monomial(beta)

    # -- basic structure ----------------------------------------------
    def max_degree(self) -> int:
        return max((homogeneous_degree(b) for (b, _e) in self.terms), default=0)

    def is_exact(self) -> bool:
        return all(isinstance(c, Poly) for c in self.terms.values())

    def has_tags(self) -> bool:
        return any(e != 0 for (_b, e) in self.terms)

    def copy(self) -> "DifferentialSymbol":
        return DifferentialSymbol(dict(self.terms), self.order)

    def __add__(self, other: "DifferentialSymbol") -> "DifferentialSymbol":
        out: Dict[TermKey, Coefficient] = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = c_add(out[k], c) if k in out else c
        return DifferentialSymbol(out, max(self.order, other.order))

    def __sub__(self, other: "DifferentialSymbol") -> "DifferentialSymbol":
        return self + other.scale(-1)

    def scale(self, s) -> "DifferentialSymbol":
        if isinstance(s, (int, Fraction)) and s == 0:
            return DifferentialSymbol.zero()
        return DifferentialSymbol(
            {k: c_scale(c, s) for k, c in self.terms.items()}, self.order
        )

    def with_order(self, m: int) -> "DifferentialSymbol":
        return DifferentialSymbol(dict(self.terms), m)

    def equals_exact(self, other: "DifferentialSymbol") -> bool:
        """Exact equality (exact mode only): identical term maps."""
        if not (self.is_exact() and other.is_exact()):
            raise ValueError("exact equality requires exact-mode symbols")
        return self.terms == other.terms

    def to_enveloping(self, eps=1) -> EnvelopingOperator:
        """The differential operator itself (exact mode, tags at eps)."""
        if not self.is_exact():
            raise ValueError("to_enveloping requires exact-mode symbols")
        out = EnvelopingOperator.zero()
        for (beta, e), c in self.terms.items():
            out = out + EnvelopingOperator({beta: c.scale(Fraction(eps) ** e)})
        return out

    def __repr__(self):
        bits = []
        for (b, e), c in sorted(self.terms.items()):
            tag = f" eps^{e}" if e else ""
            bits.append(f"[{c!r}]X^{b}{tag}")
        return "DifferentialSymbol(" + " + ".join(bits or ["0"]) + ")"


# ---------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------

@dataclass
class SymbolSample:
    """A symbol frozen at one point (x, lam): the trusted matrix block."""

    x: GroupElement
    lam: float
    matrix: np.ndarray
    provenance: Dict[str, object] = field(default_factory=dict)

    def hermitian_deviation(self) -> float:
        M = self.matrix
        scale = max(1.0, float(np.max(np.abs(M))))
        return float(np.max(np.abs(M - M.conj().T))) / scale

    def psd_deviation(self) -> float:
        """Most negative eigenvalue of the Hermitian part, relative scale."""
        H = 0.5 * (self.matrix + self.matrix.conj().T)
        w = np.linalg.eigvalsh(H)
        scale = max(1.0, float(np.max(np.abs(w))))
        return float(max(0.0, -w.min()) / scale)


def evaluate(
    sigma: DifferentialSymbol,
    x: GroupElement,
    slc: RepresentationSlice,
    eps: float = 1.0,
) -> SymbolSample:
    """sum eps^e c(x) * monomial matrix, trusted block only."""
    n = slc.total
    M = np.zeros((n, n), dtype=complex)
    for (beta, e), c in sigma.terms.items():
        val = c_eval(c, x) * (eps ** e)
        if val == 0:
            continue
        M += val * monomial_matrix(slc, beta)
    return SymbolSample(
        x=x,
        lam=slc.lam,
        matrix=slc.trusted(M),
        provenance={"N": slc.N, "G": slc.G, "eps": eps, "order": sigma.order},
    )


# ---------------------------------------------------------------------
# products, derivatives, difference operators
# ---------------------------------------------------------------------

def pointwise_product(s1: DifferentialSymbol, s2: DifferentialSymbol) -> DifferentialSymbol:
    """Product of symbol values at fixed (x, pi): coefficients stay frozen.

    Xhat^beta Xhat^gamma is normal-ordered through the PBW commutation
    rules; no derivatives hit the coefficients of s2.
    """
    out: Dict[TermKey, Coefficient] = {}
    for (b1, e1), c1 in s1.terms.items():
        for (b2, e2), c2 in s2.terms.items():
            prod = polys._compose_monomial_with(b1, Poly.const(1), b2)
            cc = c_mul(c1, c2)
            for delta, pc in prod.terms.items():
                fr = pc.terms.get((0, 0, 0), Fraction(0)) if isinstance(pc, Poly) else pc
                if not fr:
                    continue
                key = (delta, e1 + e2)
                add = c_scale(cc, fr)
                out[key] = c_add(out[key], add) if key in out else add
    return DifferentialSymbol(out, s1.order + s2.order)


def x_derivative(alpha: PBWIndex, s: DifferentialSymbol) -> DifferentialSymbol:
    """X^alpha applied to the coefficients (base-space derivative)."""
    out = {k: c_deriv_word(alpha, c) for k, c in s.terms.items()}
    return DifferentialSymbol(out, s.order)


def difference_op(alpha: PBWIndex, s: DifferentialSymbol) -> DifferentialSymbol:
    """Delta^alpha on the invariant part; coefficients pass through."""
    alpha = tuple(alpha)
    out: Dict[TermKey, Coefficient] = {}
    for (beta, e), c in s.terms.items():
        dist = difference_structure_constants(alpha, beta)
        for gamma, fr in dist.coeffs.items():
            if not fr:
                continue
            key = (gamma, e)
            add = c_scale(c, fr)
            out[key] = c_add(out[key], add) if key in out else add
    # [gamma] <= [beta] - [alpha] for every surviving term
    return DifferentialSymbol(out, max(s.order - homogeneous_degree(alpha), 0))


def compose_exact(s1: DifferentialSymbol, s2: DifferentialSymbol) -> DifferentialSymbol:
    """The unique symbol with Op(result) = Op(s1) Op(s2).

    Implemented by folding the left factor's generators through the right
    factor: Xhat_i (c Xhat^delta) = (X_i c) Xhat^delta + c (Xhat_i Xhat^delta),
    with normal ordering of the invariant part.
    """
    out = DifferentialSymbol.zero()
    for (b1, e1), c1 in s1.terms.items():
        for (b2, e2), c2 in s2.terms.items():
            # start from the right factor's term, then apply T^b3, Y^b2, X^b1
            cur: Dict[TermKey, Coefficient] = {((b2[0], b2[1], b2[2]), e1 + e2): c2}
            gens = [2] * b1[2] + [1] * b1[1] + [0] * b1[0]
            for g in gens:
                nxt: Dict[TermKey, Coefficient] = {}

                def _acc(key, coeff):
                    nxt[key] = c_add(nxt[key], coeff) if key in nxt else coeff

                for (delta, e), c in cur.items():
                    _acc((delta, e), c_deriv(g, c))
                    for dprime, fr in polys._left_mult_generator(g, delta):
                        _acc((dprime, e), c_scale(c, fr))
                cur = nxt
            piece = DifferentialSymbol(
                {k: c_mul(c1, c) for k, c in cur.items()},
                s1.order + s2.order,
            )
            out = out + piece
    return out.with_order(s1.order + s2.order)


def dilate_symbol(s: DifferentialSymbol, eps) -> DifferentialSymbol:
    """sigma(x, eps . pi): each beta-term scaled by eps^[beta] (numeric)."""
    if isinstance(eps, (int, Fraction)):
        out = {
            k: c_scale(c, Fraction(eps) ** homogeneous_degree(k[0]))
            for k, c in s.terms.items()
        }
    else:
        out = {
            k: c_scale(c, float(eps) ** homogeneous_degree(k[0]))
            for k, c in s.terms.items()
        }
    return DifferentialSymbol(out, s.order)


def dilate_formal(s: DifferentialSymbol) -> DifferentialSymbol:
    """Dilation with a formal eps: adds [beta] to each term's power tag."""
    out = {
        (beta, e + homogeneous_degree(beta)): c for (beta, e), c in s.terms.items()
    }
    return DifferentialSymbol(out, s.order)


def retag(s: DifferentialSymbol, shift: int) -> DifferentialSymbol:
    """Multiply by the formal eps^shift (tags only)."""
    return DifferentialSymbol(
        {(b, e + shift): c for (b, e), c in s.terms.items()}, s.order
    )


def strip_tags(s: DifferentialSymbol, eps=1) -> DifferentialSymbol:
    """Evaluate the formal eps tags at a concrete value."""
    out: Dict[TermKey, Coefficient] = {}
    for (b, e), c in s.terms.items():
        scl = (Fraction(eps) ** e) if isinstance(eps, (int, Fraction)) else float(eps) ** e
        key = (b, 0)
        add = c_scale(c, scl)
        out[key] = c_add(out[key], add) if key in out else add
    return DifferentialSymbol(out, s.order)


# ---------------------------------------------------------------------
# semiclassical expansions
# ---------------------------------------------------------------------

def semiclassical_composition_terms(
    s1: DifferentialSymbol, s2: DifferentialSymbol, N: int
) -> List[DifferentialSymbol]:
    """Terms of the eps-expansion of the composition, grouped by [alpha].

    Entry k collects  sum_{[alpha] = k} (Delta^alpha s1) (X^alpha s2); the
    full composition of the eps-dilated symbols equals
    sum_k eps^k dilate(entry_k) identically in eps (finite for differential
    symbols).
    """
    if N > 2 * polys.MAX_DEGREE_CAP:
        raise ValueError(f"expansion order {N} beyond the degree cap")
    out = []
    for k in range(N + 1):
        acc = DifferentialSymbol.zero()
        for alpha in pbw_indices_up_to(k):
            if homogeneous_degree(alpha) != k:
                continue
            acc = acc + pointwise_product(
                difference_op(alpha, s1), x_derivative(alpha, s2)
            )
        out.append(acc)
    return out


def pointwise_adjoint(s: DifferentialSymbol) -> DifferentialSymbol:
    """sigma(x,pi)^*: conjugate coefficients, adjoint of the matrix part.

    pi(X)^* = -pi(X) for the generators, so the adjoint of a PBW monomial
    is (-1)^{|beta|} times the reversed product, re-normal-ordered.
    """
    out = DifferentialSymbol.zero()
    for (beta, e), c in s.terms.items():
        rev = polys.reversed_monomial(beta)
        sign = Fraction(-1) ** index_order(beta)
        piece: Dict[TermKey, Coefficient] = {}
        for bprime, pc in rev.terms.items():
            fr = pc.terms.get((0, 0, 0), Fraction(0))
            if not fr:
                continue
            piece[(bprime, e)] = c_scale(c_conj(c), sign * fr)
        out = out + DifferentialSymbol(piece, s.order)
    return out.with_order(s.order)


def adjoint_terms(s: DifferentialSymbol, N: int) -> List[DifferentialSymbol]:
    """Terms of the eps-expansion of the adjoint, grouped by [alpha].

    Entry k collects sum_{[alpha]=k} Delta^alpha X^alpha (pointwise adjoint);
    the formal adjoint of the dilated operator equals
    sum_k eps^k dilate(entry_k) identically in eps.
    """
    if N > 2 * polys.MAX_DEGREE_CAP:
        raise ValueError(f"expansion order {N} beyond the degree cap")
    star = pointwise_adjoint(s)
    out = []
    for k in range(N + 1):
        acc = DifferentialSymbol.zero()
        for alpha in pbw_indices_up_to(k):
            if homogeneous_degree(alpha) != k:
                continue
            acc = acc + difference_op(alpha, x_derivative(alpha, star))
        out.append(acc)
    return out


def formal_adjoint_exact(s: DifferentialSymbol) -> DifferentialSymbol:
    """Adjoint of Op(s) by integration by parts (exact mode, real coeffs).

    All generators are divergence-free, so the L^2 adjoint of c X^beta is
    the transpose with conjugated (here: identical) coefficients.
    """
    if not s.is_exact():
        raise ValueError("formal_adjoint_exact requires exact-mode symbols")
    groups: Dict[int, EnvelopingOperator] = {}
    for (beta, e), c in s.terms.items():
        op = groups.setdefault(e, EnvelopingOperator.zero())
        groups[e] = op + EnvelopingOperator({beta: c})
    out = DifferentialSymbol.zero()
    for e, op in groups.items():
        tr = polys.transpose(op)
        out = out + DifferentialSymbol(
            {(b, e): c for b, c in tr.terms.items()}, s.order
        )
    return out.with_order(s.order)


# ---------------------------------------------------------------------
# sub-Laplacians in horizontal divergence form
# ---------------------------------------------------------------------

def sub_laplacian_symbols(
    a11, a12, a21, a22, potential=0
) -> Tuple[DifferentialSymbol, DifferentialSymbol]:
    """Symbols (sigma0, sigma1) of -sum_i X_i a_ij(x) X_j + V(x).

    sigma0 = -sum a_ij Xhat_i Xhat_j + V (the eps^0 part: principal
    quadratic part plus the potential), sigma1 = -sum_j (sum_i X_i a_ij) Xhat_j.
    """
    A = [[as_coefficient(a11), as_coefficient(a12)],
         [as_coefficient(a21), as_coefficient(a22)]]
    gens = [(1, 0, 0), (0, 1, 0)]
    s0 = DifferentialSymbol.zero()
    for i in range(2):
        for j in range(2):
            quad = pointwise_product(
                DifferentialSymbol.from_monomial(gens[i]),
                DifferentialSymbol.from_monomial(gens[j]),
            )
            s0 = s0 + DifferentialSymbol(
                {k: c_scale(c_mul(A[i][j], c), -1) for k, c in quad.terms.items()},
                2,
            )
    V = as_coefficient(potential)
    if not c_is_zero(V):
        s0 = s0 + DifferentialSymbol({((0, 0, 0), 0): V}, 0)
    s1 = DifferentialSymbol.zero()
    for j in range(2):
        div = None
        for i in range(2):
            d = c_deriv(i, A[i][j])
            div = d if div is None else c_add(div, d)
        if not c_is_zero(div):
            s1 = s1 + DifferentialSymbol({(gens[j], 0): c_scale(div, -1)}, 1)
    return s0.with_order(2), s1.with_order(max(1, s1.max_degree()))


def invariant_sub_laplacian() -> DifferentialSymbol:
    """The symbol of the canonical invariant sub-Laplacian (A = identity)."""
    s0, _ = sub_laplacian_symbols(1, 0, 0, 1)
    return s0


# ---------------------------------------------------------------------
# seminorm estimation
# ---------------------------------------------------------------------

@dataclass
class SeminormEstimate:
    value: float
    argmax: Dict[str, object]

    def report_text(self) -> str:
        lines = [f"seminorm-lower-bound: {self.value!r}"]
        for k, v in sorted(self.argmax.items()):
            lines.append(f"  argmax-{k}: {v}")
        return "\n".join(lines) + "\n"


def seminorm_estimate(
    sigma: DifferentialSymbol,
    m: float,
    a: int,
    b: int,
    c: int,
    samples: Sequence[Tuple[GroupElement, float]],
    N: int = 24,
) -> SeminormEstimate:
    """Sample-sup lower bound of the S^m seminorm family.

    max over ([alpha] <= a, [beta] <= b, |gamma| <= c integer) and over the
    sample of ||W^{([alpha]+gamma-m)/2} X^beta Delta^alpha sigma W^{-gamma/2}||
    with W = I + pi_lam(L); always a lower bound for the true sup.
    """
    if a > 2 * polys.MAX_DEGREE_CAP or b > 2 * polys.MAX_DEGREE_CAP:
        raise ValueError("seminorm index caps exceeded")
    from .rep import build_slice

    best = 0.0
    arg: Dict[str, object] = {}
    pieces = []
    for alpha in pbw_indices_up_to(a):
        for beta in pbw_indices_up_to(b):
            pieces.append((alpha, beta, x_derivative(beta, difference_op(alpha, sigma))))
    maxdeg = max([p[2].max_degree() for p in pieces] + [sigma.max_degree()])
    for (x, lam) in samples:
        slc = build_slice(lam, N, 2 * maxdeg + 8)
        Ws: Dict[float, np.ndarray] = {}

        def wpow(s_pow: float) -> np.ndarray:
            if s_pow not in Ws:
                Ws[s_pow] = weight_matrix(slc, s_pow)
            return Ws[s_pow]

        for alpha, beta, piece in pieces:
            if not piece.terms:
                continue
            full = np.zeros((slc.total, slc.total), dtype=complex)
            for (bb, e), cc in piece.terms.items():
                v = c_eval(cc, x)
                if v:
                    full += v * monomial_matrix(slc, bb)
            ka = homogeneous_degree(alpha)
            for gamma in range(-c, c + 1):
                Mat = wpow(ka + gamma - m) @ full @ wpow(-float(gamma))
                nrm = float(np.linalg.norm(Mat[: slc.N, : slc.N], 2))
                if nrm > best:
                    best = nrm
                    arg = {
                        "x": x.coords(),
                        "lam": lam,
                        "alpha": alpha,
                        "beta": beta,
                        "gamma": gamma,
                    }
    return SeminormEstimate(best, arg)


# ---------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------

_SMOOTH_REGISTRY: Dict[str, Callable[..., SmoothCoefficient]] = {}


def register_coefficient_family(name: str, factory: Callable[..., SmoothCoefficient]):
    _SMOOTH_REGISTRY[name] = factory


def _poly_text(c: Poly) -> str:
    bits = []
    for mono, fr in sorted(c.terms.items()):
        bits.append(f"{mono[0]},{mono[1]},{mono[2]}:{fr.numerator}/{fr.denominator}")
    return "|".join(bits) if bits else "0"


def _poly_from_text(s: str) -> Poly:
    if s == "0":
        return Poly.zero()
    terms = {}
    for bit in s.split("|"):
        mono_s, fr_s = bit.split(":")
        mono = tuple(int(v) for v in mono_s.split(","))
        num, den = fr_s.split("/")
        terms[mono] = Fraction(int(num), int(den))
    return Poly(3, terms)


def serialize_symbol(s: DifferentialSymbol) -> str:
    lines = ["differential-symbol:", f"  order: {s.order}"]
    for (beta, e), c in sorted(s.terms.items()):
        if isinstance(c, Poly):
            lines.append(
                f"  term: beta={beta[0]},{beta[1]},{beta[2]} epow={e} poly={_poly_text(c)}"
            )
        else:
            raise ValueError(
                "smooth-mode coefficients serialize only via registered families"
            )
    return "\n".join(lines) + "\n"


def deserialize_symbol(text: str) -> DifferentialSymbol:
    order = 0
    terms: Dict[TermKey, Coefficient] = {}
    for line in text.splitlines():
        line = line.strip()
        if line.startswith("order:"):
            order = int(line.split(":", 1)[1])
        elif line.startswith("term:"):
            fields = dict(kv.split("=", 1) for kv in line[5:].split())
            beta = tuple(int(v) for v in fields["beta"].split(","))
            e = int(fields["epow"])
            terms[(beta, e)] = _poly_from_text(fields["poly"])
    return DifferentialSymbol(terms, order)
