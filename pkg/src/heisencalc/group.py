"""Heisenberg group in exponential coordinates: elements, law, dilations.

Everything here works in two arithmetic modes.  Exact mode keeps
coordinates as ``fractions.Fraction`` (or int) and all identities hold
bit-exactly; float mode uses ordinary floats.  The mode is implicit in the
coordinate types: operations never silently convert an exact input to float.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Tuple

Scalar = object  # Fraction | int | float


def _is_exact(v) -> bool:
    return isinstance(v, Rational)


def _half(v):
    """v/2 staying exact for exact inputs."""
    if _is_exact(v):
        return Fraction(v) / 2
    return v / 2


@dataclass(frozen=True)
class GroupElement:
    """A point (p, q, t) of the group in exponential coordinates."""

    p: Scalar
    q: Scalar
    t: Scalar

    def coords(self) -> Tuple[Scalar, Scalar, Scalar]:
        return (self.p, self.q, self.t)

    @property
    def is_exact(self) -> bool:
        return all(_is_exact(c) for c in self.coords())

    def __iter__(self):
        return iter(self.coords())


IDENTITY = GroupElement(0, 0, 0)

#: exponents of the dilation on each coordinate
WEIGHTS = (1, 1, 2)

#: homogeneous dimension (sum of weights)
HOMOGENEOUS_DIMENSION = 4


def multiply(g: GroupElement, h: GroupElement) -> GroupElement:
    """Group product; the t-coordinate picks up the symplectic half-twist."""
    twist = g.p * h.q - g.q * h.p
    return GroupElement(g.p + h.p, g.q + h.q, g.t + h.t + _half(twist))


def inverse(g: GroupElement) -> GroupElement:
    return GroupElement(-g.p, -g.q, -g.t)


def dilate(r: Scalar, g: GroupElement) -> GroupElement:
    """Anisotropic dilation: (p,q,t) -> (r p, r q, r^2 t).  Requires r > 0."""
    if not r > 0:
        raise ValueError(f"dilation parameter must be positive, got {r!r}")
    return GroupElement(r * g.p, r * g.q, r * r * g.t)


def quasinorm_power_sum(p_exp, g: GroupElement):
    """The p-th power sum |p|^p + |q|^p + |t|^{p/2}.

    Exact for exact coordinates when p_exp is an even integer (both
    exponents are then integers); this is the quantity on which the
    dilation-homogeneity identity holds as an exact rational statement:
    power_sum(D_r x) == r^p * power_sum(x).
    """
    if not p_exp >= 1:
        raise ValueError(f"quasinorm exponent must be >= 1, got {p_exp!r}")
    ap, aq, at = abs(g.p), abs(g.q), abs(g.t)
    if (
        _is_exact(p_exp)
        and Fraction(p_exp).denominator == 1
        and int(p_exp) % 2 == 0
        and g.is_exact
    ):
        k = int(p_exp)
        return ap**k + aq**k + at ** (k // 2)
    fp = float(p_exp)
    return float(ap) ** fp + float(aq) ** fp + float(at) ** (fp / 2.0)


def quasinorm(p_exp, g: GroupElement) -> float:
    """Homogeneous quasinorm (|p|^p + |q|^p + |t|^{p/2})^{1/p}."""
    s = quasinorm_power_sum(p_exp, g)
    return float(s) ** (1.0 / float(p_exp))


@dataclass(frozen=True)
class GroupDescriptor:
    """Static description of the group: basis labels, weights, brackets.

    ``brackets[(i, j)]`` maps to a dict {k: c} giving [E_i, E_j] = sum c E_k.
    Indices follow the basis order (0 = X, 1 = Y, 2 = T).
    """

    dimension: int = 3
    labels: Tuple[str, ...] = ("X", "Y", "T")
    weights: Tuple[int, ...] = WEIGHTS
    brackets: Tuple[Tuple[int, int, int, int], ...] = ((0, 1, 2, 1),)
    # each entry of `brackets`: (i, j, k, c) meaning [E_i,E_j] has coefficient
    # c on E_k (with i < j); the antisymmetric partner is implied.

    @property
    def homogeneous_dimension(self) -> int:
        return sum(self.weights)

    def structure_constant(self, i: int, j: int, k: int):
        if i == j:
            return 0
        for (a, b, c, coef) in self.brackets:
            if (a, b, c) == (i, j, k):
                return coef
            if (a, b, c) == (j, i, k):
                return -coef
        return 0

    def validate(self) -> None:
        """Check antisymmetry bookkeeping and grading compatibility.

        Grading: c^k_{ij} must vanish unless weight_k = weight_i + weight_j.
        """
        n = self.dimension
        if len(self.labels) != n or len(self.weights) != n:
            raise ValueError("labels/weights length must match dimension")
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    c = self.structure_constant(i, j, k)
                    if c != -self.structure_constant(j, i, k):
                        raise ValueError("bracket table is not antisymmetric")
                    if c != 0 and self.weights[k] != self.weights[i] + self.weights[j]:
                        raise ValueError(
                            f"bracket [{self.labels[i]},{self.labels[j]}] -> "
                            f"{self.labels[k]} violates the grading"
                        )

    def serialize(self) -> str:
        """Structured-text rendering of the descriptor."""
        buf = io.StringIO()
        buf.write("group-descriptor:\n")
        buf.write(f"  dimension: {self.dimension}\n")
        buf.write(f"  labels: {', '.join(self.labels)}\n")
        buf.write(f"  weights: {', '.join(str(w) for w in self.weights)}\n")
        buf.write(f"  homogeneous-dimension: {self.homogeneous_dimension}\n")
        buf.write("  brackets:\n")
        for (i, j, k, c) in self.brackets:
            buf.write(
                f"    [{self.labels[i]},{self.labels[j]}] = "
                f"{c}*{self.labels[k]}\n"
            )
        return buf.getvalue()

    @classmethod
    def deserialize(cls, text: str) -> "GroupDescriptor":
        """Inverse of :meth:`serialize` (tolerant of extra whitespace)."""
        lines = [ln.strip() for ln in text.strip().splitlines()]
        if not lines or not lines[0].startswith("group-descriptor"):
            raise ValueError("not a group-descriptor block")
        fields = {}
        brackets = []
        labels: Tuple[str, ...] = ()
        in_brackets = False
        for ln in lines[1:]:
            if ln.startswith("brackets:"):
                in_brackets = True
                continue
            if in_brackets:
                # e.g. "[X,Y] = 1*T"
                lhs, rhs = ln.split("=")
                pair = lhs.strip().strip("[]").split(",")
                coef_s, lab_k = rhs.strip().split("*")
                i = labels.index(pair[0].strip())
                j = labels.index(pair[1].strip())
                k = labels.index(lab_k.strip())
                brackets.append((i, j, k, int(coef_s)))
            else:
                key, val = ln.split(":", 1)
                fields[key.strip()] = val.strip()
                if key.strip() == "labels":
                    labels = tuple(s.strip() for s in fields["labels"].split(","))
        desc = cls(
            dimension=int(fields["dimension"]),
            labels=labels,
            weights=tuple(int(s) for s in fields["weights"].split(",")),
            brackets=tuple(brackets),
        )
        desc.validate()
        return desc


def heisenberg() -> GroupDescriptor:
    """The standard descriptor used throughout the package."""
    d = GroupDescriptor()
    d.validate()
    return d


def element(p, q, t) -> GroupElement:
    return GroupElement(p, q, t)


def random_rational_element(rng, max_den: int = 12, max_num: int = 8) -> GroupElement:
    """A random exact element for property tests (rng: random.Random)."""
    def frac():
        return Fraction(rng.randint(-max_num, max_num), rng.randint(1, max_den))

    return GroupElement(frac(), frac(), frac())
