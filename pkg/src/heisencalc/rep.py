"""Irreducible representations on truncated Hermite bases, Plancherel tools.

Conventions (see tests for the machine checks):

* the generators act as X -> d/du, Y -> i*lam*u, T -> i*lam on L^2(R), so the
  commutator [A_X, A_Y] = i*lam = A_T holds for either sign of lam and
  -(A_X^2 + A_Y^2) is the |lam|-frequency harmonic oscillator with
  eigenvalues |lam|(2k+1);
* matrices live at truncation size N + G; the leading N x N block is the
  trusted part, and every certified quantity is checked by recomputing with
  a doubled guard;
* group elements exp(pX + qY + tT) act as e^{i lam t} D(alpha) with the
  displacement operator D(alpha), alpha = -sqrt(|lam|/2) (p - i sign(lam) q);
  D columns are generated by an exact ladder recurrence (true infinite
  matrix elements restricted to the truncation).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gammaln

from .quadrature import composite_gl, geometric_edges, gl_panel

PBWIndex = Tuple[int, int, int]


class GuardBandError(ValueError):
    """Raised when an operation needs a larger guard band than available."""

    def __init__(self, message: str, required_guard: int):
        super().__init__(message)
        self.required_guard = required_guard


@dataclass
class RepresentationSlice:
    """One parameter lam != 0 with ladder matrices at truncation N + G."""

    lam: float
    N: int
    G: int
    A_X: np.ndarray = field(repr=False)
    A_Y: np.ndarray = field(repr=False)
    A_T: np.ndarray = field(repr=False)

    @property
    def total(self) -> int:
        return self.N + self.G

    def trusted(self, M: np.ndarray) -> np.ndarray:
        return M[: self.N, : self.N]


def lowering_matrix(n: int) -> np.ndarray:
    a = np.zeros((n, n))
    k = np.arange(1, n)
    a[k - 1, k] = np.sqrt(k)
    return a


def build_slice(lam: float, N: int, G: int | None = None) -> RepresentationSlice:
    """Construct ladder matrices for parameter lam at truncation N + G."""
    if lam == 0:
        raise ValueError("representation parameter lam must be nonzero")
    if N < 2:
        raise ValueError(f"trusted block size N must be >= 2, got {N}")
    if G is None:
        G = max(8, N // 4)
    if G < 2:
        raise ValueError(f"guard band G must be >= 2, got {G}")
    n = N + G
    s = math.sqrt(abs(lam))
    a = lowering_matrix(n)
    ad = a.T.copy()
    A_X = (s / math.sqrt(2.0)) * (a - ad).astype(complex)
    A_Y = 1j * np.sign(lam) * (s / math.sqrt(2.0)) * (a + ad)
    A_T = 1j * lam * np.eye(n, dtype=complex)
    return RepresentationSlice(lam=float(lam), N=N, G=G, A_X=A_X, A_Y=A_Y, A_T=A_T)


def monomial_matrix(slc: RepresentationSlice, beta: PBWIndex) -> np.ndarray:
    """Matrix of the PBW monomial X^b1 Y^b2 T^b3 at full truncation size.

    Requires guard G >= 2|beta|; raises GuardBandError with the required
    minimum otherwise.  The trusted block is ``slc.trusted(result)``.
    """
    order = sum(beta)
    need = 2 * order
    if slc.G < need:
        raise GuardBandError(
            f"monomial {beta} needs guard G >= {need}, slice has G = {slc.G}",
            required_guard=need,
        )
    n = slc.total
    # A_X^b1 @ A_Y^b2 @ (i lam)^b3 I   (rightmost factor acts first)
    M = np.eye(n, dtype=complex) * (1j * slc.lam) ** beta[2]
    for _ in range(beta[1]):
        M = slc.A_Y @ M
    for _ in range(beta[0]):
        M = slc.A_X @ M
    return M


def certify_monomial(slc: RepresentationSlice, beta: PBWIndex, tol: float = 1e-12) -> float:
    """Guard-doubling certificate: max deviation of the trusted block."""
    bigger = build_slice(slc.lam, slc.N, 2 * max(slc.G, 2 * sum(beta)))
    M1 = slc.trusted(monomial_matrix(slc, beta))
    M2 = monomial_matrix(bigger, beta)[: slc.N, : slc.N]
    dev = float(np.max(np.abs(M1 - M2)))
    if dev > tol * max(1.0, float(np.max(np.abs(M2)))):
        raise GuardBandError(
            f"guard-doubling certificate failed for {beta}: dev={dev:.3e}",
            required_guard=4 * max(slc.G, 1),
        )
    return dev


def sub_laplacian_matrix(slc: RepresentationSlice) -> np.ndarray:
    """-(A_X^2 + A_Y^2) at full size (diagonal except the truncation edge)."""
    return -(slc.A_X @ slc.A_X + slc.A_Y @ slc.A_Y)


def weight_matrix(slc: RepresentationSlice, s_pow: float) -> np.ndarray:
    """(I + pi_lam(L))^{s/2} at full size via Hermitian spectral calculus."""
    n = slc.total
    if s_pow == 0:
        return np.eye(n, dtype=complex)
    H = np.eye(n) + sub_laplacian_matrix(slc)
    H = 0.5 * (H + H.conj().T)
    w, V = np.linalg.eigh(H)
    w = np.maximum(w.real, 1e-300)
    return (V * (w ** (s_pow / 2.0))) @ V.conj().T


# ---------------------------------------------------------------------
# group elements via displacement operators
# ---------------------------------------------------------------------

def displacement_alpha(lam: float, p, q):
    """alpha parameter of exp(pX + qY) in the lam-representation."""
    s = math.sqrt(abs(lam))
    return -(s / math.sqrt(2.0)) * (np.asarray(p) - 1j * np.sign(lam) * np.asarray(q))


def _coherent_columns(alphas: np.ndarray, rows: int) -> np.ndarray:
    """Columns D(alpha)|0> for a batch of alphas, shape (K, rows)."""
    la = np.abs(alphas)
    ph = np.angle(alphas)
    m = np.arange(rows)
    la_safe = np.where(la > 0, la, 1.0)
    logmag = (
        -0.5 * la[:, None] ** 2
        + m[None, :] * np.log(la_safe[:, None])
        - 0.5 * gammaln(m + 1)[None, :]
    )
    cols = np.exp(np.clip(logmag, -745.0, 60.0)) * np.exp(1j * ph[:, None] * m[None, :])
    zero = la == 0
    if np.any(zero):
        cols[zero] = 0.0
        cols[zero, 0] = 1.0
    return cols


def displacement_accumulate(
    alphas: np.ndarray, weights: np.ndarray, rows: int, cols: int
) -> np.ndarray:
    """sum_k weights[k] * D(alphas[k]) restricted to rows x cols.

    Columns follow the exact recurrence
    D|n+1> = (a^dag - conj(alpha)) D|n> / sqrt(n+1).
    """
    cur = _coherent_columns(alphas, rows)  # (K, rows)
    sq = np.sqrt(np.arange(rows))
    M = np.empty((rows, cols), dtype=complex)
    M[:, 0] = weights @ cur
    ac = np.conj(alphas)[:, None]
    for c in range(1, cols):
        nxt = np.empty_like(cur)
        nxt[:, 0] = -ac[:, 0] * cur[:, 0]
        nxt[:, 1:] = sq[1:][None, :] * cur[:, :-1] - ac * cur[:, 1:]
        cur = nxt / math.sqrt(c)
        M[:, c] = weights @ cur
    return M


def group_element_matrix(slc: RepresentationSlice, p: float, q: float, t: float) -> np.ndarray:
    """Matrix of exp(pX + qY + tT) at full truncation size.

    Small displacements use the exact column recurrence (entries of the
    untruncated operator, no matrix-exponential edge error); the forward
    recurrence amplifies roundoff roughly like e^{|alpha|^2/2}, so larger
    displacements fall back to the matrix exponential of the truncated
    generator.
    """
    from scipy.linalg import expm

    n = slc.total
    alpha = complex(displacement_alpha(slc.lam, p, q))
    if abs(alpha) ** 2 <= 4.0:
        D = displacement_accumulate(np.array([alpha]), np.array([1.0]), n, n)
        return np.exp(1j * slc.lam * t) * D
    return expm(p * slc.A_X + q * slc.A_Y + t * slc.A_T)


# ---------------------------------------------------------------------
# matrices of separable rapidly-decaying functions
# ---------------------------------------------------------------------

@dataclass
class SeparableFunction:
    """f(p,q,t) = f1(p) f2(q) f3(t) with finite effective windows."""

    f1: Callable[[np.ndarray], np.ndarray]
    f2: Callable[[np.ndarray], np.ndarray]
    f3: Callable[[np.ndarray], np.ndarray]
    window1: float
    window2: float
    window3: float
    even12: bool = True  # f1, f2 even (enables the symmetry fast path)
    label: str = "separable"

    def value_at_zero(self) -> float:
        return float(self.f1(np.zeros(1))[0] * self.f2(np.zeros(1))[0] * self.f3(np.zeros(1))[0])


def gaussian_separable(a: float, b: float, c: float, cut: float = 1e-11) -> SeparableFunction:
    """exp(-a p^2 - b q^2 - c t^2) with windows where the factor >= cut."""
    r = math.sqrt(-math.log(cut))
    return SeparableFunction(
        f1=lambda p: np.exp(-a * p * p),
        f2=lambda q: np.exp(-b * q * q),
        f3=lambda t: np.exp(-c * t * t),
        window1=r / math.sqrt(a),
        window2=r / math.sqrt(b),
        window3=r / math.sqrt(c),
        even12=True,
        label=f"gaussian(a={a},b={b},c={c})",
    )


def _fhat3(f: SeparableFunction, lam: np.ndarray, order: int = 96) -> np.ndarray:
    """int f3(t) e^{-i lam t} dt by Gauss-Legendre on the window."""
    x, w = gl_panel(-f.window3, f.window3, order)
    vals = f.f3(x) * w
    return np.exp(-1j * np.outer(np.asarray(lam, dtype=float), x)) @ vals


def hermite_table(lam: float, n: int, xi: np.ndarray) -> np.ndarray:
    """Orthonormal scaled Hermite functions h_k^{(lam)}(xi), shape (len, n).

    h_k^{(lam)}(xi) = |lam|^{1/4} h_k(sqrt|lam| xi) with the standard
    L^2-orthonormal Hermite functions; built by the bounded three-term
    recurrence (stable for all arguments).
    """
    s = math.sqrt(abs(lam))
    x = s * np.asarray(xi, dtype=float)
    out = np.empty((len(x), n))
    h0 = math.pi ** (-0.25) * np.exp(-0.5 * x * x)
    out[:, 0] = h0
    if n > 1:
        out[:, 1] = math.sqrt(2.0) * x * h0
    for k in range(1, n - 1):
        out[:, k + 1] = (
            math.sqrt(2.0 / (k + 1)) * x * out[:, k]
            - math.sqrt(k / (k + 1.0)) * out[:, k - 1]
        )
    return math.sqrt(s) * out


def _fhat1d(fi: Callable[[np.ndarray], np.ndarray], win: float, omega: np.ndarray,
            order: int = 96) -> np.ndarray:
    """int fi(s) e^{-i omega s} ds on the window, vectorized over omega."""
    x, w = gl_panel(-win, win, order)
    vals = fi(x) * w
    return np.exp(-1j * np.outer(np.asarray(omega, dtype=float), x)) @ vals


def base_matrix_of_separable(f: SeparableFunction, lam: float, n_tot: int) -> np.ndarray:
    """(p,q)-part of pi_lam(f) in the scaled Hermite basis.

    The full matrix is this times the scalar t-factor int f3 e^{-i lam t} dt
    (see matrix_of_separable).  The action on the representation space has
    the integral kernel K(xi, eta) = f1(xi - eta) fhat2(lam (xi + eta)/2);
    in rotated coordinates u = xi - eta, v = (xi + eta)/2 the kernel is
    separable and the matrix entries are 2-D Gauss-Legendre sums
    contracted against Hermite-function tables.
    """
    al = abs(lam)
    # windows: u from f1; v from the decay of fhat2(lam v), capped by the
    # classical support of the retained Hermite levels
    w_u = f.window1
    bscale = 5.03 / f.window2  # sqrt(b) for exp(-b q^2)-type decay
    w_v = min(10.5 * bscale / al, 1.05 * math.sqrt((2.0 * n_tot + 3.0) / al) + 1.0)
    # node counts: total phase of the Hermite products is <= kmax * length;
    # Gauss-Legendre needs > 0.5 nodes per unit phase before convergence
    # sets in, so stay clearly above that threshold
    kmax = math.sqrt(al * (2.0 * n_tot + 1.0))
    if f.even12:
        # quarter grid u, v > 0: reflections give transposes and parity
        # factors, so M = (A + A^T)(1 + (-1)^{m+c}) with A the quarter sum
        K_u = max(24, int(0.58 * kmax * w_u) + 24)
        K_v = max(24, int(0.58 * kmax * w_v) + 24)
        xu, wu = gl_panel(0.0, w_u, K_u)
        xv, wv = gl_panel(0.0, w_v, K_v)
    else:
        K_u = max(24, int(0.58 * kmax * 2.0 * w_u) + 24)
        K_v = max(24, int(0.58 * kmax * 2.0 * w_v) + 24)
        xu, wu = gl_panel(-w_u, w_u, K_u)
        xv, wv = gl_panel(-w_v, w_v, K_v)
    wfu = wu * f.f1(xu)
    wfv = wv * _fhat1d(f.f2, f.window2, lam * xv)
    U, V = np.meshgrid(xu, xv, indexing="ij")
    xi = (V + 0.5 * U).ravel()
    eta = (V - 0.5 * U).ravel()
    W = np.outer(wfu, wfv).ravel()
    Hxi = hermite_table(lam, n_tot, xi)
    Heta = hermite_table(lam, n_tot, eta)
    M_re = Hxi.T @ (W.real[:, None] * Heta)
    if np.max(np.abs(W.imag)) > 1e-300:
        M = M_re + 1j * (Hxi.T @ (W.imag[:, None] * Heta))
    else:
        M = M_re.astype(complex)
    if f.even12:
        m = np.arange(n_tot)
        parity = 1.0 + ((-1.0) ** (m[:, None] + m[None, :]))
        M = (M + M.T) * parity
    return M


def matrix_of_separable(f: SeparableFunction, lam: float, n_tot: int) -> np.ndarray:
    """pi_lam(f) = int f(x) pi_lam(x)^* dx restricted to n_tot x n_tot."""
    tau = complex(_fhat3(f, np.array([lam]))[0])
    return tau * base_matrix_of_separable(f, lam, n_tot)


def _level_hint(lam: float, f: SeparableFunction) -> int:
    """Truncation guess: highest oscillator level the base matrix occupies.

    The kernel spreads over |xi - eta| <= w1 and |xi + eta|/2 <= omega/|lam|
    with omega the mass window of the q-direction Fourier factor; level k
    reaches |xi| ~ sqrt((2k+1)/|lam|).
    """
    al = abs(lam)
    u_star = 0.62 * f.window1
    omega_star = 6.6 * 5.03 / f.window2  # ~ sqrt(43 b) for exp(-b q^2)
    ximax = 0.5 * u_star + omega_star / al
    n = al * ximax * ximax
    return int(min(n + 6.0 * math.sqrt(n) + 22.0, 1600))


def _saturated_base_quantity(
    f: SeparableFunction,
    lam: float,
    quantity: str,
    n_start: int | None = None,
    rel_tol: float = 1e-8,
    n_cap: int = 1600,
) -> Tuple[float, int]:
    """Grow the truncation until the requested scalar of the base matrix
    stabilizes.  quantity: 'hs2' (squared HS norm) or 'trace' (real part)."""

    def compute(n: int) -> float:
        M = base_matrix_of_separable(f, lam, n)
        if quantity == "hs2":
            return float(np.sum(np.abs(M) ** 2))
        return float(M.trace().real)

    n = min(max(n_start or _level_hint(lam, f), 24), n_cap)
    val = compute(n)
    for _ in range(6):
        n2 = min(int(n * 1.4) + 12, n_cap)
        if n2 == n:
            break
        val2 = compute(n2)
        if abs(val2 - val) <= rel_tol * max(abs(val2), 1e-300):
            return val2, n2
        n, val = n2, val2
    return val, n


# ---------------------------------------------------------------------
# Plancherel quadrature and calibration
# ---------------------------------------------------------------------

@dataclass
class PlancherelQuadrature:
    """Quadrature nodes/weights for int (...) c_pl |lam| d lam.

    ``weights`` already include the density c_pl |lam|.  Nodes are symmetric
    about 0 and never include 0.  ``central_patch`` optionally adds the
    |lam| <= lam_min region by even quadratic extrapolation of the integrand
    density (valid for integrands whose density is smooth and even in lam).
    """

    nodes: np.ndarray
    weights: np.ndarray
    c_pl: float
    lam_min: float
    lam_max: float
    metadata: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if np.any(self.weights < 0):
            raise ValueError("plancherel weights must be positive")
        if np.any(self.nodes == 0):
            raise ValueError("lam = 0 must not be a node")
        srt = np.sort(self.nodes)
        if not np.allclose(srt, -srt[::-1], rtol=0, atol=1e-13 * self.lam_max):
            raise ValueError("nodes must be symmetric about 0")

    def integrate(self, fn: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.dot(self.weights, fn(self.nodes)))

    def integrate_values(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))

    def dilated(self, r: float) -> "PlancherelQuadrature":
        """Node set for the dilation lam -> r^2 lam (weights pick up r^4)."""
        return PlancherelQuadrature(
            nodes=self.nodes * r**2,
            weights=self.weights * r**4,
            c_pl=self.c_pl,
            lam_min=self.lam_min * r**2,
            lam_max=self.lam_max * r**2,
            metadata=dict(self.metadata, dilated_by=r),
        )

    def central_patch(self, density_at: Callable[[np.ndarray], np.ndarray]) -> float:
        """int_{-lam_min}^{lam_min} density d lam by even quadratic fit.

        ``density_at(lam)`` must be the full integrand density including the
        c_pl |lam| factor divided by |lam|... concretely: the patch integrates
        h(lam) = c_pl * |lam| * g(lam) where the caller passes
        density_at = lam -> c_pl*|lam|*g(lam) evaluated at lam > 0; h must
        extend evenly and smoothly through 0.
        """
        lm = self.lam_min
        pts = np.array([lm, 1.5 * lm, 2.0 * lm])
        vals = np.asarray(density_at(pts), dtype=float)
        # fit h(lam) ~ h0 + h2 lam^2 (least squares on 3 points)
        A = np.vstack([np.ones_like(pts), pts**2]).T
        coef, *_ = np.linalg.lstsq(A, vals, rcond=None)
        h0, h2 = coef
        return float(2.0 * (h0 * lm + h2 * lm**3 / 3.0))


def plancherel_quadrature(
    c_pl: float,
    lam_min: float = 0.04,
    lam_max: float = 11.0,
    n_panels: int = 18,
    order: int = 8,
) -> PlancherelQuadrature:
    """Geometric Gauss-Legendre panels on [lam_min, lam_max], mirrored."""
    edges = geometric_edges(lam_min, lam_max, n_panels)
    x, w = composite_gl(edges, order)
    nodes = np.concatenate([-x[::-1], x])
    base_w = np.concatenate([w[::-1], w])
    weights = base_w * c_pl * np.abs(nodes)
    return PlancherelQuadrature(
        nodes=nodes,
        weights=weights,
        c_pl=c_pl,
        lam_min=lam_min,
        lam_max=lam_max,
        metadata={"n_panels": n_panels, "order": order, "grid": "geometric"},
    )


@dataclass
class PlancherelCalibration:
    c_pl: float
    cross_validation_rel_dev: float
    inversion_rel_dev: float
    lhs_primary: float
    rhs_primary_unit: float
    details: Dict[str, object] = field(default_factory=dict)

    def report_text(self) -> str:
        lines = [
            "plancherel-calibration:",
            f"  c-pl: {self.c_pl!r}",
            f"  primary-lhs-l2sq: {self.lhs_primary!r}",
            f"  primary-rhs-at-unit-constant: {self.rhs_primary_unit!r}",
            f"  cross-validation-rel-dev: {self.cross_validation_rel_dev:.3e}",
            f"  fourier-inversion-rel-dev: {self.inversion_rel_dev:.3e}",
        ]
        for k, v in sorted(self.details.items()):
            lines.append(f"  {k}: {v}")
        return "\n".join(lines) + "\n"


def _l2_squared(f: SeparableFunction, order: int = 80) -> float:
    """||f||^2 over the group by direct tensor quadrature (separable)."""
    total = 1.0
    for fi, wi in ((f.f1, f.window1), (f.f2, f.window2), (f.f3, f.window3)):
        x, w = gl_panel(-wi, wi, order)
        total *= float(np.dot(w, np.abs(fi(x)) ** 2))
    return total


def _lam_cutoff(
    f: SeparableFunction, rel: float = 3e-8, lam_hi: float = 25.0, power: int = 2
) -> float:
    """Smallest Lam with |t-factor(Lam)|^power <= rel * peak."""
    grid = np.linspace(0.0, lam_hi, 801)
    vals = np.abs(_fhat3(f, grid)) ** power
    peak = float(vals.max())
    below = np.nonzero(vals <= rel * peak)[0]
    if len(below) == 0:
        return lam_hi
    return float(grid[below[0]])


def _tail_fraction(M: np.ndarray, quantity: str, band: float = 0.15) -> float:
    """Mass fraction of the scalar carried by the top truncation band."""
    n = M.shape[0]
    k = max(4, int(band * n))
    if quantity == "hs2":
        full = float(np.sum(np.abs(M) ** 2))
        interior = float(np.sum(np.abs(M[: n - k, : n - k]) ** 2))
    else:
        d = np.real(np.diag(M))
        full = float(np.sum(d))
        interior = float(np.sum(d[: n - k]))
    return abs(full - interior) / max(abs(full), 1e-300)


def _base_scalar(M: np.ndarray, quantity: str) -> float:
    if quantity == "hs2":
        return float(np.sum(np.abs(M) ** 2))
    return float(M.trace().real)


def _separable_dual_integral(
    f: SeparableFunction,
    quantity: str,
    lam_min: float,
    lam_max: float | None,
    order_low: int = 7,
    order_high: int = 6,
    sat_tol: float = 1e-8,
) -> Tuple[float, Dict[str, object]]:
    """int_R |t-factor|^2-weighted scalar of the base matrix, |lam| d lam.

    For quantity='hs2' this is int ||pi_lam(f)||_HS^2 |lam| d lam (the
    Plancherel right side at unit constant); for 'trace' it is
    int Re Tr pi_lam(f) |lam| d lam (Fourier inversion at the identity;
    real-valued f assumed so the t-factor is real).

    The t-direction scalar factors out of pi_lam(f) exactly; the smooth even
    matrix factor g(lam) = |lam| * scalar(base matrix) is evaluated at
    quadrature nodes and extended across |lam| < lam_min by an even
    quadratic fit (the central patch).  Convergence per node is certified by
    a truncation tail-band bound plus growth spot-checks at sentinel nodes.
    """
    if lam_max is None:
        lam_max = _lam_cutoff(f, power=2 if quantity == "hs2" else 1)
    if lam_max <= 2.0 * lam_min:
        raise ValueError("lam_max too small relative to lam_min")
    lo_edges = geometric_edges(lam_min, min(2.0, lam_max), 6)
    if lam_max > 2.0:
        hi_edges = np.linspace(2.0, lam_max, max(2, int((lam_max - 2.0) / 0.8) + 1))
        edges = np.concatenate([lo_edges[:-1], hi_edges])
    else:
        edges = lo_edges
    lam_nodes: List[float] = []
    lam_w: List[float] = []
    for a, b in zip(edges[:-1], edges[1:]):
        order = order_high if a >= 2.0 else order_low
        x, w = gl_panel(a, b, order)
        lam_nodes.extend(x.tolist())
        lam_w.extend(w.tolist())
    lam_nodes_arr = np.array(lam_nodes)
    lam_w_arr = np.array(lam_w)

    # patch fit points for the matrix factor
    fitpts = np.array([lam_min, 1.5 * lam_min, 2.0 * lam_min])

    need = np.concatenate([lam_nodes_arr, fitpts])
    order_desc = np.argsort(-need)
    gvals = np.empty_like(need)
    n_used = np.empty(len(need), dtype=int)
    n_prev = 0
    grow_checks = []
    for rank, idx in enumerate(order_desc):
        lam = float(need[idx])
        n = max(_level_hint(lam, f), int(0.9 * n_prev), 24)
        val = None
        for _ in range(7):
            M = base_matrix_of_separable(f, lam, n)
            tail = _tail_fraction(M, quantity)
            val = _base_scalar(M, quantity)
            if tail <= 0.2 * sat_tol:
                break
            n = int(n * 1.4) + 12
            if n > 1600:
                break
        gvals[idx] = val * lam
        n_used[idx] = n
        n_prev = n
        if rank % max(1, len(need) // 3) == 0:
            # sentinel growth certificate
            M2 = base_matrix_of_separable(f, lam, int(n * 1.4) + 12)
            v2 = _base_scalar(M2, quantity)
            grow_checks.append(abs(v2 - val) / max(abs(v2), 1e-300))

    tau2_or_tau = np.abs(_fhat3(f, need)) ** 2 if quantity == "hs2" else np.real(
        _fhat3(f, need)
    )
    dens_nodes = tau2_or_tau[: len(lam_nodes_arr)] * gvals[: len(lam_nodes_arr)]
    main = 2.0 * float(np.dot(lam_w_arr, dens_nodes))

    # central patch: even quadratic fit of the matrix factor g
    gfit = gvals[len(lam_nodes_arr):]
    A = np.vstack([np.ones_like(fitpts), fitpts**2]).T
    (g0, g2), *_ = np.linalg.lstsq(A, gfit, rcond=None)
    xs, ws = gl_panel(0.0, lam_min, 16)
    tpart = np.abs(_fhat3(f, xs)) ** 2 if quantity == "hs2" else np.real(_fhat3(f, xs))
    patch = 2.0 * float(np.dot(ws, tpart * (g0 + g2 * xs**2)))

    # mirror-symmetry certificate at one node
    lmid = float(lam_nodes_arr[len(lam_nodes_arr) // 2])
    Mneg = base_matrix_of_separable(f, -lmid, int(n_used[len(lam_nodes_arr) // 2]))
    vneg = _base_scalar(Mneg, quantity)
    vpos = gvals[len(lam_nodes_arr) // 2] / lmid
    sym_dev = abs(vneg - vpos) / max(abs(vpos), 1e-300)
    if sym_dev > 1e-6:
        raise RuntimeError(
            f"±lam symmetry violated (rel dev {sym_dev:.2e}); convention bug"
        )

    info = {
        "lam-nodes": len(lam_nodes_arr),
        "lam-window": f"[{lam_min}, {lam_max:.3f}]",
        "central-patch": patch,
        "max-truncation": int(n_used.max()),
        "growth-certificates": "[" + ", ".join(f"{c:.2e}" for c in grow_checks) + "]",
        "mirror-symmetry-rel-dev": f"{sym_dev:.3e}",
    }
    if grow_checks and max(grow_checks) > 50 * sat_tol:
        raise RuntimeError(
            f"truncation growth certificate failed: {max(grow_checks):.3e}"
        )
    return main + patch, info


def calibrate_plancherel_constant(
    f_primary: SeparableFunction | None = None,
    f_secondary: SeparableFunction | None = None,
    f_inversion: SeparableFunction | None = None,
    lam_min: float = 0.4,
    sat_tol: float = 1e-8,
    cross_tol: float = 1e-5,
) -> PlancherelCalibration:
    """Fit c_pl from ||f||^2 = c_pl * int ||pi_lam(f)||_HS^2 |lam| d lam.

    Cross-validates on a second function (signals a convention bug beyond
    ``cross_tol``) and checks pointwise Fourier inversion at the identity on
    a third rapidly-decaying kernel.
    """
    f_primary = f_primary or gaussian_separable(1.0, 1.0, 1.0)
    f_secondary = f_secondary or gaussian_separable(0.7, 1.4, 0.8)
    f_inversion = f_inversion or gaussian_separable(1.0, 0.8, 0.9)

    lhs1 = _l2_squared(f_primary)
    rhs1, info1 = _separable_dual_integral(
        f_primary, "hs2", lam_min, None, sat_tol=sat_tol
    )
    c1 = lhs1 / rhs1

    lhs2 = _l2_squared(f_secondary)
    rhs2, info2 = _separable_dual_integral(
        f_secondary, "hs2", lam_min, None, sat_tol=sat_tol
    )
    c2 = lhs2 / rhs2
    cross = abs(c2 / c1 - 1.0)
    if cross > cross_tol:
        raise RuntimeError(
            f"calibration cross-validation failed: rel dev {cross:.3e} > {cross_tol:.1e}"
            " (likely convention bug in the representation/measure pairing)"
        )

    tr_int, info3 = _separable_dual_integral(
        f_inversion, "trace", lam_min, None, sat_tol=max(sat_tol, 1e-7)
    )
    lhs_inv = f_inversion.value_at_zero()
    inv_dev = abs(c1 * tr_int - lhs_inv) / abs(lhs_inv)

    return PlancherelCalibration(
        c_pl=c1,
        cross_validation_rel_dev=cross,
        inversion_rel_dev=inv_dev,
        lhs_primary=lhs1,
        rhs_primary_unit=rhs1,
        details={
            "primary": f_primary.label,
            "secondary": f_secondary.label,
            "inversion-kernel": f_inversion.label,
            "error-bar": f"{_calibration_error_bar(info1, info2):.2e}",
            **{f"primary-{k}": v for k, v in info1.items()},
            **{f"secondary-{k}": v for k, v in info2.items()},
            **{f"inversion-{k}": v for k, v in info3.items()},
        },
    )


def _calibration_error_bar(info1: Dict[str, object], info2: Dict[str, object]) -> float:
    """Crude error bar: worst growth certificate across both calibrations."""
    worst = 0.0
    for info in (info1, info2):
        s = str(info.get("growth-certificates", "[]")).strip("[]")
        for tok in s.split(","):
            tok = tok.strip()
            if tok:
                worst = max(worst, float(tok))
    return max(worst, 1e-9)
