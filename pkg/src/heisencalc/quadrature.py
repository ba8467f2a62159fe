"""Small shared quadrature helpers (Gauss-Legendre panels, Filon rules)."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence, Tuple

import numpy as np


def gl_panel(a: float, b: float, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(order)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * x, half * w


def composite_gl(edges: Sequence[float], order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre over consecutive panels given by ``edges``."""
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        x, w = gl_panel(a, b, order)
        xs.append(x)
        ws.append(w)
    if not xs:
        return np.empty(0), np.empty(0)
    return np.concatenate(xs), np.concatenate(ws)


def geometric_edges(lo: float, hi: float, n_panels: int) -> np.ndarray:
    """Panel edges geometrically spaced from hi down to lo (returned ascending)."""
    if not (0 < lo < hi):
        raise ValueError("need 0 < lo < hi")
    return np.geomspace(lo, hi, n_panels + 1)


@dataclass
class RefinementResult:
    value: float
    error_estimate: float
    levels: int


def refine_until(
    evaluate: Callable[[int], float],
    rel_tol: float,
    start_level: int = 0,
    max_level: int = 8,
) -> RefinementResult:
    """Double a resolution parameter until successive values stabilize.

    ``evaluate(level)`` computes the quantity at refinement ``level``; the
    attached error estimate is the last successive difference.
    """
    prev = evaluate(start_level)
    est = abs(prev)
    lev = start_level
    for lev in range(start_level + 1, max_level + 1):
        cur = evaluate(lev)
        est = abs(cur - prev)
        scale = max(abs(cur), 1e-300)
        if est <= rel_tol * scale:
            return RefinementResult(cur, est, lev)
        prev = cur
    return RefinementResult(prev, est, lev)


# ---------------------------------------------------------------------
# Filon-type quadrature: integrate g(x) e^{i w x} with smooth g
# ---------------------------------------------------------------------

def _exp_moments(w: float, h: float, deg: int) -> np.ndarray:
    """m_k = int_{-h}^{h} u^k e^{i w u} du for k = 0..deg (stable both regimes)."""
    m = np.zeros(deg + 1, dtype=complex)
    if abs(w) * h < 0.5:
        # Taylor series in w: m_k = sum_j (iw)^j/j! * int u^{k+j}
        # int_{-h}^{h} u^n du = 2 h^{n+1}/(n+1) for even n else 0
        for k in range(deg + 1):
            acc = 0.0 + 0.0j
            term = 1.0 + 0.0j  # (iw)^j / j!
            for j in range(0, 40):
                n = k + j
                if n % 2 == 0:
                    acc += term * 2.0 * h ** (n + 1) / (n + 1)
                term *= 1j * w / (j + 1)
                if abs(term) * h ** (k + j + 2) < 1e-320 + 1e-18 * abs(acc):
                    break
            m[k] = acc
        return m
    # upward recurrence m_k = (h^k e^{iwh} - (-h)^k e^{-iwh})/(iw) - k/(iw) m_{k-1}
    eiwh = np.exp(1j * w * h)
    eimwh = np.exp(-1j * w * h)
    iw = 1j * w
    m[0] = (eiwh - eimwh) / iw
    for k in range(1, deg + 1):
        m[k] = (h**k * eiwh - (-h) ** k * eimwh) / iw - (k / iw) * m[k - 1]
    return m


def filon_panel_weights(a: float, b: float, w: float, deg: int = 8) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes x_j and complex weights W_j so that sum W_j g(x_j) ≈ ∫_a^b g e^{iwx}.

    Chebyshev interpolation of g on the panel, exact moments of e^{iwx}.
    """
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    # Chebyshev points (second kind) on the panel
    k = np.arange(deg + 1)
    u = np.cos(np.pi * k / deg)[::-1] * half  # ascending in [-half, half]
    x = mid + u
    # Vandermonde in the monomial basis of u (deg is small, conditioning ok)
    V = np.vander(u, deg + 1, increasing=True)  # V[j, m] = u_j^m
    moments = _exp_moments(w, half, deg)  # ∫ u^m e^{iwu} du
    # weights solve V^T W = moments, then multiply by e^{iw·mid}
    Wt = np.linalg.solve(V.T, moments)
    return x, Wt * np.exp(1j * w * mid)


def filon_integrate(
    g: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    w: float,
    deg: int = 8,
    max_panel_cycles: float = 0.75,
) -> complex:
    """∫_a^b g(x) e^{iwx} dx with panels short enough for the interpolation."""
    length = b - a
    cycles = abs(w) * length / (2 * np.pi)
    n_panels = max(1, int(np.ceil(cycles / max_panel_cycles)), int(np.ceil(length / 2.0)))
    edges = np.linspace(a, b, n_panels + 1)
    total = 0.0 + 0.0j
    for lo, hi in zip(edges[:-1], edges[1:]):
        x, W = filon_panel_weights(lo, hi, w, deg)
        total += np.dot(W, g(x))
    return total


@lru_cache(maxsize=8)
def _taylor_moment_table(J: int, deg: int) -> np.ndarray:
    """C[j, k] = 2/(j+k+1) when j+k even else 0 (series table for _exp_moments_multi)."""
    j = np.arange(J)[:, None]
    k = np.arange(deg + 1)[None, :]
    C = np.where((j + k) % 2 == 0, 2.0 / (j + k + 1), 0.0)
    return C


def _exp_moments_multi(ws: np.ndarray, h: float, deg: int) -> np.ndarray:
    """m[i, k] = int_{-h}^{h} u^k e^{i ws[i] u} du, vectorized over frequencies.

    Taylor branch below |w|h = 2 (64 terms, fully converged), upward
    recurrence above (amplification bounded by prod max(1, k/|w|h) <~ 2e3).
    """
    ws = np.asarray(ws, dtype=float)
    out = np.zeros((ws.size, deg + 1), dtype=complex)
    small = np.abs(ws) * h < 2.0
    if np.any(small):
        wsm = ws[small]
        # powers (iwh)^j/j! (bounded by e^2) against a fixed (j, k) table;
        # keeping h^j separate overflows/underflows when |w| is huge but |w|h small
        wh = 1j * wsm * h
        J = 30  # (2)^30/30! ~ 4e-24: converged for the whole |wh| < 2 branch
        T = np.empty((wsm.size, J), dtype=complex)
        T[:, 0] = 1.0
        for j in range(1, J):
            T[:, j] = T[:, j - 1] * wh / j
        C = _taylor_moment_table(J, deg)
        out[small] = (T @ C) * (h ** np.arange(1, deg + 2))[None, :]
    if np.any(~small):
        wsl = ws[~small]
        iw = 1j * wsl
        eiwh = np.exp(iw * h)
        eimwh = np.exp(-iw * h)
        m_prev = (eiwh - eimwh) / iw
        out[~small, 0] = m_prev
        for k in range(1, deg + 1):
            m_prev = (h**k * eiwh - (-h) ** k * eimwh) / iw - (k / iw) * m_prev
            out[~small, k] = m_prev
    return out


def filon_weights_multi(a: float, b: float, ws: np.ndarray, deg: int = 8) -> Tuple[np.ndarray, np.ndarray]:
    """Shared-envelope Filon weights for a batch of frequencies.

    Returns nodes x (deg+1,) and W (len(ws), deg+1) with
    sum_j W[i, j] g(x_j) ≈ ∫_a^b g(x) e^{i ws[i] x} dx.  The nodes do not
    depend on the frequency, so one envelope sample serves every w.
    """
    ws = np.asarray(ws, dtype=float)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    k = np.arange(deg + 1)
    u = np.cos(np.pi * k / deg)[::-1] * half
    x = mid + u
    V = np.vander(u, deg + 1, increasing=True)
    moments = _exp_moments_multi(ws, half, deg)  # (K, deg+1)
    W = np.linalg.solve(V.T, moments.T).T  # (K, deg+1)
    return x, W * np.exp(1j * ws * mid)[:, None]


def filon_weights_panels(
    panels: Sequence[Tuple[float, float]],
    ws: np.ndarray,
    deg: int = 8,
) -> Sequence[Tuple[np.ndarray, np.ndarray]]:
    """Filon weights for a list of panels, sharing moment tables across
    panels of equal width (the expensive part depends only on the width)."""
    ws = np.asarray(ws, dtype=float)
    k = np.arange(deg + 1)
    cos_k = np.cos(np.pi * k / deg)[::-1]
    cache = {}
    out = []
    for a, b in panels:
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        key = round(half, 14)
        if key not in cache:
            u = cos_k * half
            V = np.vander(u, deg + 1, increasing=True)
            M = _exp_moments_multi(ws, half, deg)
            cache[key] = (u, np.linalg.solve(V.T, M.T).T)
        u, Wb = cache[key]
        out.append((mid + u, Wb * np.exp(1j * ws * mid)[:, None]))
    return out


def _expint_cf(p, z: np.ndarray, max_iter: int = 400) -> np.ndarray:
    """E_p(z) by the modified Lentz continued fraction (|arg z| < pi, z != 0).

    p may be an integer or an array broadcastable against z, so a whole
    (power, frequency) grid runs in one call.  Converged lanes freeze so one
    slow element does not keep the full array iterating.
    """
    z = np.asarray(z, dtype=complex)
    pa = np.broadcast_to(np.asarray(p, dtype=float), z.shape)
    tiny = 1e-300
    b = z + pa
    c = np.full_like(z, 1.0 / tiny)
    d = 1.0 / b
    h = d.copy()
    act = np.ones(z.shape, dtype=bool)
    for i in range(1, max_iter + 1):
        a = -i * (pa - 1 + i)
        b = b + 2.0
        dn = 1.0 / (a * d + b)
        cn = b + a / c
        delta = cn * dn
        d = np.where(act, dn, d)
        c = np.where(act, cn, c)
        h = np.where(act, h * delta, h)
        act = act & (np.abs(delta - 1.0) >= 1e-16)
        if i % 4 == 0 and not act.any():
            break
    return np.exp(-z) * h


def osc_power_tails(ws: np.ndarray, xi0: float, max_power: int) -> np.ndarray:
    """T[p-1, i] = ∫_{xi0}^∞ ξ^{-p} e^{i ws[i] ξ} dξ for p = 1..max_power.

    Closed form via generalized exponential integrals,
    ∫_{xi0}^∞ ξ^{-p} e^{iwξ} dξ = xi0^{1-p} E_p(-i w xi0).
    Small |z| = |w| xi0 uses the upward recurrence
    E_{p+1}(z) = (e^{-z} - z E_p(z))/p seeded by scipy's complex exp1
    (stable there; its error grows like |z|^p / p!, so it is restricted to
    |z| <= 8).  Larger |z| uses a Lentz continued fraction per power.
    w = 0 rows use the elementary antiderivative (p >= 2 required there).

    Complex ws with Im w >= 0 are accepted (the integral converges there and
    -i w xi0 stays in the right half plane where both branches are valid).
    """
    from scipy.special import exp1

    ws = np.asarray(ws)
    if not np.iscomplexobj(ws):
        ws = np.asarray(ws, dtype=float)
    if xi0 <= 0:
        raise ValueError("tail start must be positive")
    zero = ws == 0.0
    if np.any(zero) and max_power < 2:
        raise ValueError("w = 0 tail diverges for power 1")
    z = -1j * ws * xi0
    E = np.empty((max_power, ws.size), dtype=complex)
    small = (np.abs(z) <= 8.0) & ~zero
    large = ~small & ~zero
    if np.any(small):
        zs = z[small]
        E[0, small] = exp1(zs)
        emz = np.exp(-zs)
        prev = E[0, small]
        for p in range(1, max_power):
            prev = (emz - zs * prev) / p
            E[p, small] = prev
    if np.any(large):
        zl = z[large]
        P = np.arange(1, max_power + 1, dtype=float)[:, None]
        E[:, large] = _expint_cf(P, np.broadcast_to(zl, (max_power, zl.size)))
    powers = np.arange(1, max_power + 1)
    out = xi0 ** (1.0 - powers)[:, None] * E
    if np.any(zero):
        with np.errstate(divide="ignore"):
            flat = np.where(powers > 1, xi0 ** (1.0 - powers) / (powers - 1.0), np.inf)
        out[:, zero] = flat[:, None]
    return out
