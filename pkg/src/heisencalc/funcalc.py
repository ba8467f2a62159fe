"""Matrix functional calculus through a half-plane contour.

psi(H) for Hermitian H is recovered from the windowed almost-analytic
extension of psi by integrating against the resolvent over the upper half
plane and restoring the lower half by conjugate symmetry:

    psi(H) = S + S*,    S = sum_j m_j (H - z_j)^{-1},

where the m_j collect the area weight, the value of dbar(psi_ext) at the
node and the 1/pi prefactor.  The node set ("contour plan") depends only on
the extension and a tolerance, so it is built once per (psi, tol) and reused
across operators; whole window terms are dropped at apply time when their
real-axis footprint cannot meet the spectrum, which is exact because the
paired upper/lower contributions of such a term cancel.

Node placement per term:

* x panels sized against the local oscillation rate 8 pi / Im z, with edges
  pinned to the collar-window joints and the jump locations of psi;
* geometric y panels from a certified floor up to the top of the vertical
  cutoff, with edges pinned to the cutoff joints and to the heights where
  the row evaluator changes regime (each panel then sees one smooth branch);
* the floor comes from probing sup_x |dbar| against height and fitting the
  decay power, with a safety factor on the extrapolated strip mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .extension import AlmostAnalyticExtension, GrowthClassFunction
from .quadrature import composite_gl

__all__ = [
    "ContourParams", "TermPlan", "ContourPlan", "build_contour_plan",
    "plan_axis_check", "hs_apply", "HSApplyReport", "psi_of_symbol",
    "resolvent_bound_audit", "ResolventBoundReport",
    "HypothesisViolation", "QuadratureFloorError",
]

_LD = np.longdouble


class HypothesisViolation(ValueError):
    """An input breaks a structural assumption (hermiticity, positivity...)."""


class QuadratureFloorError(RuntimeError):
    """The node budget cannot reach the requested tolerance."""


# ---------------------------------------------------------------------
# contour plans
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class ContourParams:
    """Discretisation knobs for the half-plane quadrature."""

    tol: float = 1e-6
    panel_phase: float = 16.0       # full-panel phase budget in x (radians)
    y_ratio: float = 1.25           # geometric ratio of the y panels
    gl_x: int = 16
    gl_y: int = 10
    n_probe: int = 14               # heights probed per term for the floor
    probe_bottom: float = 2.0**-9   # lowest probed height (scaled variable)
    strip_fraction: float = 0.25    # share of tol spent on the dropped strip
    safety: float = 3.0             # margin on the extrapolated strip bound
    max_nodes: int = 6_000_000


@dataclass
class TermPlan:
    """Node block of one windowed term inside a flat contour plan."""

    index: int
    x_intervals: Tuple[Tuple[float, float], ...]
    sl: slice
    y_floor: float
    y_top: float
    strip_bound: float
    decay_slope: float


@dataclass
class ContourPlan:
    """Flat node/weight arrays for the upper-half-plane integral."""

    zs: np.ndarray                  # nodes, Im z > 0
    wd: np.ndarray                  # (area weight) * dbar / pi per node
    terms: List[TermPlan]
    params: ContourParams
    abs_mass: float                 # sum |wd|
    res_mass: float                 # sum |wd| / Im z

    @property
    def n_nodes(self) -> int:
        return int(self.zs.size)

    def strip_bound_total(self) -> float:
        return float(sum(t.strip_bound for t in self.terms))

    def node_index(self, keep: Sequence[int]) -> np.ndarray:
        ks = set(keep)
        parts = [np.arange(t.sl.start, t.sl.stop)
                 for t in self.terms if t.index in ks]
        if not parts:
            return np.zeros(0, dtype=int)
        return np.concatenate(parts)


def _probe_x(aae: AlmostAnalyticExtension, ti: int, n: int = 160) -> np.ndarray:
    """Sample grid covering a term's footprint plus its collar bands."""
    t = aae.terms[ti]
    e, s = t.xwin.eps1, t.scale
    pts = []
    for (a, b), (lo, hi) in zip(t.xwin.intervals, t.x_intervals()):
        pts.append(np.linspace(lo, hi, n))
        pts.append(np.linspace(a - 2 * e, a - e, 9) / s)
        pts.append(np.linspace(b + e, b + 2 * e, 9) / s)
    return np.unique(np.concatenate(pts))


def _term_floor(aae: AlmostAnalyticExtension, ti: int, tol_strip: float,
                params: ContourParams) -> Tuple[float, float, float]:
    """Certified (y_floor, strip_bound, decay_slope) for one term.

    Bounds the operator-norm error of dropping the strip 0 < Im z < y_floor
    by (2/pi) L sup(y_floor) / slope, using |resolvent| <= 1/Im z and the
    fitted power decay of the probed sup, times the safety factor.
    """
    t = aae.terms[ti]
    s = t.scale
    xg = _probe_x(aae, ti)
    L = sum(hi - lo for lo, hi in t.x_intervals())
    mus = np.geomspace(params.probe_bottom, 0.5, params.n_probe)
    ys = mus / s
    sups = np.array([float(np.max(np.abs(aae.dbar_row_term(ti, y, xg))))
                     for y in ys])
    peak = float(np.max(sups)) if sups.size else 0.0
    if peak == 0.0:
        # nothing in the probed band; mass (if any) lives above it
        return ys[-1], 0.0, float("inf")
    live = sups > 1e-280 * peak
    if not live[0]:
        # underflow-dead bottom: floor at the last dead height
        i = int(np.argmax(live))            # first live probe
        return ys[i - 1], 0.0, float("inf")
    # fit the decay power on the lowest live probes
    k = min(6, int(np.sum(live)))
    yy, ss = np.log(ys[live][:k]), np.log(sups[live][:k])
    slope = float(np.polyfit(yy, ss, 1)[0]) if k >= 2 else 0.0
    if slope < 2.0:
        raise QuadratureFloorError(
            f"term {ti}: probed dbar decay power {slope:.2f} < 2 near the "
            "axis; cannot certify a strip floor")
    amp = params.safety * (2.0 / math.pi) * L / slope
    strip_at_bottom = amp * sups[live][0]
    y_bot = ys[live][0]
    if strip_at_bottom <= tol_strip:
        y_f = min(y_bot * (tol_strip / strip_at_bottom) ** (1.0 / slope), ys[-1])
    else:
        y_f = y_bot * (tol_strip / strip_at_bottom) ** (1.0 / slope)
    y_f = max(y_f, 1e-12)
    strip = amp * sups[live][0] * (y_f / y_bot) ** slope
    return y_f, float(strip), slope


def _term_y_edges(aae: AlmostAnalyticExtension, ti: int, y_f: float,
                  params: ContourParams) -> np.ndarray:
    t = aae.terms[ti]
    s = t.scale
    y_top = t.y_top()
    n_pan = max(1, int(math.ceil(math.log(y_top / y_f) / math.log(params.y_ratio))))
    base = np.geomspace(y_f, y_top, n_pan + 1)
    knots = [v / s for v in (1.0, 1.5, 2.0)]
    xim = t.ext.xi_mix
    knots += [v / (s * xim) for v in (0.5, 2.0, 4.0)]   # row-regime switches
    keep = [v for v in knots if y_f < v < y_top]
    return np.unique(np.concatenate([base, np.asarray(keep)]))


def _term_x_edges(aae: AlmostAnalyticExtension, ti: int, y_lo: float,
                  params: ContourParams) -> np.ndarray:
    t = aae.terms[ti]
    e, s = t.xwin.eps1, t.scale
    w = params.panel_phase * y_lo / (8.0 * math.pi)
    kappas = [ot.kappa / s for ot in t.ext.tr.osc]
    parts = []
    for (a, b), (lo, hi) in zip(t.xwin.intervals, t.x_intervals()):
        n = max(1, int(math.ceil((hi - lo) / w)))
        seg = np.linspace(lo, hi, n + 1)
        ins = [v / s for v in (a - e, a, b, b + e)]
        ins += [kp for kp in kappas if lo < kp < hi]
        seg = np.unique(np.concatenate([seg, np.asarray([v for v in ins
                                                         if lo < v < hi])]))
        parts.append(seg)
    return parts


def build_contour_plan(aae: AlmostAnalyticExtension,
                       params: Optional[ContourParams] = None,
                       tol: Optional[float] = None) -> ContourPlan:
    """Lay out upper-half-plane nodes and dbar weights for one extension."""
    if params is None:
        params = ContourParams()
    if tol is not None:
        params = replace(params, tol=tol)
    nT = len(aae.terms)
    grades = np.array([2.0 ** -i for i in range(nT)])
    grades /= grades.sum()
    zs_parts: List[np.ndarray] = []
    wd_parts: List[np.ndarray] = []
    term_plans: List[TermPlan] = []
    pos = 0
    n_total = 0
    for ti, t in enumerate(aae.terms):
        tol_strip = params.strip_fraction * params.tol * grades[ti]
        y_f, strip, slope = _term_floor(aae, ti, tol_strip, params)
        y_edges = _term_y_edges(aae, ti, y_f, params)
        t_zs: List[np.ndarray] = []
        t_wd: List[np.ndarray] = []
        for y0, y1 in zip(y_edges, y_edges[1:]):
            segs = _term_x_edges(aae, ti, y0, params)
            n_total += params.gl_y * params.gl_x * sum(s_.size - 1 for s_ in segs)
            if n_total > params.max_nodes:
                raise QuadratureFloorError(
                    f"contour plan would need > {params.max_nodes} nodes "
                    f"(term {ti} floor {y_f:.3e}); quadrature cannot "
                    "converge within the node budget at this tolerance")
            gl = [composite_gl(s_, params.gl_x) for s_ in segs]
            xs = np.concatenate([g[0] for g in gl])
            wx = np.concatenate([g[1] for g in gl])
            yn, wy = composite_gl(np.array([y0, y1]), params.gl_y)
            for y, wyk in zip(yn, wy):
                d = aae.dbar_row_term(ti, float(y), xs)
                nz = d != 0.0
                if not np.any(nz):
                    continue
                t_zs.append(xs[nz] + 1j * y)
                t_wd.append((wyk / math.pi) * wx[nz] * d[nz])
        zt = np.concatenate(t_zs) if t_zs else np.zeros(0, complex)
        wt = np.concatenate(t_wd) if t_wd else np.zeros(0, complex)
        zs_parts.append(zt)
        wd_parts.append(wt)
        term_plans.append(TermPlan(ti, t.x_intervals(), slice(pos, pos + zt.size),
                                   y_f, t.y_top(), strip, slope))
        pos += zt.size
    zs = np.concatenate(zs_parts) if zs_parts else np.zeros(0, complex)
    wd = np.concatenate(wd_parts) if wd_parts else np.zeros(0, complex)
    absw = np.abs(wd)
    return ContourPlan(zs, wd, term_plans, params, float(absw.sum()),
                       float((absw / np.maximum(zs.imag, 1e-300)).sum()))


def _plan_cache(aae: AlmostAnalyticExtension) -> Dict:
    return aae.__dict__.setdefault("_contour_plans", {})


def get_contour_plan(aae: AlmostAnalyticExtension, tol: float = 1e-6,
                     params: Optional[ContourParams] = None) -> ContourPlan:
    """Cached plan lookup; plans are reused across operators."""
    key = (tol, params)
    cache = _plan_cache(aae)
    if key not in cache:
        cache[key] = build_contour_plan(aae, params=params, tol=tol)
    return cache[key]


def _pair_sum(plan_zs: np.ndarray, plan_wd: np.ndarray,
              lams: np.ndarray) -> np.ndarray:
    """2 Re sum_j wd_j / (lam - z_j) per real lam, in extended precision.

    This is the scalar functional calculus: upper-half nodes plus their
    conjugate mirror.  Accumulation runs in 80-bit pairwise sums so the
    cancellation against the large |wd| mass costs ~ eps_ld * mass.
    """
    out = np.empty(lams.shape, dtype=float)
    chunk = max(1, int(4e6 // max(plan_zs.size, 1)))
    for i0 in range(0, lams.size, chunk):
        ls = lams[i0:i0 + chunk, None]
        t = plan_wd[None, :] / (ls - plan_zs[None, :])
        out[i0:i0 + chunk] = 2.0 * (
            np.sum(t.real, axis=1, dtype=_LD).astype(float))
    return out


def plan_axis_check(aae: AlmostAnalyticExtension, plan: ContourPlan,
                    lams: Optional[np.ndarray] = None) -> float:
    """Max |contour reconstruction - psi| over real sample points.

    End-to-end integrity certificate of a plan: on the real axis the paired
    contour sum must reproduce psi itself.
    """
    if lams is None:
        los = [iv[0] for t in plan.terms for iv in t.x_intervals]
        his = [iv[1] for t in plan.terms for iv in t.x_intervals]
        if not los:
            return 0.0
        lo, hi = min(los), max(his)
        lams = np.linspace(lo + 0.02 * (hi - lo), hi - 0.02 * (hi - lo), 13)
    lams = np.asarray(lams, dtype=float)
    rec = _pair_sum(plan.zs, plan.wd, lams)
    ref = aae.psi.deriv(lams, 0)
    return float(np.max(np.abs(rec - ref)))


# ---------------------------------------------------------------------
# operator functional calculus
# ---------------------------------------------------------------------

@dataclass
class HSApplyReport:
    n_nodes: int
    n_terms_kept: int
    terms_skipped: Tuple[int, ...]
    strip_bound: float
    abs_mass: float
    res_mass: float
    noise_estimate: float
    method: str
    tol: float


def _check_hermitian(H: np.ndarray, what: str) -> float:
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise HypothesisViolation(f"{what} must be a square matrix")
    hn = float(np.linalg.norm(H, 2)) if H.size else 0.0
    dev = float(np.linalg.norm(H - H.conj().T, 2)) if H.size else 0.0
    if dev > 1e-10 * (1.0 + hn):
        raise HypothesisViolation(
            f"{what} is not Hermitian: asymmetry {dev:.3e} "
            f"exceeds 1e-10 * (1 + |{what}|)")
    return hn


def _kept_terms(plan: ContourPlan, evals: np.ndarray, margin: float) -> Tuple[List[int], List[int]]:
    kept, skipped = [], []
    for t in plan.terms:
        hit = any(np.any((evals > lo - margin) & (evals < hi + margin))
                  for lo, hi in t.x_intervals)
        (kept if hit else skipped).append(t.index)
    return kept, skipped


def hs_apply(aae: AlmostAnalyticExtension, H: np.ndarray, tol: float = 1e-6,
             plan: Optional[ContourPlan] = None,
             params: Optional[ContourParams] = None,
             method: str = "eig",
             return_report: bool = False):
    """psi(H) for Hermitian H through the half-plane contour of psi's
    extension.

    method "eig" diagonalises H once and reduces the contour to scalar sums
    per eigenvalue; "solve" accumulates resolvents node by node (slow, kept
    as an independent cross-check path).
    """
    H = np.asarray(H, dtype=complex)
    hnorm = _check_hermitian(H, "H")
    if plan is None:
        plan = get_contour_plan(aae, tol=tol, params=params)
    evals, V = np.linalg.eigh(H)
    margin = 1e-8 * (1.0 + hnorm)
    kept, skipped = _kept_terms(plan, evals, margin)
    idx = plan.node_index(kept)
    zs, wd = plan.zs[idx], plan.wd[idx]
    strip = float(sum(t.strip_bound for t in plan.terms if t.index in set(kept)))
    absw = np.abs(wd)
    res_mass = float((absw / np.maximum(zs.imag, 1e-300)).sum()) if zs.size else 0.0
    noise = (math.log2(zs.size + 2) * float(np.finfo(_LD).eps) * res_mass
             + 1e-15 * (1 + hnorm))
    if method == "eig":
        f = _pair_sum(zs, wd, evals) if zs.size else np.zeros(evals.shape)
        out = (V * f[None, :]) @ V.conj().T
    elif method == "solve":
        n = H.shape[0]
        S = np.zeros((n, n), dtype=complex)
        comp = np.zeros_like(S)
        eye = np.eye(n)
        for z, w in zip(zs, wd):
            v = w * np.linalg.inv(H - z * eye)
            t = S + v
            big = np.abs(S) >= np.abs(v)
            comp = comp + np.where(big, (S - t) + v, (v - t) + S)
            S = t
        S = S + comp
        out = S + S.conj().T
    else:
        raise ValueError(f"unknown method {method!r}")
    if not return_report:
        return out
    rep = HSApplyReport(int(zs.size), len(kept), tuple(skipped), strip,
                        float(absw.sum()), res_mass, noise, method, plan.params.tol)
    return out, rep


def psi_of_symbol(psi: GrowthClassFunction, sample: np.ndarray,
                  require_psd: bool = True) -> np.ndarray:
    """psi applied spectrally to one Hermitian symbol sample.

    The sample is expected to come from a nonnegative quantised symbol, so
    by default an eigenvalue materially below zero is flagged as a broken
    hypothesis rather than silently fed to psi.
    """
    M = np.asarray(sample, dtype=complex)
    mn = _check_hermitian(M, "symbol sample")
    evals, V = np.linalg.eigh(M)
    if require_psd and evals.size and evals[0] < -1e-8 * (1.0 + mn):
        raise HypothesisViolation(
            f"symbol sample has eigenvalue {evals[0]:.3e} < 0; "
            "the nonnegativity hypothesis fails")
    f = psi.deriv(evals, 0)
    return (V * f[None, :]) @ V.conj().T


# ---------------------------------------------------------------------
# resolvent growth audit
# ---------------------------------------------------------------------

@dataclass
class ResolventBoundReport:
    """Fitted domination |(z - M)^{-1}| <= C * (1 + (1+|z|)/|Im z|)^p."""

    C: float
    p: float
    n_samples: int
    n_z: int
    doubling_ratio: float
    worst_z: complex

    def bound(self, z: complex) -> float:
        g = 1.0 + (1.0 + abs(z)) / abs(z.imag)
        return self.C * g ** self.p


def _res_norms(samples: Sequence[np.ndarray], zs: np.ndarray) -> np.ndarray:
    rows = []
    for M in samples:
        ev = np.linalg.eigvalsh(np.asarray(M, dtype=complex))
        d = np.abs(zs[None, :] - ev[:, None]).min(axis=0)
        rows.append(1.0 / d)
    return np.concatenate(rows)


def resolvent_bound_audit(samples: Sequence[np.ndarray],
                          im_range: Tuple[float, float] = (1e-3, 1.0),
                          n_im: int = 12, n_re: int = 17,
                          re_pad: float = 2.0) -> ResolventBoundReport:
    """Fit and certify a polynomial resolvent bound over symbol samples.

    Exact 2-norms of the resolvent (Hermitian samples: reciprocal spectral
    distance) are sampled on a grid in the upper half plane, the growth
    power p is fitted by least squares, C dominates every sampled ratio,
    and the grid is refined once to confirm C is stable.
    """
    for M in samples:
        _check_hermitian(np.asarray(M, dtype=complex), "symbol sample")
    evs = [np.linalg.eigvalsh(np.asarray(M, dtype=complex)) for M in samples]
    lo = min(float(e[0]) for e in evs) - re_pad
    hi = max(float(e[-1]) for e in evs) + re_pad

    def grid(ni, nr):
        ims = np.geomspace(im_range[0], im_range[1], ni)
        res = np.linspace(lo, hi, nr)
        return (res[None, :] + 1j * ims[:, None]).ravel()

    def fit(zz):
        nrm = _res_norms(samples, zz)
        g = 1.0 + (1.0 + np.abs(zz)) / np.abs(zz.imag)
        gt = np.tile(g, len(samples))
        p = float(np.polyfit(np.log(gt), np.log(nrm), 1)[0])
        p = max(p, 0.0)
        ratio = nrm / gt ** p
        i = int(np.argmax(ratio))
        return float(ratio[i]), p, complex(np.tile(zz, len(samples))[i])

    z1 = grid(n_im, n_re)
    C1, p1, worst = fit(z1)
    z2 = grid(2 * n_im, 2 * n_re)
    nrm2 = _res_norms(samples, z2)
    g2 = np.tile(1.0 + (1.0 + np.abs(z2)) / np.abs(z2.imag), len(samples))
    C2 = float(np.max(nrm2 / g2 ** p1))
    return ResolventBoundReport(max(C1, C2), p1, len(samples), int(z1.size),
                                C2 / C1 if C1 > 0 else 1.0, worst)
