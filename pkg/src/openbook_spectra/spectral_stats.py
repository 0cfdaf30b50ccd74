"""Counting layer over spectrum ledgers.

Eta sums, spectral-gap interval partitions, per-interval index sets, the
Vafa-Witten step structure of the mapping-torus spectrum and spectral-flow
tracking for the open-book model.  Everything except the flow tracker works
on immutable :class:`SpectrumLedger` objects and is cheap.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.optimize import brentq
from scipy.special import erfc

from .ck_model import C_MARGIN, assemble_radial_operator, default_span, modes_in_gamma_band
from .errors import PartitionFailure, StepMismatch, TrackingLoss
from .hat_model import hat_spectrum
from .ledger import SpectrumLedger
from .profiles import GlobalConstants, ProfileSet, build_profiles, conformal_volume

log = logging.getLogger(__name__)

ETA_EXPONENT = 20.0
PARTITION_HALFWIDTH = 1.0 / 15.0
FLOW_R_MIN = 20.0
TRACK_TOL = 1e-8     # bisection tolerance for tracked eigenvalues; crossings only need the sign


# ----------------------------------------------------------------------------
# eta sums
# ----------------------------------------------------------------------------

def _eta_scales(r: float):
    if not r >= math.e:
        raise ValueError(f"eta sums need r >= e so that log r > 0 (got r={r})")
    c = ETA_EXPONENT * math.log(r) / r
    return c, math.sqrt(r) / 3.0


def gaussian_tail(lam_abs, c: float, upper: float):
    """int_{lam}^{upper} exp(-c u^2) du for 0 <= lam <= upper, via erfc.

    Written as a difference of complementary error functions so that the
    result keeps full relative accuracy when sqrt(c) * lam is large.
    """
    s = math.sqrt(c)
    lam_abs = np.asarray(lam_abs, dtype=float)
    return 0.5 * math.sqrt(math.pi) / s * (erfc(s * lam_abs) - erfc(s * upper))


def _window_terms(ledger: SpectrumLedger, bound: float):
    lam = ledger.eigenvalues
    mult = ledger.multiplicities
    keep = (np.abs(lam) < bound) & (lam != 0.0)
    return lam[keep], mult[keep]


def eta_dot(ledger: SpectrumLedger, r: Optional[float] = None) -> float:
    """Smoothed eta function: signed Gaussian tails of the window eigenvalues.

    Positive eigenvalues contribute int_lam^B, negative ones -int_{-B}^lam,
    with B = sqrt(r)/3 and weight exp(-20 (log r / r) u^2); the prefactor is
    r^{-1/2} (log r)^{1/2}.  The terms are summed with ``math.fsum`` so that
    negating the ledger negates the result exactly.
    """
    r = ledger.r if r is None else r
    c, B = _eta_scales(r)
    lam, mult = _window_terms(ledger, B)
    if lam.size == 0:
        return 0.0
    terms = np.sign(lam) * mult * gaussian_tail(np.abs(lam), c, B)
    return math.sqrt(math.log(r) / r) * math.fsum(terms.tolist())


def eta_ddot(ledger: SpectrumLedger, r: Optional[float] = None) -> float:
    """(r^{-3/2} log r) * sum of m * lam * exp(-20 (log r / r) lam^2) over |lam| < sqrt(r)/3."""
    r = ledger.r if r is None else r
    c, B = _eta_scales(r)
    lam, mult = _window_terms(ledger, B)
    if lam.size == 0:
        return 0.0
    terms = mult * lam * np.exp(-c * lam**2)
    return r**-1.5 * math.log(r) * math.fsum(terms.tolist())


# ----------------------------------------------------------------------------
# interval partition
# ----------------------------------------------------------------------------

@dataclass
class Partition:
    """Cut points nu_j near the integers with verified spectrum-free margins."""

    r: float
    js: list
    nus: list
    gaps: list            # distance from nu_j to the nearest ledger eigenvalue
    sub_length: float     # L; every nu_j has no eigenvalue within L
    density_constant: float

    @property
    def intervals(self):
        return list(zip(self.nus[:-1], self.nus[1:]))

    @property
    def min_gap(self) -> float:
        return min(self.gaps) if self.gaps else math.inf


def _merged_values(ledgers: Sequence[SpectrumLedger]) -> np.ndarray:
    parts = [L.eigenvalues for L in ledgers if len(L)]
    if not parts:
        return np.zeros(0)
    return np.unique(np.concatenate(parts))


def _nearest_distance(values: np.ndarray, points: np.ndarray) -> np.ndarray:
    if values.size == 0:
        return np.full(points.shape, np.inf)
    idx = np.searchsorted(values, points)
    left = values[np.clip(idx - 1, 0, values.size - 1)]
    right = values[np.clip(idx, 0, values.size - 1)]
    return np.minimum(np.abs(points - left), np.abs(points - right))


def density_constant(ledgers: Sequence[SpectrumLedger], r: float, js) -> float:
    """Smallest C >= 1 with (eigenvalue count in U_j) <= C r |U_j| for every j."""
    worst = 0.0
    width = 2 * PARTITION_HALFWIDTH
    for j in js:
        n = sum(L.count_in(j - PARTITION_HALFWIDTH, j + PARTITION_HALFWIDTH) for L in ledgers)
        worst = max(worst, n / (r * width))
    return max(1.0, worst)


def build_partition(ledgers: Sequence[SpectrumLedger], r: float, C: Optional[float] = None) -> Partition:
    """One cut point nu_j per integer j with |j| < [sqrt(r)/2].

    U_j = [j - 1/15, j + 1/15] is tiled by an odd number M of sub-intervals of
    length L close to 1/(60 C r).  A sub-interval is free when no eigenvalue
    of any ledger lies within L of its midpoint; the free one nearest j is
    taken (ties go left) and nu_j is its midpoint.  With no eigenvalues at all
    the central sub-interval wins and nu_j = j.  Each choice is re-checked
    against every ledger separately before it is returned.
    """
    J = int(math.floor(0.5 * math.sqrt(r)))
    js = list(range(-J + 1, J))
    lo_need, hi_need = (js[0] - 2 * PARTITION_HALFWIDTH, js[-1] + 2 * PARTITION_HALFWIDTH) if js else (0, 0)
    for L in ledgers:
        if L.window[0] > lo_need or L.window[1] < hi_need:
            raise ValueError(f"ledger window {L.window} does not cover the partition range "
                             f"[{lo_need:.3f}, {hi_need:.3f}]")
    if C is None:
        C = density_constant(ledgers, r, js)
    M = 2 * int(math.floor(4 * C * r)) + 1      # |U_j| / (1/(60 C r)) = 8 C r
    Lsub = 2 * PARTITION_HALFWIDTH / M
    values = _merged_values(ledgers)
    offsets = (np.arange(M) - (M - 1) // 2) * Lsub
    order = np.lexsort((np.arange(M), np.abs(offsets)))  # nearest to j first, then leftmost
    nus, gaps = [], []
    for j in js:
        mids = j + offsets
        dist = _nearest_distance(values, mids)
        free = np.flatnonzero(dist[order] > Lsub)
        if free.size == 0:
            raise PartitionFailure(f"no spectrum-free sub-interval in U_{j} at r={r} "
                                   f"(M={M}, L={Lsub:.3e}); ledger density exceeds C={C:.3g}")
        nu = float(mids[order[free[0]]])
        for L in ledgers:          # re-scan, ledger by ledger
            ev = L.eigenvalues
            if ev.size and np.min(np.abs(ev - nu)) <= Lsub:
                raise PartitionFailure(f"re-scan found an eigenvalue within {Lsub:.3e} of nu_{j}={nu}")
        if abs(nu - j) > 0.1:
            raise PartitionFailure(f"nu_{j}={nu} is farther than 1/10 from {j}")
        nus.append(nu)
        gaps.append(float(_nearest_distance(values, np.array([nu]))[0]))
    return Partition(r, js, nus, gaps, Lsub, float(C))


# ----------------------------------------------------------------------------
# index sets
# ----------------------------------------------------------------------------

@dataclass
class IndexCount:
    j: int
    lo: float
    hi: float
    ck: int
    hat: int


def hat_n_count(k: int, constants: GlobalConstants) -> int:
    """#{n integer : k/V - [r] < n <= 0} = max(0, [r] - floor(k/V)), in exact arithmetic."""
    return max(0, constants.floor_r - math.floor(Fraction(k) / Fraction(constants.V)))


def index_sets(ck_ledger: SpectrumLedger, hat_ledger: SpectrumLedger, partition,
               constants: GlobalConstants) -> list:
    """Per-interval counts of the open-book and mapping-torus index sets.

    For (nu_j, nu_{j+1}) the open-book count is the number of modes (k, m)
    with k < m V having an eigenvalue inside; the mapping-torus count adds,
    for each k with r/2 - k/V inside, the number of admissible n.
    """
    nus = partition.nus if isinstance(partition, Partition) else list(partition)
    js = partition.js if isinstance(partition, Partition) else list(range(len(nus)))
    V = Fraction(constants.V)
    out = []
    for j, lo, hi in zip(js, nus[:-1], nus[1:]):
        modes = set()
        for e in ck_ledger.entries:
            p = e.provenance
            if lo < e.eigenvalue < hi and p is not None and Fraction(p.k) < Fraction(p.m) * V:
                modes.add((p.k, p.m))
        hat = 0
        for e in hat_ledger.entries:
            if lo < e.eigenvalue < hi:
                k = e.provenance.k if e.provenance is not None else round(constants.V * (constants.r / 2 - e.eigenvalue))
                hat += hat_n_count(k, constants)
        out.append(IndexCount(j, lo, hi, len(modes), hat))
    return out


# ----------------------------------------------------------------------------
# Vafa-Witten step structure
# ----------------------------------------------------------------------------

@dataclass
class LadderRow:
    j: int
    lam_plus: float
    n_plus: int
    n_plus_enumerated: int
    lam_minus: float
    n_minus: int
    n_minus_enumerated: int

    @property
    def matches(self) -> bool:
        return self.n_plus == self.n_plus_enumerated and self.n_minus == self.n_minus_enumerated


@dataclass
class VafaWittenResult:
    step: int                   # realized f_j
    deviations: list            # (j, exact deviation as Fraction, float deviation)
    ladder: list

    @property
    def max_deviation(self) -> float:
        return max((abs(float(d[1])) for d in self.deviations), default=0.0)

    @property
    def ladder_matches(self) -> bool:
        return all(row.matches for row in self.ladder)


def _enumerate_n(k: int, constants: GlobalConstants) -> int:
    """Direct count of integers n with k/V - [r] < n <= 0."""
    lower = Fraction(k) / Fraction(constants.V) - constants.floor_r
    n, count = 0, 0
    while n > lower:
        count += 1
        n -= 1
    return count


def multiplicity_ladder(constants: GlobalConstants, jmax: Optional[int] = None) -> list:
    """n_j^+ and n_j^- from the closed formulas next to a direct enumeration.

    lambda_j^+ = r/2 - ([rV/2] - j)/V with n_j^+ = [r] - [[rV/2]/V - j/V];
    lambda_j^- = r/2 - ([rV/2] + j + 1)/V with n_j^- = [r] - [[rV/2]/V + (j+1)/V].
    """
    r, V = Fraction(constants.r), Fraction(constants.V)
    fr = constants.floor_r
    k0 = math.floor(r * V / 2)
    if jmax is None:
        jmax = int(math.floor(constants.V / 3 * math.sqrt(constants.r)))
    rows = []
    for j in range(jmax + 1):
        kp, km = k0 - j, k0 + j + 1
        n_plus = fr - math.floor(Fraction(k0) / V - Fraction(j) / V)
        n_minus = fr - math.floor(Fraction(k0) / V + Fraction(j + 1) / V)
        rows.append(LadderRow(j, float(r / 2 - Fraction(kp) / V), n_plus, _enumerate_n(kp, constants),
                              float(r / 2 - Fraction(km) / V), n_minus, _enumerate_n(km, constants)))
    return rows


def vafa_witten_check(hat_ledger: SpectrumLedger, constants: GlobalConstants) -> VafaWittenResult:
    """Check lambda_{j + f} - lambda_j = 1/V on the flattened hat spectrum.

    The ledger is expanded by multiplicity into an ascending list and
    indexed so that j = 0 is the smallest non-negative eigenvalue.  The
    realized step f is the number of entries in [lambda_0, lambda_0 + 1/V).
    Deviations are computed exactly from the integer labels k of the
    eigenvalues r/2 - k/V; a non-zero one raises StepMismatch.
    """
    r, V = constants.r, constants.V
    vals = hat_ledger.expanded()
    if vals.size == 0:
        return VafaWittenResult(0, [], multiplicity_ladder(constants))
    ks = np.repeat([e.provenance.k if e.provenance is not None else None for e in hat_ledger.entries],
                   hat_ledger.multiplicities)
    i0 = int(np.searchsorted(vals, 0.0, side="left"))
    if i0 >= vals.size:
        raise StepMismatch(0, "no non-negative eigenvalue in the ledger")
    step = int(np.searchsorted(vals, vals[i0] + 1.0 / V - 0.5 / (V * max(r, 1.0)), side="left")) - i0
    bound = 0.5 * math.sqrt(r) - 1.0 / V
    Vf = Fraction(V)
    deviations = []
    for i in range(vals.size - step):
        if abs(vals[i]) > bound:
            continue
        j = i - i0
        fdev = float(vals[i + step] - vals[i] - 1.0 / V)
        if ks[i] is not None and ks[i + step] is not None:
            dev = Fraction(int(ks[i]) - int(ks[i + step]) - 1) / Vf
        else:
            dev = Fraction(0) if abs(fdev) <= 64 * np.finfo(float).eps * max(r, 1.0) else Fraction(fdev)
        if dev != 0:
            raise StepMismatch(j, dev)
        deviations.append((j, dev, fdev))
    return VafaWittenResult(step, deviations, multiplicity_ladder(constants))


def hat_volume(profiles: ProfileSet) -> float:
    """int d theta wedge omega^ = (2 pi)^2 int_0^2 h'(rho) d rho, by quadrature."""
    h = profiles.h_hat
    pts = list(h.breakpoints[1:-1])
    val, _ = integrate.quad(lambda x: h(x, 1), 0.0, 2.0, points=pts, epsabs=0, epsrel=1e-12, limit=200)
    return 4 * math.pi**2 * val


@dataclass
class StepFit:
    r_values: list
    steps: list
    slope: float
    intercept: float            # the fitted constant term; no claim is made about its value
    predicted_slope: float

    @property
    def relative_error(self) -> float:
        return abs(self.slope - self.predicted_slope) / abs(self.predicted_slope)


def step_growth_fit(V: float, delta: float, r_values: Sequence[float], **profile_kw) -> StepFit:
    """Fit the realized step f against r and compare with (r/4 pi^2) int d theta ^ omega^."""
    steps, preds = [], []
    for r in r_values:
        c = GlobalConstants(V=V, delta=delta, r=float(r), **profile_kw)
        res = vafa_witten_check(hat_spectrum(c), c)
        steps.append(res.step)
        preds.append(float(r) * hat_volume(build_profiles(c)) / (4 * math.pi**2))
    rs = np.asarray(r_values, dtype=float)
    slope, intercept = np.polyfit(rs, np.asarray(steps, dtype=float), 1)
    pred_slope = np.polyfit(rs, np.asarray(preds), 1)[0]
    return StepFit(list(map(float, rs)), steps, float(slope), float(intercept), float(pred_slope))


# ----------------------------------------------------------------------------
# spectral flow
# ----------------------------------------------------------------------------

@dataclass
class Crossing:
    k: int
    m: int
    gamma: float
    r_cross: float
    slope: float


@dataclass
class FlowResult:
    R: float
    r_min: float
    flow: int                    # tracked net crossings plus pre-grid crossings
    tracked_positive: int
    tracked_negative: int
    pre_grid: int
    predicted: float             # R^2/(32 pi^2) * conformal volume
    lattice_count: int           # #{modes : gamma <= R}
    straddling: int              # modes with |gamma - R| within the observed crossing offset
    max_offset: float            # max |r_cross - gamma| over tracked crossings
    crossings: list = field(default_factory=list)
    tracking_losses: list = field(default_factory=list)

    @property
    def residual(self) -> float:
        return self.flow - self.predicted

    @property
    def lattice_agrees(self) -> bool:
        return abs(self.flow - self.lattice_count) <= self.straddling


def _check_r_grid(r_grid, R: float) -> np.ndarray:
    grid = np.asarray(r_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("r_grid needs at least two points")
    if np.any(np.diff(grid) <= 0) or np.any(np.diff(grid) > 1.0 + 1e-12):
        raise ValueError("r_grid must be increasing with spacing <= 1")
    if grid[0] < FLOW_R_MIN:
        raise ValueError(f"r_grid must start at r >= {FLOW_R_MIN}")
    if abs(grid[-1] - R) > 1e-12:
        raise ValueError("r_grid must end at R")
    return grid


def default_r_grid(R: float, r_min: float = FLOW_R_MIN) -> np.ndarray:
    grid = np.arange(r_min, R, 1.0)
    return np.append(grid, float(R))


class _ModeTracker:
    """Small eigenvalue of one mode as a function of r (operator assembled once).

    The tracked eigenvalue is the one nearest the prediction (r - gamma)/2
    among those within C_MARGIN of it, the same selection rule as the sweeps.
    """

    def __init__(self, profiles, mode, r_ref, N, margin=C_MARGIN):
        self.mode = mode
        self.r_ref = r_ref
        self.margin = margin
        self.op = assemble_radial_operator(profiles, mode, r_ref, N, span=default_span(mode))

    def prediction(self, r: float) -> float:
        return 0.5 * (r - self.mode.gamma)

    def __call__(self, r: float, tol: float = TRACK_TOL) -> Optional[float]:
        pred = self.prediction(r)
        vals = self.op.eigenvalues_in(pred - self.margin, pred + self.margin, dr=r - self.r_ref, tol=tol)
        if vals.size == 0:
            return None
        return float(vals[np.argmin(np.abs(vals - pred))])


def _sign(x):
    return 1 if x >= 0 else -1


def _fine_bracket(tracker, ra, rb, substeps=8):
    """Re-solve [ra, rb] on a finer r grid; returns the sub-bracket with a sign change."""
    pts = np.linspace(ra, rb, substeps + 1)
    vals = [tracker(x) for x in pts]
    if any(v is None for v in vals):
        return None
    for a, b, va, vb in zip(pts[:-1], pts[1:], vals[:-1], vals[1:]):
        if _sign(va) != _sign(vb):
            return a, b, va, vb
    return (pts[0], pts[-1], vals[0], vals[-1])


def _track_mode(args):
    """Classify one mode: ('pos'|'neg', crossing) or ('pre'|'none', None), plus a loss note.

    A grid point where the mode has no eigenvalue within C_MARGIN of
    (r - gamma)/2 is accepted only when the prediction itself is farther than
    C_MARGIN from zero, so that the sign is not in doubt.  Otherwise the
    bracket is re-solved on a finer r grid, and TrackingLoss is raised if
    that fails too.
    """
    profiles, mode, grid, N, refine = args
    tr = _ModeTracker(profiles, mode, float(grid[0]), N)
    n = grid.size - 1
    cache = {}
    losses = []

    def value(i):
        if i in cache:
            return cache[i]
        r = float(grid[i])
        v = tr(r)
        if v is None:
            pred = tr.prediction(r)
            if abs(pred) >= tr.margin:
                v = math.copysign(math.inf, pred)
            else:
                fine = _fine_bracket(tr, float(grid[max(i - 1, 0)]), float(grid[min(i + 1, n)]))
                if fine is None:
                    raise TrackingLoss(f"mode ({mode.k}, {mode.m}) has no eigenvalue near {pred:.3f} at r={r} "
                                       f"(predicted {pred:.3f}) even on a finer r grid")
                losses.append((mode.k, mode.m, r))
                v = tr(r)
                if v is None:
                    v = fine[2] if fine[0] >= r else fine[3]
        cache[i] = v
        return v

    i = int(np.clip(np.searchsorted(grid, mode.gamma), 1, n))
    for _ in range(grid.size):
        va, vb = value(i - 1), value(i)
        if (va < 0) != (vb < 0):
            break
        if va >= 0:
            if i - 1 == 0:
                return "pre", None, losses
            i -= 1
        else:
            if i == n:
                return "none", None, losses
            i += 1
    else:
        raise TrackingLoss(f"mode ({mode.k}, {mode.m}): bracket walk did not terminate")
    ra, rb = float(grid[i - 1]), float(grid[i])
    if not (math.isfinite(va) and math.isfinite(vb)):
        raise TrackingLoss(f"mode ({mode.k}, {mode.m}) jumps across zero without a tracked eigenvalue "
                           f"between r={ra} and r={rb}")
    if refine:
        rc = brentq(lambda x: tr(x), ra, rb, xtol=1e-12, rtol=4 * np.finfo(float).eps)
    else:
        rc = ra - va * (rb - ra) / (vb - va)
    slope = (vb - va) / (rb - ra)
    kind = "pos" if slope > 0 else "neg"
    return kind, Crossing(mode.k, mode.m, float(mode.gamma), float(rc), float(slope)), losses


def track_spectral_flow(profiles: ProfileSet, R: float, r_grid=None, N: int = 2000, refine: bool = False,
                        guard: float = 2 * C_MARGIN, jobs: int = 1) -> FlowResult:
    """Signed zero crossings of the open-book window eigenvalues for r in (r_min, R].

    Each mode's operator is assembled once; r enters only through +-r/2 on the
    diagonal.  The small eigenvalue of a mode is near (r - gamma)/2, so its
    zero crossing is bracketed between the grid points around gamma and the
    bracket is walked outward until the tracked eigenvalue changes sign.
    Modes with gamma below
    r_min - guard cannot be assembled at their crossing (the operator needs
    r >= 20) and are counted as pre-grid crossings; tracked modes whose
    eigenvalue is already positive at r_min are counted there as well.
    """
    grid = _check_r_grid(default_r_grid(R) if r_grid is None else r_grid, R)
    r_min = float(grid[0])
    modes = modes_in_gamma_band(profiles, r_min - guard, R + guard)
    below = len(modes_in_gamma_band(profiles, 0.0, r_min - guard)) if r_min - guard > 0 else 0
    # modes_in_gamma_band is inclusive at both ends; drop the shared boundary from the tracked set
    modes = [md for md in modes if md.gamma > r_min - guard]
    tasks = [(profiles, md, grid, N, refine) for md in modes]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_track_mode, tasks, chunksize=256))
    else:
        results = [_track_mode(t) for t in tasks]
    pos = neg = pre = 0
    crossings, losses = [], []
    for kind, cr, loss in results:
        losses.extend(loss)
        if kind == "pos":
            pos += 1
            crossings.append(cr)
        elif kind == "neg":
            neg += 1
            crossings.append(cr)
        elif kind == "pre":
            pre += 1
    pre += below
    offset = max((abs(c.r_cross - c.gamma) for c in crossings), default=0.0)
    gammas = np.array([md.gamma for md in modes])
    lattice = below + int(np.sum(gammas <= R))
    straddling = int(np.sum(np.abs(gammas - R) <= offset))
    predicted = R**2 / (32 * math.pi**2) * conformal_volume(profiles)
    if losses:
        log.warning("spectral flow: %d modes needed a finer r grid", len(losses))
    return FlowResult(float(R), r_min, pos - neg + pre, pos, neg, pre, float(predicted), lattice,
                      straddling, float(offset), crossings, losses)


def spectral_flow(profiles: ProfileSet, R: float, r_grid=None, N: int = 2000, **kw):
    """(flow count, predicted leading term R^2/(32 pi^2) * conformal volume)."""
    res = track_spectral_flow(profiles, R, r_grid, N, **kw)
    return res.flow, res.predicted


# ----------------------------------------------------------------------------
# report
# ----------------------------------------------------------------------------

@dataclass
class EtaFlowReport:
    r: float
    eta_dot: float
    eta_ddot: float
    eta_by_model: dict
    flow_count: Optional[int]
    predicted_flow: Optional[float]
    vw_step: int
    vw_steps: list               # (j, lambda_{j+f} - lambda_j - 1/V)
    ladder_matches: bool
    partition: list
    partition_min_gap: float
    index_counts: list

    @property
    def residual(self) -> Optional[float]:
        if self.flow_count is None or self.predicted_flow is None:
            return None
        return self.flow_count - self.predicted_flow

    @property
    def vw_max_dev(self) -> float:
        return max((abs(d) for _, d in self.vw_steps), default=0.0)

    def to_json(self) -> dict:
        return {
            "r": self.r,
            "eta_dot": self.eta_dot,
            "eta_ddot": self.eta_ddot,
            "eta_by_model": self.eta_by_model,
            "flow": self.flow_count,
            "predicted_flow": self.predicted_flow,
            "residual": self.residual,
            "vw_step": self.vw_step,
            "vw_max_dev": self.vw_max_dev,
            "ladder_matches": self.ladder_matches,
            "partition": self.partition,
            "partition_min_gap": self.partition_min_gap,
            "index_counts": [asdict(c) for c in self.index_counts],
        }


def eta_flow_report(constants: GlobalConstants, ck_ledger: SpectrumLedger, hat_ledger: SpectrumLedger,
                    flow: Optional[FlowResult] = None, partition: bool = True) -> EtaFlowReport:
    r = constants.r
    by_model = {
        "ck": {"eta_dot": eta_dot(ck_ledger, r), "eta_ddot": eta_ddot(ck_ledger, r)},
        "hat": {"eta_dot": eta_dot(hat_ledger, r), "eta_ddot": eta_ddot(hat_ledger, r)},
    }
    vw = vafa_witten_check(hat_ledger, constants)
    if partition:
        part = build_partition([ck_ledger, hat_ledger], r)
        counts = index_sets(ck_ledger, hat_ledger, part, constants)
        nus, min_gap = part.nus, part.min_gap
    else:
        nus, min_gap, counts = [], math.nan, []
    return EtaFlowReport(
        r=r,
        eta_dot=by_model["ck"]["eta_dot"] + by_model["hat"]["eta_dot"],
        eta_ddot=by_model["ck"]["eta_ddot"] + by_model["hat"]["eta_ddot"],
        eta_by_model=by_model,
        flow_count=None if flow is None else flow.flow,
        predicted_flow=None if flow is None else flow.predicted,
        vw_step=vw.step,
        vw_steps=[(j, float(d)) for j, d, _ in vw.deviations],
        ladder_matches=vw.ladder_matches,
        partition=nus,
        partition_min_gap=min_gap,
        index_counts=counts,
    )


__all__ = [
    "eta_dot", "eta_ddot", "gaussian_tail", "Partition", "build_partition", "density_constant",
    "IndexCount", "index_sets", "hat_n_count", "LadderRow", "VafaWittenResult", "multiplicity_ladder",
    "vafa_witten_check", "hat_volume", "StepFit", "step_growth_fit", "Crossing", "FlowResult",
    "track_spectral_flow", "spectral_flow", "default_r_grid", "EtaFlowReport", "eta_flow_report",
]
