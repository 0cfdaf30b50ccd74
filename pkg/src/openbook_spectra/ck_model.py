"""Open-book local model: per-mode radial eigenproblems on S^2 x S^1.

A Fourier sector (k, m) reduces the operator to a 2x2 first-order radial
system whose small eigenvalue is close to (r - gamma)/2, where gamma is fixed
by the turning point at which k g = m f.  Everything here is a pure function
of (profiles, mode, r) so sweeps can be fanned out freely.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateMode, ModeSolveError, MultipleEigenvalues, SingularCoefficient, SpectraError
from .ledger import LedgerEntry, SpectrumLedger, symmetric_window
from .profiles import ProfileSet
from .radial import DiscreteRadialOperator, StaggeredGrid, assemble

log = logging.getLogger(__name__)

C_MARGIN = 10.0
SPAN_WIDTHS = 12.0
BISECTION_STEPS = 60


@dataclass(frozen=True)
class ModeIndex:
    k: int
    m: int
    model_tag: str = "ck"
    rho_turn: float = float("nan")
    gamma: Optional[float] = None

    @property
    def label(self) -> tuple:
        return (self.model_tag, self.k, self.m)


@dataclass
class RadialEigenpair:
    mode: ModeIndex
    lam: float
    alpha: np.ndarray
    beta: np.ndarray
    residual_norm: float
    grid_spacing: float
    alpha_nodes: np.ndarray
    beta_nodes: np.ndarray
    flag: str = ""

    @property
    def beta_l2(self) -> float:
        return float(np.sqrt(np.sum(self.beta**2) * self.grid_spacing))

    @property
    def norm(self) -> float:
        return float((np.sum(self.alpha**2) + np.sum(self.beta**2)) * self.grid_spacing)


# ----------------------------------------------------------------------------
# turning points
# ----------------------------------------------------------------------------

def turning_points(profiles: ProfileSet, k, m):
    """Vectorized turning points and gammas for arrays of modes.

    For k > 0 the root of k g - m f on (0, 2) is bracketed by the pole values
    (2k > 0 at rho = 0 and -2k < 0 at rho = 2) and located by bisection to
    below 1e-12 in rho.
    """
    k = np.atleast_1d(np.asarray(k, dtype=float))
    m = np.atleast_1d(np.asarray(m, dtype=float))
    if np.any((k == 0) & (m == 0)):
        raise DegenerateMode("mode (0, 0) has no turning point")
    if np.any(k < 0):
        raise DegenerateMode("k must be non-negative")
    f, g = profiles.f_ck, profiles.g_ck
    lo = np.zeros_like(k)
    hi = np.full_like(k, 2.0)
    pos = k > 0
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        phi = k * g(mid) - m * f(mid)
        right = phi > 0
        lo = np.where(right, mid, lo)
        hi = np.where(right, hi, mid)
    rho = np.where(pos, 0.5 * (lo + hi), np.where(m > 0, 0.0, 2.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        gamma = np.where(pos, 2 * k / f(rho), np.abs(m))
    return rho, gamma


def turning_point(profiles: ProfileSet, k: int, m: int) -> ModeIndex:
    rho, gamma = turning_points(profiles, [k], [m])
    return ModeIndex(int(k), int(m), "ck", float(rho[0]), float(gamma[0]))


def polar_radius_bound(profiles: ProfileSet) -> float:
    """max over rho of sqrt(f^2 + g^2), used to bound |(k, m)| for a gamma cap.

    At the turning point (k, m) is parallel to (f, g), so
    gamma = 2 |(k, m)| / sqrt(f^2 + g^2) there.
    """
    rho = np.linspace(0.0, 2.0, 20001)
    return float(np.max(np.hypot(profiles.f_ck(rho), profiles.g_ck(rho))))


def modes_in_gamma_band(profiles: ProfileSet, gamma_lo: float, gamma_hi: float):
    """All modes (k >= 0, m) with gamma_lo <= gamma <= gamma_hi, sorted by (k, m)."""
    if gamma_hi <= 0:
        return []
    smax = 0.5 * gamma_hi * polar_radius_bound(profiles) + 1.0
    K = int(math.floor(smax))
    ks, ms = [], []
    for k in range(0, K + 1):
        mmax = int(math.floor(math.sqrt(max(smax**2 - k**2, 0.0))))
        m = np.arange(-mmax, mmax + 1)
        if k == 0:
            m = m[m != 0]
        ks.append(np.full(m.size, k))
        ms.append(m)
    if not ks:
        return []
    k_all, m_all = np.concatenate(ks), np.concatenate(ms)
    rho, gamma = turning_points(profiles, k_all, m_all)
    keep = (gamma >= gamma_lo) & (gamma <= gamma_hi)
    return [ModeIndex(int(a), int(b), "ck", float(c), float(d))
            for a, b, c, d in zip(k_all[keep], m_all[keep], rho[keep], gamma[keep])]


# ----------------------------------------------------------------------------
# coefficients and assembly
# ----------------------------------------------------------------------------

class CkCoefficients:
    """Radial-system coefficients of mode (k, m) as functions of rho."""

    def __init__(self, profiles: ProfileSet, k: int, m: int):
        self.profiles, self.k, self.m = profiles, k, m

    def _fg(self, rho):
        f, g = self.profiles.f_ck, self.profiles.g_ck
        return (f(rho), f(rho, 1), f(rho, 2)), (g(rho), g(rho, 1), g(rho, 2))

    def parts(self, rho):
        """Return (Delta, P, Q, W) at rho."""
        (f, f1, f2), (g, g1, g2) = self._fg(rho)
        k, m = self.k, self.m
        delta = 0.5 * (f1 * g - f * g1)
        if np.any(delta <= 0):
            raise SingularCoefficient(f"Delta <= 0 on the grid for mode ({k}, {m})")
        ddelta = 0.5 * (f2 * g - f * g2)
        P = (k * g1 - m * f1) / (2 * delta)
        Q = (k * g - m * f) / delta + ddelta / (2 * delta)
        W = (f2 * g1 - f1 * g2) / (8 * delta)
        return delta, P, Q, W

    def d_alpha(self, rho, r):
        return 0.5 * r + self.parts(rho)[1]

    def d_beta(self, rho, r):
        _, P, _, W = self.parts(rho)
        return -(0.5 * r + P + 1.0 + W)

    def c(self, rho):
        return -self.parts(rho)[2]


def mode_grid(mode: ModeIndex, N: int, span: Optional[float] = None) -> StaggeredGrid:
    """Grid of spacing 2/(N+2); restricted to rho_turn +- span when span is given.

    The local grid keeps the full-grid spacing and its Dirichlet ends at
    eps = h and 2 - eps, so it is the full discretization truncated to where
    the mode lives.
    """
    full = StaggeredGrid.full(N)
    if span is None:
        return full
    h = full.h
    a = max(full.a, mode.rho_turn - span)
    b = min(full.b, mode.rho_turn + span)
    n = max(int(round((b - a) / h)), 8)
    return StaggeredGrid(a, a + n * h, n)


def default_span(mode: ModeIndex) -> float:
    gamma = mode.gamma if mode.gamma else 1.0
    return SPAN_WIDTHS / math.sqrt(max(gamma, 1.0))


def assemble_radial_operator(profiles: ProfileSet, mode: ModeIndex, r: float, N: int,
                             span: Optional[float] = None, grid: Optional[StaggeredGrid] = None,
                             enforce_ranges: bool = True) -> DiscreteRadialOperator:
    """Staggered discretization of the mode's radial system at parameter r.

    The matrix has 2N - 1 rows on the full grid (N alpha cells, N - 1 interior
    beta faces).  ``span`` restricts to a window around the turning point at
    the same spacing.
    """
    if enforce_ranges and (N < 200 or r < 20):
        raise ValueError(f"assemble_radial_operator needs N >= 200 and r >= 20 (got N={N}, r={r})")
    if grid is None:
        grid = mode_grid(mode, N, span)
    co = CkCoefficients(profiles, mode.k, mode.m)
    xa, xb = grid.alpha_nodes, grid.beta_nodes
    _, Pa, _, _ = co.parts(xa)
    _, Pb, Qb, Wb = co.parts(xb)
    op = assemble(grid,
                  lambda _x: 0.5 * r + Pa,
                  lambda _x: -(0.5 * r + Pb + 1.0 + Wb),
                  lambda _x: -Qb,
                  label=f"ck(k={mode.k}, m={mode.m})")
    return op


def reliability_flag(profiles: ProfileSet, mode: ModeIndex) -> str:
    d = profiles.constants.delta
    if mode.rho_turn <= 20 * d or mode.rho_turn >= 2 - 20 * d:
        return "pole"
    return ""


def solve_mode_all(profiles: ProfileSet, mode: ModeIndex, r: float, N: int, window=None,
                   solver: str = "banded", span: Optional[float] = None, local: bool = True) -> list:
    """Every eigenpair of the mode inside ``window``.

    The one nearest (r - gamma)/2 is the mode's small eigenvalue; any others
    are flagged ``branch``.  Extra window eigenvalues appear for modes whose
    Gaussian sits where the profiles are far from flat (next-level
    eigenvalue near 0.565 sqrt(r), just inside the sqrt(r/3) window).
    """
    if window is None:
        window = symmetric_window(r)
    if local and span is None:
        span = default_span(mode)
    op = assemble_radial_operator(profiles, mode, r, N, span=span if local else None)
    w, v = op.eigenpairs(window, solver)
    if w.size == 0:
        return []
    main = int(np.argmin(np.abs(w - 0.5 * (r - mode.gamma))))
    base = reliability_flag(profiles, mode)
    out = []
    for j in range(w.size):
        alpha, beta = op.split(v[:, j])
        flag = base if j == main else ("branch" if not base else base + ",branch")
        out.append(RadialEigenpair(mode, float(w[j]), alpha, beta, op.residual_norm(w[j], v[:, j]),
                                   op.grid.h, op.grid.alpha_nodes, op.grid.beta_nodes, flag))
    return out


def solve_mode(profiles: ProfileSet, mode: ModeIndex, r: float, N: int, window=None,
               solver: str = "banded", span: Optional[float] = None, local: bool = True
               ) -> Optional[RadialEigenpair]:
    """The unique eigenpair of the mode in ``window``, or None.

    ``local=True`` truncates to rho_turn +- span (default 12 Gaussian widths)
    at the full-grid spacing.  Raises MultipleEigenvalues if more than one
    eigenvalue falls in the window.
    """
    pairs = solve_mode_all(profiles, mode, r, N, window, solver, span, local)
    if len(pairs) > 1:
        raise MultipleEigenvalues(f"{len(pairs)} eigenvalues in window for mode ({mode.k}, {mode.m}): "
                                  f"{[p.lam for p in pairs]}")
    return pairs[0] if pairs else None


def sweep_modes(profiles: ProfileSet, r: float, margin: float = C_MARGIN, window=None):
    """Modes with |r - gamma| <= 2 * window radius + 2 * margin."""
    if window is None:
        window = symmetric_window(r)
    wr = max(abs(window[0]), abs(window[1]))
    return modes_in_gamma_band(profiles, r - 2 * wr - 2 * margin, r + 2 * wr + 2 * margin)


MULTIPLE_POLICIES = ("keep", "raise")


def _check_policy(multiple: str):
    if multiple not in MULTIPLE_POLICIES:
        raise ValueError(f"unknown multiple-eigenvalue policy {multiple!r}; expected one of {MULTIPLE_POLICIES}")


def _solve_one(args):
    profiles, mode, r, N, window, solver, multiple = args
    try:
        if multiple == "raise":
            pair = solve_mode(profiles, mode, r, N, window, solver)
            return [pair] if pair is not None else []
        return solve_mode_all(profiles, mode, r, N, window, solver)
    except SpectraError as exc:
        raise ModeSolveError(mode, exc) from exc


def mode_sweep(profiles: ProfileSet, r: float, N: int, window=None, margin: float = C_MARGIN,
               solver: str = "banded", jobs: int = 1, multiple: str = "keep") -> SpectrumLedger:
    """Solve every candidate mode and merge the window eigenvalues into a ledger.

    ``multiple="raise"`` turns a second window eigenvalue in any mode into a
    ModeSolveError; the default keeps it as a ``branch`` entry.
    """
    if window is None:
        window = symmetric_window(r)
    pairs = mode_sweep_pairs(profiles, r, N, window, margin, solver, jobs, multiple)
    return SpectrumLedger([LedgerEntry(p.lam, 1, p.mode, p.flag) for p in pairs], tuple(window), r)


def _values_one(args):
    profiles, mode, r, N, window, multiple = args
    try:
        op = assemble_radial_operator(profiles, mode, r, N, span=default_span(mode))
        w = op.eigenvalues_in(window[0], window[1])
    except SpectraError as exc:
        raise ModeSolveError(mode, exc) from exc
    w = w[(w > window[0]) & (w < window[1])]
    if w.size > 1 and multiple == "raise":
        raise ModeSolveError(mode, MultipleEigenvalues(f"{w.size} eigenvalues in window {window}: {w}"))
    if w.size == 0:
        return []
    main = int(np.argmin(np.abs(w - 0.5 * (r - mode.gamma))))
    base = reliability_flag(profiles, mode)
    return [LedgerEntry(float(x), 1, mode, base if j == main else (base + ",branch").lstrip(","))
            for j, x in enumerate(w)]


def mode_sweep_values(profiles: ProfileSet, r: float, N: int, window=None, margin: float = C_MARGIN,
                      jobs: int = 1, multiple: str = "keep") -> SpectrumLedger:
    """Eigenvalue-only sweep (Sturm bisection, no eigenvectors).

    Same ledger as :func:`mode_sweep` at a fraction of the cost; used for the
    eta sums and the interval partitions, which never look at eigenfunctions.
    """
    if r < 20:
        raise ValueError("mode_sweep needs r >= 20")
    if window is None:
        window = symmetric_window(r)
    _check_policy(multiple)
    modes = sweep_modes(profiles, r, margin, window)
    tasks = [(profiles, md, r, N, window, multiple) for md in modes]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            found = list(ex.map(_values_one, tasks, chunksize=64))
    else:
        found = [_values_one(t) for t in tasks]
    entries = [e for group in found for e in group]
    log.info("ck value sweep r=%g: %d candidate modes, %d eigenvalues in window", r, len(modes), len(entries))
    return SpectrumLedger(entries, tuple(window), r)


def mode_sweep_pairs(profiles: ProfileSet, r: float, N: int, window=None, margin: float = C_MARGIN,
                     solver: str = "banded", jobs: int = 1, multiple: str = "keep") -> list:
    """Like mode_sweep but returns the RadialEigenpairs (for CSV export)."""
    if r < 20:
        raise ValueError("mode_sweep needs r >= 20")
    if window is None:
        window = symmetric_window(r)
    _check_policy(multiple)
    modes = sweep_modes(profiles, r, margin, window)
    tasks = [(profiles, md, r, N, window, solver, multiple) for md in modes]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_solve_one, tasks, chunksize=16))
    else:
        results = [_solve_one(t) for t in tasks]
    pairs = [p for group in results for p in group]
    pairs.sort(key=lambda p: (p.lam, p.mode.k, p.mode.m))
    log.info("ck sweep r=%g: %d candidate modes, %d eigenvalues in window", r, len(modes), len(pairs))
    return pairs
