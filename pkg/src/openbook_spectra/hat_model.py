"""Mapping-torus local model: exact spectrum and integral-factor kernels.

At theta-frequency k the operator reduces to a Cauchy-Riemann operator on S^2
whose kernel has dimension 2[r]+1; its elements at t-frequency n in
[-2[r], 0] are explicit integral-factor solutions

    alpha(rho) = c * exp(-int_{rho_turn}^{rho} F_n(s) / h'(s) ds),
    F_n = n + r (h + g/2) - (k/V) g.

The spectrum inside the small window is r/2 - k/V with that multiplicity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import logsumexp

from .ck_model import ModeIndex, RadialEigenpair
from .errors import ConfigError, OverflowGuard, PositivityViolation, RankDeficiency
from .ledger import LedgerEntry, SpectrumLedger, symmetric_window
from .profiles import SCAN_POINTS, GlobalConstants, ProfileSet
from .radial import StaggeredGrid, assemble

GL_POINTS = 8
HPRIME_FLOOR = 1e-12
BISECTION_TOL = 1e-13


def _check_constants(profiles: ProfileSet, constants: GlobalConstants):
    pc = profiles.constants
    if pc.sigma != constants.sigma or pc.V != constants.V or pc.delta != constants.delta:
        raise ConfigError("profiles were built for different constants (V, delta or sigma)")


def multiplicity(constants: GlobalConstants) -> int:
    return 2 * constants.floor_r + 1


def hat_spectrum(constants: GlobalConstants, window=None) -> SpectrumLedger:
    """Ledger of r/2 - k/V for all k with the value inside the closed window."""
    r, V = constants.r, constants.V
    if window is None:
        window = symmetric_window(r)
    lo, hi = window
    if hi < lo:
        return SpectrumLedger([], (lo, hi), r)
    k_min = math.ceil(V * (r / 2 - hi) - 1e-9)
    k_max = math.floor(V * (r / 2 - lo) + 1e-9)
    mult = multiplicity(constants)
    entries = []
    for k in range(k_min, k_max + 1):
        lam = r / 2 - k / V
        if lo <= lam <= hi:
            entries.append(LedgerEntry(lam, mult, ModeIndex(k, 0, "hat")))
    return SpectrumLedger(entries, (lo, hi), r)


class HatCoefficients:
    """Coefficient functions of the (k, n) sector."""

    def __init__(self, profiles: ProfileSet, constants: GlobalConstants, k: int):
        _check_constants(profiles, constants)
        self.profiles, self.constants, self.k = profiles, constants, k
        self.r, self.kv = constants.r, k / constants.V

    def base(self, rho):
        """F_n - n = r (h + g/2) - (k/V) g."""
        h, g = self.profiles.h_hat(rho), self.profiles.g_hat(rho)
        return self.r * (h + 0.5 * g) - self.kv * g

    def F(self, rho, n):
        return n + self.base(rho)

    def hprime(self, rho):
        return np.maximum(self.profiles.h_hat(rho, 1), HPRIME_FLOOR)

    def phi(self, rho, n):
        return self.F(rho, n) / self.hprime(rho)

    def monotonicity(self, rho):
        """r h' + (r/2 - k/V) g', which must stay positive."""
        p = self.profiles
        return self.r * p.h_hat(rho, 1) + (0.5 * self.r - self.kv) * p.g_hat(rho, 1)


def _check_positivity(co: HatCoefficients):
    scan = np.linspace(0.0, 2.0, SCAN_POINTS + 2)[1:-1]
    vals = co.monotonicity(scan)
    if np.any(vals <= 0):
        bad = scan[np.argmax(vals <= 0)]
        raise PositivityViolation(f"r h' + (r/2 - k/V) g' <= 0 at rho={bad:.6g} for k={co.k}")


def _check_n(constants: GlobalConstants, n: int):
    if not -2 * constants.floor_r <= n <= 0:
        raise ValueError(f"n must lie in [-2[r], 0] = [{-2 * constants.floor_r}, 0], got {n}")


def hat_turning_point(profiles: ProfileSet, constants: GlobalConstants, k: int, n: int) -> float:
    """Root of n + r (h + g/2) - (k/V) g on [0, 2]."""
    _check_n(constants, n)
    co = HatCoefficients(profiles, constants, k)
    _check_positivity(co)
    if n == 0:
        return 0.0
    if n == -2 * constants.floor_r:
        return 2.0
    return _bisect(co, n)


def _gl_rule(a: np.ndarray, b: np.ndarray):
    """Gauss-Legendre nodes and weights for each interval [a_i, b_i]."""
    t, w = leggauss(GL_POINTS)
    half = 0.5 * (b - a)[:, None]
    mid = 0.5 * (b + a)[:, None]
    return mid + half * t[None, :], half * w[None, :]


class _KernelIntegrals:
    """Cumulative integrals of 1/h' and base/h' over the grid nodes.

    Since F_n = n + base, log alpha_n = -(n I1 + IB) + const, so one pass
    serves every n of a given k.
    """

    def __init__(self, co: HatCoefficients, nodes: np.ndarray):
        self.co, self.nodes = co, nodes
        xs, ws = _gl_rule(nodes[:-1], nodes[1:])
        hp = co.hprime(xs)
        c1 = np.sum(ws / hp, axis=1)
        cb = np.sum(ws * co.base(xs) / hp, axis=1)
        self.I1 = np.concatenate([[0.0], np.cumsum(c1)])
        self.IB = np.concatenate([[0.0], np.cumsum(cb)])

    def log_unnormalized(self, n: int) -> np.ndarray:
        return -(n * self.I1 + self.IB)

    def anchor_offset(self, n: int, rho_turn: float) -> float:
        """Unnormalized log alpha at rho_turn, reached from the node x_j after rho_turn."""
        j = int(np.clip(np.searchsorted(self.nodes, rho_turn), 0, self.nodes.size - 1))
        a, b = sorted((rho_turn, float(self.nodes[j])))
        if b > a:
            xs, ws = _gl_rule(np.array([a]), np.array([b]))
            val = float(np.sum(ws * self.co.phi(xs, n)))
            val = val if self.nodes[j] >= rho_turn else -val
        else:
            val = 0.0
        return val - (n * self.I1[j] + self.IB[j])


@dataclass
class HatKernelElement:
    k: int
    n: int
    rho_turn: float
    nodes: np.ndarray
    log_samples: np.ndarray
    weights: np.ndarray  # quadrature weights h * h'(rho) for the L2(h' d rho) norm
    log_norm_constant: float

    @property
    def samples(self) -> np.ndarray:
        return np.exp(self.log_samples)

    @property
    def norm_constant(self) -> float:
        return math.exp(self.log_norm_constant)

    def norm(self) -> float:
        return float(np.sum(self.samples**2 * self.weights))

    def half_density(self) -> np.ndarray:
        """sqrt(h') * alpha, the L2(d rho)-normalized representative."""
        return self.samples * np.sqrt(self.weights / (self.nodes[1] - self.nodes[0]))


def _element_from(integrals: _KernelIntegrals, weights, k, n, rho_turn) -> HatKernelElement:
    logu = integrals.log_unnormalized(n)
    lognorm2 = logsumexp(2 * logu + np.log(weights))
    if not np.isfinite(lognorm2):
        raise RankDeficiency(f"kernel element (k={k}, n={n}) has vanishing norm on the grid")
    logs = logu - 0.5 * lognorm2
    if np.max(logs) > 700:
        raise OverflowGuard(f"normalized kernel element (k={k}, n={n}) overflows")
    # the normalized element takes the value c at rho_turn
    log_c = integrals.anchor_offset(n, rho_turn) - 0.5 * lognorm2
    return HatKernelElement(k, n, rho_turn, integrals.nodes, logs, weights, float(log_c))


def _grid_nodes(N: int) -> np.ndarray:
    return StaggeredGrid.full(N).alpha_nodes


def kernel_element(profiles: ProfileSet, constants: GlobalConstants, k: int, n: int, N: int,
                   nodes: Optional[np.ndarray] = None) -> HatKernelElement:
    """Integral-factor kernel element on the alpha nodes of the N-grid."""
    rho_turn = hat_turning_point(profiles, constants, k, n)
    co = HatCoefficients(profiles, constants, k)
    x = _grid_nodes(N) if nodes is None else nodes
    integrals = _KernelIntegrals(co, x)
    weights = (x[1] - x[0]) * co.hprime(x)
    return _element_from(integrals, weights, k, n, rho_turn)


def kernel_elements(profiles: ProfileSet, constants: GlobalConstants, k: int, N: int,
                    n_values=None) -> list:
    """Kernel elements for many n at once, sharing the cumulative integrals."""
    co = HatCoefficients(profiles, constants, k)
    _check_positivity(co)
    if n_values is None:
        n_values = range(-2 * constants.floor_r, 1)
    x = _grid_nodes(N)
    integrals = _KernelIntegrals(co, x)
    weights = (x[1] - x[0]) * co.hprime(x)
    out = []
    for n in n_values:
        _check_n(constants, n)
        rho_turn = 0.0 if n == 0 else 2.0 if n == -2 * constants.floor_r else _bisect(co, n)
        out.append(_element_from(integrals, weights, k, n, rho_turn))
    return out


def _bisect(co: HatCoefficients, n: int) -> float:
    lo, hi = 0.0, 2.0  # F(0) = n < 0 < F(2) = n + 2[r]
    while hi - lo > BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        if co.F(mid, n) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def verify_kernel_dimension(profiles: ProfileSet, constants: GlobalConstants, k: int, N: int,
                            tol: float = 1e-6) -> int:
    """Build all 2[r]+1 kernel elements and check their Gram matrix.

    Elements with distinct n carry distinct t-frequencies and are orthogonal
    exactly; the diagonal is checked against 1 to ``tol``.
    """
    elems = kernel_elements(profiles, constants, k, N)
    norms = np.array([e.norm() for e in elems])
    if np.any(~np.isfinite(norms)) or np.any(norms < 1e-300):
        raise RankDeficiency(f"kernel element norm underflow for k={k}")
    gram = np.diag(norms)  # off-diagonal entries vanish by Fourier orthogonality in t
    if np.max(np.abs(gram - np.eye(len(elems)))) > tol:
        raise RankDeficiency(f"kernel Gram matrix deviates from identity for k={k}")
    return len(elems)


def gaussian_distance(elem: HatKernelElement, constants: GlobalConstants, radius: Optional[float] = None
                      ) -> float:
    """Sup distance between sqrt(h') alpha and the Gaussian xi near the turning point.

    xi(x) = (gamma/pi)^(1/4) exp(-gamma x^2/2), gamma = 2k/V; the comparison is
    over |rho - rho_turn| <= radius (default 2 delta).
    """
    if radius is None:
        radius = 2 * constants.delta
    gamma = 2 * elem.k / constants.V
    x = elem.nodes - elem.rho_turn
    sel = np.abs(x) <= radius
    xi = (gamma / math.pi) ** 0.25 * np.exp(-0.5 * gamma * x[sel] ** 2)
    return float(np.max(np.abs(elem.half_density()[sel] - xi)))


def kernel_residual(elem: HatKernelElement, profiles: ProfileSet, constants: GlobalConstants,
                    refine: int = 8) -> float:
    """Sup over grid nodes of |alpha' + (F/h') alpha| for the normalized element.

    alpha' is taken by a fourth-order centred difference with step h/refine,
    using the integral-factor values at the refined points.
    """
    co = HatCoefficients(profiles, constants, elem.k)
    x = elem.nodes
    h = (x[1] - x[0]) / refine
    interior = (x - 2 * h > 0) & (x + 2 * h < 2)
    x = x[interior]
    logs = elem.log_samples[interior]

    def shift(s):
        xs, ws = _gl_rule(x, x + s)
        return logs - np.sum(ws * co.phi(xs, elem.n), axis=1)

    a = np.exp(logs)
    d = (-np.exp(shift(2 * h)) + 8 * np.exp(shift(h)) - 8 * np.exp(shift(-h)) + np.exp(shift(-2 * h))) / (12 * h)
    return float(np.max(np.abs(d + co.phi(x, elem.n) * a)))


def assemble_hat_operator(profiles: ProfileSet, constants: GlobalConstants, k: int, n: int, N: int):
    """Staggered discretization of the coupled (alpha, beta) system of sector (k, n).

    In half-density variables the Cauchy-Riemann operator is
    d/drho + F_n/h' - h''/(2h') and its adjoint is the same with -d/drho;
    the diagonals are r/2 - k/V and -(r/2 - k/V) + g'/(2h').
    """
    co = HatCoefficients(profiles, constants, k)
    p = profiles
    lam0 = 0.5 * constants.r - k / constants.V
    grid = StaggeredGrid.full(N)

    def c(x):
        return co.phi(x, n) - p.h_hat(x, 2) / (2 * co.hprime(x))

    def d_beta(x):
        gp = p.g_hat(x, 1)
        return -lam0 + np.where(gp == 0, 0.0, gp / (2 * co.hprime(x)))

    return assemble(grid, lambda x: np.full_like(x, lam0), d_beta, c, label=f"hat(k={k}, n={n})")


def hat_discrete_check(profiles: ProfileSet, constants: GlobalConstants, k: int, n: int, N: int
                       ) -> RadialEigenpair:
    """Eigenpair of the discretized coupled system nearest r/2 - k/V."""
    rho_turn = hat_turning_point(profiles, constants, k, n)
    op = assemble_hat_operator(profiles, constants, k, n, N)
    lam0 = 0.5 * constants.r - k / constants.V
    w, v = op.eigenpairs((lam0 - 1.0, lam0 + 1.0))
    if w.size == 0:
        w, v = op.eigenpairs(None, "dense")
    j = int(np.argmin(np.abs(w - lam0)))
    vec = v[:, j]
    alpha, beta = op.split(vec)
    mode = ModeIndex(k, n, "hat", rho_turn, None)
    return RadialEigenpair(mode, float(w[j]), alpha, beta, op.residual_norm(float(w[j]), vec), op.grid.h,
                           op.grid.alpha_nodes, op.grid.beta_nodes)
