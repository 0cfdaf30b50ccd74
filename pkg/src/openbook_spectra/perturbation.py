"""Perturbative eigensections of the open-book model around a turning point.

With x = rho - rho_turn the radial coefficients are expanded as

    -(k g - m f)/Delta          = gamma x - sum_{j>=2} fr_j x^j
    (k g' - m f')/(2 Delta)     = -gamma/2 - sum_{j>=2} fr'_j x^j
    Delta'/(2 Delta)            = sum_j fe_j x^j
    1 + (f''g' - f'g'')/(8Delta) = sum_j fe'_j x^j

and the eigensection is sought as a = (1 + sum a_j) xi, b = (sum b_j) xi with
xi the normalized Gaussian of width gamma^(-1/2) and mu = (r - gamma)/2 +
sum mu_j.  Each order is solved by polynomial algebra: mu_j from the
Gaussian-moment solvability condition, b_j by back substitution through
(-d/dx + 2 gamma x), and a_j by integration with a_j(0) = 0.

Substituting the ansatz into the radial system gives, for the a-equation,
a coupling 2 mu_0 b_j at the same order in addition to the lower-order
terms; it vanishes only when r equals gamma and is kept here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as P
from numpy.polynomial.legendre import leggauss

from .ck_model import CkCoefficients, ModeIndex
from .errors import CertificationFailure, HypothesisViolation, ZoneViolation
from .profiles import CutoffFunction, ProfileSet

MAX_ORDER = 6
JET_DEGREE = 12


# ----------------------------------------------------------------------------
# truncated power series
# ----------------------------------------------------------------------------

def _mul(a, b, deg):
    return _pad(P.polymul(a, b), deg + 1)


def _div(a, b, deg):
    """Power-series quotient a/b truncated at x^deg (b[0] != 0)."""
    a = np.pad(np.asarray(a, float), (0, max(0, deg + 1 - len(a))))[: deg + 1]
    b = np.pad(np.asarray(b, float), (0, max(0, deg + 1 - len(b))))[: deg + 1]
    q = np.zeros(deg + 1)
    for n in range(deg + 1):
        q[n] = (a[n] - np.dot(q[:n], b[n:0:-1])) / b[0]
    return q


def _deriv(a):
    return P.polyder(a) if len(a) > 1 else np.zeros(1)


def _pad(a, n):
    a = np.asarray(a, float)
    return np.pad(a, (0, max(0, n - len(a))))[:n]


@dataclass
class TaylorCoefficients:
    r_coeffs: np.ndarray        # fr_j, j = 0..7 (entries 0, 1 unused and zero)
    rprime_coeffs: np.ndarray   # fr'_j, j = 0..7 (entries 0, 1: see linear_term)
    e_coeffs: np.ndarray        # fe_j, j = 0..5
    eprime_coeffs: np.ndarray   # fe'_j, j = 0..5
    remainder_bounds: np.ndarray  # sup |fR0|, |fR1|, |fE0|, |fE1| over |x| <= 4 delta
    expansion_center: float
    gamma: float
    linear_term: float = 0.0    # x^1 coefficient of (k g' - m f')/(2 Delta), zero in exact arithmetic

    @classmethod
    def zeros(cls, gamma: float, center: float = 1.0) -> "TaylorCoefficients":
        return cls(np.zeros(8), np.zeros(8), np.zeros(6), np.zeros(6), np.zeros(4), center, gamma)


def coefficient_series(profiles: ProfileSet, mode: ModeIndex, degree: int = JET_DEGREE):
    """Taylor series at rho_turn of the four coefficient functions.

    Built from the exact polynomial jets of f and g by truncated power-series
    algebra.  Returns (A, B, E, Ep) with A = -(k g - m f)/Delta,
    B = (k g' - m f')/(2 Delta), E = Delta'/(2 Delta), Ep = 1 + W.
    """
    x0 = mode.rho_turn
    f = profiles.f_ck.jet(x0, degree + 2)
    g = profiles.g_ck.jet(x0, degree + 2)
    f1, g1 = _deriv(f), _deriv(g)
    f2, g2 = _deriv(f1), _deriv(g1)
    d = degree
    delta = 0.5 * (_mul(f1, g, d) - _mul(f, g1, d))
    ddelta = 0.5 * (_mul(f2, g, d) - _mul(f, g2, d))
    k, m = mode.k, mode.m
    A = -_div(k * _pad(g, d + 1) - m * _pad(f, d + 1), delta, d)
    B = _div(k * _pad(g1, d + 1) - m * _pad(f1, d + 1), 2 * delta, d)
    E = _div(ddelta, 2 * delta, d)
    Ep = _div(_mul(f2, g1, d) - _mul(f1, g2, d), 8 * delta, d)
    Ep[0] += 1.0
    return A, B, E, Ep


def taylor_extract(profiles: ProfileSet, mode: ModeIndex, degree_cap: int = 7,
                   check_zone: bool = True) -> TaylorCoefficients:
    """Taylor data of the radial coefficients at the mode's turning point.

    Raises ZoneViolation unless 20 delta < rho_turn < 2 - 20 delta.
    """
    dl = profiles.constants.delta
    if check_zone and not 20 * dl < mode.rho_turn < 2 - 20 * dl:
        raise ZoneViolation(f"turning point {mode.rho_turn} outside (20 delta, 2 - 20 delta)")
    A, B, E, Ep = coefficient_series(profiles, mode)
    gamma = mode.gamma
    scale = max(1.0, abs(mode.k) + abs(mode.m))
    if abs(A[0]) > 1e-8 * scale:
        raise ArithmeticError(f"x^0 coefficient of -(kg - mf)/Delta is {A[0]}, expected 0")
    if abs(A[1] - gamma) > 1e-8 * scale:
        raise ArithmeticError(f"x^1 coefficient {A[1]} differs from gamma {gamma}")
    cap = min(degree_cap, 7)
    fr = np.zeros(8)
    frp = np.zeros(8)
    fr[2: cap + 1] = -A[2: cap + 1]
    frp[2: cap + 1] = -B[2: cap + 1]
    fe = _pad(E[: min(cap, 5) + 1], 6)
    fep = _pad(Ep[: min(cap, 5) + 1], 6)
    remainders = _remainder_bounds(profiles, mode, A, B, E, Ep)
    return TaylorCoefficients(fr, frp, fe, fep, remainders, mode.rho_turn, gamma, float(B[1]))


def _remainder_bounds(profiles, mode, A, B, E, Ep):
    dl = profiles.constants.delta
    x = np.concatenate([np.linspace(-4 * dl, -dl, 16), np.linspace(dl, 4 * dl, 16)])
    rho = mode.rho_turn + x
    rho = rho[(rho > 0) & (rho < 2)]
    x = rho - mode.rho_turn
    co = CkCoefficients(profiles, mode.k, mode.m)
    delta, Pv, Qv, Wv = co.parts(rho)
    dd = 0.5 * (profiles.f_ck(rho, 2) * profiles.g_ck(rho) - profiles.f_ck(rho) * profiles.g_ck(rho, 2))
    Et = dd / (2 * delta)
    At = -(Qv - Et)
    out = []
    for true, ser, n in ((At, A, 8), (Pv, B, 8), (Et, E, 6), (1 + Wv, Ep, 6)):
        approx = P.polyval(x, ser[:n])
        out.append(float(np.max(np.abs((true - approx) / x**n))) if x.size else 0.0)
    return np.array(out)


# ----------------------------------------------------------------------------
# recursion
# ----------------------------------------------------------------------------

def gaussian_moment(i: int, gamma: float) -> float:
    """int x^i exp(-gamma x^2) dx over the real line."""
    if i % 2:
        return 0.0
    j = i // 2
    dfact = math.prod(range(2 * j - 1, 0, -2)) if j > 0 else 1
    return dfact / (2 * gamma) ** j * math.sqrt(math.pi / gamma)


def _gauss_mean(poly, gamma):
    """<p> = int p e^{-gamma x^2} / int e^{-gamma x^2}."""
    tot = 0.0
    for i in range(0, len(poly), 2):
        j = i // 2
        dfact = math.prod(range(2 * j - 1, 0, -2)) if j > 0 else 1
        tot += poly[i] * dfact / (2 * gamma) ** j
    return tot


def solve_b(s, gamma):
    """Polynomial b with (-d/dx + 2 gamma x) b = s (s orthogonal to e^{-gamma x^2})."""
    s = np.trim_zeros(np.asarray(s, float), "b")
    d = len(s) - 1
    if d < 1:
        return np.zeros(1)
    b = np.zeros(d + 1)
    # coefficient of x^p: -(p+1) b_{p+1} + 2 gamma b_{p-1} = s_p
    for p in range(d, 0, -1):
        nxt = b[p + 1] if p + 1 <= d else 0.0
        b[p - 1] = (s[p] + (p + 1) * nxt) / (2 * gamma)
    return b[:d] if d > 0 else b


@dataclass
class PerturbativeSolution:
    a_polys: list            # a_0 .. a_J, ascending coefficient arrays
    b_polys: list            # b_0 .. b_J
    mu_terms: np.ndarray     # mu_1 .. mu_J
    gamma: float
    r: float
    order: int
    solvability_residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def mu0(self) -> float:
        return 0.5 * (self.r - self.gamma)

    @property
    def mu_total(self) -> float:
        return self.mu0 + float(np.sum(self.mu_terms))

    def mu_truncated(self, J: int) -> float:
        return self.mu0 + float(np.sum(self.mu_terms[:J]))

    def a_sum(self, J: Optional[int] = None):
        J = self.order if J is None else J
        out = np.zeros(1)
        for p in self.a_polys[: J + 1]:
            out = P.polyadd(out, p)
        return out

    def b_sum(self, J: Optional[int] = None):
        J = self.order if J is None else J
        out = np.zeros(1)
        for p in self.b_polys[: J + 1]:
            out = P.polyadd(out, p)
        return out


def recursive_solution(coeffs: TaylorCoefficients, gamma: float, r: float, order: int = MAX_ORDER
                       ) -> PerturbativeSolution:
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if not 1 <= order <= MAX_ORDER:
        raise ValueError(f"order must lie in [1, {MAX_ORDER}]")
    fr, frp, fe, fep = coeffs.r_coeffs, coeffs.rprime_coeffs, coeffs.e_coeffs, coeffs.eprime_coeffs
    mu0 = 0.5 * (r - gamma)

    def mono(c, p):
        out = np.zeros(p + 1)
        out[p] = c
        return out

    def s_term(i):  # fe_{i-1} x^{i-1} + fr_{i+1} x^{i+1}
        return P.polyadd(mono(fe[i - 1] if i - 1 < 6 else 0.0, i - 1), mono(fr[i + 1] if i + 1 < 8 else 0.0, i + 1))

    def rp_term(i):  # fr'_{i+1} x^{i+1}
        return mono(frp[i + 1] if i + 1 < 8 else 0.0, i + 1)

    def ep_term(i):  # fe'_{i-1} x^{i-1}
        return mono(fep[i - 1] if i - 1 < 6 else 0.0, i - 1)

    a = [np.ones(1)]
    b = [np.zeros(1)]
    mu = []
    solv = []
    for j in range(1, order + 1):
        # b-equation right-hand side without the mu_j a_0 term
        rhs = np.zeros(1)
        for i in range(1, j):
            rhs = P.polyadd(rhs, P.polymul(s_term(i), b[j - i]))
        for i in range(1, j + 1):
            mui = mu[i - 1] if i < j else 0.0
            rhs = P.polyadd(rhs, P.polymul(P.polyadd(mono(mui, 0), rp_term(i)), a[j - i]))
        mu_j = -_gauss_mean(rhs, gamma)  # a_0 = 1
        rhs = P.polyadd(rhs, mono(mu_j, 0))
        solv.append(_gauss_mean(rhs, gamma))
        b_j = solve_b(rhs, gamma)
        # a-equation
        da = P.polymul(mono(2 * mu0, 0), b_j)
        for i in range(1, j + 1):
            da = P.polyadd(da, P.polymul(s_term(i), a[j - i]))
        for i in range(1, j):
            coef = P.polyadd(P.polyadd(mono(mu[i - 1], 0), ep_term(i)), -rp_term(i))
            da = P.polyadd(da, P.polymul(coef, b[j - i]))
        a_j = P.polyint(da)  # constant of integration zero: a_j(0) = 0
        mu.append(mu_j)
        a.append(np.trim_zeros(a_j, "b") if np.any(a_j) else np.zeros(1))
        b.append(np.trim_zeros(b_j, "b") if np.any(b_j) else np.zeros(1))
    return PerturbativeSolution(a, b, np.array(mu), gamma, r, order, np.array(solv))


def perturbative_mode(profiles: ProfileSet, mode: ModeIndex, r: float, order: int = MAX_ORDER,
                      check_zone: bool = True) -> PerturbativeSolution:
    return recursive_solution(taylor_extract(profiles, mode, check_zone=check_zone), mode.gamma, r, order)


# ----------------------------------------------------------------------------
# approximate eigensection and residuals
# ----------------------------------------------------------------------------

def gaussian_xi(x, gamma):
    return (gamma / math.pi) ** 0.25 * np.exp(-0.5 * gamma * np.asarray(x) ** 2)


def width_cutoff(mode: ModeIndex, inner_widths: float = 7.0, outer_widths: float = 9.0) -> CutoffFunction:
    """Cutoff centred at the turning point with radii in Gaussian widths gamma^(-1/2)."""
    w = 1.0 / math.sqrt(mode.gamma)
    return CutoffFunction(mode.rho_turn, inner_widths * w, outer_widths * w)


def approximate_eigensection(sol: PerturbativeSolution, cutoff: CutoffFunction, grid, J: Optional[int] = None):
    """Samples of (alpha_app, beta_app) on ``grid`` (values of rho) and mu_total."""
    rho = np.asarray(grid, float)
    x = rho - cutoff.center
    chi = cutoff(rho)
    xi = gaussian_xi(x, sol.gamma)
    alpha = chi * P.polyval(x, sol.a_sum(J)) * xi
    beta = chi * P.polyval(x, sol.b_sum(J)) * xi
    mu = sol.mu_total if J is None else sol.mu_truncated(J)
    return alpha, beta, mu


def _panel_rule(a, b, panels, pts=16):
    t, w = leggauss(pts)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)[:, None]
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    return (mid + half * t).ravel(), (half * w).ravel()


def support_rule(cutoff: CutoffFunction, panels: int = 400):
    """Composite Gauss-Legendre rule over the cutoff support clipped to (0, 2)."""
    a = max(cutoff.center - cutoff.outer_radius, 1e-9)
    b = min(cutoff.center + cutoff.outer_radius, 2 - 1e-9)
    return _panel_rule(a, b, panels)


def norm_deficit(sol: PerturbativeSolution, cutoff: CutoffFunction) -> float:
    """|1 - int chi^2 (a^2 + b^2) dx|."""
    x, w = support_rule(cutoff)
    al, be, _ = approximate_eigensection(sol, cutoff, x)
    return abs(1.0 - float(np.sum(w * (al**2 + be**2))))


def continuum_residual(profiles: ProfileSet, mode: ModeIndex, sol: PerturbativeSolution,
                       cutoff: CutoffFunction, J: Optional[int] = None, panels: int = 400) -> float:
    """Squared L2 norm of (D - mu) psi_app for the continuum radial operator.

    Derivatives of the ansatz are taken analytically and the coefficients are
    the exact ones of the mode, so the result measures the ansatz itself,
    free of any grid discretization floor.
    """
    x_r, w = support_rule(cutoff, panels)
    x = x_r - cutoff.center
    gamma, r = sol.gamma, sol.r
    pa, pb = sol.a_sum(J), sol.b_sum(J)
    mu = sol.mu_total if J is None else sol.mu_truncated(J)
    chi, dchi = cutoff(x_r), cutoff(x_r, 1)
    xi = gaussian_xi(x, gamma)
    av, bv = P.polyval(x, pa), P.polyval(x, pb)
    dav, dbv = P.polyval(x, _deriv(pa)), P.polyval(x, _deriv(pb))
    alpha = chi * av * xi
    beta = chi * bv * xi
    dalpha = (dchi * av + chi * dav - gamma * x * chi * av) * xi
    dbeta = (dchi * bv + chi * dbv - gamma * x * chi * bv) * xi
    co = CkCoefficients(profiles, mode.k, mode.m)
    _, Pv, Qv, Wv = co.parts(x_r)
    r1 = (0.5 * r + Pv - mu) * alpha - dbeta - Qv * beta
    r2 = dalpha - Qv * alpha - (0.5 * r + Pv + 1.0 + Wv + mu) * beta
    return float(np.sum(w * (r1**2 + r2**2)))


def discrete_residual(op, alpha, beta, mu) -> float:
    """Squared grid norm of (H - mu) psi for samples on the operator's nodes."""
    vec = np.empty(op.size)
    vec[0::2], vec[1::2] = alpha, beta
    res = op.apply(vec) - mu * vec
    return float(np.sum(res**2) * op.grid.h)


# ----------------------------------------------------------------------------
# approximate-eigenvalue certifier
# ----------------------------------------------------------------------------

def _cross_sup(G0, G1, G2, lo, hi) -> np.ndarray:
    """Row-wise sup over mu in [lo, hi] of sum_{l' != l} |q_{l l'}(mu)|.

    q(mu) = G2 - mu G1 + mu^2 G0 is quadratic in mu, so each row sum is
    piecewise quadratic; its maximum sits at an endpoint, a root of some q or
    a vertex of some piece, and all such points are evaluated.
    """
    L = G0.shape[0]
    mask = ~np.eye(L, dtype=bool)
    cands = [lo, hi]
    a, b, c = G0[mask], -G1[mask], G2[mask]
    with np.errstate(divide="ignore", invalid="ignore"):
        disc = b * b - 4 * a * c
        ok = (a != 0) & (disc >= 0)
        sq = np.sqrt(np.where(ok, disc, 0.0))
        roots = np.concatenate([((-b + sq) / (2 * a))[ok], ((-b - sq) / (2 * a))[ok]])
        lin = (a == 0) & (b != 0)
        roots = np.concatenate([roots, (-c / b)[lin]])
        verts = (-b / (2 * a))[a != 0]
    for v in np.concatenate([roots, verts]):
        if lo < v < hi:
            cands.append(float(v))
    cands = np.unique(np.array(cands))
    best = np.zeros(L)
    for start in range(0, cands.size, 256):
        mu = cands[start:start + 256]
        q = G2[None] - mu[:, None, None] * G1[None] + (mu**2)[:, None, None] * G0[None]
        sums = np.where(mask[None], np.abs(q), 0.0).sum(axis=2)
        best = np.maximum(best, sums.max(axis=0))
    return best


def certify_eigenvalues(operator, approx_pairs: Sequence, eps1: float, eps2: float,
                        weight: float = 1.0) -> list:
    """Certify L true eigenvalues, each within 4 sqrt(eps1) of its mu.

    ``approx_pairs`` is a list of (vector, mu) and inner products carry the
    factor ``weight`` (the grid spacing for grid functions).  Hypotheses:

    (i)   0 < eps2 < 1/4 and eps2 (max mu - min mu)^2 <= eps1;
    (ii)  | |v_l|^2 - 1 | <= eps2 and sum_{l' != l} |<v_l', v_l>| <= eps2;
    (iii) |(H - mu_l) v_l|^2 <= eps1;
    (iv)  sum_{l' != l} |<(H - mu) v_l', (H - mu) v_l>| <= eps1 for every
          mu between min mu and max mu.

    The returned eigenvalues (input order) come from an exact symmetric
    eigendecomposition; sorted mu's are matched greedily to the smallest
    unused eigenvalue within the radius.
    """
    H = operator.to_dense() if hasattr(operator, "to_dense") else np.asarray(operator, float)
    if not np.array_equal(H, H.T):
        raise ValueError("operator must be symmetric")
    vecs = np.column_stack([np.asarray(v, float) for v, _ in approx_pairs])
    mus = np.array([float(m) for _, m in approx_pairs])
    L = len(mus)
    spread = float(mus.max() - mus.min()) if L else 0.0
    if not 0 < eps2 < 0.25:
        raise HypothesisViolation("i", f"need 0 < eps2 < 1/4, got {eps2}")
    if eps2 * spread**2 > eps1:
        raise HypothesisViolation("i", f"eps2 * spread^2 = {eps2 * spread**2:.3g} > eps1")
    G0 = weight * vecs.T @ vecs
    if np.any(np.abs(np.diag(G0) - 1) > eps2):
        raise HypothesisViolation("ii", f"normalization off by {np.max(np.abs(np.diag(G0) - 1)):.3g} > eps2")
    off = np.abs(G0 - np.diag(np.diag(G0)))
    if np.any(off.sum(axis=1) > eps2):
        raise HypothesisViolation("ii", f"inner-product row sum {off.sum(axis=1).max():.3g} > eps2")
    HV = H @ vecs
    R = HV - vecs * mus[None, :]
    res = weight * np.sum(R * R, axis=0)
    if np.any(res > eps1):
        raise HypothesisViolation("iii", f"residual {res.max():.3g} > eps1")
    if L > 1:
        X = weight * vecs.T @ HV
        G1 = X + X.T
        G2 = weight * HV.T @ HV
        cross = _cross_sup(G0, G1, G2, float(mus.min()), float(mus.max()))
        if np.any(cross > eps1):
            raise HypothesisViolation("iv", f"cross-residual row sum {cross.max():.3g} > eps1")
    evals = np.linalg.eigvalsh(H)
    radius = 4 * math.sqrt(eps1)
    used = np.zeros(evals.size, bool)
    out = [None] * L
    for idx in np.argsort(mus, kind="stable"):
        cand = np.flatnonzero(~used & (evals >= mus[idx] - radius) & (evals <= mus[idx] + radius))
        if cand.size == 0:
            raise CertificationFailure(f"no unused eigenvalue within {radius:.3g} of mu={mus[idx]:.12g}")
        used[cand[0]] = True
        out[idx] = float(evals[cand[0]])
    return out


# ----------------------------------------------------------------------------
# high-accuracy numeric reference
# ----------------------------------------------------------------------------

def numeric_eigenvalue(profiles: ProfileSet, mode: ModeIndex, r: float, h: float,
                       span: Optional[float] = None, levels: int = 3, edge: float = 1e-3):
    """Window eigenvalue of the mode, Richardson-extrapolated in h^2.

    The staggered scheme is symmetric, so its eigenvalue error expands in
    even powers of h.  The local interval [a, b] is fixed across levels and
    the grid is refined by halving; the return value is
    (extrapolated eigenvalue, per-level eigenvalues).
    """
    from .ck_model import assemble_radial_operator, default_span
    from .radial import StaggeredGrid

    span = default_span(mode) if span is None else span
    a = max(mode.rho_turn - span, edge)
    b = min(mode.rho_turn + span, 2 - edge)
    n0 = max(int(math.ceil((b - a) / h)), 16)
    target = 0.5 * (r - mode.gamma)
    vals = []
    for lev in range(levels):
        grid = StaggeredGrid(a, b, n0 * 2**lev)
        op = assemble_radial_operator(profiles, mode, r, 0, grid=grid, enforce_ranges=False)
        w, _ = op.eigenpairs((target - 3.0, target + 3.0))
        if w.size == 0:
            raise ArithmeticError(f"no eigenvalue near {target} for mode ({mode.k}, {mode.m})")
        vals.append(float(w[np.argmin(np.abs(w - target))]))
    table = list(vals)
    for order in range(1, levels):
        fac = 4.0**order
        table = [(fac * table[i + 1] - table[i]) / (fac - 1) for i in range(len(table) - 1)]
    return table[0], vals
