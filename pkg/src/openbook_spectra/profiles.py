"""Radial profile functions for the two S^2 x S^1 local models.

Every profile is a piecewise polynomial on [0, 2]: the pinned zones carry
their closed-form polynomials and the gaps between them are filled by quintic
Hermite patches that match value, first and second derivative.  Because the
pieces are polynomials, derivatives of every order (and Taylor jets) are
exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from math import factorial

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate
from scipy.interpolate import BPoly, PPoly

from .errors import ConfigError, ConstructionFailure

SCAN_POINTS = 10_000
MAX_SUBDIVISIONS = 8


@dataclass(frozen=True)
class GlobalConstants:
    V: float = 2.0
    delta: float = 0.005
    r: float = 100.0
    pole_fraction: float = 0.0
    flat_fraction: float = 0.5

    def __post_init__(self):
        if not self.V > 0:
            raise ConfigError(f"V must be positive, got {self.V}")
        if not 0 < self.delta <= 0.01 or not 50 * self.delta < 0.5:
            raise ConfigError(f"delta must lie in (0, 1/100), got {self.delta}")
        if not self.r > 0:
            raise ConfigError(f"r must be positive, got {self.r}")
        a, b = self.pole_fraction, self.flat_fraction
        if not (0 <= a and 0 <= b and a + b < 1):
            raise ConfigError("pole_fraction and flat_fraction must be >= 0 with sum < 1")

    @property
    def sigma(self) -> float:
        return math.floor(self.r) / self.r

    @property
    def floor_r(self) -> int:
        return math.floor(self.r)

    @property
    def collar(self) -> float:
        """Width 50*delta of every pinned zone."""
        return 50 * self.delta

    @property
    def pole_extent(self) -> float:
        """End of the region near each pole where the polynomial pole forms hold.

        It is at least the pinned width 50*delta and is widened by
        pole_fraction of the free room so that modes located there see
        analytic coefficients over several Gaussian widths.
        """
        return self.collar + self.pole_fraction * (1 - 2 * self.collar)

    @property
    def flat_halfwidth(self) -> float:
        """Half-width of the region around rho=1 where f=V, g=2-rho."""
        return self.collar + self.flat_fraction * (1 - 2 * self.collar)

    def with_r(self, r: float) -> "GlobalConstants":
        return replace(self, r=r)


class Profile:
    """A scalar piecewise-polynomial function of rho with exact derivatives."""

    def __init__(self, ppoly: PPoly, name: str = ""):
        self.ppoly = ppoly
        self.name = name
        self._derivs = [ppoly]
        for _ in range(ppoly.c.shape[0] - 1):
            self._derivs.append(self._derivs[-1].derivative())

    @property
    def breakpoints(self) -> np.ndarray:
        return self.ppoly.x

    def __call__(self, rho, nu: int = 0):
        if nu >= len(self._derivs):
            return np.zeros_like(np.asarray(rho, dtype=float))
        return self._derivs[nu](rho)

    def jet(self, rho0: float, order: int) -> np.ndarray:
        """Taylor coefficients c_0..c_order of the profile at rho0."""
        out = np.zeros(order + 1)
        for j in range(min(order, len(self._derivs) - 1) + 1):
            out[j] = float(self._derivs[j](rho0)) / factorial(j)
        return out


def _local(poly: Polynomial, a: float) -> Polynomial:
    """Re-express poly(rho) as a polynomial in t = rho - a."""
    return poly(Polynomial([a, 1.0]))


def _assemble(pieces, degree: int = 7) -> PPoly:
    """pieces: list of (a, b, Polynomial in local coordinate t = rho - a)."""
    pieces = sorted(pieces, key=lambda p: p[0])
    breaks = [pieces[0][0]]
    coeffs = np.zeros((degree + 1, len(pieces)))
    for i, (a, b, poly) in enumerate(pieces):
        if not math.isclose(a, breaks[-1], rel_tol=0, abs_tol=1e-14):
            raise ValueError("pieces must tile the interval")
        c = np.trim_zeros(poly.coef, "b") if np.any(poly.coef) else np.zeros(1)
        if len(c) > degree + 1:
            raise ValueError("piece degree too high")
        coeffs[degree + 1 - len(c):, i] = c[::-1]
        breaks.append(b)
    return PPoly(coeffs, np.array(breaks))


def _hermite_piece(a, b, left, right) -> Polynomial:
    """Quintic matching (value, d1, d2) at a and b, in t = rho - a."""
    bp = BPoly.from_derivatives([a, b], [list(left), list(right)])
    pp = PPoly.from_bernstein_basis(bp)
    return Polynomial(pp.c[::-1, 0])


def _data(poly: Polynomial, x: float):
    return (poly(x), poly.deriv(1)(x), poly.deriv(2)(x))


def _smoothstep(a, b) -> Polynomial:
    t = Polynomial([-a / (b - a), 1.0 / (b - a)])
    return t**3 * (10 - 15 * t + 6 * t**2)


class _GapFiller:
    """Fills [a, b] between two pinned polynomials with Hermite patches.

    The first attempt is one quintic patch.  On a constraint violation the
    patch count is doubled; interior knot data are taken from a smoothstep
    blend of the neighbouring pinned polynomials.
    """

    def __init__(self, a, b, left: Polynomial, right: Polynomial):
        self.a, self.b = a, b
        self.left, self.right = left, right
        s = _smoothstep(a, b)
        self.guide = (1 - s) * left + s * right

    def pieces(self, level: int):
        n = 2**level
        knots = np.linspace(self.a, self.b, n + 1)
        data = [_data(self.left, self.a)]
        data += [_data(self.guide, x) for x in knots[1:-1]]
        data.append(_data(self.right, self.b))
        return [
            (knots[i], knots[i + 1], _hermite_piece(knots[i], knots[i + 1], data[i], data[i + 1]))
            for i in range(n)
        ]


def _build(zones, gaps, check, name_check):
    """zones: list of (a, b, Polynomial in rho); gaps are filled between them.

    ``check(levels) -> None or str`` validates the candidate; subdivision is
    retried per-gap up to MAX_SUBDIVISIONS times.
    """
    fillers = [_GapFiller(*g) for g in gaps]
    levels = [0] * len(fillers)
    for attempt in range(MAX_SUBDIVISIONS + 1):
        pieces = [(a, b, _local(p, a)) for a, b, p in zones]
        for filler, lvl in zip(fillers, levels):
            for a, b, p in filler.pieces(lvl):
                pieces.append((a, b, p))
        candidate = _assemble(pieces)
        bad_gap = check(candidate)
        if bad_gap is None:
            return candidate
        if attempt == MAX_SUBDIVISIONS:
            break
        levels[bad_gap] += 1
    raise ConstructionFailure(f"{name_check}: constraint still violated after {MAX_SUBDIVISIONS} subdivisions")


def _scan_grid() -> np.ndarray:
    return np.linspace(0.0, 2.0, SCAN_POINTS + 2)[1:-1]


@dataclass(frozen=True)
class ProfileSet:
    constants: GlobalConstants
    f_ck: Profile = field(repr=False)
    g_ck: Profile = field(repr=False)
    g_hat: Profile = field(repr=False)
    h_hat: Profile = field(repr=False)

    # ck-model derived coefficient functions -------------------------------
    def delta_ck(self, rho, nu: int = 0):
        """Half the contact volume density, (f'g - fg')/2, and its derivative."""
        f, g = self.f_ck, self.g_ck
        if nu == 0:
            return 0.5 * (f(rho, 1) * g(rho) - f(rho) * g(rho, 1))
        if nu == 1:
            return 0.5 * (f(rho, 2) * g(rho) - f(rho) * g(rho, 2))
        raise ValueError("only nu <= 1 supported")

    def rho_V(self) -> float:
        """Unique root of V g - f = 0, i.e. the radius where k = mV."""
        from scipy.optimize import brentq

        V = self.constants.V
        return brentq(lambda x: V * self.g_ck(x) - self.f_ck(x), 1e-12, 2 - 1e-12, xtol=1e-14)

    def table(self, n: int = 401) -> np.ndarray:
        rho = np.linspace(0.0, 2.0, n)
        return np.column_stack([
            rho,
            self.f_ck(rho), self.f_ck(rho, 1),
            self.g_ck(rho), self.g_ck(rho, 1),
            self.h_hat(rho), self.h_hat(rho, 1),
            self.g_hat(rho), self.g_hat(rho, 1),
        ])

    def write_table(self, path, n: int = 401) -> None:
        header = "rho f f_prime g g_prime h h_prime g_hat g_hat_prime"
        np.savetxt(path, self.table(n), fmt="%.17g", header=header, comments="# ")


TABLE_COLUMNS = ("rho", "f", "f_prime", "g", "g_prime", "h", "h_prime", "g_hat", "g_hat_prime")


def build_profiles(constants: GlobalConstants) -> ProfileSet:
    """Construct f_ck, g_ck, g_hat, h_hat for the given constants.

    Raises ConstructionFailure when no subdivision level yields an
    interpolant satisfying the sign constraints on the 10^4-point scan.
    """
    V, sigma = constants.V, constants.sigma
    P = Polynomial
    rho = P([0.0, 1.0])
    u = 2 - rho

    pe, fw = constants.pole_extent, constants.flat_halfwidth
    lo, mid_a, mid_b, hi = pe, 1 - fw, 1 + fw, 2 - pe

    f_in, g_in = rho**2, 2 - rho**2
    f_flat, g_flat = P([V]), 2 - rho
    f_out, g_out = u**2, -2 + u**2

    scan = _scan_grid()
    gap_of = lambda x: 0 if x < mid_a else 1  # noqa: E731

    # f and g are checked jointly, so both are rebuilt at the same level.
    def build_fg():
        fl = [0, 0]
        for attempt in range(MAX_SUBDIVISIONS + 1):
            fgaps = [_GapFiller(lo, mid_a, f_in, f_flat), _GapFiller(mid_b, hi, f_flat, f_out)]
            ggaps = [_GapFiller(lo, mid_a, g_in, g_flat), _GapFiller(mid_b, hi, g_flat, g_out)]
            fz = [(0.0, lo, f_in), (mid_a, mid_b, f_flat), (hi, 2.0, f_out)]
            gz = [(0.0, lo, g_in), (mid_a, mid_b, g_flat), (hi, 2.0, g_out)]
            fp = [(a, b, _local(p, a)) for a, b, p in fz]
            gp = [(a, b, _local(p, a)) for a, b, p in gz]
            for i in range(2):
                fp += fgaps[i].pieces(fl[i])
                gp += ggaps[i].pieces(fl[i])
            f, g = Profile(_assemble(fp), "f_ck"), Profile(_assemble(gp), "g_ck")
            bad = _fg_violation(f, g, scan, 1 + constants.collar)
            if bad is None:
                return f, g
            if attempt == MAX_SUBDIVISIONS:
                break
            fl[gap_of(bad)] += 1
        raise ConstructionFailure("f_ck/g_ck: constraint still violated after subdivision")

    f, g = build_fg()

    zero = P([0.0])
    g_hat = Profile(_build(
        [(0.0, lo, zero), (mid_a, mid_b, g_flat), (hi, 2.0, zero)],
        [(lo, mid_a, zero, g_flat), (mid_b, hi, g_flat, zero)],
        lambda pp: None,
        "g_hat",
    ), "g_hat")

    h_in = 0.5 * rho**2
    h_flat = sigma + 0.5 * (rho - 2)
    h_out = 2 * sigma - 0.5 * (rho - 2) ** 2

    def h_check(pp):
        d = pp.derivative()(scan)
        bad = np.flatnonzero(d <= 0)
        return None if bad.size == 0 else gap_of(scan[bad[0]])

    h_hat = Profile(_build(
        [(0.0, lo, h_in), (mid_a, mid_b, h_flat), (hi, 2.0, h_out)],
        [(lo, mid_a, h_in, h_flat), (mid_b, hi, h_flat, h_out)],
        h_check,
        "h_hat",
    ), "h_hat")

    return ProfileSet(constants, f, g, g_hat, h_hat)


def _fg_violation(f: Profile, g: Profile, scan, binding_end):
    fv, fd, gv, gd = f(scan), f(scan, 1), g(scan), g(scan, 1)
    bad = (fv <= 0) | (fd * gv - fv * gd <= 0)
    binding = scan < binding_end
    bad |= binding & ((fd < 0) | (gd >= 0))
    idx = np.flatnonzero(bad)
    return None if idx.size == 0 else float(scan[idx[0]])


def conformal_volume(profiles: ProfileSet, rtol: float = 1e-12) -> float:
    """Integral of a^ wedge da^ over S^2 x S^1: (2 pi)^2 int_0^2 (f'g - fg') d rho."""
    f, g = profiles.f_ck, profiles.g_ck

    def integrand(x):
        return f(x, 1) * g(x) - f(x) * g(x, 1)

    pts = [p for p in f.breakpoints[1:-1]]
    val, err = integrate.quad(integrand, 0.0, 2.0, points=pts, epsabs=0, epsrel=rtol, limit=200)
    if not err <= 1e-10 * abs(val):
        raise ArithmeticError(f"conformal volume quadrature did not converge (err={err})")
    return 4 * math.pi**2 * val


@dataclass(frozen=True)
class CutoffFunction:
    """C^2 radial cutoff: 1 within inner_radius of center, 0 beyond outer_radius."""

    center: float
    inner_radius: float
    outer_radius: float

    def __post_init__(self):
        if not 0 <= self.inner_radius < self.outer_radius:
            raise ConfigError("cutoff radii must satisfy 0 <= inner < outer")

    def __call__(self, x, nu: int = 0):
        d = np.abs(np.asarray(x, dtype=float) - self.center)
        w = self.outer_radius - self.inner_radius
        t = np.clip((d - self.inner_radius) / w, 0.0, 1.0)
        if nu == 0:
            return 1 - t**3 * (10 - 15 * t + 6 * t**2)
        if nu == 1:
            sign = np.sign(np.asarray(x, dtype=float) - self.center)
            return -sign * 30 * t**2 * (1 - t) ** 2 / w
        raise ValueError("only nu <= 1 supported")
