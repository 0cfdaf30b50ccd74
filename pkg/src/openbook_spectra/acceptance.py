"""Acceptance checks for the package, one function per criterion.

Each check returns a :class:`CheckResult` with a pass flag, a one-line
summary and the raw numbers behind it, so the same code feeds the test
suite and the ``accept`` CLI command.  Nothing here adjusts a threshold to
make a check pass; where a criterion cannot be measured as literally worded
the substitute quantity is named in the summary.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .ck_model import (C_MARGIN, assemble_radial_operator, default_span, modes_in_gamma_band, solve_mode,
                       sweep_modes, mode_sweep_values)
from .errors import HypothesisViolation
from .hat_model import hat_discrete_check, hat_spectrum, multiplicity, verify_kernel_dimension
from .ledger import symmetric_window
from .perturbation import (_cross_sup, approximate_eigensection, certify_eigenvalues, discrete_residual,
                           gaussian_xi, numeric_eigenvalue, perturbative_mode, width_cutoff)
from .profiles import GlobalConstants, build_profiles
from .spectral_stats import build_partition, eta_ddot, eta_dot, step_growth_fit, track_spectral_flow, \
    vafa_witten_check

log = logging.getLogger(__name__)


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    summary: str
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number} ({self.name}): {self.summary}"


def _timed(number: int, name: str):
    def wrap(fn: Callable[..., tuple]):
        def run(*args, **kw) -> CheckResult:
            t0 = time.perf_counter()
            passed, summary, details = fn(*args, **kw)
            res = CheckResult(number, name, bool(passed), summary, details, time.perf_counter() - t0)
            log.info(res.line())
            return res
        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run
    return wrap


# ----------------------------------------------------------------------------
# 1. flat zone
# ----------------------------------------------------------------------------

def _flat_errors(profiles, modes, r, N):
    eig, ef = [], []
    for md in modes:
        pr = solve_mode(profiles, md, r, N)
        if pr is None:
            continue
        eig.append(abs(pr.lam - 0.5 * (r - md.gamma)))
        xi = gaussian_xi(pr.alpha_nodes - md.rho_turn, md.gamma)
        ef.append(math.sqrt((np.sum((pr.alpha - xi) ** 2) + np.sum(pr.beta**2)) * pr.grid_spacing))
    return np.array(eig), np.array(ef)


@_timed(1, "flat-zone exactness")
def check_flat_zone(V=2.0, r=200.0, N=4000, ratio_min=3.5, tol=1e-3, time_limit=60.0):
    """Eigenvalue error at N and the convergence ratio between N and 2N.

    On the flat zone the staggered scheme reproduces (r - gamma)/2 for every
    grid spacing, so the eigenvalue error does not shrink under refinement
    and its ratio carries no information.  The convergence ratio is measured
    on the eigenfunction instead: the L2 distance to the exact Gaussian,
    median over the mode set of err(N)/err(2N).
    """
    c = GlobalConstants(V=V, r=r)
    p = build_profiles(c)
    d = c.delta
    modes = [md for md in sweep_modes(p, r) if 1 - 40 * d <= md.rho_turn <= 1 + 40 * d]
    t0 = time.perf_counter()
    eig, ef = _flat_errors(p, modes, r, N)
    t_set = time.perf_counter() - t0
    eig2, ef2 = _flat_errors(p, modes, r, 2 * N)
    ratios = ef / ef2
    med = float(np.median(ratios))
    passed = eig.size > 0 and eig.max() <= tol and med >= ratio_min and t_set <= time_limit
    summary = (f"{eig.size} modes, max |lambda-(r-gamma)/2| = {eig.max():.2e} (<= {tol:g}); "
               f"eigenfunction error ratio N->2N median {med:.2f} (>= {ratio_min}, substitute for the "
               f"eigenvalue ratio, which is exact on the flat zone); mode set solved in {t_set:.1f} s")
    return passed, summary, {"modes": int(eig.size), "max_eig_err": float(eig.max()),
                             "max_eig_err_2N": float(eig2.max()), "median_ratio": med,
                             "min_ratio": float(ratios.min()), "seconds_per_set": t_set}


# ----------------------------------------------------------------------------
# 2. perturbative law
# ----------------------------------------------------------------------------

GAP_TARGETS = tuple(np.linspace(0.30, 0.45, 10)) + tuple(np.linspace(1.55, 1.70, 10))


def _pick_mode(profiles, r, target):
    cands = modes_in_gamma_band(profiles, r - 3.0, r + 3.0)
    return min(cands, key=lambda m: abs(m.rho_turn - target) + 0.01 * abs(m.gamma - r))


@_timed(2, "perturbative law")
def check_perturbative_law(r_values=(100.0, 200.0, 400.0), N=4000, h=2e-4, exponent_max=-2.0,
                           stability_max=3.0, targets=GAP_TARGETS):
    """|lambda_num - mu6| decay and residual stability on gap-patch modes.

    For every target turning point the mode with gamma nearest r is taken at
    each r.  lambda_num is a Richardson-extrapolated discrete eigenvalue; the
    residual is that of the sixth-order ansatz against the N-grid operator.
    """
    rows = []
    profiles = build_profiles(GlobalConstants())
    for tgt in targets:
        errs, res = [], []
        for r in r_values:
            md = _pick_mode(profiles, r, tgt)
            sol = perturbative_mode(profiles, md, r)
            lam, _ = numeric_eigenvalue(profiles, md, r, h)
            op = assemble_radial_operator(profiles, md, r, N, span=default_span(md))
            cut = width_cutoff(md)
            a, _, mu = approximate_eigensection(sol, cut, op.grid.alpha_nodes)
            _, b, _ = approximate_eigensection(sol, cut, op.grid.beta_nodes)
            errs.append(abs(lam - mu))
            res.append(discrete_residual(op, a, b, mu) * r**6)
        slope = float(np.polyfit(np.log(r_values), np.log(np.maximum(errs, 1e-300)), 1)[0])
        rows.append({"target": float(tgt), "errors": errs, "exponent": slope,
                     "C": res, "C_variation": max(res) / min(res)})
    exps = np.array([row["exponent"] for row in rows])
    var = np.array([row["C_variation"] for row in rows])
    n_exp = int(np.sum(exps <= exponent_max))
    n_var = int(np.sum(var <= stability_max))
    passed = n_exp == len(rows) and n_var == len(rows)
    summary = (f"{n_exp}/{len(rows)} modes with exponent <= {exponent_max} (worst {exps.max():.2f}, "
               f"median {np.median(exps):.2f}); {n_var}/{len(rows)} with residual*r^6 variation <= "
               f"{stability_max}x (median {np.median(var):.3g}x)")
    return passed, summary, {"rows": rows}


# ----------------------------------------------------------------------------
# 3. hat model
# ----------------------------------------------------------------------------

@_timed(3, "hat-model structure")
def check_hat_structure(r_values=(100.0, 400.0), N=4000, tol=1e-3, beta_max=1e-4, time_limit=120.0):
    t0 = time.perf_counter()
    worst_eig, worst_beta, dims_ok, count = 0.0, 0.0, True, 0
    for r in r_values:
        c = GlobalConstants(r=r)
        p = build_profiles(c)
        fr = c.floor_r
        for k in (int(r) - 8, int(r) - 4, int(r), int(r) + 4, int(r) + 8):
            dims_ok &= verify_kernel_dimension(p, c, k, N) == multiplicity(c) == 2 * fr + 1
            for n in (0, -fr // 2, -fr, -3 * fr // 2, -2 * fr):
                pr = hat_discrete_check(p, c, k, n, N)
                worst_eig = max(worst_eig, abs(pr.lam - (0.5 * r - k / c.V)))
                worst_beta = max(worst_beta, pr.beta_l2)
                count += 1
    elapsed = time.perf_counter() - t0
    return (dims_ok and worst_eig <= tol and worst_beta <= beta_max and elapsed <= time_limit,
            f"{elapsed:.0f} s (<= {time_limit:.0f}); kernel dimension 2[r]+1 {'exact' if dims_ok else 'WRONG'} for 5 k at r={list(r_values)}; "
            f"{count} sectors, max eigenvalue error {worst_eig:.2e} (<= {tol:g}), "
            f"max beta L2 {worst_beta:.2e} (<= {beta_max:g})",
            {"dims_ok": bool(dims_ok), "max_eig_err": worst_eig, "max_beta_l2": worst_beta,
             "seconds": elapsed})


# ----------------------------------------------------------------------------
# 4. Vafa-Witten distribution
# ----------------------------------------------------------------------------

@_timed(4, "uniform distribution step")
def check_vafa_witten(r_values=(100.0, 100.3, 200.0, 400.0), fit_r=(100.0, 200.0, 400.0), rel_tol=0.10):
    rows, ok = [], True
    for r in r_values:
        c = GlobalConstants(r=r)
        res = vafa_witten_check(hat_spectrum(c), c)     # raises StepMismatch on any non-zero deviation
        ok &= res.max_deviation == 0 and res.ladder_matches and len(res.deviations) > 0
        rows.append({"r": r, "step": res.step, "checked": len(res.deviations),
                     "ladder_rows": len(res.ladder), "ladder_matches": res.ladder_matches})
    fit = step_growth_fit(2.0, 0.005, fit_r)
    ok &= fit.relative_error <= rel_tol
    steps = ", ".join(f"r={row['r']}: f={row['step']} over {row['checked']} j" for row in rows)
    return ok, (f"exact zero deviation ({steps}); ladders match; fitted slope {fit.slope:.4f} vs "
                f"quadrature {fit.predicted_slope:.4f} (rel. err {fit.relative_error:.2%} <= {rel_tol:.0%})"), \
        {"rows": rows, "slope": fit.slope, "predicted_slope": fit.predicted_slope, "steps": fit.steps}


# ----------------------------------------------------------------------------
# 5. spectral flow
# ----------------------------------------------------------------------------

@_timed(5, "spectral-flow leading term")
def check_spectral_flow(R_values=(100.0, 200.0, 400.0), N=1000, factor=3.0, time_limit=600.0, jobs=1):
    p = build_profiles(GlobalConstants())
    rows = []
    for R in R_values:
        t0 = time.perf_counter()
        fl = track_spectral_flow(p, R, N=N, jobs=jobs)
        rows.append({"R": R, "flow": fl.flow, "predicted": fl.predicted, "lattice": fl.lattice_count,
                     "straddling": fl.straddling, "scaled_residual": abs(fl.residual) / R**1.5,
                     "lattice_agrees": fl.lattice_agrees, "losses": len(fl.tracking_losses),
                     "seconds": time.perf_counter() - t0})
    base = rows[0]["scaled_residual"]
    ok = all(row["scaled_residual"] <= factor * base and row["lattice_agrees"] and row["losses"] == 0
             for row in rows)
    ok &= rows[-1]["seconds"] <= time_limit
    desc = "; ".join(f"R={row['R']:g}: SF={row['flow']} lattice={row['lattice']} (+-{row['straddling']}) "
                     f"|SF-pred|/R^1.5={row['scaled_residual']:.3f}" for row in rows)
    return ok, f"{desc}; R={rows[-1]['R']:g} took {rows[-1]['seconds']:.0f} s (<= {time_limit:.0f})", \
        {"rows": rows}


# ----------------------------------------------------------------------------
# 6. eta bounds
# ----------------------------------------------------------------------------

@_timed(6, "eta bounds")
def check_eta_bounds(r_values=(100.0, 200.0, 400.0, 800.0), N=2000, factor=3.0, margin=C_MARGIN, jobs=1):
    """Scaled eta sums on both models relative to their r = 100 values.

    At integer r the hat spectrum r/2 - k/V is symmetric about zero with a
    constant multiplicity, so both hat sums vanish exactly and the hat bound
    holds as 0 <= 0; the summary says so rather than hiding it.
    """
    p = build_profiles(GlobalConstants())
    rows, antisym = [], True
    for r in r_values:
        ck = mode_sweep_values(p, r, N, window=symmetric_window(r, "eta"), margin=margin, jobs=jobs)
        c = GlobalConstants(r=r)
        hat = hat_spectrum(c, symmetric_window(r, "eta"))
        row = {"r": r, "ck_eta_ddot": eta_ddot(ck, r) / math.log(r),
               "hat_eta_ddot": eta_ddot(hat, r) / math.log(r), "hat_eta_dot": eta_dot(hat, r) / r,
               "ck_entries": len(ck)}
        for led in (ck, hat):
            antisym &= eta_dot(led.negated(), r) == -eta_dot(led, r)
            antisym &= eta_ddot(led.negated(), r) == -eta_ddot(led, r)
        rows.append(row)
    base = rows[0]
    ok = antisym
    for key in ("ck_eta_ddot", "hat_eta_ddot", "hat_eta_dot"):
        ok &= all(abs(row[key]) <= factor * abs(base[key]) for row in rows[1:])
    hat_zero = all(row["hat_eta_ddot"] == 0 and row["hat_eta_dot"] == 0 for row in rows)
    ck_desc = ", ".join(f"{row['ck_eta_ddot']:.3g}" for row in rows)
    return ok, (f"ck |eta''|/log r = [{ck_desc}] at r={list(r_values)} (bound 3x first); hat sums "
                f"{'identically 0 (symmetric spectrum at integer r)' if hat_zero else 'non-zero'}; "
                f"negation antisymmetry {'exact' if antisym else 'BROKEN'}"), {"rows": rows}


# ----------------------------------------------------------------------------
# 7. solver equivalence
# ----------------------------------------------------------------------------

@_timed(7, "oracle equivalence")
def check_oracle_equivalence(r=100.0, N=400, count=20, seed=20240607, rtol=1e-9):
    p = build_profiles(GlobalConstants(r=r))
    modes = sweep_modes(p, r)
    rng = np.random.default_rng(seed)
    pick = rng.choice(len(modes), size=count, replace=False)
    window = symmetric_window(r)
    worst, compared, mismatched = 0.0, 0, 0
    for i in pick:
        op = assemble_radial_operator(p, modes[i], r, N)
        w_si, _ = op.eigenpairs(window, "shift_invert")
        w_d, _ = op.eigenpairs(window, "dense")
        if w_si.size != w_d.size:
            mismatched += 1
            continue
        if w_d.size:
            worst = max(worst, float(np.max(np.abs(w_si - w_d) / np.maximum(np.abs(w_d), 1.0))))
            compared += int(w_d.size)
    ok = mismatched == 0 and worst <= rtol
    return ok, (f"{count} random modes at N={N}: {compared} window eigenvalues, max relative difference "
                f"{worst:.2e} (<= {rtol:g}), count mismatches {mismatched}"), \
        {"max_rel": worst, "compared": compared, "mismatched": mismatched}


# ----------------------------------------------------------------------------
# 8. certifier
# ----------------------------------------------------------------------------

def planted_problem(rng, n=50, L=None, noise=1e-5):
    """Symmetric H with known spectrum and L perturbed eigenvectors of a cluster."""
    L = int(rng.integers(1, 5)) if L is None else L
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    d = np.sort(rng.uniform(-10, 10, n))
    start = int(rng.integers(0, n - L + 1))
    d[start:start + L] = d[start] + np.sort(rng.uniform(0, 0.05, L))
    d = np.sort(d)
    H = (Q * d) @ Q.T
    H = 0.5 * (H + H.T)
    idx = np.arange(start, start + L)
    d_true = np.linalg.eigvalsh(H)[idx]
    vecs = Q[:, idx] + noise * rng.standard_normal((n, L))
    mus = d[idx] + noise * rng.standard_normal(L)
    return H, vecs, mus, d_true


def tight_eps(H, vecs, mus):
    """Smallest (eps1, eps2) for which the hypotheses of the certifier hold."""
    G0 = vecs.T @ vecs
    off = np.abs(G0 - np.diag(np.diag(G0)))
    eps2 = max(float(np.max(np.abs(np.diag(G0) - 1))), float(off.sum(axis=1).max()), 1e-15)
    HV = H @ vecs
    R = HV - vecs * mus[None, :]
    eps1 = float(np.max(np.sum(R * R, axis=0)))
    if len(mus) > 1:
        X = vecs.T @ HV
        eps1 = max(eps1, float(_cross_sup(G0, X + X.T, HV.T @ HV, mus.min(), mus.max()).max()))
    eps1 = max(eps1, eps2 * float(mus.max() - mus.min()) ** 2)
    return 1.0001 * eps1, 1.0001 * eps2


@_timed(8, "approximate-eigenvalue certifier")
def check_certifier(trials=100, seed=7):
    rng = np.random.default_rng(seed)
    certified, worst = 0, 0.0
    for _ in range(trials):
        H, vecs, mus, d_true = planted_problem(rng)
        eps1, eps2 = tight_eps(H, vecs, mus)
        out = np.array(certify_eigenvalues(H, list(zip(vecs.T, mus)), eps1, eps2))
        dist = float(np.max(np.abs(out - mus)) / (4 * math.sqrt(eps1)))
        worst = max(worst, dist)
        certified += int(dist <= 1.0 and np.allclose(np.sort(out), d_true, atol=1e-12, rtol=0))
    named = _violation_names(rng)
    ok = certified == trials and named == ["i", "ii", "iii", "iv"]
    return ok, (f"{certified}/{trials} planted trials certified (max |lambda-mu|/(4 sqrt eps1) = {worst:.3f}); "
                f"violating inputs rejected naming hypotheses {named}"), \
        {"certified": certified, "worst_ratio": worst, "named": named}


def _violation_names(rng) -> list:
    """Feed one input violating each hypothesis in turn; record the names reported."""
    H, vecs, mus, _ = planted_problem(rng, L=2)
    eps1, eps2 = tight_eps(H, vecs, mus)
    pairs = list(zip(vecs.T, mus))
    w, Q = np.linalg.eigh(H)
    # three cluster eigenvectors sharing one contamination along a far
    # eigenvector: each residual fits eps1, but each row of cross residuals
    # sums to about twice eps1
    a = 1e-3
    far = int(np.argmax(np.abs(w - w[20])))
    shared = np.column_stack([Q[:, i] + a * Q[:, far] for i in (20, 21, 22)])
    shared_mu = w[20:23]
    e1, e2 = tight_eps(H, shared, shared_mu)
    own = max(float(np.sum((H @ shared[:, i] - shared_mu[i] * shared[:, i]) ** 2)) for i in range(3))
    e1_own = 1.0001 * max(own, e2 * float(np.ptp(shared_mu)) ** 2)
    cases = [
        (pairs, eps1, 0.3),                                      # (i)  eps2 outside (0, 1/4)
        ([(2.0 * vecs[:, 0], mus[0])], eps1, 0.2),              # (ii) norm near 4
        ([(vecs[:, 0], mus[0] + 1e-2)], eps1, eps2),             # (iii) shifted mu, residual too big
        (list(zip(shared.T, shared_mu)), e1_own, e2),            # (iv) cross residuals
    ]
    names = []
    for args in cases:
        try:
            certify_eigenvalues(H, *args)
            names.append(None)
        except HypothesisViolation as exc:
            names.append(exc.hypothesis)
    return names


# ----------------------------------------------------------------------------
# 9. partition
# ----------------------------------------------------------------------------

@_timed(9, "interval partition")
def check_partition(r=400.0, N=2000, margin=C_MARGIN, jobs=1):
    p = build_profiles(GlobalConstants())
    ck = mode_sweep_values(p, r, N, margin=margin, jobs=jobs)
    c = GlobalConstants(r=r)
    hat = hat_spectrum(c)
    part = build_partition([ck, hat], r)   # re-scan inside; raises PartitionFailure on any violation
    dev = max(abs(nu - j) for j, nu in zip(part.js, part.nus))
    free = part.min_gap > part.sub_length
    ok = free and dev <= 0.1 and len(part.nus) == len(part.js)
    return ok, (f"{len(part.nus)} cut points at r={r:g} from {len(ck)} ck + {len(hat)} hat entries; "
                f"max |nu_j - j| = {dev:.2e} (<= 0.1); min distance to spectrum {part.min_gap:.2e} "
                f"> sub-length {part.sub_length:.2e}; re-scan passed"), \
        {"nus": part.nus, "max_dev": dev, "min_gap": part.min_gap, "sub_length": part.sub_length,
         "density_constant": part.density_constant}


CHECKS = {
    1: check_flat_zone,
    2: check_perturbative_law,
    3: check_hat_structure,
    4: check_vafa_witten,
    5: check_spectral_flow,
    6: check_eta_bounds,
    7: check_oracle_equivalence,
    8: check_certifier,
    9: check_partition,
}


def run_checks(numbers: Optional[list] = None, jobs: int = 1) -> list:
    out = []
    for num in numbers or sorted(CHECKS):
        fn = CHECKS[num]
        out.append(fn(jobs=jobs) if num in (5, 6, 9) else fn())
    return out
