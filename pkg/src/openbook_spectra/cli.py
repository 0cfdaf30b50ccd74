"""Batch command line: one subcommand per stage, each writing a run manifest.

Every command reads the same INI config (``--config``), may override the
list of r values (``--r``, repeatable), the output directory (``--out``) and
the worker count (``--jobs``).  Outputs are CSV with 17 significant digits
and JSON; the manifest lists each file with its sha256.  Exit codes: 0 on
success, 2 on a validation error, 3 on a numerical failure.  Log verbosity
comes from the OPENBOOK_SPECTRA_LOG environment variable.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import sys
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Optional

import click
import numpy as np

from . import __version__
from .ck_model import mode_sweep_pairs
from .config import ExperimentConfig, load_config
from .errors import ConfigError, SpectraError
from .hat_model import gaussian_distance, hat_spectrum, kernel_element, kernel_residual, verify_kernel_dimension
from .ledger import symmetric_window
from .profiles import TABLE_COLUMNS, build_profiles, conformal_volume
from .spectral_stats import eta_flow_report, hat_volume, track_spectral_flow

log = logging.getLogger("openbook_spectra")

LOG_ENV = "OPENBOOK_SPECTRA_LOG"
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC = 0, 2, 3


def _setup_logging():
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def fmt17(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return "" if x is None else str(x)


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


class Run:
    """Collects outputs and stage timings for one command; writes the manifest."""

    def __init__(self, command: str, cfg: ExperimentConfig, out: Path):
        self.command = command
        self.cfg = cfg
        self.out = out
        self.outputs = {}
        self.timings = {}
        self.stage = None
        out.mkdir(parents=True, exist_ok=True)

    @contextmanager
    def step(self, name: str):
        self.stage = name
        t0 = time.perf_counter()
        log.info("%s: %s", self.command, name)
        yield
        self.timings[name] = time.perf_counter() - t0
        self.stage = None

    def _register(self, path: Path) -> Path:
        self.outputs[path.name] = sha256_file(path)
        return path

    def write_csv(self, name: str, header, rows) -> Path:
        path = self.out / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt17(v) for v in row])
        return self._register(path)

    def write_json(self, name: str, payload) -> Path:
        path = self.out / name
        path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
        return self._register(path)

    def write_text(self, name: str, text: str) -> Path:
        path = self.out / name
        path.write_text(text)
        return self._register(path)

    def manifest(self, status: str = "ok", error: Optional[str] = None) -> Path:
        payload = {
            "command": self.command,
            "tool_version": __version__,
            "config_sha256": self.cfg.digest(),
            "status": status,
            "failed_stage": self.stage if status != "ok" else None,
            "error": error,
            "timings_s": self.timings,
            "outputs": self.outputs,
        }
        path = self.out / f"manifest_{self.command}.json"
        path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
        return path


# ----------------------------------------------------------------------------
# click plumbing
# ----------------------------------------------------------------------------

def common_options(fn):
    fn = click.option("--jobs", type=int, default=None, help="Worker processes (overrides parallelism).")(fn)
    fn = click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
                      help="Output directory (created if missing).")(fn)
    fn = click.option("--r", "r_override", type=float, multiple=True,
                      help="Override the r values of this command; repeatable.")(fn)
    fn = click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                      help="INI configuration file; defaults are used when omitted.")(fn)
    return fn


def _prepare(command, config_path, out_dir, jobs):
    cfg = load_config(config_path)
    if out_dir is not None:
        cfg = cfg.replace(output_dir=str(out_dir))
    if jobs is not None:
        cfg = cfg.replace(parallelism=int(jobs))
    return cfg, Run(command, cfg, Path(cfg.output_dir))


def _execute(command, config_path, out_dir, jobs, body):
    """Run ``body(cfg, run)`` and map failures to exit codes with a manifest."""
    try:
        cfg, run = _prepare(command, config_path, out_dir, jobs)
    except (ConfigError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    try:
        body(cfg, run)
    except (ConfigError, ValueError) as exc:
        run.manifest("failed", f"{type(exc).__name__}: {exc}")
        click.echo(f"error in stage {run.stage!r}: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    except (SpectraError, ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        run.manifest("failed", f"{type(exc).__name__}: {exc}")
        click.echo(f"numerical failure in stage {run.stage!r}: {exc}", err=True)
        sys.exit(getattr(exc, "exit_code", EXIT_NUMERIC))
    except Exception as exc:  # unexpected: still leave a manifest naming the stage
        run.manifest("failed", f"{type(exc).__name__}: {exc}")
        raise
    path = run.manifest()
    click.echo(f"{command}: {len(run.outputs)} outputs in {run.out} (manifest {path.name})")


@click.group()
@click.version_option(__version__)
def main():
    """Spectral statistics of the open-book model operators."""
    _setup_logging()


# ----------------------------------------------------------------------------
# profiles
# ----------------------------------------------------------------------------

@main.command()
@common_options
@click.option("--print-defaults", is_flag=True, help="Print the default configuration and exit.")
@click.option("--rows", type=int, default=401, show_default=True, help="Rows of the profile table.")
def profiles(config_path, r_override, out_dir, jobs, print_defaults, rows):
    """Profile tables and validation report."""
    if print_defaults:
        click.echo(ExperimentConfig().dumps(), nl=False)
        return

    def body(cfg, run):
        report = []
        for r in r_override or cfg.r_values:
            with run.step(f"build r={r:g}"):
                c = cfg.constants(r)
                p = build_profiles(c)
            with run.step(f"table r={r:g}"):
                tbl = p.table(rows)
                run.write_csv(f"profiles_r{r:g}.csv", TABLE_COLUMNS, tbl.tolist())
                report.append({"r": r, "sigma": c.sigma, "floor_r": c.floor_r, "rho_V": p.rho_V(),
                               "conformal_volume": conformal_volume(p), "hat_volume": hat_volume(p),
                               "flat_zone": [1 - c.flat_halfwidth, 1 + c.flat_halfwidth],
                               "constraints": "ok"})
        run.write_json("profiles_report.json", {"profiles": report})

    _execute("profiles", config_path, out_dir, jobs, body)


# ----------------------------------------------------------------------------
# ck
# ----------------------------------------------------------------------------

CK_COLUMNS = ["model", "k", "m", "rho_turn", "gamma", "lambda", "residual", "beta_l2", "flag"]


@main.command()
@common_options
def ck(config_path, r_override, out_dir, jobs):
    """Per-r ck ledgers (one CSV per r)."""

    def body(cfg, run):
        p = build_profiles(cfg.constants(cfg.r_values[0]))
        for r in r_override or cfg.r_values:
            with run.step(f"sweep r={r:g}"):
                pairs = mode_sweep_pairs(p, r, cfg.grid_N, symmetric_window(r, cfg.window_preset),
                                         cfg.margin, jobs=cfg.parallelism)
                pairs.sort(key=lambda q: (q.lam, q.mode.k, q.mode.m))
                rows = [("ck", q.mode.k, q.mode.m, q.mode.rho_turn, q.mode.gamma, q.lam, q.residual_norm,
                         q.beta_l2, q.flag) for q in pairs]
                run.write_csv(f"ck_ledger_r{r:g}.csv", CK_COLUMNS, rows)

    _execute("ck", config_path, out_dir, jobs, body)


# ----------------------------------------------------------------------------
# hat
# ----------------------------------------------------------------------------

@main.command()
@common_options
@click.option("--diag-k", type=int, default=3, show_default=True,
              help="Number of k values (spread over the window) with kernel diagnostics.")
def hat(config_path, r_override, out_dir, jobs, diag_k):
    """Hat ledger plus kernel diagnostics."""

    def body(cfg, run):
        diags = []
        for r in r_override or cfg.r_values:
            c = cfg.constants(r)
            with run.step(f"ledger r={r:g}"):
                led = hat_spectrum(c, symmetric_window(r, cfg.window_preset))
                run.write_csv(f"hat_ledger_r{r:g}.csv", ["model", "k", "lambda", "multiplicity"],
                              [("hat", e.provenance.k, e.eigenvalue, e.multiplicity) for e in led.entries])
            with run.step(f"kernel r={r:g}"):
                p = build_profiles(c)
                ks = [e.provenance.k for e in led.entries]
                pick = sorted({ks[i] for i in np.linspace(0, len(ks) - 1, min(diag_k, len(ks))).astype(int)})
                for k in pick:
                    dim = verify_kernel_dimension(p, c, k, cfg.grid_N)
                    n_mid = -c.floor_r
                    el = kernel_element(p, c, k, n_mid, cfg.grid_N)
                    diags.append({"r": r, "k": k, "kernel_dimension": dim, "expected": 2 * c.floor_r + 1,
                                  "n": n_mid, "rho_turn": el.rho_turn,
                                  "gaussian_distance": gaussian_distance(el, c),
                                  "kernel_residual": kernel_residual(el, p, c)})
        run.write_json("hat_kernel_diagnostics.json", {"diagnostics": diags})

    _execute("hat", config_path, out_dir, jobs, body)


# ----------------------------------------------------------------------------
# perturb
# ----------------------------------------------------------------------------

@main.command()
@common_options
def perturb(config_path, r_override, out_dir, jobs):
    """Perturbative eigenvalues against Richardson-extrapolated numerics."""
    from .acceptance import GAP_TARGETS, _pick_mode
    from .perturbation import numeric_eigenvalue, perturbative_mode

    def body(cfg, run):
        p = build_profiles(cfg.constants(cfg.r_values[0]))
        r_values = list(r_override or cfg.r_values)
        targets = list(GAP_TARGETS)[: cfg.perturb_modes]
        J = cfg.perturb_order
        rows, fits = [], []
        with run.step("compare"):
            for tgt in targets:
                gaps = []
                for r in r_values:
                    md = _pick_mode(p, r, tgt)
                    sol = perturbative_mode(p, md, r, order=J)
                    lam, _ = numeric_eigenvalue(p, md, r, cfg.perturb_h)
                    mus = [sol.mu_truncated(j) for j in range(J + 1)]
                    gaps.append(abs(lam - mus[-1]))
                    rows.append([tgt, r, md.k, md.m, md.rho_turn, md.gamma, lam] + mus + [gaps[-1]])
                slope = float(np.polyfit(np.log(r_values), np.log(np.maximum(gaps, 1e-300)), 1)[0]) \
                    if len(r_values) > 1 else float("nan")
                fits.append((tgt, slope))
        header = ["target_rho", "r", "k", "m", "rho_turn", "gamma", "lambda_num"] + \
            [f"mu_{j}" for j in range(J + 1)] + ["gap"]
        run.write_csv("perturb_table.csv", header, rows)
        run.write_csv("perturb_exponents.csv", ["target_rho", "decay_exponent"], fits)

    _execute("perturb", config_path, out_dir, jobs, body)


# ----------------------------------------------------------------------------
# eta
# ----------------------------------------------------------------------------

@main.command()
@common_options
@click.option("--flow/--no-flow", default=False, help="Also track the spectral flow up to each r.")
def eta(config_path, r_override, out_dir, jobs, flow):
    """Eta sums, uniform-distribution step and interval partition per r."""
    from .ck_model import mode_sweep_values

    def body(cfg, run):
        p = build_profiles(cfg.constants(cfg.r_values[0]))
        for r in r_override or cfg.eta_r_values:
            c = cfg.constants(r)
            with run.step(f"ck values r={r:g}"):
                ck_led = mode_sweep_values(p, r, cfg.eta_N, symmetric_window(r, "existence"), cfg.margin,
                                           jobs=cfg.parallelism)
            hat_led = hat_spectrum(c, symmetric_window(r, "existence"))
            fl = None
            if flow:
                with run.step(f"flow r={r:g}"):
                    fl = track_spectral_flow(p, r, N=cfg.flow_N, jobs=cfg.parallelism)
            with run.step(f"report r={r:g}"):
                rep = eta_flow_report(c, ck_led, hat_led, fl)
                run.write_json(f"eta_report_r{r:g}.json", rep.to_json())

    _execute("eta", config_path, out_dir, jobs, body)


# ----------------------------------------------------------------------------
# sflow
# ----------------------------------------------------------------------------

@main.command()
@common_options
def sflow(config_path, r_override, out_dir, jobs):
    """Spectral-flow sweep with the residual fit against R."""

    def body(cfg, run):
        p = build_profiles(cfg.constants(cfg.r_values[0]))
        R_values = list(r_override or cfg.flow_R_values)
        rows = []
        for R in R_values:
            with run.step(f"track R={R:g}"):
                fl = track_spectral_flow(p, R, N=cfg.flow_N, jobs=cfg.parallelism)
            run.write_csv(f"sflow_crossings_R{R:g}.csv", ["k", "m", "gamma", "r_cross", "slope"],
                          [(x.k, x.m, x.gamma, x.r_cross, x.slope)
                           for x in sorted(fl.crossings, key=lambda x: (x.r_cross, x.k, x.m))])
            rows.append((R, fl.flow, fl.predicted, fl.residual, abs(fl.residual) / R**1.5, fl.lattice_count,
                         fl.straddling, fl.lattice_agrees, fl.tracked_positive, fl.tracked_negative, fl.pre_grid,
                         len(fl.tracking_losses)))
        run.write_csv("sflow_summary.csv", ["R", "flow", "predicted", "residual", "residual_over_R1.5",
                                            "lattice_count", "straddling", "lattice_agrees", "positive",
                                            "negative", "pre_grid", "tracking_losses"], rows)
        fit = {"R": R_values, "residuals": [row[3] for row in rows]}
        if len(rows) > 1 and all(row[3] != 0 for row in rows):
            fit["exponent"] = float(np.polyfit(np.log(R_values), np.log([abs(row[3]) for row in rows]), 1)[0])
        run.write_json("sflow_fit.json", fit)

    _execute("sflow", config_path, out_dir, jobs, body)


# ----------------------------------------------------------------------------
# report
# ----------------------------------------------------------------------------

@main.command()
@common_options
@click.option("--criteria", default="1,2,3,4,5,6,7,8,9", show_default=True,
              help="Comma-separated acceptance checks to run.")
def report(config_path, r_override, out_dir, jobs, criteria):
    """Run the acceptance checks; write one JSON and a text summary table."""
    from .acceptance import CHECKS

    def body(cfg, run):
        try:
            nums = [int(x) for x in criteria.split(",") if x.strip()]
        except ValueError:
            raise ValueError(f"--criteria must be comma-separated integers, got {criteria!r}") from None
        unknown = [n for n in nums if n not in CHECKS]
        if unknown:
            raise ValueError(f"unknown criteria {unknown}; known: {sorted(CHECKS)}")
        results = []
        for n in nums:
            with run.step(f"criterion {n}"):
                fn = CHECKS[n]
                results.append(fn(jobs=cfg.parallelism) if n in (5, 6, 9) else fn())
        lines = [res.line() for res in results]
        lines.append(f"{sum(r.passed for r in results)}/{len(results)} criteria passed")
        run.write_text("report.txt", "\n".join(lines) + "\n")
        run.write_json("report.json", {"criteria": [
            {"number": res.number, "name": res.name, "passed": res.passed, "summary": res.summary,
             "details": res.details} for res in results]})
        for line in lines:
            click.echo(line)

    _execute("report", config_path, out_dir, jobs, body)


if __name__ == "__main__":
    main()
