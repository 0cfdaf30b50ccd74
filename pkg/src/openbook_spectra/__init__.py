"""Spectra of the open-book model Dirac operators: profiles, per-mode radial
solvers, the hat (mapping-torus) model, perturbative eigensections and the
spectral statistics built on them."""

__version__ = "0.1.0"

from .ck_model import ModeIndex, RadialEigenpair, mode_sweep, mode_sweep_values, solve_mode  # noqa: E402
from .config import ExperimentConfig, load_config  # noqa: E402
from .hat_model import hat_spectrum  # noqa: E402
from .ledger import LedgerEntry, SpectrumLedger, symmetric_window  # noqa: E402
from .profiles import GlobalConstants, ProfileSet, build_profiles  # noqa: E402

__all__ = [
    "__version__", "GlobalConstants", "ProfileSet", "build_profiles", "ModeIndex", "RadialEigenpair",
    "solve_mode", "mode_sweep", "mode_sweep_values", "hat_spectrum", "LedgerEntry", "SpectrumLedger",
    "symmetric_window", "ExperimentConfig", "load_config",
]
