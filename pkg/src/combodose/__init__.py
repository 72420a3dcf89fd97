"""combodose: dual-agent phase-I dose-combination designs and trial tooling."""

from .core import (
    AdmissibilityMode,
    Combo,
    ComboClass,
    DesignDecision,
    DoseGrid,
    Scenario,
    TrialConfig,
    TrialState,
    admissible_set,
    classify_combo,
    record_cohort,
)
from .designs import DESIGN_DEFAULTS, DESIGN_IDS, make_design
from .engine import OperatingCharacteristics, run_trial, simulate
from .scenarios import bundled_scenarios, get_scenario, load_scenarios
from .stats import BetaParams, RngStream, beta_cdf, geometric_mean, isotonic_2d, posterior_update

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityMode",
    "Combo",
    "ComboClass",
    "DesignDecision",
    "DoseGrid",
    "Scenario",
    "TrialConfig",
    "TrialState",
    "admissible_set",
    "classify_combo",
    "record_cohort",
    "DESIGN_DEFAULTS",
    "DESIGN_IDS",
    "make_design",
    "OperatingCharacteristics",
    "run_trial",
    "simulate",
    "bundled_scenarios",
    "get_scenario",
    "load_scenarios",
    "BetaParams",
    "RngStream",
    "beta_cdf",
    "geometric_mean",
    "isotonic_2d",
    "posterior_update",
    "__version__",
]
