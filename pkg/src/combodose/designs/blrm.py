"""Bayesian logistic regression model for combinations (model-based comparator).

Five parameters: a slope/intercept pair per drug (sampled on the log scale)
plus an interaction term on the product of scaled doses. Escalation applies
the overdose-control principle: only combinations whose posterior
probability of exceeding the overdose cut stays below the threshold may be
dosed, and among those the design maximises the posterior mass of the
target band. The MTC additionally requires at least six treated patients.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..core import (
    AdmissibilityMode,
    Combo,
    DesignDecision,
    DoseGrid,
    TrialState,
    admissible_set,
)
from .samplers import _prep_seed, logistic_combo_mcmc

_TIE_TOL = 1e-12
RHAT_WARN = 1.05

#: documented default operational prior: alpha's centred so that a single
#: agent at its reference dose carries odds 0.25, unit-lognormal spread;
#: slopes centred at 1 and no prior interaction.
DEFAULT_PRIORS: dict[str, tuple[float, float]] = {
    "log_alpha1": (math.log(0.25), 1.0),
    "log_alpha2": (math.log(0.25), 1.0),
    "log_beta1": (0.0, 1.0),
    "log_beta2": (0.0, 1.0),
    "eta": (0.0, 1.0),
}

_PRIOR_ORDER = ("log_alpha1", "log_alpha2", "log_beta1", "log_beta2", "eta")


def blrm_prob(
    alpha1: float,
    alpha2: float,
    beta1: float,
    beta2: float,
    eta: float,
    da: float,
    db: float,
) -> float:
    """Toxicity probability of the five-parameter model at scaled doses."""
    if da <= 0 or db <= 0:
        raise ValueError("scaled doses must be positive")
    log_odds = (
        math.log(
            alpha1 * da**beta1 + alpha2 * db**beta2 + alpha1 * alpha2 * da**beta1 * db**beta2
        )
        + eta * da * db
    )
    log_odds = min(max(log_odds, -700.0), 700.0)
    return 1.0 / (1.0 + math.exp(-log_odds))


@dataclass(frozen=True)
class BlrmParams:
    """Normal priors on the five parameters, dose scaling, and EWOC settings."""

    priors: dict[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_PRIORS)
    )
    reference_doses: tuple[float, float] = (300.0, 300.0)
    epsilon: float = 0.25
    target_band: tuple[float, float] = (0.16, 0.33)
    overdose_cut: float = 0.33
    burn_in: int = 4000
    iterations: int = 16000

    def __post_init__(self) -> None:
        missing = set(_PRIOR_ORDER) - set(self.priors)
        if missing:
            raise ValueError(f"priors missing entries: {sorted(missing)}")
        if any(sd <= 0 for _, sd in self.priors.values()):
            raise ValueError("prior sds must be positive")
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0,1]")

    def mu_sd(self) -> tuple[np.ndarray, np.ndarray]:
        mu = np.array([self.priors[k][0] for k in _PRIOR_ORDER])
        sd = np.array([self.priors[k][1] for k in _PRIOR_ORDER])
        return mu, sd


PosteriorFn = Callable[[TrialState, int], tuple[np.ndarray, np.ndarray, np.ndarray, float]]


class BlrmDesign:
    """EWOC-constrained escalation under the combination logistic model."""

    name = "blrm"
    mode = AdmissibilityMode.EXTENDED

    def __init__(
        self,
        grid: DoseGrid,
        params: BlrmParams | None = None,
        posterior_provider: PosteriorFn | None = None,
    ) -> None:
        self.grid = grid
        self.params = params or BlrmParams()
        ref_a, ref_b = self.params.reference_doses
        self._ld_a = np.log(np.asarray(grid.doses_a) / ref_a)
        self._ld_b = np.log(np.asarray(grid.doses_b) / ref_b)
        scaled_a = np.asarray(grid.doses_a) / ref_a
        scaled_b = np.asarray(grid.doses_b) / ref_b
        self._dd = np.outer(scaled_a, scaled_b)
        self._posterior_provider = posterior_provider

    def elimination_mask(self, state: TrialState) -> None:
        return None  # EWOC is re-evaluated from the posterior each decision

    def posterior(
        self, state: TrialState, seed: int
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
        """Per-cell (mean pi, P(pi > cut), P(band), r-hat)."""
        if self._posterior_provider is not None:
            return self._posterior_provider(state, seed)
        mu, sd = self.params.mu_sd()
        lo, hi = self.params.target_band
        means, p_over, p_band, rhat = logistic_combo_mcmc(
            state.n.astype(np.float64),
            state.y.astype(np.float64),
            self._ld_a,
            self._ld_b,
            self._dd,
            mu,
            sd,
            lo,
            hi,
            self.params.burn_in,
            self.params.iterations,
            _prep_seed(seed),
            0.6,
        )
        if rhat > RHAT_WARN:
            warnings.warn(
                f"logistic sampler split r-hat {rhat:.3f} exceeds {RHAT_WARN}",
                RuntimeWarning,
                stacklevel=2,
            )
        return means, p_over, p_band, rhat

    def decide(self, state: TrialState, rng: np.random.Generator) -> DesignDecision:
        eps = self.params.epsilon
        _, p_over, p_band, _ = self.posterior(state, int(rng.integers(2**31 - 1)))
        cands = sorted(
            c
            for c in admissible_set(state.current, self.grid, self.mode, state.eliminated)
            if eps >= 1.0 or p_over[c.i - 1, c.j - 1] < eps
        )
        if not cands:
            return DesignDecision.terminate()
        scores = [p_band[c.i - 1, c.j - 1] for c in cands]
        best = max(scores)
        ties = [c for c, s in zip(cands, scores) if s >= best - _TIE_TOL]
        if len(ties) == 1:
            return DesignDecision.continue_at(ties[0])
        return DesignDecision.continue_at(ties[rng.integers(len(ties))])

    def select_mtc(
        self, state: TrialState, rng: np.random.Generator, min_patients: int = 6
    ) -> Combo | None:
        if state.terminated:
            return None
        eps = self.params.epsilon
        _, p_over, p_band, _ = self.posterior(state, int(rng.integers(2**31 - 1)))
        cands = sorted(
            c
            for c in self.grid.combos()
            if state.n[c.i - 1, c.j - 1] >= min_patients
            and (eps >= 1.0 or p_over[c.i - 1, c.j - 1] < eps)
        )
        if not cands:
            return None
        scores = [p_band[c.i - 1, c.j - 1] for c in cands]
        best = max(scores)
        ties = [c for c, s in zip(cands, scores) if s >= best - _TIE_TOL]
        if len(ties) == 1:
            return ties[0]
        return ties[rng.integers(len(ties))]
