"""Surface-free escalation via the ratio parametrisation.

The toxicity surface is written as one minus a product of survival ratios:
one overall ratio for the lowest combination, one per additional row and one
per additional column. Ratios live in (0,1), which makes every sampled
surface monotone in the partial order by construction. Posterior summaries
come from a compiled random-walk sampler; escalation picks the admissible
combination with posterior mean closest to the target, subject to an
overdose bar on the exceedance probability.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import (
    AdmissibilityMode,
    Combo,
    DesignDecision,
    DoseGrid,
    TrialState,
    admissible_set,
)
from .samplers import _prep_seed, ratio_surface_mcmc

_TIE_TOL = 1e-12
RHAT_WARN = 1.05


def surface_from_ratios(
    theta: float, thetas: Sequence[float], taus: Sequence[float], combo: Combo
) -> float:
    """Toxicity probability implied by the ratio factorisation at one combo.

    ``thetas`` are the row ratios for levels 2..I and ``taus`` the column
    ratios for levels 2..J; the combination (i, j) multiplies the first i-1
    row ratios and j-1 column ratios into the base survival ``theta``.
    """
    vals = [theta, *thetas, *taus]
    if any(not 0 < v < 1 for v in vals):
        raise ValueError("all ratios must lie in (0,1)")
    if combo.i - 1 > len(thetas) or combo.j - 1 > len(taus):
        raise ValueError(f"combo {combo} outside the parametrised grid")
    surv = theta
    for k in range(combo.i - 1):
        surv *= thetas[k]
    for k in range(combo.j - 1):
        surv *= taus[k]
    return 1.0 - surv


@dataclass(frozen=True)
class SfdParams:
    """Common prior mean ratio, prior strength, overdose bar, MCMC sizes."""

    m: float = 0.875
    s: float = 4.0
    epsilon: float = 0.65
    burn_in: int = 2000
    iterations: int = 8000

    def __post_init__(self) -> None:
        if not 0 < self.m < 1:
            raise ValueError("prior mean ratio must lie in (0,1)")
        if self.s <= 0:
            raise ValueError("prior effective sample size must be positive")
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0,1]")

    @property
    def ratio_a(self) -> float:
        return self.m * self.s

    @property
    def ratio_b(self) -> float:
        return (1.0 - self.m) * self.s


class SfdDesign:
    """Surface-free design over a dose grid."""

    name = "sfd"
    mode = AdmissibilityMode.EXTENDED

    def __init__(
        self, grid: DoseGrid, params: SfdParams | None = None, phi: float = 0.30
    ) -> None:
        self.grid = grid
        self.params = params or SfdParams()
        self.phi = phi
        I, J = grid.shape
        K = 1 + (I - 1) + (J - 1)
        self._a = np.full(K, self.params.ratio_a)
        self._b = np.full(K, self.params.ratio_b)

    def elimination_mask(self, state: TrialState) -> None:
        return None  # overdose bar is recomputed from the posterior each decision

    def prior_mean_surface(self) -> np.ndarray:
        """E[pi] under the prior: 1 - m^(i+j-1)."""
        I, J = self.grid.shape
        ii, jj = np.meshgrid(np.arange(I), np.arange(J), indexing="ij")
        return 1.0 - self.params.m ** (ii + jj + 1.0)

    def posterior(
        self, state: TrialState, seed: int, phi: float | None = None
    ) -> tuple[np.ndarray, np.ndarray, float]:
        """Posterior mean matrix, exceedance matrix P(pi > phi), and r-hat."""
        means, exceed, _, rhat = self.posterior_full(state, seed, phi)
        return means, exceed, rhat

    def posterior_full(
        self, state: TrialState, seed: int, phi: float | None = None
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
        """As :meth:`posterior` plus the per-cell posterior variance."""
        phi = self.phi if phi is None else phi
        means, exceed, var, rhat = ratio_surface_mcmc(
            state.n,
            state.y,
            self._a,
            self._b,
            phi,
            self.params.burn_in,
            self.params.iterations,
            _prep_seed(seed),
            1.0,
        )
        if rhat > RHAT_WARN:
            warnings.warn(
                f"surface sampler split r-hat {rhat:.3f} exceeds {RHAT_WARN}",
                RuntimeWarning,
                stacklevel=2,
            )
        return means, exceed, var, rhat

    def decide(
        self, state: TrialState, rng: np.random.Generator, phi: float | None = None
    ) -> DesignDecision:
        phi = self.phi if phi is None else phi
        eps = self.params.epsilon
        means, exceed, _ = self.posterior(state, int(rng.integers(2**31 - 1)), phi)
        if eps < 1.0 and exceed[0, 0] >= eps:
            return DesignDecision.terminate()
        cands = sorted(
            c
            for c in admissible_set(state.current, self.grid, self.mode, state.eliminated)
            if eps >= 1.0 or exceed[c.i - 1, c.j - 1] < eps
        )
        if not cands:
            return DesignDecision.continue_at(state.current)
        dist = [abs(means[c.i - 1, c.j - 1] - phi) for c in cands]
        best = min(dist)
        ties = [c for c, d in zip(cands, dist) if d <= best + _TIE_TOL]
        if len(ties) == 1:
            return DesignDecision.continue_at(ties[0])
        return DesignDecision.continue_at(ties[rng.integers(len(ties))])

    def select_mtc(
        self, state: TrialState, rng: np.random.Generator, phi: float | None = None
    ) -> Combo | None:
        phi = self.phi if phi is None else phi
        if state.terminated:
            return None
        eps = self.params.epsilon
        means, exceed, _ = self.posterior(state, int(rng.integers(2**31 - 1)), phi)
        cands = sorted(
            c
            for c in self.grid.combos()
            if eps >= 1.0 or exceed[c.i - 1, c.j - 1] < eps
        )
        if not cands:
            return None
        dist = [abs(means[c.i - 1, c.j - 1] - phi) for c in cands]
        best = min(dist)
        ties = [c for c, d in zip(cands, dist) if d <= best + _TIE_TOL]
        if len(ties) == 1:
            return ties[0]
        return ties[rng.integers(len(ties))]
