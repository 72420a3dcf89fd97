"""Product-of-independent-beta-probabilities (PIPE) escalation.

PIPE estimates the maximum tolerated contour: the monotone boundary
splitting the grid into combinations believed below/above the target
toxicity. Escalation experiments around the modal contour with
inverse-sample-size weighted randomisation, an overdose rule bars
combinations whose probability of sitting above the contour is too high,
and the final MTC is chosen from the tested combinations hugging the
contour from below.

Cell priors are parametrised by median and prior effective sample size;
with the tiny calibrated sample sizes this leaves untested combinations
essentially uninformative (mass split evenly around the median), so the
contour posterior is driven by observed data.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np
from scipy import optimize, special

from ..core import (
    AdmissibilityMode,
    Combo,
    DesignDecision,
    DoseGrid,
    TrialState,
    admissible_set,
)

_TIE_TOL = 1e-12


def beta_from_median(median: float, ess: float) -> tuple[float, float]:
    """Beta shapes with the given median and a + b = ess."""
    if not 0 < median < 1:
        raise ValueError("median must lie in (0,1)")
    if ess <= 0:
        raise ValueError("prior effective sample size must be positive")

    def half_mass(a: float) -> float:
        return float(special.betainc(a, ess - a, median)) - 0.5

    eps = min(1e-12, ess * 1e-9)
    a = optimize.brentq(half_mass, eps, ess - eps)
    return a, ess - a


@dataclass(frozen=True)
class PipeParams:
    """Prior construction constants and the overdose threshold.

    The prior location grid follows the diagonal-segment construction:
    combinations on anti-diagonal k = i+j-1 share the location
    rho + (k-1)*delta, and every cell carries the same prior effective
    sample size.
    """

    rho: float = 0.05
    delta: float = 0.025
    prior_ss: float = 1.0 / 18.0
    epsilon: float = 0.50

    def __post_init__(self) -> None:
        if self.prior_ss <= 0:
            raise ValueError("prior_ss must be positive")
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0,1]")

    def prior_grid(self, shape: tuple[int, int]) -> np.ndarray:
        I, J = shape
        ii, jj = np.meshgrid(np.arange(I), np.arange(J), indexing="ij")
        grid = self.rho + (ii + jj) * self.delta
        if np.any(grid <= 0) or np.any(grid >= 1):
            raise ValueError("prior locations must stay inside (0,1) over the grid")
        return grid


@dataclass(frozen=True)
class Contour:
    """A monotone split of the grid; mask 1 = above the contour (toxic side)."""

    mask: np.ndarray

    @property
    def safe_count(self) -> int:
        return int(self.mask.size - self.mask.sum())


def enumerate_contours(I: int, J: int) -> list[Contour]:
    """All binom(I+J, I) monotone contours of an I x J grid."""
    if I < 1 or J < 1:
        raise ValueError("grid dimensions must be at least 1")
    if I + J > 20:
        raise ValueError("grid too large for exhaustive contour enumeration")
    out = []
    # t_i = number of safe cells in row i, non-increasing with i
    for asc in combinations_with_replacement(range(J + 1), I):
        t = asc[::-1]
        mask = np.zeros((I, J), dtype=np.int8)
        for i, ti in enumerate(t):
            mask[i, ti:] = 1
        mask.setflags(write=False)
        out.append(Contour(mask))
    return out


def maximal_safe_cells(mask: np.ndarray) -> list[Combo]:
    """Safe cells with no safe cell above them in the partial order."""
    I, J = mask.shape
    out = []
    for i in range(I):
        for j in range(J):
            if mask[i, j]:
                continue
            up = i == I - 1 or mask[i + 1, j]
            right = j == J - 1 or mask[i, j + 1]
            if up and right:
                out.append(Combo(i + 1, j + 1))
    return out


def safe_adjacent_cells(mask: np.ndarray) -> list[Combo]:
    """Safe cells whose top or right edge lies on the contour path.

    The contour is the monotone staircase from the grid's top-left to
    bottom-right corner with the safe region below-left; a grid boundary
    counts as part of the path where the path runs along it.
    """
    I, J = mask.shape
    out = []
    for i in range(I):
        for j in range(J):
            if mask[i, j]:
                continue
            top = i == I - 1 or mask[i + 1, j]
            right = j == J - 1 or mask[i, j + 1]
            if top or right:
                out.append(Combo(i + 1, j + 1))
    return out


def toxic_adjacent_cells(mask: np.ndarray) -> list[Combo]:
    """Toxic cells whose bottom or left edge lies on the contour path."""
    I, J = mask.shape
    out = []
    for i in range(I):
        for j in range(J):
            if not mask[i, j]:
                continue
            bottom = i == 0 or not mask[i - 1, j]
            left = j == 0 or not mask[i, j - 1]
            if bottom or left:
                out.append(Combo(i + 1, j + 1))
    return out


def contour_adjacent_cells(mask: np.ndarray) -> list[Combo]:
    """Cells on either side of the contour path."""
    return safe_adjacent_cells(mask) + toxic_adjacent_cells(mask)


class PipeDesign:
    """Contour-guided escalation with weighted randomisation."""

    name = "pipe"
    mode = AdmissibilityMode.EXTENDED

    def __init__(
        self, grid: DoseGrid, params: PipeParams | None = None, phi: float = 0.30
    ) -> None:
        self.grid = grid
        self.params = params or PipeParams()
        self.phi = phi
        I, J = grid.shape
        self.contours = enumerate_contours(I, J)
        self._masks_flat = np.stack([c.mask.reshape(-1) for c in self.contours]).astype(float)
        self._safe_counts = np.array([c.safe_count for c in self.contours])
        locations = self.params.prior_grid((I, J))
        self.prior_a = np.empty((I, J))
        self.prior_b = np.empty((I, J))
        for i in range(I):
            for j in range(J):
                self.prior_a[i, j], self.prior_b[i, j] = beta_from_median(
                    locations[i, j], self.params.prior_ss
                )
        self._p_cache: dict[tuple[int, int, int, int], float] = {}

    def elimination_mask(self, state: TrialState) -> None:
        return None  # the overdose rule is re-evaluated per decision, not persistent

    # -- Beta posterior machinery ----------------------------------------
    def below_probs(self, state: TrialState, phi: float) -> np.ndarray:
        """p_ij = P(pi_ij <= phi | data) per cell under the independent posteriors."""
        I, J = state.shape
        p = np.empty((I, J))
        for i in range(I):
            for j in range(J):
                n, y = int(state.n[i, j]), int(state.y[i, j])
                key = (i, j, n, y)
                v = self._p_cache.get(key)
                if v is None:
                    v = float(
                        special.betainc(self.prior_a[i, j] + y, self.prior_b[i, j] + n - y, phi)
                    )
                    self._p_cache[key] = v
                p[i, j] = v
        return p

    def posterior_means(self, state: TrialState) -> np.ndarray:
        return (self.prior_a + state.y) / (self.params.prior_ss + state.n)

    def contour_probs(self, state: TrialState, phi: float) -> np.ndarray:
        """Normalized posterior probability of each monotone contour."""
        p = self.below_probs(state, phi).reshape(-1)
        p = np.clip(p, 1e-300, 1.0 - 1e-16)
        w = np.log1p(-p) - np.log(p)
        logmass = self._masks_flat @ w + np.log(p).sum()
        logmass -= logmass.max()
        mass = np.exp(logmass)
        return mass / mass.sum()

    def contour_posterior(self, state: TrialState, phi: float) -> list[tuple[Contour, float]]:
        probs = self.contour_probs(state, phi)
        return list(zip(self.contours, probs))

    def overdose_probs(self, state: TrialState, phi: float) -> np.ndarray:
        """q_ij: probability of sitting above the contour, averaged over contours."""
        probs = self.contour_probs(state, phi)
        return (probs @ self._masks_flat).reshape(state.shape)

    def barred_mask(self, state: TrialState, q: np.ndarray) -> np.ndarray:
        """Combinations the overdose rule forbids dosing.

        A combination triggers once it carries data and q >= epsilon; the bar
        extends to everything above it in the partial order (where q is at
        least as large).
        """
        eps = self.params.epsilon
        if eps >= 1.0:
            return np.zeros(state.shape, dtype=bool)
        trig = (state.n > 0) & (q >= eps)
        closed = np.logical_or.accumulate(trig, axis=0)
        return np.logical_or.accumulate(closed, axis=1)

    def _modal_contour(self, probs: np.ndarray, rng: np.random.Generator) -> int:
        top = probs.max()
        tie = np.flatnonzero(probs >= top - _TIE_TOL)
        if len(tie) > 1:
            most_safe = self._safe_counts[tie].max()
            tie = tie[self._safe_counts[tie] == most_safe]
        if len(tie) > 1:
            return int(tie[rng.integers(len(tie))])
        return int(tie[0])

    def _frontier_cells(self, state: TrialState) -> list[Combo]:
        """Cells at most one level above the highest tried dose of each drug.

        Any combination under that ceiling may be dosed next; in particular
        the design may jump back to previously tried combinations anywhere
        in the grid.
        """
        tried = state.n > 0
        I, J = state.shape
        fi = int(np.max(np.nonzero(tried.any(axis=1))[0])) + 1 if tried.any() else 0
        fj = int(np.max(np.nonzero(tried.any(axis=0))[0])) + 1 if tried.any() else 0
        return [
            Combo(i + 1, j + 1)
            for i in range(min(fi + 1, I))
            for j in range(min(fj + 1, J))
        ]

    def _weighted_pick(
        self, cands: list[Combo], state: TrialState, rng: np.random.Generator
    ) -> Combo:
        cands = sorted(cands)
        w = np.array(
            [1.0 / (state.n[c.i - 1, c.j - 1] + self.params.prior_ss) for c in cands]
        )
        return cands[rng.choice(len(cands), p=w / w.sum())]

    def decide(
        self, state: TrialState, rng: np.random.Generator, phi: float | None = None
    ) -> DesignDecision:
        phi = self.phi if phi is None else phi
        eps = self.params.epsilon
        probs = self.contour_probs(state, phi)
        q = (probs @ self._masks_flat).reshape(state.shape)
        if eps < 1.0 and state.n[0, 0] > 0 and q[0, 0] >= eps:
            return DesignDecision.terminate()
        barred = self.barred_mask(state, q)
        mask = self.contours[self._modal_contour(probs, rng)].mask
        adjacent = safe_adjacent_cells(mask) or toxic_adjacent_cells(mask)
        feasible = [c for c in self._frontier_cells(state) if not barred[c.i - 1, c.j - 1]]
        if not feasible:
            return DesignDecision.terminate()
        adj_set = set(adjacent)
        cands = [c for c in feasible if c in adj_set]
        if not cands:
            # not yet next to the contour: move toward it
            def dist(c: Combo) -> int:
                return min(abs(c.i - a.i) + abs(c.j - a.j) for a in adjacent)

            best = min(dist(c) for c in feasible)
            cands = [c for c in feasible if dist(c) == best]
        return DesignDecision.continue_at(self._weighted_pick(cands, state, rng))

    def select_mtc(
        self, state: TrialState, rng: np.random.Generator, phi: float | None = None
    ) -> Combo | None:
        """Closest-from-below tested combination with posterior mean nearest phi.

        Well-sampled combinations (at least six patients) take priority on the
        safe side of the modal contour; the recommended set widens to the
        full below-contour band and then to any tested safe cell before
        giving up.
        """
        phi = self.phi if phi is None else phi
        if state.terminated:
            return None
        probs = self.contour_probs(state, phi)
        q = (probs @ self._masks_flat).reshape(state.shape)
        barred = self.barred_mask(state, q)
        mask = self.contours[self._modal_contour(probs, rng)].mask

        def eligible(c: Combo, min_n: int) -> bool:
            i, j = c.i - 1, c.j - 1
            return state.n[i, j] >= min_n and not barred[i, j]

        recommended: list[Combo] = []
        for cells, min_n in (
            (maximal_safe_cells(mask), 6),
            (safe_adjacent_cells(mask), 6),
            (maximal_safe_cells(mask), 1),
            (safe_adjacent_cells(mask), 1),
        ):
            recommended = [c for c in cells if eligible(c, min_n)]
            if recommended:
                break
        if not recommended:
            return None
        means = self.posterior_means(state)
        dist = [abs(means[c.i - 1, c.j - 1] - phi) for c in recommended]
        best = min(dist)
        ties = sorted(c for c, d in zip(recommended, dist) if d <= best + _TIE_TOL)
        if len(ties) == 1:
            return ties[0]
        return ties[rng.integers(len(ties))]
