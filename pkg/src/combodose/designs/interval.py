"""Interval-guided escalation: the BOIN and Keyboard designs.

Both designs track each combination with an independent Beta(1,1)-binomial
model, compare the observed toxicity at the current combination against
pre-specified interval boundaries to pick a move direction, rank candidate
combinations by posterior interval mass, eliminate combinations that breach
the overdose rule (together with everything above them in the partial
order), and select the final MTC by 2-D isotonic regression.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from ..core import (
    AdmissibilityMode,
    Combo,
    DesignDecision,
    DoseGrid,
    TrialState,
    admissible_set,
)
from ..stats import isotonic_2d

_TIE_TOL = 1e-12


def boin_boundaries(phi: float, phi1: float, phi2: float) -> tuple[float, float]:
    """Escalation/de-escalation boundaries (lambda_e, lambda_d).

    lambda_e and lambda_d are the decision thresholds that locally minimise
    the chance of incorrect escalation and de-escalation given the target
    phi, the highest sub-therapeutic toxicity phi1 and the lowest overly
    toxic toxicity phi2.
    """
    if not 0 < phi1 < phi < phi2 < 1:
        raise ValueError(f"need 0 < phi1 < phi < phi2 < 1, got {(phi1, phi, phi2)}")
    lam_e = math.log((1 - phi1) / (1 - phi)) / math.log(phi * (1 - phi1) / (phi1 * (1 - phi)))
    lam_d = math.log((1 - phi) / (1 - phi2)) / math.log(phi2 * (1 - phi) / (phi * (1 - phi2)))
    return lam_e, lam_d


@dataclass(frozen=True)
class BoinParams:
    """BOIN design constants; boundaries derive from (phi, a1, a2)."""

    phi: float = 0.30
    a1: float = 0.65
    a2: float = 1.40
    epsilon: float = 0.84

    def __post_init__(self) -> None:
        if not 0 < self.a1 < 1 < self.a2:
            raise ValueError("need a1 < 1 < a2")
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0,1]")
        if not 0 < self.phi2 < 1:
            raise ValueError("a2*phi must stay below 1")

    @property
    def phi1(self) -> float:
        return self.a1 * self.phi

    @property
    def phi2(self) -> float:
        return self.a2 * self.phi

    @property
    def boundaries(self) -> tuple[float, float]:
        return boin_boundaries(self.phi, self.phi1, self.phi2)


def build_keys(b1: float, b2: float) -> tuple[list[tuple[float, float]], int]:
    """Tile (0,1) with keys of width b2-b1 anchored at the target key.

    Returns the ordered key list and the index of the target key. The
    outermost keys are shortened to fit inside (0,1).
    """
    if not 0 < b1 < b2 < 1:
        raise ValueError("need 0 < b1 < b2 < 1")
    width = b2 - b1
    keys: list[tuple[float, float]] = [(b1, b2)]
    lo = b1
    while lo > 1e-12:
        nlo = max(lo - width, 0.0)
        keys.insert(0, (nlo, lo))
        lo = nlo
    target_idx = len(keys) - 1
    hi = b2
    while hi < 1 - 1e-12:
        nhi = min(hi + width, 1.0)
        keys.append((hi, nhi))
        hi = nhi
    return keys, target_idx


@dataclass(frozen=True)
class KeyParams:
    """Keyboard design constants; the target key is (b1, b2)."""

    phi: float = 0.30
    b1: float = 0.21
    b2: float = 0.39
    epsilon: float = 0.84

    def __post_init__(self) -> None:
        if not self.b1 < self.phi < self.b2:
            raise ValueError("target key must contain phi")
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0,1]")

    @property
    def keys(self) -> list[tuple[float, float]]:
        return build_keys(self.b1, self.b2)[0]

    @property
    def target_key_index(self) -> int:
        return build_keys(self.b1, self.b2)[1]


def _posterior_grid(max_n: int) -> tuple[np.ndarray, np.ndarray]:
    """Beta posterior shapes (y+1, n-y+1) for every reachable (n, y)."""
    n = np.arange(max_n + 1)[:, None].repeat(max_n + 1, axis=1)
    y = np.arange(max_n + 1)[None, :].repeat(max_n + 1, axis=0)
    a = (y + 1).astype(float)
    b = (n - y + 1).astype(float)
    b[y > n] = np.nan  # unreachable corner
    return a, b


def _interval_prob_table(max_n: int, lo: float, hi: float) -> np.ndarray:
    a, b = _posterior_grid(max_n)
    with np.errstate(invalid="ignore"):
        return special.betainc(a, b, hi) - special.betainc(a, b, lo)


def _exceed_table(max_n: int, phi: float) -> np.ndarray:
    a, b = _posterior_grid(max_n)
    with np.errstate(invalid="ignore"):
        return 1.0 - special.betainc(a, b, phi)


def eliminated_mask(
    n: np.ndarray, y: np.ndarray, exceed: np.ndarray, epsilon: float
) -> np.ndarray:
    """Cells whose overdose probability breaches epsilon, closed upward.

    Only cells with observed data can trigger; with epsilon >= 1 the rule is
    disabled entirely (the posterior exceedance never reaches 1 exactly).
    """
    if epsilon >= 1.0:
        return np.zeros(n.shape, dtype=bool)
    trig = (n > 0) & (exceed[n, y] >= epsilon)
    # up-set closure: eliminated[i,j] iff some trigger at (i',j') with i'<=i, j'<=j
    mask = np.logical_or.accumulate(trig, axis=0)
    return np.logical_or.accumulate(mask, axis=1)


class _IntervalDesign:
    """Shared machinery: move direction is design-specific, the rest is common."""

    mode = AdmissibilityMode.RECTILINEAR

    def __init__(self, grid: DoseGrid, phi: float, epsilon: float, max_n: int) -> None:
        self.grid = grid
        self.phi = phi
        self.epsilon = epsilon
        self._exceed = _exceed_table(max_n, phi)
        self._score: np.ndarray  # posterior mass of the design's target interval

    # -- direction: +1 escalate, -1 de-escalate, 0 stay ------------------
    def _direction(self, n: int, y: int) -> int:
        raise NotImplementedError

    def elimination_mask(self, state: TrialState) -> np.ndarray:
        return eliminated_mask(state.n, state.y, self._exceed, self.epsilon)

    def _pick(self, cands: list[Combo], state: TrialState, rng: np.random.Generator) -> Combo:
        scores = [self._score[state.n[c.i - 1, c.j - 1], state.y[c.i - 1, c.j - 1]] for c in cands]
        best = max(scores)
        ties = [c for c, s in zip(cands, scores) if s >= best - _TIE_TOL]
        if len(ties) == 1:
            return ties[0]
        return ties[rng.integers(len(ties))]

    def _in_grid(self, combos: list[tuple[int, int]], elim: np.ndarray) -> list[Combo]:
        out = []
        for i, j in combos:
            if 1 <= i <= self.grid.levels_a and 1 <= j <= self.grid.levels_b and not elim[i - 1, j - 1]:
                out.append(Combo(i, j))
        return out

    def decide(self, state: TrialState, rng: np.random.Generator) -> DesignDecision:
        elim = self.elimination_mask(state)
        if elim[0, 0]:
            return DesignDecision.terminate()
        cur = state.current
        n, y = state.counts_at(cur)
        if n == 0:
            return DesignDecision.continue_at(cur)  # no data yet: stay
        i, j = cur.i, cur.j
        lower = [(i - 1, j), (i, j - 1)]
        if elim[i - 1, j - 1]:
            cands = self._in_grid(lower, elim)
            if cands:
                return DesignDecision.continue_at(self._pick(cands, state, rng))
            # everything nearby is gone; retreat to the lowest live neighbour
            live = sorted(
                admissible_set(cur, self.grid, self.mode, elim),
                key=lambda c: (c.i + c.j, c.i),
            )
            if not live:
                return DesignDecision.terminate()
            return DesignDecision.continue_at(live[0])
        direction = self._direction(n, y)
        if direction > 0:
            cands = self._in_grid([(i + 1, j), (i, j + 1)], elim)
        elif direction < 0:
            cands = self._in_grid(lower, elim)
        else:
            cands = []
        if not cands:
            return DesignDecision.continue_at(cur)
        return DesignDecision.continue_at(self._pick(cands, state, rng))

    def select_mtc(self, state: TrialState, rng: np.random.Generator) -> Combo | None:
        """Closest-to-target tested combination under the isotonic fit.

        Lightly regularised proportions are projected onto the partial order
        with inverse-variance weights; untested combinations carry effectively
        zero weight and never qualify. Distance ties resolve toward the
        best-sampled combination, then at random.
        """
        if state.terminated:
            return None
        elim = self.elimination_mask(state)
        candidates = (state.n > 0) & ~elim
        if not candidates.any():
            return None
        phat = (state.y + 0.05) / (state.n + 0.1)
        weights = np.where(state.n > 0, (state.n + 0.1) / (phat * (1.0 - phat)), 0.0)
        fit = isotonic_2d(phat, weights)
        dist = np.abs(fit - self.phi)
        dist[~candidates] = np.inf
        best = dist.min()
        ties = np.argwhere(dist <= best + _TIE_TOL)
        if len(ties) > 1:
            most = max(state.n[i, j] for i, j in ties)
            ties = np.array([t for t in ties if state.n[t[0], t[1]] == most])
        row = ties[rng.integers(len(ties))] if len(ties) > 1 else ties[0]
        return Combo(int(row[0]) + 1, int(row[1]) + 1)


class BoinDesign(_IntervalDesign):
    """Bayesian optimal interval escalation over a combination grid."""

    name = "boin"

    def __init__(self, grid: DoseGrid, params: BoinParams | None = None, max_n: int = 36) -> None:
        self.params = params or BoinParams()
        super().__init__(grid, self.params.phi, self.params.epsilon, max_n)
        self.lambda_e, self.lambda_d = self.params.boundaries
        self._score = _interval_prob_table(max_n, self.lambda_e, self.lambda_d)

    def _direction(self, n: int, y: int) -> int:
        phat = y / n
        if phat <= self.lambda_e:
            return 1
        if phat >= self.lambda_d:
            return -1
        return 0


class KeyboardDesign(_IntervalDesign):
    """Keyboard escalation: move toward the key holding the posterior mode."""

    name = "keyboard"

    def __init__(self, grid: DoseGrid, params: KeyParams | None = None, max_n: int = 36) -> None:
        self.params = params or KeyParams()
        super().__init__(grid, self.params.phi, self.params.epsilon, max_n)
        keys, self._target_idx = build_keys(self.params.b1, self.params.b2)
        self.keys = keys
        self._score = _interval_prob_table(max_n, self.params.b1, self.params.b2)
        self._best_key = self._best_key_table(max_n, keys, self._target_idx)

    @staticmethod
    def _best_key_table(max_n: int, keys: list[tuple[float, float]], target: int) -> np.ndarray:
        """argmax-probability key per (n, y); ties resolve toward the target key."""
        a, b = _posterior_grid(max_n)
        with np.errstate(invalid="ignore"):
            probs = np.stack(
                [special.betainc(a, b, hi) - special.betainc(a, b, lo) for lo, hi in keys]
            )
        best = np.zeros(a.shape, dtype=np.int64)
        for n in range(max_n + 1):
            for y in range(n + 1):
                col = probs[:, n, y]
                top = np.max(col)
                tie = np.flatnonzero(col >= top - _TIE_TOL)
                if target in tie:
                    best[n, y] = target
                else:
                    best[n, y] = min(tie, key=lambda k: (abs(k - target), k))
        return best

    def _direction(self, n: int, y: int) -> int:
        k = self._best_key[n, y]
        if k < self._target_idx:
            return 1
        if k > self._target_idx:
            return -1
        return 0
