"""Core data model for dual-agent combination trials.

Defines the dose grid, trial state bookkeeping, admissibility rules for
cohort-to-cohort moves, and classification of combinations against the
trial's toxicity targets. Everything here is a plain value object; trial
state is updated copy-on-write so snapshots can be shared freely.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np


class Combo(NamedTuple):
    """A dose combination, 1-based: level ``i`` of drug A, ``j`` of drug B."""

    i: int
    j: int


@dataclass(frozen=True)
class DoseGrid:
    """The I x J lattice of administrable dose combinations."""

    doses_a: tuple[float, ...]
    doses_b: tuple[float, ...]

    def __post_init__(self) -> None:
        for name, doses in (("doses_a", self.doses_a), ("doses_b", self.doses_b)):
            if len(doses) < 1:
                raise ValueError(f"{name} must contain at least one dose")
            if any(d <= 0 for d in doses):
                raise ValueError(f"{name} must be positive")
            if any(b <= a for a, b in zip(doses, doses[1:])):
                raise ValueError(f"{name} must be strictly increasing")

    @property
    def levels_a(self) -> int:
        return len(self.doses_a)

    @property
    def levels_b(self) -> int:
        return len(self.doses_b)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.levels_a, self.levels_b)

    def contains(self, combo: Combo) -> bool:
        return 1 <= combo.i <= self.levels_a and 1 <= combo.j <= self.levels_b

    def combos(self) -> Iterator[Combo]:
        for i in range(1, self.levels_a + 1):
            for j in range(1, self.levels_b + 1):
                yield Combo(i, j)

    @classmethod
    def regular(cls, levels_a: int, levels_b: int, step: float = 100.0) -> "DoseGrid":
        """Evenly spaced placeholder doses (level * step mg)."""
        return cls(
            tuple(step * k for k in range(1, levels_a + 1)),
            tuple(step * k for k in range(1, levels_b + 1)),
        )


class AdmissibilityMode(enum.Enum):
    """Which neighbourhood moves a design may make between cohorts.

    RECTILINEAR: stay, or one level up/down in exactly one drug.
    EXTENDED: rectilinear moves plus diagonal de-escalation (down in both
    drugs) and anti-diagonal moves (up in one drug, down in the other).
    Diagonal escalation (up in both drugs) is never admissible, nor is
    skipping a level.
    """

    RECTILINEAR = "rectilinear"
    EXTENDED = "extended"


_RECTILINEAR_STEPS = ((0, 0), (1, 0), (-1, 0), (0, 1), (0, -1))
_EXTENDED_STEPS = _RECTILINEAR_STEPS + ((-1, -1), (1, -1), (-1, 1))


def admissible_set(
    current: Combo,
    grid: DoseGrid,
    mode: AdmissibilityMode,
    eliminated: np.ndarray | None = None,
) -> set[Combo]:
    """All in-grid, non-eliminated combinations reachable from ``current``.

    Includes ``current`` itself unless eliminated. The double-escalation
    move (i+1, j+1) is excluded in every mode.
    """
    if not grid.contains(current):
        raise ValueError(f"current combo {current} outside {grid.shape} grid")
    steps = _RECTILINEAR_STEPS if mode is AdmissibilityMode.RECTILINEAR else _EXTENDED_STEPS
    out: set[Combo] = set()
    for di, dj in steps:
        c = Combo(current.i + di, current.j + dj)
        if not grid.contains(c):
            continue
        if eliminated is not None and eliminated[c.i - 1, c.j - 1]:
            continue
        out.add(c)
    return out


@dataclass(frozen=True)
class TrialConfig:
    """Trial-level constants shared by every design."""

    target: float = 0.30
    cohort_size: int = 3
    max_n: int = 36
    start: Combo = Combo(1, 1)
    acceptable_band: tuple[float, float] = (0.16, 0.33)
    toxic_cutoff: float = 0.33

    def __post_init__(self) -> None:
        if not 0 < self.target < 1:
            raise ValueError("target must lie in (0,1)")
        if self.cohort_size < 1 or self.max_n < 1 or self.max_n % self.cohort_size:
            raise ValueError("cohort_size must divide max_n")
        lo, hi = self.acceptable_band
        if not lo <= self.target <= hi:
            raise ValueError("acceptable_band must contain the target")

    @property
    def n_cohorts(self) -> int:
        return self.max_n // self.cohort_size


@dataclass(frozen=True)
class Scenario:
    """A named matrix of true toxicity probabilities, row = drug A level."""

    name: str
    truth: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.truth, dtype=float)
        if t.ndim != 2:
            raise ValueError("truth must be a 2-D matrix")
        if np.any(t <= 0) or np.any(t >= 1):
            raise ValueError("truth entries must lie in (0,1)")
        t.setflags(write=False)
        object.__setattr__(self, "truth", t)

    @property
    def shape(self) -> tuple[int, int]:
        return self.truth.shape

    def prob(self, combo: Combo) -> float:
        return float(self.truth[combo.i - 1, combo.j - 1])


class ComboClass(enum.Enum):
    CORRECT = "correct"
    ACCEPTABLE = "acceptable"
    OVERLY_TOXIC = "overly_toxic"
    SUBTHERAPEUTIC = "subtherapeutic"


#: absolute tolerance for "true toxicity equals the target exactly"
TARGET_ATOL = 1e-12


def classify_combo(scenario: Scenario, cfg: TrialConfig, combo: Combo) -> ComboClass:
    """Label a combination by its true toxicity relative to the trial targets.

    CORRECT means the truth equals the target exactly (a correct combination
    is also acceptable for counting purposes); ACCEPTABLE means the truth lies
    in the acceptable band; OVERLY_TOXIC means above the toxic cutoff.
    """
    p = scenario.prob(combo)
    if math.isclose(p, cfg.target, abs_tol=TARGET_ATOL, rel_tol=0.0):
        return ComboClass.CORRECT
    lo, hi = cfg.acceptable_band
    if lo <= p <= hi:
        return ComboClass.ACCEPTABLE
    if p > cfg.toxic_cutoff:
        return ComboClass.OVERLY_TOXIC
    return ComboClass.SUBTHERAPEUTIC


class CohortRecord(NamedTuple):
    combo: Combo
    size: int
    dlts: int


@dataclass(frozen=True)
class TrialState:
    """Running tallies of a single trial; updated copy-on-write."""

    n: np.ndarray
    y: np.ndarray
    current: Combo
    eliminated: np.ndarray
    terminated: bool = False
    cohort_log: tuple[CohortRecord, ...] = ()

    @classmethod
    def fresh(cls, shape: tuple[int, int], start: Combo = Combo(1, 1)) -> "TrialState":
        I, J = shape
        return cls(
            n=np.zeros((I, J), dtype=np.int64),
            y=np.zeros((I, J), dtype=np.int64),
            current=start,
            eliminated=np.zeros((I, J), dtype=bool),
        )

    @property
    def shape(self) -> tuple[int, int]:
        return self.n.shape

    @property
    def total_n(self) -> int:
        return int(self.n.sum())

    def counts_at(self, combo: Combo) -> tuple[int, int]:
        return int(self.n[combo.i - 1, combo.j - 1]), int(self.y[combo.i - 1, combo.j - 1])

    def with_eliminated(self, eliminated: np.ndarray) -> "TrialState":
        return TrialState(self.n, self.y, self.current, eliminated, self.terminated, self.cohort_log)

    def terminate(self) -> "TrialState":
        return TrialState(self.n, self.y, self.current, self.eliminated, True, self.cohort_log)


def record_cohort(state: TrialState, combo: Combo, size: int, dlts: int) -> TrialState:
    """Append a treated cohort's outcome and move the trial to that combo."""
    if state.terminated:
        raise ValueError("cannot record a cohort on a terminated trial")
    if not 0 <= dlts <= size:
        raise ValueError(f"dlts={dlts} outside [0, size={size}]")
    i, j = combo.i - 1, combo.j - 1
    if not (0 <= i < state.n.shape[0] and 0 <= j < state.n.shape[1]):
        raise ValueError(f"combo {combo} outside grid {state.n.shape}")
    if state.eliminated[i, j]:
        raise ValueError(f"combo {combo} has been eliminated")
    n = state.n.copy()
    y = state.y.copy()
    n[i, j] += size
    y[i, j] += dlts
    return TrialState(
        n=n,
        y=y,
        current=combo,
        eliminated=state.eliminated,
        terminated=False,
        cohort_log=state.cohort_log + (CohortRecord(combo, size, dlts),),
    )


@dataclass(frozen=True)
class DesignDecision:
    """Either the next combination to dose, or a safety stop."""

    next: Combo | None

    @classmethod
    def continue_at(cls, combo: Combo) -> "DesignDecision":
        return cls(next=combo)

    @classmethod
    def terminate(cls) -> "DesignDecision":
        return cls(next=None)

    @property
    def is_terminal(self) -> bool:
        return self.next is None
