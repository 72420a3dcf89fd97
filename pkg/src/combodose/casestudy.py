"""Replay of the neratinib/temsirolimus combination study.

The original study dosed 52 evaluable patients over a 4x4 grid. For replay
the grid is restricted to 3x3 (dropping the lowest temsirolimus and highest
neratinib doses) and each combination receives a fixed tape of 36 ordered
binary responses: first the real outcomes in a random permutation, then
synthetic patients whose individual DLT probability is drawn from the
combination's posterior (or Beta(3,3) where the combination was never
dosed). Every design replayed against the same tape therefore sees
identical patient responses.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .core import Combo, DoseGrid, TrialConfig, TrialState
from .designs import make_design
from .engine import TrialResult, run_trial
from .stats import RngStream

#: neratinib (rows, mg) x temsirolimus (columns, mg) observed (dlts, patients);
#: None marks combinations never dosed in the study
RAW_DOSES_NERATINIB = (120.0, 160.0, 200.0, 240.0)
RAW_DOSES_TEMSIROLIMUS = (15.0, 25.0, 50.0, 75.0)
RAW_COUNTS: tuple[tuple[tuple[int, int] | None, ...], ...] = (
    ((0, 2), (0, 4), (1, 5), (0, 4)),
    ((1, 4), (1, 4), (0, 5), (3, 6)),
    ((0, 4), (1, 8), (1, 2), None),
    ((2, 4), None, None, None),
)


def restricted_grid() -> DoseGrid:
    """3x3 replay grid: neratinib 120/160/200 mg by temsirolimus 25/50/75 mg."""
    return DoseGrid(doses_a=RAW_DOSES_NERATINIB[:3], doses_b=RAW_DOSES_TEMSIROLIMUS[1:])


def restricted_counts() -> list[list[tuple[int, int] | None]]:
    return [list(row[1:]) for row in RAW_COUNTS[:3]]


@dataclass(frozen=True)
class ResponseTape:
    """Per-combination ordered responses; the first ``real`` entries replay
    the study's actual outcomes."""

    responses: np.ndarray  # (I, J, length) of 0/1
    n_real: np.ndarray  # (I, J) count of real-data entries per combination

    @property
    def length(self) -> int:
        return self.responses.shape[2]


def build_tape(
    seed: int,
    counts: list[list[tuple[int, int] | None]] | None = None,
    length: int = 36,
) -> ResponseTape:
    """Construct the shared replay tape from the study counts.

    Real responses are permuted once per combination; synthetic patients each
    draw an individual DLT probability from Beta(1+y, 1+n-y), or Beta(3, 3)
    where the combination was never dosed.
    """
    counts = counts if counts is not None else restricted_counts()
    I, J = len(counts), len(counts[0])
    rng = RngStream(seed, ("tape",)).generator()
    responses = np.zeros((I, J, length), dtype=np.int8)
    n_real = np.zeros((I, J), dtype=np.int64)
    for i in range(I):
        for j in range(J):
            cell = counts[i][j]
            if cell is None:
                y = n = 0
            else:
                y, n = cell
                if not 0 <= y <= n <= length:
                    raise ValueError(f"inconsistent counts {cell} at ({i+1},{j+1})")
            real = np.zeros(n, dtype=np.int8)
            real[:y] = 1
            responses[i, j, :n] = rng.permutation(real)
            n_real[i, j] = n
            for t in range(n, length):
                if cell is None:
                    p = rng.beta(3.0, 3.0)
                else:
                    p = rng.beta(1.0 + y, 1.0 + n - y)
                responses[i, j, t] = int(rng.random() < p)
    responses.setflags(write=False)
    n_real.setflags(write=False)
    return ResponseTape(responses=responses, n_real=n_real)


class TapeOutcomes:
    """Cohort outcomes read sequentially from a response tape."""

    def __init__(self, tape: ResponseTape) -> None:
        self.tape = tape
        self._cursor = np.zeros(tape.responses.shape[:2], dtype=np.int64)

    def draw(self, combo: Combo, size: int, cohort_index: int) -> int:
        i, j = combo.i - 1, combo.j - 1
        pos = self._cursor[i, j]
        if pos + size > self.tape.length:
            raise RuntimeError(f"tape exhausted at combo {combo}")
        self._cursor[i, j] = pos + size
        return int(self.tape.responses[i, j, pos : pos + size].sum())


@dataclass
class ReplayResult:
    design: str
    allocation: np.ndarray
    dlts: np.ndarray
    mtc: Combo | None
    state: TrialState


def replay(
    design_config: dict[str, Any] | str,
    tape: ResponseTape,
    cfg: TrialConfig | None = None,
    seed: int = 0,
) -> ReplayResult:
    """Run one design against the tape and report its allocation and MTC."""
    cfg = cfg or TrialConfig()
    grid = restricted_grid()
    design = make_design(design_config, grid, phi=cfg.target, max_n=cfg.max_n)
    design_rng = RngStream(seed, ("replay",)).generator()
    result: TrialResult = run_trial(design, cfg, TapeOutcomes(tape), design_rng)
    return ReplayResult(
        design=design.name,
        allocation=result.state.n.copy(),
        dlts=result.state.y.copy(),
        mtc=result.selected,
        state=result.state,
    )


def format_replay(result: ReplayResult) -> str:
    """Text grid in the study's y/n layout, MTC starred."""
    grid = restricted_grid()
    lines = [f"{result.design.upper()}  (neratinib rows, temsirolimus columns)"]
    header = "         " + "".join(f"{d:>9.0f}mg" for d in grid.doses_b)
    lines.append(header)
    for i in range(grid.levels_a):
        cells = []
        for j in range(grid.levels_b):
            tag = f"{result.dlts[i, j]}/{result.allocation[i, j]}"
            if result.mtc is not None and result.mtc == Combo(i + 1, j + 1):
                tag = f"*{tag}*"
            cells.append(f"{tag:>11}")
        lines.append(f"{grid.doses_a[i]:>7.0f}mg" + "".join(cells))
    lines.append(f"MTC: {tuple(result.mtc) if result.mtc else 'none'}")
    return "\n".join(lines)
