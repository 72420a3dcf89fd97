"""Trial runner and operating-characteristics accumulator.

Simulates complete trials of any design under a toxicity scenario and
aggregates selection/safety metrics. Replicates own independent random
streams derived from the master seed, so results are bitwise identical
regardless of how many worker processes execute them.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Protocol

import numpy as np

from .core import (
    Combo,
    ComboClass,
    DoseGrid,
    Scenario,
    TrialConfig,
    TrialState,
    classify_combo,
    record_cohort,
)
from .designs import make_design
from .stats import RngStream


class OutcomeSource(Protocol):
    """Supplies the DLT count for each treated cohort."""

    def draw(self, combo: Combo, size: int, cohort_index: int) -> int: ...


class ScenarioOutcomes:
    """Binomial cohort outcomes under a scenario's true toxicities."""

    def __init__(self, scenario: Scenario, rng: np.random.Generator) -> None:
        self.scenario = scenario
        self.rng = rng

    def draw(self, combo: Combo, size: int, cohort_index: int) -> int:
        return int(self.rng.binomial(size, self.scenario.prob(combo)))


@dataclass
class TrialResult:
    state: TrialState
    selected: Combo | None


def run_trial(
    design: Any,
    cfg: TrialConfig,
    outcomes: OutcomeSource,
    design_rng: np.random.Generator,
) -> TrialResult:
    """One complete trial: dose cohorts until max_n or a safety stop, then select."""
    state = TrialState.fresh(design.grid.shape, cfg.start)
    combo = cfg.start
    for c in range(cfg.n_cohorts):
        dlts = outcomes.draw(combo, cfg.cohort_size, c)
        state = record_cohort(state, combo, cfg.cohort_size, dlts)
        mask = design.elimination_mask(state)
        if mask is not None:
            state = state.with_eliminated(mask)
        decision = design.decide(state, design_rng)
        if decision.is_terminal:
            state = state.terminate()
            break
        combo = decision.next
    selected = None if state.terminated else design.select_mtc(state, design_rng)
    return TrialResult(state=state, selected=selected)


@dataclass
class OperatingCharacteristics:
    """Aggregated selection and safety metrics over simulated trials."""

    n_sim: int
    pcs: float
    pas: float
    toxic_selection: float
    no_selection: float
    mean_patients_at_toxic: float
    mean_total_patients: float
    selection_histogram: np.ndarray
    allocation_histogram: np.ndarray

    def row(self, design: str, scenario: str) -> dict[str, Any]:
        return {
            "design": design,
            "scenario": scenario,
            "n_sim": self.n_sim,
            "pcs": self.pcs,
            "pas": self.pas,
            "toxic_selection": self.toxic_selection,
            "no_selection": self.no_selection,
            "mean_patients_at_toxic": self.mean_patients_at_toxic,
            "mean_total_patients": self.mean_total_patients,
        }


def classification_masks(
    scenario: Scenario, cfg: TrialConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(correct, acceptable-for-counting, overly-toxic) boolean matrices."""
    I, J = scenario.shape
    correct = np.zeros((I, J), dtype=bool)
    acceptable = np.zeros((I, J), dtype=bool)
    toxic = np.zeros((I, J), dtype=bool)
    for i in range(I):
        for j in range(J):
            cls = classify_combo(scenario, cfg, Combo(i + 1, j + 1))
            correct[i, j] = cls is ComboClass.CORRECT
            acceptable[i, j] = cls in (ComboClass.CORRECT, ComboClass.ACCEPTABLE)
            toxic[i, j] = cls is ComboClass.OVERLY_TOXIC
    return correct, acceptable, toxic


def _replicate_batch(
    design_config: dict | str,
    grid: DoseGrid,
    scenario: Scenario,
    cfg: TrialConfig,
    master_seed: int,
    reps: range,
) -> list[tuple[int, int, int, bytes]]:
    design = make_design(design_config, grid, phi=cfg.target, max_n=cfg.max_n)
    root = RngStream(master_seed)
    out = []
    for rep in reps:
        outcome_rng = root.child(rep, 0).generator()
        design_rng = root.child(rep, 1).generator()
        result = run_trial(design, cfg, ScenarioOutcomes(scenario, outcome_rng), design_rng)
        sel = result.selected
        out.append(
            (
                sel.i if sel else 0,
                sel.j if sel else 0,
                int(result.state.terminated),
                result.state.n.astype(np.int64).tobytes(),
            )
        )
    return out


def simulate(
    design_config: dict | str,
    scenario: Scenario,
    cfg: TrialConfig | None = None,
    n_sim: int = 2000,
    master_seed: int = 0,
    grid: DoseGrid | None = None,
    n_jobs: int = 1,
) -> OperatingCharacteristics:
    """Simulate ``n_sim`` independent trials and aggregate their metrics.

    Deterministic for a given master seed: replicate r always consumes the
    streams (r, 0) and (r, 1), and aggregation runs in replicate order, so
    the result does not depend on ``n_jobs``.
    """
    cfg = cfg or TrialConfig()
    if n_sim < 1:
        raise ValueError("n_sim must be at least 1")
    I, J = scenario.shape
    grid = grid or DoseGrid.regular(I, J)
    if grid.shape != scenario.shape:
        raise ValueError(f"grid {grid.shape} does not match scenario {scenario.shape}")

    if n_jobs <= 1 or n_sim < 4 * n_jobs:
        raw = _replicate_batch(design_config, grid, scenario, cfg, master_seed, range(n_sim))
    else:
        bounds = np.linspace(0, n_sim, n_jobs + 1).astype(int)
        chunks = [range(a, b) for a, b in zip(bounds, bounds[1:]) if b > a]
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            futures = [
                pool.submit(
                    _replicate_batch, design_config, grid, scenario, cfg, master_seed, ch
                )
                for ch in chunks
            ]
            raw = []
            for f in futures:
                raw.extend(f.result())

    correct, acceptable, toxic = classification_masks(scenario, cfg)
    sel_hist = np.zeros((I, J))
    alloc = np.zeros((I, J))
    n_pcs = n_pas = n_tox = n_none = 0
    tox_patients = 0.0
    total_patients = 0.0
    for si, sj, terminated, n_bytes in raw:
        n_mat = np.frombuffer(n_bytes, dtype=np.int64).reshape(I, J)
        alloc += n_mat
        total_patients += n_mat.sum()
        tox_patients += n_mat[toxic].sum()
        if si == 0:
            n_none += 1
            continue
        sel_hist[si - 1, sj - 1] += 1
        if correct[si - 1, sj - 1]:
            n_pcs += 1
        if acceptable[si - 1, sj - 1]:
            n_pas += 1
        if toxic[si - 1, sj - 1]:
            n_tox += 1
    return OperatingCharacteristics(
        n_sim=n_sim,
        pcs=n_pcs / n_sim,
        pas=n_pas / n_sim,
        toxic_selection=n_tox / n_sim,
        no_selection=n_none / n_sim,
        mean_patients_at_toxic=tox_patients / n_sim,
        mean_total_patients=total_patients / n_sim,
        selection_histogram=sel_hist / n_sim,
        allocation_histogram=alloc / n_sim,
    )
