"""Two-stage design calibration.

Stage 1 grid-searches each design's hyper-parameters for the best geometric
mean proportion of correct selections over four contrasting scenarios, with
all overdose rules disabled so no trial stops early. Stage 2 then lowers the
overdose threshold epsilon from one until the all-toxic scenario ends with
no recommendation in at least 85% of trials, reporting the full diagnostic
curves so the trade-off stays visible.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

import numpy as np

from .core import TrialConfig
from .engine import simulate
from .scenarios import get_scenario
from .stats import RngStream, geometric_mean

STAGE1_SCENARIOS = ("1", "8", "10", "13")
STAGE2_SCENARIOS = ("8", "10", "13", "14")
NO_RECOMMENDATION_THRESHOLD = 0.85


def default_stage1_settings(design_id: str) -> list[dict[str, Any]]:
    """The published hyper-parameter grids for each design."""
    if design_id == "boin":
        a1s = [round(0.85 - 0.05 * k, 2) for k in range(10)]
        a2s = [round(1.15 + 0.05 * k, 2) for k in range(10)]
        return [{"design": "boin", "a1": a1, "a2": a2} for a1, a2 in itertools.product(a1s, a2s)]
    if design_id == "keyboard":
        b1s = [round(0.27 - 0.02 * k, 2) for k in range(5)]
        b2s = [round(0.33 + 0.02 * k, 2) for k in range(5)]
        return [{"design": "keyboard", "b1": b1, "b2": b2} for b1, b2 in itertools.product(b1s, b2s)]
    if design_id == "sfd":
        ms = [0.95, 0.925, 0.90, 0.875, 0.85]
        ss = [1, 2, 3, 4, 5]
        return [{"design": "sfd", "m": m, "s": s} for m, s in itertools.product(ms, ss)]
    if design_id == "pipe":
        rhos = [0.025, 0.05, 0.075, 0.10]
        deltas = [0.025, 0.05, 0.075, 0.10]
        sss = [1 / 72, 1 / 36, 1 / 18, 1 / 9]
        return [
            {"design": "pipe", "rho": r, "delta": d, "prior_ss": s}
            for r, d, s in itertools.product(rhos, deltas, sss)
        ]
    raise ValueError(f"no stage-1 grid defined for design {design_id!r}")


def default_stage1_nsim(design_id: str) -> int:
    """Published simulation counts per grid cell."""
    return {"boin": 4000, "keyboard": 4000, "sfd": 500, "pipe": 2000}.get(design_id, 1000)


@dataclass
class Stage1Row:
    setting: dict[str, Any]
    pcs: dict[str, float]
    gm_pcs: float


def calibrate_stage1(
    design_id: str,
    settings: Sequence[dict[str, Any]] | None = None,
    scenarios: Sequence[str] = STAGE1_SCENARIOS,
    n_sim: int | None = None,
    master_seed: int = 0,
    cfg: TrialConfig | None = None,
    n_jobs: int = 1,
) -> list[Stage1Row]:
    """Rank hyper-parameter settings by geometric-mean PCS, overdose rule off."""
    cfg = cfg or TrialConfig()
    settings = list(settings) if settings is not None else default_stage1_settings(design_id)
    n_sim = n_sim or default_stage1_nsim(design_id)
    root = RngStream(master_seed, ("stage1",))
    rows: list[Stage1Row] = []
    for setting in settings:
        config = dict(setting)
        config["epsilon"] = 1.0  # stage 1 runs without overdose rules
        pcs: dict[str, float] = {}
        for sc_idx, sc_name in enumerate(scenarios):
            # common random numbers across settings: every grid cell sees the
            # same per-scenario patient streams, stabilising the ranking
            seed = root.child(sc_idx).integer_seed()
            oc = simulate(
                config,
                get_scenario(sc_name),
                cfg,
                n_sim=n_sim,
                master_seed=seed,
                n_jobs=n_jobs,
            )
            pcs[sc_name] = oc.pcs
        gm = geometric_mean(list(pcs.values()))
        assert gm <= np.mean(list(pcs.values())) + 1e-12
        rows.append(Stage1Row(setting=setting, pcs=pcs, gm_pcs=gm))
    rows.sort(key=lambda r: -r.gm_pcs)
    return rows


def default_epsilon_grid(step: float = 0.01) -> list[float]:
    """Descending epsilon grid starting at 1.0 - step."""
    k = round(1.0 / step)
    return [round(1.0 - step * t, 10) for t in range(1, k)]


@dataclass
class Stage2Point:
    epsilon: float
    no_selection_14: float
    pcs: dict[str, float]
    patients_at_toxic: dict[str, float]


@dataclass
class Stage2Result:
    chosen_epsilon: float | None
    curve: list[Stage2Point]
    threshold: float


def _stage2_point(
    base_config: dict[str, Any],
    eps: float,
    scenarios: Sequence[str],
    cfg: TrialConfig,
    n_sim: int,
    seed_stream: RngStream,
    n_jobs: int,
) -> Stage2Point:
    config = dict(base_config)
    config["epsilon"] = eps
    pcs: dict[str, float] = {}
    patients: dict[str, float] = {}
    no_sel_14 = float("nan")
    for sc_idx, sc_name in enumerate(scenarios):
        seed = seed_stream.child(sc_idx).integer_seed()
        oc = simulate(
            config, get_scenario(sc_name), cfg, n_sim=n_sim, master_seed=seed, n_jobs=n_jobs
        )
        pcs[sc_name] = oc.pcs
        patients[sc_name] = oc.mean_patients_at_toxic
        if sc_name == "14":
            no_sel_14 = oc.no_selection
    return Stage2Point(
        epsilon=eps, no_selection_14=no_sel_14, pcs=pcs, patients_at_toxic=patients
    )


def calibrate_stage2(
    design_id_or_config: str | dict[str, Any],
    epsilon_grid: Iterable[float] | None = None,
    scenarios: Sequence[str] = STAGE2_SCENARIOS,
    n_sim: int = 1000,
    master_seed: int = 0,
    cfg: TrialConfig | None = None,
    threshold: float = NO_RECOMMENDATION_THRESHOLD,
    n_jobs: int = 1,
) -> Stage2Result:
    """Sweep epsilon downward and pick the highest value passing the
    no-recommendation threshold on the all-toxic scenario."""
    cfg = cfg or TrialConfig()
    base = {"design": design_id_or_config} if isinstance(design_id_or_config, str) else dict(design_id_or_config)
    if epsilon_grid is None:
        epsilon_grid = [1.0] + default_epsilon_grid(0.01)
    eps_values = sorted(set(float(e) for e in epsilon_grid), reverse=True)
    if "14" not in scenarios:
        raise ValueError("stage 2 needs the all-toxic scenario '14'")
    root = RngStream(master_seed, ("stage2",))
    curve: list[Stage2Point] = []
    for e_idx, eps in enumerate(eps_values):
        curve.append(
            _stage2_point(base, eps, scenarios, cfg, n_sim, root.child(e_idx), n_jobs)
        )
    chosen = None
    for pt in curve:  # descending epsilon: first pass is the highest
        if pt.no_selection_14 >= threshold:
            chosen = pt.epsilon
            break
    return Stage2Result(chosen_epsilon=chosen, curve=curve, threshold=threshold)


def choose_epsilon(
    design_id_or_config: str | dict[str, Any],
    n_sim: int = 500,
    master_seed: int = 0,
    cfg: TrialConfig | None = None,
    threshold: float = NO_RECOMMENDATION_THRESHOLD,
    coarse_step: float = 0.05,
    fine_step: float = 0.01,
    n_jobs: int = 1,
) -> Stage2Result:
    """Bracket-and-refine search for the stage-2 epsilon.

    Evaluates the all-toxic scenario only, first on a coarse descending grid
    to find the threshold crossing, then on the fine grid inside the
    bracket. Exploits the (Monte Carlo) monotone shape of the curve; use
    ``calibrate_stage2`` for the full diagnostic sweep.
    """
    cfg = cfg or TrialConfig()
    base = {"design": design_id_or_config} if isinstance(design_id_or_config, str) else dict(design_id_or_config)
    root = RngStream(master_seed, ("stage2",))
    cache: dict[float, Stage2Point] = {}

    def eval_eps(eps: float) -> Stage2Point:
        eps = round(eps, 10)
        if eps not in cache:
            seed_stream = root.child(int(round(eps * 10000)))
            cache[eps] = _stage2_point(base, eps, ("14",), cfg, n_sim, seed_stream, n_jobs)
        return cache[eps]

    coarse = [round(1.0 - coarse_step * t, 10) for t in range(int(1.0 / coarse_step))]
    lo = None  # highest coarse epsilon that passes
    hi = 1.0
    for eps in coarse:
        pt = eval_eps(eps)
        if pt.no_selection_14 >= threshold:
            lo = eps
            break
        hi = eps
    if lo is None:
        curve = sorted(cache.values(), key=lambda p: -p.epsilon)
        return Stage2Result(chosen_epsilon=None, curve=curve, threshold=threshold)
    chosen = lo
    fine = np.arange(hi - fine_step, lo, -fine_step)
    for eps in fine:
        pt = eval_eps(float(eps))
        if pt.no_selection_14 >= threshold:
            chosen = pt.epsilon
            break
    curve = sorted(cache.values(), key=lambda p: -p.epsilon)
    return Stage2Result(chosen_epsilon=chosen, curve=curve, threshold=threshold)
