"""Live trial-conduct HTTP service.

Sessions persist as append-only JSON-lines event logs, one file per trial
id, so state can always be rebuilt by replaying the recorded cohorts
through the design. Recommendations for MCMC-backed designs are recomputed
per request with a seed derived from (trial id, cohort count), so repeated
reads agree.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .core import Combo, DoseGrid, TrialConfig, TrialState, record_cohort
from .designs import DESIGN_DEFAULTS, ConfigError, make_design
from .stats import RngStream

DATA_DIR_ENV = "COMBODOSE_DATA_DIR"


class CreateTrialRequest(BaseModel):
    design: str
    params: dict[str, Any] = Field(default_factory=dict)
    cfg: dict[str, Any] = Field(default_factory=dict)
    seed: int = 0


class CohortRequest(BaseModel):
    combo: tuple[int, int]
    size: int
    dlts: int
    override: bool = False


@dataclass
class Session:
    id: str
    design_id: str
    params: dict[str, Any]
    cfg: TrialConfig
    grid: DoseGrid
    seed: int
    design: Any
    state: TrialState
    status: str = "active"  # active | terminated | finalized
    mtc: tuple[int, int] | None = None
    recommendation: tuple[int, int] | None = None
    created: float = field(default_factory=time.time)
    updated: float = field(default_factory=time.time)
    lock: threading.Lock = field(default_factory=threading.Lock)
    overrides: list[int] = field(default_factory=list)


def _cfg_from_dict(raw: dict[str, Any]) -> tuple[TrialConfig, DoseGrid]:
    grid_raw = raw.get("grid", {})
    doses_a = tuple(grid_raw.get("doses_a", (100.0, 200.0, 300.0)))
    doses_b = tuple(grid_raw.get("doses_b", (100.0, 200.0, 300.0)))
    grid = DoseGrid(doses_a=doses_a, doses_b=doses_b)
    cfg = TrialConfig(
        target=raw.get("target", 0.30),
        cohort_size=raw.get("cohort_size", 3),
        max_n=raw.get("max_n", 36),
        start=Combo(*raw.get("start", (1, 1))),
        acceptable_band=tuple(raw.get("acceptable_band", (0.16, 0.33))),
        toxic_cutoff=raw.get("toxic_cutoff", 0.33),
    )
    return cfg, grid


def _decision_rng(session: Session, tag: str) -> np.random.Generator:
    token = int.from_bytes(session.id.encode()[:8].ljust(8, b"\0"), "little")
    n_cohorts = len(session.state.cohort_log)
    return RngStream(session.seed ^ token, (tag, n_cohorts)).generator()


def create_app(data_dir: str | Path | None = None) -> FastAPI:
    root = Path(data_dir or os.environ.get(DATA_DIR_ENV, "combodose_data"))
    root.mkdir(parents=True, exist_ok=True)
    app = FastAPI(title="combodose trial conduct API")
    sessions: dict[str, Session] = {}
    registry_lock = threading.Lock()

    def log_path(sid: str) -> Path:
        return root / f"{sid}.jsonl"

    def append_event(sid: str, event: dict[str, Any]) -> None:
        with log_path(sid).open("a") as fh:
            fh.write(json.dumps(event) + "\n")

    def build_session(sid: str, created: dict[str, Any]) -> Session:
        cfg, grid = _cfg_from_dict(created.get("cfg", {}))
        config = dict(created.get("params", {}))
        config["design"] = created["design"]
        design = make_design(config, grid, phi=cfg.target, max_n=cfg.max_n)
        state = TrialState.fresh(grid.shape, cfg.start)
        return Session(
            id=sid,
            design_id=created["design"],
            params=created.get("params", {}),
            cfg=cfg,
            grid=grid,
            seed=created.get("seed", 0),
            design=design,
            state=state,
        )

    def load_session(sid: str) -> Session:
        with registry_lock:
            if sid in sessions:
                return sessions[sid]
        path = log_path(sid)
        if not path.exists():
            raise HTTPException(status_code=404, detail=f"unknown trial {sid}")
        session: Session | None = None
        for line in path.read_text().splitlines():
            event = json.loads(line)
            if event["event"] == "created":
                session = build_session(sid, event)
                refresh(session)
            elif event["event"] == "cohort" and session is not None:
                apply_cohort(session, Combo(*event["combo"]), event["size"], event["dlts"])
            elif event["event"] == "finalized" and session is not None:
                session.status = "finalized"
                session.mtc = tuple(event["mtc"]) if event["mtc"] else None
        if session is None:
            raise HTTPException(status_code=404, detail=f"corrupt log for trial {sid}")
        with registry_lock:
            sessions.setdefault(sid, session)
        return sessions[sid]

    def refresh(session: Session) -> None:
        """Recompute elimination flags and the next recommendation."""
        mask = session.design.elimination_mask(session.state)
        if mask is not None:
            session.state = session.state.with_eliminated(mask)
        if session.status != "active":
            session.recommendation = None
            return
        if not session.state.cohort_log:
            session.recommendation = tuple(session.cfg.start)
            return
        decision = session.design.decide(session.state, _decision_rng(session, "decide"))
        if decision.is_terminal:
            session.state = session.state.terminate()
            session.status = "terminated"
            session.recommendation = None
        else:
            session.recommendation = tuple(decision.next)

    def apply_cohort(session: Session, combo: Combo, size: int, dlts: int) -> None:
        session.state = record_cohort(session.state, combo, size, dlts)
        session.updated = time.time()
        refresh(session)

    def posterior_summary(session: Session) -> dict[str, Any]:
        state = session.state
        design = session.design
        phi = session.cfg.target
        if session.design_id in ("boin", "keyboard"):
            means = ((state.y + 1.0) / (state.n + 2.0)).tolist()
            from scipy import special

            exceed = (
                1.0 - special.betainc(state.y + 1.0, state.n - state.y + 1.0, phi)
            ).tolist()
            barred = state.eliminated.tolist()
        elif session.design_id == "pipe":
            means = design.posterior_means(state).tolist()
            q = design.overdose_probs(state, phi)
            exceed = q.tolist()
            barred = design.barred_mask(state, q).tolist()
        elif session.design_id == "sfd":
            seed = _decision_rng(session, "summary").integers(2**31 - 1)
            m, e, _ = design.posterior(state, int(seed), phi)
            means, exceed = m.tolist(), e.tolist()
            barred = (e >= design.params.epsilon).tolist() if design.params.epsilon < 1 else (e >= 2).tolist()
        else:  # blrm
            seed = _decision_rng(session, "summary").integers(2**31 - 1)
            m, p_over, p_band, _ = design.posterior(state, int(seed))
            means, exceed = m.tolist(), p_over.tolist()
            barred = (p_over >= design.params.epsilon).tolist() if design.params.epsilon < 1 else (p_over >= 2).tolist()
        return {"means": means, "exceedance": exceed, "barred": barred}

    def display_bands(session: Session) -> tuple[float, float]:
        """The decision interval the design itself uses, for heatmap bucketing."""
        d = session.design
        if session.design_id == "boin":
            return (d.lambda_e, d.lambda_d)
        if session.design_id == "keyboard":
            return (d.params.b1, d.params.b2)
        if session.design_id == "blrm":
            return d.params.target_band
        return tuple(session.cfg.acceptable_band)

    def session_payload(session: Session) -> dict[str, Any]:
        return {
            "id": session.id,
            "design": session.design_id,
            "params": session.params,
            "status": session.status,
            "display_bands": display_bands(session),
            "recommendation": session.recommendation,
            "mtc": session.mtc,
            "cfg": {
                "target": session.cfg.target,
                "cohort_size": session.cfg.cohort_size,
                "max_n": session.cfg.max_n,
                "start": tuple(session.cfg.start),
                "acceptable_band": session.cfg.acceptable_band,
                "toxic_cutoff": session.cfg.toxic_cutoff,
                "grid": {
                    "doses_a": session.grid.doses_a,
                    "doses_b": session.grid.doses_b,
                },
            },
            "state": {
                "n": session.state.n.tolist(),
                "y": session.state.y.tolist(),
                "current": tuple(session.state.current),
                "eliminated": session.state.eliminated.tolist(),
                "terminated": session.state.terminated,
                "total_n": session.state.total_n,
                "cohort_log": [
                    {"combo": tuple(r.combo), "size": r.size, "dlts": r.dlts}
                    for r in session.state.cohort_log
                ],
            },
            "posterior_summary": posterior_summary(session),
        }

    @app.get("/api/designs")
    def designs() -> dict[str, Any]:
        return {"designs": [dict(v) for v in DESIGN_DEFAULTS.values()]}

    @app.post("/api/trials", status_code=201)
    def create_trial(req: CreateTrialRequest) -> dict[str, Any]:
        if req.design not in DESIGN_DEFAULTS:
            raise HTTPException(status_code=422, detail=f"unknown design {req.design!r}")
        sid = uuid.uuid4().hex[:12]
        created = {
            "event": "created",
            "design": req.design,
            "params": req.params,
            "cfg": req.cfg,
            "seed": req.seed,
        }
        try:
            session = build_session(sid, created)
        except (ConfigError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        refresh(session)
        append_event(sid, created)
        with registry_lock:
            sessions[sid] = session
        return {"id": sid, "recommendation": session.recommendation}

    @app.get("/api/trials/{sid}")
    def get_trial(sid: str) -> dict[str, Any]:
        session = load_session(sid)
        with session.lock:
            return session_payload(session)

    @app.post("/api/trials/{sid}/cohorts")
    def submit_cohort(sid: str, req: CohortRequest) -> dict[str, Any]:
        session = load_session(sid)
        with session.lock:
            if session.status != "active":
                raise HTTPException(status_code=409, detail=f"trial is {session.status}")
            if not 0 <= req.dlts <= req.size:
                raise HTTPException(status_code=422, detail="dlts must lie in [0, size]")
            combo = Combo(*req.combo)
            if not session.grid.contains(combo):
                raise HTTPException(status_code=422, detail=f"combo {req.combo} outside grid")
            if session.state.eliminated[combo.i - 1, combo.j - 1]:
                raise HTTPException(status_code=422, detail=f"combo {req.combo} is eliminated")
            if session.state.total_n + req.size > session.cfg.max_n:
                raise HTTPException(status_code=409, detail="sample size exhausted")
            if session.recommendation is not None and tuple(combo) != session.recommendation:
                if not req.override:
                    raise HTTPException(
                        status_code=422,
                        detail="combo differs from the recommendation; set override=true to force",
                    )
                session.overrides.append(len(session.state.cohort_log))
            apply_cohort(session, combo, req.size, req.dlts)
            append_event(
                sid,
                {
                    "event": "cohort",
                    "combo": list(combo),
                    "size": req.size,
                    "dlts": req.dlts,
                    "override": req.override,
                },
            )
            payload = session_payload(session)
            payload["recommendation"] = (
                "terminated" if session.status == "terminated" else session.recommendation
            )
            return payload

    @app.post("/api/trials/{sid}/finalize")
    def finalize(sid: str) -> dict[str, Any]:
        session = load_session(sid)
        with session.lock:
            if session.status == "finalized":
                return {"mtc": session.mtc}
            if session.status == "terminated":
                mtc = None
            else:
                selected = session.design.select_mtc(
                    session.state, _decision_rng(session, "select")
                )
                mtc = tuple(selected) if selected else None
            session.status = "finalized"
            session.mtc = mtc
            session.recommendation = None
            append_event(sid, {"event": "finalized", "mtc": list(mtc) if mtc else None})
            return {"mtc": mtc}

    return app
