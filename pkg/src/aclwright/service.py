"""HTTP service exposing the pipeline to the operator console.

One session per operator workspace; the session wraps a scenario and its
in-flight intents.  All state transitions go through the pipeline Session, so
the API cannot put an intent into a state the CLI could not.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Dict, Optional, Tuple

from fastapi import FastAPI, HTTPException, Query
from pydantic import BaseModel

from . import comprehension as comp
from .deploy import STRATEGIES
from .pipeline import Session, StateError, record_to_json
from .scenarios import Scenario, ScenarioParams, generate_scenario


class SessionRequest(BaseModel):
    template: str = "fig2"
    seed: int = 0
    rules_per_acl: int = 20
    num_permit: int = 0
    num_deny: int = 0
    num_protect: int = 0
    num_apps: int = 3
    target_conflict_ratio: Optional[float] = None
    default_action: Optional[str] = None
    scenario: Optional[dict] = None  # a full scenario document wins
    backend: str = "mock"


class TextBody(BaseModel):
    text: str


class ApplyBody(BaseModel):
    strategy: str = "xumi"


def _intent_json(session: Session, intent_id: str) -> dict:
    rec = session.intents[intent_id]
    out = rec.to_json()
    out["session"] = session.id
    out["protect_texts"] = list(rec.protect_texts)
    return out


def create_app(data_dir: Optional[str] = None) -> FastAPI:
    data_dir = data_dir or os.environ.get("ACLW_DATA_DIR")
    app = FastAPI(title="aclwright")
    sessions: Dict[str, Session] = {}
    intent_index: Dict[str, Tuple[str, str]] = {}  # intent id -> (session, intent)

    def get_session(sid: str) -> Session:
        if sid not in sessions:
            raise HTTPException(404, f"no such session {sid}")
        return sessions[sid]

    def get_intent(iid: str) -> Tuple[Session, str]:
        if iid not in intent_index:
            raise HTTPException(404, f"no such intent {iid}")
        sid, _ = intent_index[iid]
        return sessions[sid], iid

    @app.post("/sessions")
    def create_session(body: SessionRequest):
        if body.scenario is not None:
            scenario = Scenario.from_json(body.scenario)
        else:
            params = ScenarioParams(
                template=body.template, seed=body.seed,
                rules_per_acl=body.rules_per_acl,
                num_permit=body.num_permit, num_deny=body.num_deny,
                num_protect=body.num_protect, num_apps=body.num_apps,
                target_conflict_ratio=body.target_conflict_ratio,
                default_action=body.default_action)
            scenario = generate_scenario(params)
        cfg = comp.BackendConfig.from_env()
        if body.backend == "live":
            backend = comp.HttpChatBackend(cfg)
        else:
            backend = comp.MockChatBackend(aliases=scenario.aliases)
        session = Session(scenario, backend, cfg, run_dir=None)
        if data_dir:
            run_dir = Path(data_dir) / session.id
            run_dir.mkdir(parents=True, exist_ok=True)
            session.run_dir = run_dir
        sessions[session.id] = session
        return {"id": session.id,
                "template": scenario.params.template,
                "default_action": scenario.default_action,
                "entities": sorted(scenario.snmt.entries),
                "intents": [s.text for s in scenario.intents]}

    @app.post("/sessions/{sid}/intents")
    def submit_intent(sid: str, body: TextBody):
        session = get_session(sid)
        rec = session.submit_intent(body.text)
        intent_index[rec.id] = (sid, rec.id)
        return _intent_json(session, rec.id)

    @app.post("/intents/{iid}/approve")
    def approve(iid: str):
        session, intent_id = get_intent(iid)
        try:
            session.approve(intent_id)
        except StateError as e:
            raise HTTPException(409, str(e))
        return _intent_json(session, intent_id)

    @app.post("/intents/{iid}/feedback")
    def feedback(iid: str, body: TextBody):
        session, intent_id = get_intent(iid)
        try:
            session.feedback(intent_id, body.text)
        except StateError as e:
            raise HTTPException(409, str(e))
        except comp.RoundsExhaustedError as e:
            raise HTTPException(422, str(e))
        return _intent_json(session, intent_id)

    @app.get("/intents/{iid}/conflicts")
    def conflicts(iid: str, full: bool = False):
        session, intent_id = get_intent(iid)
        try:
            rec = session.detect(intent_id)
        except StateError as e:
            raise HTTPException(409, str(e))
        det = rec.detection
        return {"intent": _intent_json(session, intent_id),
                "positions_examined": det.positions_examined,
                "records": [record_to_json(r, session.env, det.atomizer, full=full)
                            for r in det.records]}

    @app.post("/intents/{iid}/protect")
    def protect(iid: str, body: TextBody):
        session, intent_id = get_intent(iid)
        try:
            rec = session.protect(intent_id, body.text)
            session.resolve_intent(intent_id)
        except StateError as e:
            raise HTTPException(409, str(e))
        ri = rec.resolved
        return {"intent": _intent_json(session, intent_id),
                "protect_rules": [r.to_json() for r in ri.protect_rules],
                "remaining_flow_count": len(ri.flow),
                "protected_flow_count": len(ri.protected_flows)}

    @app.get("/sessions/{sid}/plan")
    def plan(sid: str, strategy: str = Query("xumi")):
        session = get_session(sid)
        if strategy not in STRATEGIES:
            raise HTTPException(422, f"unknown strategy {strategy!r}")
        try:
            p = session.plan(strategy)
        except StateError as e:
            raise HTTPException(409, str(e))
        return p.to_json()

    @app.post("/sessions/{sid}/apply")
    def apply(sid: str, body: ApplyBody):
        session = get_session(sid)
        try:
            acls = session.apply(body.strategy)
        except StateError as e:
            raise HTTPException(409, str(e))
        return {"strategy": session.applied_strategy,
                "interfaces_changed": sorted(
                    str(i) for i in acls
                    if acls[i] != session.env.acls.get(i, []))}

    @app.get("/sessions/{sid}/verification")
    def verification(sid: str):
        session = get_session(sid)
        try:
            report = session.verify()
        except StateError as e:
            raise HTTPException(409, str(e))
        return report.to_json()

    return app
