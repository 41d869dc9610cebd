"""Pipeline state machine and batch harness.

Each intent moves through drafted -> awaiting-review -> approved -> detected
-> resolving -> resolved -> planned -> applied -> verified; review gates are
explicit (an operator approve or feedback action), and a batch mode
auto-approves for evaluation runs.  Every stage writes its artifact as JSON
into a run directory; artifacts are immutable, so a crash can resume from the
last completed stage without recomputing it.
"""

from __future__ import annotations

import hashlib
import json
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import comprehension as comp
from .conflict import (ConflictRecord, DetectionResult, Environment,
                       ResolvedIntent, detect_all, expand_intent, resolve)
from .deploy import Plan, STRATEGIES, apply_plan, plan_deployment, verify_plan
from .flowset import FlowSet, Rule, TimedFlowSet
from .netmodel import Interface
from .scenarios import Scenario

STAGES = ("drafted", "awaiting-review", "approved", "detected", "resolving",
          "resolved", "planned", "applied", "verified")


class PipelineError(RuntimeError):
    pass


class StateError(PipelineError):
    """An action was attempted in a stage that does not admit it."""


def _stage_index(stage: str) -> int:
    return STAGES.index(stage)


# ---------------------------------------------------------------------------
# Artifact serialization

def timed_to_json(tfs: TimedFlowSet) -> dict:
    return {"size": tfs.size, "slices": [format(s, "x") for s in tfs.slices]}


def timed_from_json(obj: dict) -> TimedFlowSet:
    return TimedFlowSet(tuple(int(s, 16) for s in obj["slices"]), obj["size"])


def record_to_json(rec: ConflictRecord, env: Environment, atomizer,
                   full: bool = False) -> dict:
    flows = []
    limit = None if full else 10
    for t in rec.flows.nonempty_atoms():
        for fi in rec.flows.slice(t).indices():
            src, dst, app = env.table.flow_at(fi)
            proto, port = app
            flows.append({"src": str(src), "dst": str(dst),
                          "app": proto if port is None else f"{proto}:{port}",
                          "when": atomizer.describe(t)})
            if limit and len(flows) >= limit:
                break
        if limit and len(flows) >= limit:
            break
    return {"interface": str(rec.interface), "position": rec.position,
            "is_default": rec.is_default, "action": rec.action,
            "rule": rec.rule.to_json() if rec.rule else None,
            "flow_count": len(rec.flows), "sample_flows": flows,
            "flows_raw": timed_to_json(rec.flows),
            "protected_raw": timed_to_json(rec.protected) if rec.protected else None}


def record_from_json(obj: dict) -> ConflictRecord:
    rec = ConflictRecord(
        Interface.parse(obj["interface"]), obj["position"],
        Rule.from_json(obj["rule"]) if obj["rule"] else None,
        obj["action"], timed_from_json(obj["flows_raw"]),
        is_default=obj["is_default"])
    if obj.get("protected_raw"):
        rec.protected = timed_from_json(obj["protected_raw"])
    return rec


# ---------------------------------------------------------------------------
# Per-intent record

@dataclass
class IntentRecord:
    id: str
    text: str
    stage: str = "drafted"
    ir: Optional[comp.IR] = None
    round: int = 0
    diagnostics: List[comp.Diagnostic] = field(default_factory=list)
    rules: List[Rule] = field(default_factory=list)
    detection: Optional[DetectionResult] = None
    protect_texts: List[str] = field(default_factory=list)
    protect_rules: List[Rule] = field(default_factory=list)
    resolved: Optional[ResolvedIntent] = None

    def advance(self, stage: str):
        # Stages only move forward; reaching an earlier stage again is a no-op.
        if _stage_index(stage) > _stage_index(self.stage):
            self.stage = stage

    def to_json(self) -> dict:
        return {"id": self.id, "text": self.text, "stage": self.stage,
                "round": self.round,
                "ir": self.ir.to_json() if self.ir else None,
                "diagnostics": [{"code": d.code, "message": d.message}
                                for d in self.diagnostics]}


class Session:
    """One operator workspace: a scenario plus its in-flight intents."""

    def __init__(self, scenario: Scenario, backend, cfg: comp.BackendConfig,
                 run_dir: Optional[Path] = None):
        self.id = uuid.uuid4().hex[:12]
        self.scenario = scenario
        self.env: Environment = scenario.environment()
        self.backend = backend
        self.cfg = cfg
        self.intents: Dict[str, IntentRecord] = {}
        self.plans: Dict[str, Plan] = {}
        self.applied_acls = None
        self.applied_strategy: Optional[str] = None
        self.verification = None
        self.run_dir = Path(run_dir) if run_dir else None
        if self.run_dir:
            self.run_dir.mkdir(parents=True, exist_ok=True)

    # -- artifacts ----------------------------------------------------------

    def _write(self, rel: str, obj):
        if not self.run_dir:
            return
        path = self.run_dir / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        if path.exists():
            return  # artifacts are immutable once written
        path.write_text(json.dumps(obj, indent=2, sort_keys=True))

    def _read(self, rel: str):
        if not self.run_dir:
            return None
        path = self.run_dir / rel
        if path.exists():
            return json.loads(path.read_text())
        return None

    # -- comprehension stage ------------------------------------------------

    def submit_intent(self, text: str) -> IntentRecord:
        # Ids are deterministic per (position, text) so a resumed run finds
        # the artifacts of its predecessor.
        digest = hashlib.sha1(text.encode()).hexdigest()[:10]
        rec = IntentRecord(f"{len(self.intents):02d}{digest}", text)
        self.intents[rec.id] = rec
        rec.ir = comp.comprehend(text, self.backend, self.scenario.snmt, self.cfg)
        rec.diagnostics = comp.validate_ir(rec.ir, self.scenario.snmt)
        rec.advance("awaiting-review")
        self._write(f"intents/{rec.id}/ir-round0.json", rec.ir.to_json())
        return rec

    def feedback(self, intent_id: str, text: str) -> IntentRecord:
        rec = self._get(intent_id)
        if rec.stage != "awaiting-review":
            raise StateError(f"feedback requires awaiting-review, intent is {rec.stage}")
        record = comp.FeedbackRecord(rec.text, rec.ir, text, rec.round)
        rec.ir = comp.refine(record, self.backend, self.scenario.snmt, self.cfg)
        rec.round += 1
        rec.diagnostics = comp.validate_ir(rec.ir, self.scenario.snmt)
        self._write(f"intents/{rec.id}/ir-round{rec.round}.json", rec.ir.to_json())
        return rec

    def approve(self, intent_id: str) -> IntentRecord:
        rec = self._get(intent_id)
        if rec.stage != "awaiting-review":
            raise StateError(f"approve requires awaiting-review, intent is {rec.stage}")
        blocking = [d for d in rec.diagnostics if d.code == "unresolved"]
        if blocking:
            raise StateError(f"cannot approve: {blocking[0].message}")
        generated = comp.generate_rules(rec.ir, self.scenario.snmt)
        rec.rules = [g.rule for g in generated]
        rec.advance("approved")
        self._write(f"intents/{rec.id}/approved.json",
                    {"rules": [r.to_json() for r in rec.rules]})
        return rec

    # -- detection and resolution ------------------------------------------

    def detect(self, intent_id: str) -> IntentRecord:
        rec = self._get(intent_id)
        if rec.stage == "awaiting-review":
            raise StateError("intent must be approved before detection")
        if rec.detection is not None:
            return rec
        action = rec.ir.action
        cached = self._read(f"intents/{rec.id}/detection.json")
        atomizer = self.env.time_context(extra=rec.rules)
        if cached is not None:
            records = [record_from_json(r) for r in cached["records"]]
            rec.detection = DetectionResult(
                atomizer, records,
                expand_intent(rec.rules, self.env.table, atomizer),
                cached.get("positions_examined", 0))
        else:
            rec.detection = detect_all(rec.rules, action, self.env)
            self._write(f"intents/{rec.id}/detection.json", {
                "positions_examined": rec.detection.positions_examined,
                "records": [record_to_json(r, self.env, rec.detection.atomizer,
                                           full=True)
                            for r in rec.detection.records]})
        rec.advance("detected")
        return rec

    def protect(self, intent_id: str, text: str) -> IntentRecord:
        rec = self._get(intent_id)
        self.detect(intent_id)
        rec.advance("resolving")
        ir = comp.comprehend(text, self.backend, self.scenario.snmt, self.cfg)
        if ir.action != "protect":
            ir = comp.IR(ir.source, ir.destination, ir.application, ir.time,
                         "protect")
        anti = "deny" if rec.ir.action == "permit" else "permit"
        for g in comp.generate_rules(ir, self.scenario.snmt):
            rule = Rule(g.rule.src, g.rule.dst, g.rule.app, anti, g.rule.time)
            if rule not in rec.protect_rules:
                rec.protect_rules.append(rule)
        rec.protect_texts.append(text)
        rec.resolved = None  # supersede any earlier resolution round
        return rec

    def resolve_intent(self, intent_id: str) -> IntentRecord:
        rec = self._get(intent_id)
        self.detect(intent_id)
        if rec.resolved is None:
            rec.resolved = resolve(rec.rules, rec.ir.action, rec.detection,
                                   self.env, protect_intents=rec.protect_rules)
            self._write(f"intents/{rec.id}/resolved.json", {
                "rules": [r.to_json() for r in rec.resolved.rules],
                "protect_rules": [r.to_json() for r in rec.resolved.protect_rules],
                "flow": timed_to_json(rec.resolved.flow)})
        rec.advance("resolved")
        return rec

    # -- planning onward ----------------------------------------------------

    def _resolved_list(self) -> List[ResolvedIntent]:
        out = []
        for rec in sorted(self.intents.values(), key=lambda r: r.id):
            if rec.stage == "awaiting-review":
                raise StateError(f"intent {rec.id} still awaits review")
            self.resolve_intent(rec.id)
            out.append(rec.resolved)
        return out

    def plan(self, strategy: str = "xumi") -> Plan:
        if strategy not in STRATEGIES:
            raise PipelineError(f"unknown strategy {strategy!r}")
        if strategy not in self.plans:
            resolved = self._resolved_list()
            self.plans[strategy] = plan_deployment(resolved, self.env, strategy)
            self._write(f"plan-{strategy}.json", self.plans[strategy].to_json())
            for rec in self.intents.values():
                rec.advance("planned")
        return self.plans[strategy]

    def apply(self, strategy: str = "xumi"):
        plan = self.plan(strategy)
        if self.applied_acls is None:
            resolved = self._resolved_list()
            self.applied_acls = apply_plan(plan, resolved, self.env)
            self.applied_strategy = strategy
            self._write("applied.json", {
                "strategy": strategy,
                "acls": {str(i): [r.to_json() for r in rules]
                         for i, rules in sorted(self.applied_acls.items())}})
            for rec in self.intents.values():
                rec.advance("applied")
        return self.applied_acls

    def verify(self):
        if self.applied_acls is None:
            raise StateError("nothing applied yet")
        if self.verification is None:
            resolved = self._resolved_list()
            self.verification = verify_plan(resolved, self.applied_acls, self.env)
            self._write("verification.json", self.verification.to_json())
            for rec in self.intents.values():
                rec.advance("verified")
        return self.verification

    def _get(self, intent_id: str) -> IntentRecord:
        if intent_id not in self.intents:
            raise KeyError(f"no such intent {intent_id!r}")
        return self.intents[intent_id]


# ---------------------------------------------------------------------------
# Batch harness

def run_pipeline(scenario: Scenario, backend=None,
                 cfg: Optional[comp.BackendConfig] = None,
                 strategy: str = "xumi", auto_approve: bool = True,
                 out_dir: Optional[str] = None,
                 strategies: Sequence[str] = STRATEGIES) -> dict:
    """Drive every scenario intent through the full pipeline and report
    rule-addition counts per strategy plus the verification status."""
    cfg = cfg or comp.BackendConfig.from_env()
    if backend is None:
        backend = comp.MockChatBackend(aliases=scenario.aliases)
    session = Session(scenario, backend, cfg,
                      run_dir=Path(out_dir) if out_dir else None)
    if session.run_dir:
        session._write("scenario.json", scenario.to_json())

    protects = [s for s in scenario.intents if s.action == "protect"]
    normal = [s for s in scenario.intents if s.action != "protect"]
    ids = []
    for spec in normal:
        rec = session.submit_intent(spec.text)
        ids.append(rec.id)
        if auto_approve:
            session.approve(rec.id)
        else:
            return {"session": session.id, "status": "awaiting-review",
                    "intents": [r.to_json() for r in session.intents.values()]}
    for spec in protects:
        if spec.protect_for is None or spec.protect_for >= len(ids):
            continue
        target = ids[spec.protect_for]
        session.detect(target)
        if session.intents[target].detection.records:
            session.protect(target, spec.text)

    totals = {}
    for strat in strategies:
        totals[strat] = session.plan(strat).total_rules
    session.apply(strategy)
    report_obj = session.verify()

    report = {
        "session": session.id,
        "intents": [session.intents[i].to_json() for i in ids],
        "rule_additions": totals,
        "applied_strategy": strategy,
        "verification": report_obj.to_json(),
        "verified": report_obj.ok,
    }
    if session.run_dir:
        session._write("report.json", report)
    return report
