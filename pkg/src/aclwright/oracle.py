"""Naive reference semantics for ACL evaluation.

Everything here works one concrete flow at a time, with explicit loops and
first-match ACL evaluation, and never touches the bitset engine.  It exists
as an independent source of truth: the optimized conflict detector and the
deployment verifier are checked against these routines.

Time is handled by sampling concrete dates.  A date carries its real weekday,
so sampling a full week around every window boundary (plus far past and far
future) exercises every distinct (weekday, date-window) region a rule set can
produce.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .netmodel import Interface, IPv4Net, Path, Routing, SNMT, Topology, snmt_match
from .flowset import AppAtom, Rule
from .timealg import TimeRange

Flow = Tuple[IPv4Net, IPv4Net, AppAtom]

FAR_PAST = datetime.date(1999, 1, 4)
FAR_FUTURE = datetime.date(2099, 1, 4)

# Guard for accidental use on universes too large for per-flow loops.
MAX_BRUTE_FORCE_FLOWS = 4096


def time_holds(tr: TimeRange, date: datetime.date) -> bool:
    if not tr.dow_mask >> date.weekday() & 1:
        return False
    if tr.window is None:
        return True
    return tr.window[0] <= date <= tr.window[1]


def sample_dates(rules: Iterable[Rule]) -> List[datetime.date]:
    """Concrete dates covering every time region distinguishable by `rules`."""
    anchors = {FAR_PAST, FAR_FUTURE}
    for rule in rules:
        if rule.time.window is not None:
            lo, hi = rule.time.window
            anchors.add(lo - datetime.timedelta(days=1))
            anchors.add(lo)
            anchors.add(hi + datetime.timedelta(days=1))
    dates = set()
    for anchor in anchors:
        for off in range(7):
            dates.add(anchor + datetime.timedelta(days=off))
    return sorted(dates)


def app_matches(rule_app: AppAtom, flow_app: AppAtom) -> bool:
    proto, port = rule_app
    if proto is None:
        return True
    if proto != flow_app[0]:
        return False
    return port is None or port == flow_app[1]


def rule_matches(rule: Rule, flow: Flow, date: datetime.date) -> bool:
    src, dst, app = flow
    if rule.src is not None and not src.subnet_of(rule.src):
        return False
    if rule.dst is not None and not dst.subnet_of(rule.dst):
        return False
    return app_matches(rule.app, app) and time_holds(rule.time, date)


def first_match(rules: Sequence[Rule], flow: Flow, date: datetime.date,
                default_action: str) -> Tuple[int, str]:
    """(1-based position, action); the default acts as rule len(rules)+1."""
    for pos, rule in enumerate(rules, start=1):
        if rule_matches(rule, flow, date):
            return pos, rule.action
    return len(rules) + 1, default_action


def paths_for_flow(flow: Flow, topo: Topology, snmt: SNMT,
                   routing: Optional[Routing] = None) -> List[Path]:
    """Every k-shortest gateway-to-gateway interface path the flow can take."""
    routing = routing or Routing(topo)
    src_gws = sorted({m.gateway for m in snmt_match(flow[0], snmt)})
    dst_gws = sorted({m.gateway for m in snmt_match(flow[1], snmt)})
    paths: List[Path] = []
    for s in src_gws:
        for d in dst_gws:
            if s == d:
                continue
            paths.extend(routing.interface_paths(s, d))
    return paths


def simulate_flow(path: Path, flow: Flow, date: datetime.date,
                  acls: Dict[Interface, Sequence[Rule]],
                  defaults: Dict[Interface, str]) -> str:
    """Walk the path; the first interface whose ACL denies the flow drops it."""
    return path_verdict(path, flow, date, acls, defaults)[0]


def path_verdict(path: Path, flow: Flow, date: datetime.date,
                 acls: Dict[Interface, Sequence[Rule]],
                 defaults: Dict[Interface, str],
                 ) -> Tuple[str, Optional[Tuple[Interface, int]]]:
    """(outcome, deciding (interface, position)): the first deny along the
    path decides, otherwise the last interface's permitting position does."""
    deciding: Optional[Tuple[Interface, int]] = None
    for iface in path:
        rules = acls.get(iface)
        if rules is None and iface not in defaults:
            continue
        pos, action = first_match(rules or (), flow, date, defaults.get(iface, "permit"))
        deciding = (iface, pos)
        if action == "deny":
            return "deny", deciding
    return "permit", deciding


@dataclass(frozen=True)
class ConflictSample:
    """One brute-force conflict observation."""

    interface: Interface
    position: int  # 1-based; len(acl)+1 means the default action
    flow_index: int
    date: datetime.date


def brute_force_conflicts(intent_rules: Sequence[Rule], intent_action: str,
                          table, topo: Topology, snmt: SNMT,
                          acls: Dict[Interface, Sequence[Rule]],
                          defaults: Dict[Interface, str],
                          routing: Optional[Routing] = None,
                          dates: Optional[Sequence[datetime.date]] = None,
                          ) -> Set[ConflictSample]:
    """Every (interface, rule position, flow, date) where existing behavior
    opposes the intent and the interface lies on a path of the flow."""
    if table.size > MAX_BRUTE_FORCE_FLOWS:
        raise ValueError(f"universe of {table.size} flows is too large for brute force")
    routing = routing or Routing(topo)
    all_rules = list(intent_rules)
    for rules in acls.values():
        all_rules.extend(rules)
    if dates is None:
        dates = sample_dates(all_rules)

    out: Set[ConflictSample] = set()
    path_ifaces: Dict[int, Set[Interface]] = {}
    for fi in range(table.size):
        flow = table.flow_at(fi)
        for date in dates:
            if not any(rule_matches(r, flow, date) for r in intent_rules):
                continue
            if fi not in path_ifaces:
                path_ifaces[fi] = {i for p in paths_for_flow(flow, topo, snmt, routing)
                                   for i in p}
            on_path = path_ifaces[fi]
            for iface in sorted(set(acls) | set(defaults)):
                if iface not in on_path:
                    continue
                pos, action = first_match(acls.get(iface, ()), flow, date,
                                          defaults.get(iface, "permit"))
                if action != intent_action:
                    out.add(ConflictSample(iface, pos, fi, date))
    return out


@dataclass
class Violation:
    intent: int
    flow_index: int
    date: datetime.date
    path: Path
    expected: str
    observed: str


@dataclass
class VerificationReport:
    checked: int = 0
    violations: List[Violation] = field(default_factory=list)
    # Deciding-interface drift on protected flows: outcome preserved but a
    # different hop now decides it.  Informational, not a failure.
    drift: List[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        def vjson(v: Violation) -> dict:
            return {"intent_id": v.intent, "flow": v.flow_index,
                    "date": v.date.isoformat(),
                    "path": [str(i) for i in v.path],
                    "expected": v.expected, "got": v.observed}
        return {"checked": self.checked,
                "status": "pass" if self.ok else "fail",
                "violations": [vjson(v) for v in self.violations],
                "drift": [vjson(v) for v in self.drift]}


def verify_intents(items: Sequence[Tuple[str, Iterable[int], TimeRange]],
                   table, topo: Topology, snmt: SNMT,
                   acls: Dict[Interface, Sequence[Rule]],
                   defaults: Dict[Interface, str],
                   routing: Optional[Routing] = None,
                   dates: Optional[Sequence[datetime.date]] = None,
                   ) -> VerificationReport:
    """Check that deployed ACLs realize each intent on every path.

    `items` are (expected action, flow indices, time scope) triples; a flow is
    checked at each sample date inside the scope, on every path it can take.
    """
    routing = routing or Routing(topo)
    if dates is None:
        all_rules = [r for rules in acls.values() for r in rules]
        all_rules.extend(Rule(None, None, (None, None), a, t) for a, _, t in items)
        dates = sample_dates(all_rules)
    report = VerificationReport()
    path_cache: Dict[int, List[Path]] = {}
    for idx, (expected, flows, scope) in enumerate(items):
        active = [d for d in dates if time_holds(scope, d)]
        for fi in flows:
            flow = table.flow_at(fi)
            if fi not in path_cache:
                path_cache[fi] = paths_for_flow(flow, topo, snmt, routing)
            for path in path_cache[fi]:
                for date in active:
                    observed = simulate_flow(path, flow, date, acls, defaults)
                    report.checked += 1
                    if observed != expected:
                        report.violations.append(
                            Violation(idx, fi, date, path, expected, observed))
    return report
