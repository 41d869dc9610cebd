"""Conflict detection between intents and deployed ACLs.

Detection runs in three refinement steps.  First each ACL is turned into its
truly-matched-flow (TMF) partition: position k owns the flows that first-match
at k, with the interface default acting as a virtual rule at position
len(acl)+1.  Second, the intent's traffic is intersected with the TMF of every
opposite-action position, stopping early once the accumulated TMF covers the
intent.  Third, interface-path validation discards overlap flows whose routes
never traverse the interface, since those can never actually collide there.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .flowset import FlowSet, GlobalFlowTable, Rule, TimedFlowSet
from .netmodel import Interface, Path, Routing, SNMT, Topology, snmt_match
from .timealg import ANY_TIME, TimeAtomizer, TimeRange


class PathIndex:
    """Per-flow routing facts: which interfaces a flow's paths traverse.

    Paths only depend on the (source atom, destination atom) pair, so they are
    computed once per pair and fanned out across application atoms.
    """

    def __init__(self, table: GlobalFlowTable, topo: Topology, snmt: SNMT,
                 routing: Optional[Routing] = None):
        self.table = table
        self.topo = topo
        self.snmt = snmt
        self.routing = routing or Routing(topo)
        self._pair_paths: Dict[Tuple[int, int], List[Path]] = {}
        self._iface_bits: Dict[Interface, int] = {}

    def paths_for_pair(self, s: int, d: int) -> List[Path]:
        key = (s, d)
        if key not in self._pair_paths:
            src_gws = sorted({m.gateway for m in
                              snmt_match(self.table.src_atoms[s], self.snmt)})
            dst_gws = sorted({m.gateway for m in
                              snmt_match(self.table.dst_atoms[d], self.snmt)})
            paths: List[Path] = []
            for sg in src_gws:
                for dg in dst_gws:
                    if sg == dg:
                        continue
                    paths.extend(self.routing.interface_paths(sg, dg))
            self._pair_paths[key] = paths
        return self._pair_paths[key]

    def flows_through(self, iface: Interface) -> FlowSet:
        """All flows with at least one path traversing the interface."""
        if not self._iface_bits:
            # One pass over atom pairs builds the map for every interface.
            app_block = (1 << self.table.n_app) - 1
            for d in range(self.table.n_dst):
                for s in range(self.table.n_src):
                    block = app_block << (d * self.table.n_src + s) * self.table.n_app
                    seen = set()
                    for p in self.paths_for_pair(s, d):
                        seen.update(p)
                    for i in seen:
                        self._iface_bits[i] = self._iface_bits.get(i, 0) | block
        return FlowSet(self._iface_bits.get(iface, 0), self.table.size)


@dataclass
class Environment:
    """A network with its deployed ACLs: the input to detection and planning."""

    table: GlobalFlowTable
    topo: Topology
    snmt: SNMT
    acls: Dict[Interface, List[Rule]]
    defaults: Dict[Interface, str] = field(default_factory=dict)
    default_action: str = "permit"

    def __post_init__(self):
        self.routing = Routing(self.topo)
        self.paths = PathIndex(self.table, self.topo, self.snmt, self.routing)

    def effective_default(self, iface: Interface) -> str:
        return self.defaults.get(iface, self.default_action)

    def all_defaults(self) -> Dict[Interface, str]:
        return {i: self.effective_default(i) for i in self.topo.interfaces}

    def time_context(self, extra: Sequence[Rule] = ()) -> TimeAtomizer:
        ranges = {r.time for rules in self.acls.values() for r in rules}
        ranges.update(r.time for r in extra)
        return TimeAtomizer(ranges)

    def copy_acls(self) -> Dict[Interface, List[Rule]]:
        return {i: list(rules) for i, rules in self.acls.items()}


def compute_tmf(rules: Sequence[Rule], default: str, table: GlobalFlowTable,
                atomizer: TimeAtomizer) -> List[Tuple[int, str, TimedFlowSet]]:
    """TMF partition of an ACL: (1-based position, action, flows first-matching
    there).  The default occupies position len(rules)+1 and owns the rest."""
    out = []
    seen = TimedFlowSet.empty(table, atomizer)
    for pos, rule in enumerate(rules, start=1):
        tmf = TimedFlowSet.expand(table, atomizer, rule) - seen
        seen = seen | tmf
        out.append((pos, rule.action, tmf))
    universe = TimedFlowSet(tuple((1 << table.size) - 1 for _ in range(len(atomizer))),
                            table.size)
    out.append((len(rules) + 1, default, universe - seen))
    return out


@dataclass
class ConflictRecord:
    interface: Interface
    position: int  # 1-based; is_default marks the virtual default position
    rule: Optional[Rule]
    action: str
    flows: TimedFlowSet
    is_default: bool = False
    protected: Optional[TimedFlowSet] = None  # set during resolution

    def label(self) -> str:
        what = "default" if self.is_default else f"rule {self.position}"
        return f"{self.interface} {what} ({self.action})"


@dataclass
class DetectionResult:
    atomizer: TimeAtomizer
    records: List[ConflictRecord]
    intent_flows: TimedFlowSet
    positions_examined: int = 0

    def conflicting_flows(self) -> TimedFlowSet:
        total = TimedFlowSet((0,) * len(self.atomizer.atoms), self.intent_flows.size)
        for rec in self.records:
            total = total | rec.flows
        return total


def expand_intent(intent_rules: Sequence[Rule], table: GlobalFlowTable,
                  atomizer: TimeAtomizer) -> TimedFlowSet:
    total = TimedFlowSet.empty(table, atomizer)
    for rule in intent_rules:
        total = total | TimedFlowSet.expand(table, atomizer, rule)
    return total


def detect_all(intent_rules: Sequence[Rule], intent_action: str, env: Environment,
               use_tmf: bool = True, use_path: bool = True) -> DetectionResult:
    """Find every existing rule (or default) that opposes the intent.

    `use_tmf` and `use_path` disable the TMF refinement and the path
    validation respectively; both on is the real detector, both off is the
    naive overlap baseline kept for ablation comparisons.
    """
    atomizer = env.time_context(extra=intent_rules)
    table = env.table
    intent = expand_intent(intent_rules, table, atomizer)
    result = DetectionResult(atomizer, [], intent)

    for iface in sorted(env.topo.interfaces):
        rules = env.acls.get(iface, [])
        default = env.effective_default(iface)
        if use_tmf:
            parts = compute_tmf(rules, default, table, atomizer)
        else:
            parts = [(pos, r.action, TimedFlowSet.expand(table, atomizer, r))
                     for pos, r in enumerate(rules, start=1)]
            universe = TimedFlowSet(
                tuple((1 << table.size) - 1 for _ in range(len(atomizer))), table.size)
            parts.append((len(rules) + 1, default, universe))

        remaining = intent
        for pos, action, flows in parts:
            if use_tmf and not remaining:
                break
            result.positions_examined += 1
            if use_tmf:
                remaining = remaining - flows
            if action == intent_action:
                continue
            overlap = intent & flows
            if not overlap:
                continue
            if use_path:
                through = env.paths.flows_through(iface)
                overlap = overlap & TimedFlowSet(
                    tuple(through.bits for _ in range(len(atomizer.atoms))), table.size)
                if not overlap:
                    continue
            rule = rules[pos - 1] if pos <= len(rules) else None
            result.records.append(ConflictRecord(
                iface, pos, rule, action, overlap, is_default=rule is None))
    return result


# ---------------------------------------------------------------------------
# Resolution

def intersect_rules(a: Rule, b: Rule, action: str) -> Optional[Rule]:
    """Attribute-wise intersection of two rules, or None when disjoint."""
    def nets(x, y):
        if x is None:
            return y, True
        if y is None:
            return x, True
        if x.subnet_of(y):
            return x, True
        if y.subnet_of(x):
            return y, True
        return None, False

    src, ok = nets(a.src, b.src)
    if not ok:
        return None
    dst, ok = nets(a.dst, b.dst)
    if not ok:
        return None

    (pa, qa), (pb, qb) = a.app, b.app
    if pa is None:
        app = (pb, qb)
    elif pb is None:
        app = (pa, qa)
    elif pa != pb:
        return None
    elif qa is None:
        app = (pa, qb)
    elif qb is None or qa == qb:
        app = (pa, qa)
    else:
        return None

    time = a.time.intersect(b.time)
    if time is None:
        return None
    return Rule(src, dst, app, action, time)


@dataclass
class ResolvedIntent:
    """An intent after conflict resolution.

    `rules` realize the intent, `protect_rules` sit above them and preserve
    the conflicting traffic the operator chose to keep; `flow` is the traffic
    the deployment must still change.
    """

    rules: List[Rule]
    action: str
    protect_rules: List[Rule]
    flow: TimedFlowSet
    protected_flows: TimedFlowSet
    detection: DetectionResult

    @property
    def cost(self) -> int:
        """Rules added per deployment location."""
        return len(self.rules) + len(self.protect_rules)


def resolve(intent_rules: Sequence[Rule], intent_action: str,
            detection: DetectionResult, env: Environment,
            protect_intents: Sequence[Rule] = ()) -> ResolvedIntent:
    """Turn conflicts plus operator protect choices into a deployable unit.

    Each protect intent is intersected with each conflicting rule; a candidate
    survives if it actually covers some of that record's conflict flows.
    Protect rules take the opposite action of the intent and are placed above
    the intent rules, so protected traffic keeps its current behavior.
    """
    table, atomizer = env.table, detection.atomizer
    anti = "deny" if intent_action == "permit" else "permit"
    match_all = Rule(None, None, (None, None), anti)

    protect_rules: List[Rule] = []
    protected = TimedFlowSet.empty(table, atomizer)
    for rec in detection.records:
        rec.protected = TimedFlowSet.empty(table, atomizer)
        for p in protect_intents:
            base = rec.rule if rec.rule is not None else match_all
            cand = intersect_rules(p, base, anti)
            if cand is None:
                continue
            covered = TimedFlowSet.expand(table, atomizer, cand) & rec.flows
            if not covered:
                continue
            if cand not in protect_rules:
                protect_rules.append(cand)
            rec.protected = rec.protected | covered
            protected = protected | covered

    flow = detection.intent_flows
    for p in protect_rules:
        flow = flow - TimedFlowSet.expand(table, atomizer, p)
    return ResolvedIntent(list(intent_rules), intent_action, protect_rules,
                          flow, protected, detection)
