"""Deployment planning: where to install each resolved intent's rules.

Permit intents are interface-level: every interface that still denies some of
the intent's traffic needs coverage, and interfaces can be optimized
independently.  Deny intents are path-level: every path a flow can take needs
at least one deny, so placements interact across interfaces.  Both programs
exploit equivalent intent sets (EIS): intent j covers intent i at interface p
when j's flows plus the interface's existing same-action traffic contain i's
flows, so deploying j there satisfies i for free.

The covering programs are solved exactly with a small branch-and-bound
weighted set cover; ties are broken toward the lexicographically smallest
selection so plans are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

from . import oracle
from .conflict import Environment, ResolvedIntent, compute_tmf
from .flowset import FlowSet, Rule, TimedFlowSet
from .netmodel import Interface, Path, snmt_match
from .timealg import TimeAtomizer

Var = Tuple[Interface, int]  # (interface, intent index within its group)

STRATEGIES = ("xumi", "endpoint", "catchall", "bottleneck")


class PlanningError(RuntimeError):
    pass


@dataclass
class Plan:
    strategy: str
    # interface -> ordered intent indices (into the resolved intent list)
    placements: Dict[Interface, List[int]]
    costs: Dict[int, int]  # intent index -> rules per placement (t_i)

    @property
    def total_rules(self) -> int:
        return sum(self.costs[i] for units in self.placements.values() for i in units)

    @property
    def num_placements(self) -> int:
        return sum(len(units) for units in self.placements.values())

    def to_json(self) -> dict:
        return {
            "strategy": self.strategy,
            "total_rules": self.total_rules,
            "num_placements": self.num_placements,
            "placements": {str(i): units for i, units in
                           sorted(self.placements.items())},
        }


class GroupContext:
    """Shared planning state for one action group of resolved intents.

    All flow sets are re-expanded against one time atomization covering the
    whole environment plus every intent, so sets from different intents are
    directly comparable.
    """

    def __init__(self, env: Environment, resolved: Sequence[ResolvedIntent],
                 indices: Sequence[int]):
        self.env = env
        self.indices = list(indices)
        extra = [r for i in indices for r in resolved[i].rules]
        extra += [r for i in indices for r in resolved[i].protect_rules]
        self.atomizer = env.time_context(extra=extra)
        self.costs = {i: resolved[i].cost for i in indices}
        self.flows: Dict[int, TimedFlowSet] = {}
        for i in indices:
            ri = resolved[i]
            flow = TimedFlowSet.empty(env.table, self.atomizer)
            for rule in ri.rules:
                flow = flow | TimedFlowSet.expand(env.table, self.atomizer, rule)
            for rule in ri.protect_rules:
                flow = flow - TimedFlowSet.expand(env.table, self.atomizer, rule)
            self.flows[i] = flow
        self._tmf_agg: Dict[Tuple[Interface, str], TimedFlowSet] = {}
        self._q: Dict[Var, bool] = {}

    def tmf_aggregate(self, iface: Interface, action: str) -> TimedFlowSet:
        """Union of TMF slices (default included) with the given action."""
        key = (iface, action)
        if key not in self._tmf_agg:
            parts = compute_tmf(self.env.acls.get(iface, []),
                                self.env.effective_default(iface),
                                self.env.table, self.atomizer)
            total = TimedFlowSet.empty(self.env.table, self.atomizer)
            for _, act, flows in parts:
                if act == action:
                    total = total | flows
            self._tmf_agg[key] = total
        return self._tmf_agg[key]

    def timed(self, fs: FlowSet) -> TimedFlowSet:
        return TimedFlowSet(tuple(fs.bits for _ in range(len(self.atomizer))), fs.size)

    def q(self, iface: Interface, i: int, action: str) -> bool:
        """Whether intent i has the potential (and need) to deploy at iface:
        some of its remaining flows both traverse iface and currently receive
        the opposite action there."""
        key = (iface, i)
        if key not in self._q:
            anti = "deny" if action == "permit" else "permit"
            leak = self.flows[i] & self.tmf_aggregate(iface, anti)
            leak = leak & self.timed(self.env.paths.flows_through(iface))
            self._q[key] = bool(leak)
        return self._q[key]

    def eis(self, iface: Interface, i: int, action: str,
            candidates: Sequence[int]) -> Set[int]:
        """Intents whose deployment at iface would satisfy intent i there."""
        base = self.tmf_aggregate(iface, action)
        out = set()
        for j in candidates:
            if self.flows[i] <= base | self.flows[j]:
                out.add(j)
        return out

    def flow_pairs(self, i: int) -> List[Tuple[int, int]]:
        """(src atom, dst atom) pairs present in intent i's remaining flows."""
        union = 0
        for s in self.flows[i].slices:
            union |= s
        pairs = set()
        t = self.env.table
        for fi in FlowSet(union, t.size).indices():
            rest, _ = divmod(fi, t.n_app)
            d, s = divmod(rest, t.n_src)
            pairs.add((s, d))
        return sorted(pairs)

    def omega(self, i: int) -> List[Path]:
        """Every routing path some remaining flow of intent i can take."""
        seen = set()
        paths = []
        for s, d in self.flow_pairs(i):
            for p in self.env.paths.paths_for_pair(s, d):
                if p not in seen:
                    seen.add(p)
                    paths.append(p)
        return paths


# ---------------------------------------------------------------------------
# Exact weighted set cover

def min_weight_cover(constraints: Sequence[FrozenSet[Var]],
                     weights: Dict[Var, int]) -> List[Var]:
    """Smallest-weight variable set hitting every constraint.

    Branch and bound: branch on the uncovered constraint with the fewest
    candidates, seed the bound with a greedy cover, and prefer the
    lexicographically smallest selection among equal-weight optima.
    """
    constraints = [c for c in set(constraints)]
    for c in constraints:
        if not c:
            raise PlanningError("unsatisfiable empty constraint")
    # A constraint implied by a tighter one can be dropped.
    constraints.sort(key=len)
    kept: List[FrozenSet[Var]] = []
    for c in constraints:
        if not any(k <= c for k in kept):
            kept.append(c)
    constraints = kept
    if not constraints:
        return []

    def covered_by(sel: Set[Var]) -> List[FrozenSet[Var]]:
        return [c for c in constraints if not c & sel]

    # Greedy upper bound: best coverage per unit weight.
    greedy: Set[Var] = set()
    while True:
        open_cs = covered_by(greedy)
        if not open_cs:
            break
        all_vars = sorted({v for c in open_cs for v in c})
        var = min(all_vars,
                  key=lambda v: (-sum(1 for c in open_cs if v in c) / weights[v], v))
        greedy.add(var)
    best_cost = sum(weights[v] for v in greedy)
    best_sel = tuple(sorted(greedy))

    def lower_bound(open_cs: List[FrozenSet[Var]]) -> int:
        # Pairwise variable-disjoint constraints each force a separate pick.
        used: Set[Var] = set()
        bound = 0
        for c in sorted(open_cs, key=len):
            if not c & used:
                bound += min(weights[v] for v in c)
                used |= c
        return bound

    def search(selection: Set[Var], cost: int):
        nonlocal best_cost, best_sel
        open_cs = covered_by(selection)
        if not open_cs:
            key = (cost, tuple(sorted(selection)))
            if key < (best_cost, best_sel):
                best_cost, best_sel = key
            return
        if cost + lower_bound(open_cs) > best_cost:
            return
        pivot = min(open_cs, key=lambda c: (len(c), sorted(c)))
        for var in sorted(pivot):
            selection.add(var)
            search(selection, cost + weights[var])
            selection.remove(var)

    search(set(), 0)
    return list(best_sel)


# ---------------------------------------------------------------------------
# Per-group optimizers

def optimize_permit(ctx: GroupContext, use_eis: bool = True) -> List[Var]:
    chosen: List[Var] = []
    for iface in sorted(ctx.env.topo.interfaces):
        group = [i for i in ctx.indices if ctx.q(iface, i, "permit")]
        if not group:
            continue
        constraints = []
        for i in group:
            members = ctx.eis(iface, i, "permit", group) if use_eis else {i}
            constraints.append(frozenset((iface, j) for j in members))
        weights = {(iface, j): ctx.costs[j] for j in group}
        chosen.extend(min_weight_cover(constraints, weights))
    return chosen


def optimize_deny(ctx: GroupContext, use_eis: bool = True) -> List[Var]:
    ifaces = sorted(ctx.env.topo.interfaces)
    q_vars = [(p, j) for p in ifaces for j in ctx.indices if ctx.q(p, j, "deny")]
    weights = {v: ctx.costs[v[1]] for v in q_vars}
    by_iface: Dict[Interface, List[int]] = {}
    for p, j in q_vars:
        by_iface.setdefault(p, []).append(j)

    constraints = []
    for i in ctx.indices:
        for path in ctx.omega(i):
            if not all(ctx.q(p, i, "deny") for p in path):
                continue  # some hop already denies this intent's traffic
            if use_eis:
                members = {(p, j) for p in path
                           for j in ctx.eis(p, i, "deny", by_iface.get(p, []))}
            else:
                members = {(p, i) for p in path if (p, i) in weights}
            constraints.append(frozenset(members))
    return min_weight_cover(constraints, weights)


def endpoint_vars(ctx: GroupContext) -> List[Var]:
    """Baseline: blanket the source gateways or the destination gateways of
    each intent's flows, whichever side needs fewer interfaces (tie goes to
    the destination side)."""
    out: Set[Var] = set()
    snmt, table = ctx.env.snmt, ctx.env.table
    for i in ctx.indices:
        pairs = ctx.flow_pairs(i)
        src_gws = sorted({m.gateway for s, _ in pairs
                          for m in snmt_match(table.src_atoms[s], snmt)})
        dst_gws = sorted({m.gateway for _, d in pairs
                          for m in snmt_match(table.dst_atoms[d], snmt)})
        side = src_gws if len(src_gws) < len(dst_gws) else dst_gws
        out.update((gw, i) for gw in side)
    return sorted(out)


def catchall_vars(ctx: GroupContext, action: str) -> List[Var]:
    """Baseline: deploy each intent at every interface it could go on."""
    return sorted((p, i) for p in ctx.env.topo.interfaces
                  for i in ctx.indices if ctx.q(p, i, action))


# ---------------------------------------------------------------------------
# Entry points

def plan_deployment(resolved: Sequence[ResolvedIntent], env: Environment,
                    strategy: str = "xumi") -> Plan:
    if strategy not in STRATEGIES:
        raise PlanningError(f"unknown strategy {strategy!r}")
    placements: Dict[Interface, List[int]] = {}
    costs = {i: ri.cost for i, ri in enumerate(resolved)}

    for action in ("permit", "deny"):
        indices = [i for i, ri in enumerate(resolved) if ri.action == action]
        if not indices:
            continue
        ctx = GroupContext(env, resolved, indices)
        if strategy == "xumi":
            chosen = (optimize_permit(ctx) if action == "permit"
                      else optimize_deny(ctx))
        elif strategy == "bottleneck":
            chosen = (optimize_permit(ctx, use_eis=False) if action == "permit"
                      else optimize_deny(ctx, use_eis=False))
        elif strategy == "endpoint":
            chosen = (catchall_vars(ctx, action) if action == "permit"
                      else endpoint_vars(ctx))
        else:  # catchall
            chosen = catchall_vars(ctx, action)
        for iface, i in chosen:
            placements.setdefault(iface, []).append(i)

    for units in placements.values():
        units.sort()
    return Plan(strategy, placements, costs)


def apply_plan(plan: Plan, resolved: Sequence[ResolvedIntent],
               env: Environment) -> Dict[Interface, List[Rule]]:
    """New ACL contents: each deployed unit's protect rules sit directly above
    its intent rules, units are stacked at the top of the existing ACL, and a
    protect rule already present higher up is not repeated."""
    acls = env.copy_acls()
    for iface in sorted(plan.placements):
        addition: List[Rule] = []
        for i in plan.placements[iface]:
            ri = resolved[i]
            for rule in ri.protect_rules:
                if rule not in addition:
                    addition.append(rule)
            addition.extend(ri.rules)
        acls[iface] = addition + acls.get(iface, [])
    return acls


def verify_plan(resolved: Sequence[ResolvedIntent],
                acls: Dict[Interface, List[Rule]],
                env: Environment) -> oracle.VerificationReport:
    """Simulate every remaining intent flow on every path at representative
    dates and check the observed end-to-end action matches the intent."""
    all_rules = [r for rules in acls.values() for r in rules]
    for ri in resolved:
        all_rules.extend(ri.rules)
        all_rules.extend(ri.protect_rules)
    dates = oracle.sample_dates(all_rules)
    defaults = env.all_defaults()

    report = oracle.VerificationReport()
    path_cache: Dict[Tuple[int, int], List[Path]] = {}
    for idx, ri in enumerate(resolved):
        atomizer = ri.detection.atomizer
        flow = TimedFlowSet.empty(env.table, atomizer)
        for rule in ri.rules:
            flow = flow | TimedFlowSet.expand(env.table, atomizer, rule)
        for rule in ri.protect_rules:
            flow = flow - TimedFlowSet.expand(env.table, atomizer, rule)
        protected = TimedFlowSet.empty(env.table, atomizer)
        for rec in ri.detection.records:
            if rec.protected is not None:
                protected = protected | rec.protected
        for date in dates:
            atom = atomizer.atom_at(date)
            for fi in flow.slice(atom).indices():
                f = env.table.flow_at(fi)
                rest, _ = divmod(fi, env.table.n_app)
                d, s = divmod(rest, env.table.n_src)
                if (s, d) not in path_cache:
                    path_cache[(s, d)] = env.paths.paths_for_pair(s, d)
                for path in path_cache[(s, d)]:
                    observed = oracle.simulate_flow(path, f, date, acls, defaults)
                    report.checked += 1
                    if observed != ri.action:
                        report.violations.append(oracle.Violation(
                            idx, fi, date, path, ri.action, observed))
            # Protected flows must keep their pre-deployment behavior per path.
            for fi in protected.slice(atom).indices():
                f = env.table.flow_at(fi)
                rest, _ = divmod(fi, env.table.n_app)
                d, s = divmod(rest, env.table.n_src)
                if (s, d) not in path_cache:
                    path_cache[(s, d)] = env.paths.paths_for_pair(s, d)
                for path in path_cache[(s, d)]:
                    before, dec_before = oracle.path_verdict(
                        path, f, date, env.acls, defaults)
                    after, dec_after = oracle.path_verdict(
                        path, f, date, acls, defaults)
                    report.checked += 1
                    if after != before:
                        report.violations.append(oracle.Violation(
                            idx, fi, date, path, before, after))
                    elif dec_after != dec_before:
                        report.drift.append(oracle.Violation(
                            idx, fi, date, path, before, after))
    return report
