"""Scenario generation for evaluation and demos.

A scenario bundles a topology, a mapping table, existing ACLs, and a batch of
natural-language intent texts with their ground-truth IRs.  Topology templates
cover a campus network (41 routers, 66 links, 361 interfaces, 60 entities,
default deny), a small fat-tree cloud (default permit), and the two worked
fixtures used throughout the tests.  Everything is driven by one seed, so a
(seed, params) pair regenerates the scenario byte for byte.

ACLs are constructed so the measured conflict ratio (the fraction of
interfaces traversed by an intent's traffic whose ACL conflicts with it)
lands near the requested target, with rejection-resampling to finish the job.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, asdict
from importlib import resources
from typing import Dict, List, Optional, Sequence, Tuple

from .comprehension import IR, SERVICES
from .conflict import Environment, detect_all, resolve
from .flowset import AppAtom, GlobalFlowTable, Rule
from .netmodel import (Interface, NetworkError, SNMT, Topology, dump_network,
                       parse_network, parse_prefix)
from .timealg import ANY_TIME, TimeRange, WEEKDAYS, WEEKEND

TEMPLATES = ("campus", "cloud", "fig2", "fig3", "custom")

_ADJ = ["amber", "cobalt", "crimson", "golden", "ivory",
        "jade", "onyx", "scarlet", "silver", "umber"]
_NOUN = ["falcon", "heron", "lynx", "otter", "panda", "raven"]


class ScenarioError(ValueError):
    pass


@dataclass
class ScenarioParams:
    template: str = "fig2"
    custom_file: Optional[str] = None
    rules_per_acl: int = 20
    default_action: Optional[str] = None  # None: template default
    target_conflict_ratio: Optional[float] = None
    num_permit: int = 2
    num_deny: int = 2
    num_protect: int = 0
    num_apps: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.template not in TEMPLATES:
            raise ScenarioError(f"unknown template {self.template!r}")
        if self.target_conflict_ratio is not None and \
                not 0.0 <= self.target_conflict_ratio <= 1.0:
            raise ScenarioError("target conflict ratio must be in [0, 1]")


@dataclass
class IntentSpec:
    text: str
    action: str  # permit | deny | protect
    expected_ir: dict
    protect_for: Optional[int] = None  # intent index a protect attaches to


@dataclass
class Scenario:
    params: ScenarioParams
    topo: Topology
    snmt: SNMT
    table: GlobalFlowTable
    acls: Dict[Interface, List[Rule]]
    default_action: str
    intents: List[IntentSpec]
    app_names: List[str]
    aliases: Dict[str, str] = field(default_factory=dict)
    ground_truth: dict = field(default_factory=dict)

    def environment(self) -> Environment:
        return Environment(self.table, self.topo, self.snmt,
                           {i: list(r) for i, r in self.acls.items()},
                           default_action=self.default_action)

    def expected_rules(self, spec: IntentSpec) -> List[Rule]:
        from .comprehension import generate_rules
        ir = IR.from_json(spec.expected_ir)
        return [g.rule for g in generate_rules(ir, self.snmt)]

    def to_json(self) -> dict:
        doc = dump_network(self.topo, self.snmt)
        doc["universe"] = {
            "sources": [str(p) for p in self.table.src_atoms],
            "sinks": [str(p) for p in self.table.dst_atoms],
        }
        return {
            "params": asdict(self.params),
            "network": doc,
            "apps": self.app_names,
            "default_action": self.default_action,
            "acls": {str(i): [r.to_json() for r in rules]
                     for i, rules in sorted(self.acls.items())},
            "aliases": self.aliases,
            "intents": [asdict(s) for s in self.intents],
            "ground_truth": self.ground_truth,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Scenario":
        params = ScenarioParams(**doc["params"])
        topo, snmt = parse_network(doc["network"])
        table = _build_table(doc["network"], snmt, doc["apps"])
        acls = {Interface.parse(k): [Rule.from_json(r) for r in v]
                for k, v in doc.get("acls", {}).items()}
        intents = [IntentSpec(**s) for s in doc.get("intents", [])]
        return cls(params, topo, snmt, table, acls, doc["default_action"],
                   intents, list(doc["apps"]), dict(doc.get("aliases", {})),
                   dict(doc.get("ground_truth", {})))


def _fixture(name: str) -> dict:
    return json.loads(resources.files("aclwright")
                      .joinpath(f"fixtures/{name}.json").read_text())


def app_atoms(app_names: Sequence[str]) -> List[AppAtom]:
    atoms: List[AppAtom] = []
    for name in app_names:
        for atom in SERVICES[name]:
            if atom not in atoms:
                atoms.append(atom)
    return atoms


def _build_table(doc: dict, snmt: SNMT, app_names: Sequence[str]) -> GlobalFlowTable:
    uni = doc.get("universe")
    if uni:
        srcs = [parse_prefix(p) for p in uni["sources"]]
        dsts = [parse_prefix(p) for p in uni["sinks"]]
    else:
        srcs = dsts = list(snmt.finest_prefixes)
    apps = app_atoms(app_names) if app_names else [("tcp", None)]
    return GlobalFlowTable(srcs, dsts, apps)


# ---------------------------------------------------------------------------
# Topology templates

def campus_network() -> dict:
    """41 routers, 66 links, 361 interfaces, 60 entities; built, not drawn."""
    counters: Dict[str, int] = {}

    def iface(router: str) -> str:
        counters[router] = counters.get(router, 0) + 1
        return f"{router}@{counters[router]}"

    cores = [f"R{i:02d}" for i in range(1, 4)]
    edges = [f"R{i:02d}" for i in range(4, 42)]
    links = []
    for i, a in enumerate(cores):
        for b in cores[i + 1:]:
            links.append([iface(a), iface(b)])
    for i, e in enumerate(edges):
        links.append([iface(e), iface(cores[i % 3])])
    for a, b in zip(edges[:25], edges[1:26]):
        links.append([iface(a), iface(b)])

    host_ifaces: List[str] = []
    for e in edges:
        for _ in range(6):
            host_ifaces.append(iface(e))
    host_ifaces.append(iface(edges[0]))

    snmt: Dict[str, list] = {}
    pool = iter(host_ifaces)
    for i in range(60):
        name = f"{_ADJ[i % 10]} {_NOUN[i // 10]}"
        prefix = f"10.{i + 1}.0.0/16"
        snmt[name] = [{"gateway": next(pool), "prefix": prefix}
                      for _ in range(1 + i % 3)]

    interfaces = sorted({x for l in links for x in l} | set(host_ifaces),
                        key=Interface.parse)
    return {
        "routers": cores + edges,
        "interfaces": [str(i) for i in interfaces],
        "links": links,
        "snmt": snmt,
        "finest_prefixes": [f"10.{i + 1}.0.0/16" for i in range(60)],
        "routing": {"k": 4},
    }


def cloud_network() -> dict:
    """A 4-pod fat-tree: 4 cores, 8 aggregation, 8 edge, 16 entities."""
    counters: Dict[str, int] = {}

    def iface(router: str) -> str:
        counters[router] = counters.get(router, 0) + 1
        return f"{router}@{counters[router]}"

    cores = [f"C{i}" for i in range(1, 5)]
    links = []
    snmt: Dict[str, list] = {}
    aggs, edges = [], []
    entity = 0
    for p in range(1, 5):
        pa = [f"A{p}{x}" for x in (1, 2)]
        pe = [f"E{p}{x}" for x in (1, 2)]
        aggs += pa
        edges += pe
        links.append([iface(pa[0]), iface(cores[0])])
        links.append([iface(pa[0]), iface(cores[1])])
        links.append([iface(pa[1]), iface(cores[2])])
        links.append([iface(pa[1]), iface(cores[3])])
        for a in pa:
            for e in pe:
                links.append([iface(a), iface(e)])
        for e in pe:
            for _ in range(2):
                entity += 1
                name = f"{_ADJ[(entity - 1) % 10]} {_NOUN[(entity - 1) // 10]}"
                snmt[name] = [{"gateway": iface(e),
                               "prefix": f"10.{100 + entity}.0.0/16"}]

    interfaces = sorted({x for l in links for x in l} |
                        {p["gateway"] for pairs in snmt.values() for p in pairs},
                        key=Interface.parse)
    return {
        "routers": cores + aggs + edges,
        "interfaces": [str(i) for i in interfaces],
        "links": links,
        "snmt": snmt,
        "finest_prefixes": [f"10.{100 + i}.0.0/16" for i in range(1, entity + 1)],
        "routing": {"k": 4},
    }


_TEMPLATE_DEFAULTS = {"campus": "deny", "cloud": "permit",
                      "fig2": "permit", "fig3": "permit"}


# ---------------------------------------------------------------------------
# Intent text generation

_TIME_CHOICES: List[Tuple[str, TimeRange]] = [
    ("", ANY_TIME),
    (" on weekdays", TimeRange(WEEKDAYS)),
    (" on weekends", TimeRange(WEEKEND)),
]

_PERMIT_VERBS = ["Allow", "Permit"]
_DENY_VERBS = ["Block", "Deny", "Prevent"]


def _typo(rng: random.Random, word: str) -> str:
    if len(word) < 5:
        return word
    i = rng.randrange(1, len(word) - 2)
    if rng.random() < 0.5:
        return word[:i] + word[i + 1] + word[i] + word[i + 2:]  # transpose
    return word[:i] + word[i + 1:]  # drop a letter


def _maybe_typo(rng: random.Random, name: str, all_names: Sequence[str]) -> str:
    """Inject a typo only when fuzzy matching still resolves it uniquely."""
    from .comprehension import edit_distance
    cand = _typo(rng, name)
    if cand == name:
        return name
    dists = sorted((edit_distance(cand.lower(), n.lower(), cutoff=2), n)
                   for n in all_names)
    if dists[0][1] == name and dists[0][0] <= 2 and \
            (len(dists) < 2 or dists[1][0] > dists[0][0]):
        return cand
    return name


def _ir_json(src_name, src_pairs, dst_name, dst_pairs, app_name, app_pairs,
             time: TimeRange, action: str) -> dict:
    return {
        "source": {"name": src_name, "pairs": src_pairs, "unresolved": False},
        "destination": {"name": dst_name, "pairs": dst_pairs, "unresolved": False},
        "application": {"name": app_name,
                        "pairs": [{"protocol": p, "port": q} for p, q in app_pairs]},
        "time": time.to_json(),
        "action": action,
    }


def _gen_intent(rng: random.Random, snmt: SNMT, app_names: Sequence[str],
                action: str) -> IntentSpec:
    names = sorted(snmt.entries)
    src = rng.choice(names)
    dst_any = rng.random() < 0.35
    dst = "anywhere" if dst_any else rng.choice([n for n in names if n != src])
    app = rng.choice(list(app_names) + [None])
    phrase, tr = rng.choice(_TIME_CHOICES)
    verb = rng.choice(_PERMIT_VERBS if action == "permit" else _DENY_VERBS)

    src_text = src
    if rng.random() < 0.05:
        src_text = _maybe_typo(rng, src, names)
    app_text = f"{app.upper()} " if app else ""
    dst_text = dst if not dst_any else "anywhere"
    text = f"{verb} {app_text}traffic from {src_text} to {dst_text}{phrase}."

    def pairs_of(name):
        return [{"gateway": str(g), "prefix": str(p)} for g, p in snmt.entries[name]]

    ir = _ir_json(src, pairs_of(src),
                  "any" if dst_any else dst, [] if dst_any else pairs_of(dst),
                  app or "any", SERVICES[app] if app else [],
                  tr, action)
    return IntentSpec(text, action, ir)


# ---------------------------------------------------------------------------
# ACL construction toward a conflict-ratio target

def _filler_rule(rng: random.Random, snmt: SNMT, atoms: Sequence[AppAtom]) -> Rule:
    prefixes = [p for pairs in snmt.entries.values() for _, p in pairs]
    src = rng.choice(prefixes) if rng.random() < 0.9 else None
    dst = rng.choice(prefixes) if rng.random() < 0.9 else None
    app = rng.choice(list(atoms)) if rng.random() < 0.8 else (None, None)
    time = ANY_TIME if rng.random() < 0.85 else \
        rng.choice([TimeRange(WEEKDAYS), TimeRange(WEEKEND)])
    return Rule(src, dst, app, rng.choice(["permit", "deny"]), time)


def _subrule(rng: random.Random, rule: Rule, atoms: Sequence[AppAtom],
             action: str) -> Rule:
    """A rule matching part of `rule`'s traffic, with the given action."""
    app = rule.app
    if app == (None, None) and rng.random() < 0.5:
        app = rng.choice(list(atoms))
    return Rule(rule.src, rule.dst, app, action, rule.time)


def measure_conflict_ratio(scenario: Scenario,
                           env: Optional[Environment] = None) -> float:
    """Mean, over non-protect intents, of the fraction of traversed
    interfaces whose ACL (or default) conflicts with the intent."""
    env = env or scenario.environment()
    ratios = []
    for spec in scenario.intents:
        if spec.action == "protect":
            continue
        rules = scenario.expected_rules(spec)
        det = detect_all(rules, spec.action, env)
        traversed = set()
        intent_flows = det.intent_flows
        for iface in env.topo.interfaces:
            through = env.paths.flows_through(iface)
            if any(s & through.bits for s in intent_flows.slices):
                traversed.add(iface)
        if not traversed:
            continue
        conflicting = {r.interface for r in det.records}
        ratios.append(len(conflicting & traversed) / len(traversed))
    return sum(ratios) / len(ratios) if ratios else 0.0


def _build_acls(rng: random.Random, env_proto: Tuple, intents: List[IntentSpec],
                scenario_stub: "Scenario",
                conflict_prob: Optional[float]) -> Dict[Interface, List[Rule]]:
    """One sampling round of ACL construction.

    Intent-control rules stay above the filler so a forced conflict (or a
    mask hiding a conflicting default) is not shadowed by random noise."""
    topo, snmt, table, default_action = env_proto
    atoms = table.app_atoms
    gw_ifaces = sorted({g for pairs in snmt.entries.values() for g, _ in pairs})
    control: Dict[Interface, List[Rule]] = {i: [] for i in gw_ifaces}

    if conflict_prob is not None:
        probe = Environment(table, topo, snmt, {}, default_action=default_action)
        for spec in intents:
            if spec.action == "protect":
                continue
            rules = scenario_stub.expected_rules(spec)
            anti = "deny" if spec.action == "permit" else "permit"
            det = detect_all(rules, spec.action, probe)
            traversed = [i for i in topo.interfaces
                         if any(s & probe.paths.flows_through(i).bits
                                for s in det.intent_flows.slices)]
            for iface in traversed:
                if iface not in control:
                    continue
                if rng.random() < conflict_prob:
                    # Force a conflict here with a rule on part of the traffic.
                    control[iface].append(_subrule(rng, rng.choice(rules), atoms, anti))
                elif default_action == anti:
                    # Mask the conflicting default with agreeing rules.
                    control[iface].extend(
                        Rule(r.src, r.dst, r.app, spec.action, r.time)
                        for r in rules)

    per_acl = scenario_stub.params.rules_per_acl
    acls: Dict[Interface, List[Rule]] = {}
    for iface in gw_ifaces:
        filler = [_filler_rule(rng, snmt, atoms)
                  for _ in range(max(0, per_acl - len(control[iface])))]
        acls[iface] = control[iface] + filler
    return acls


# ---------------------------------------------------------------------------
# Protect intent attachment

def _protect_candidates(rng: random.Random, scenario: Scenario) -> List[Tuple[int, str]]:
    out = []
    for idx, spec in enumerate(scenario.intents):
        if spec.action == "protect":
            continue
        for app in scenario.app_names:
            out.append((idx, app))
    rng.shuffle(out)
    return out


def _protect_is_safe(scenario: Scenario, base_idx: int, app: str) -> bool:
    """Dry-run the resolve/plan/apply/verify pipeline with this protect and
    accept it only when protected traffic provably keeps its behavior."""
    from .deploy import apply_plan, plan_deployment, verify_plan
    env = scenario.environment()
    spec = scenario.intents[base_idx]
    rules = scenario.expected_rules(spec)
    det = detect_all(rules, spec.action, env)
    if not det.records:
        return False
    anti = "deny" if spec.action == "permit" else "permit"
    protect = [Rule(None, None, atom, anti) for atom in SERVICES[app]]
    ri = resolve(rules, spec.action, det, env, protect_intents=protect)
    if not ri.protect_rules or not ri.flow:
        return False
    try:
        plan = plan_deployment([ri], env, "xumi")
        new_acls = apply_plan(plan, [ri], env)
        return verify_plan([ri], new_acls, env).ok
    except Exception:
        return False


# ---------------------------------------------------------------------------
# Entry point

def _intent_rules(snmt: SNMT, spec: IntentSpec) -> List[Rule]:
    from .comprehension import generate_rules
    return [g.rule for g in generate_rules(IR.from_json(spec.expected_ir), snmt)]


def _intents_contradict(table: GlobalFlowTable, a_rules: Sequence[Rule],
                        b_rules: Sequence[Rule]) -> bool:
    """Whether two rule sets claim a common flow during a common time."""
    for ra in a_rules:
        for rb in b_rules:
            if ra.time.intersect(rb.time) is None:
                continue
            if table.expand_rule(ra) & table.expand_rule(rb):
                return True
    return False


def _consistent_intents(rng: random.Random, snmt: SNMT, table: GlobalFlowTable,
                        app_names: Sequence[str],
                        actions: Sequence[str]) -> List[IntentSpec]:
    """Generate intents that never demand opposite actions on the same flow
    at the same time; such a pair would make every deployment unverifiable."""
    out: List[IntentSpec] = []
    rules: List[Tuple[str, List[Rule]]] = []
    for action in actions:
        for _ in range(50):
            spec = _gen_intent(rng, snmt, app_names, action)
            mine = _intent_rules(snmt, spec)
            if not any(act != action and _intents_contradict(table, mine, theirs)
                       for act, theirs in rules):
                out.append(spec)
                rules.append((action, mine))
                break
        else:
            raise ScenarioError(
                f"could not generate a {action} intent consistent with the others")
    return out


def generate_scenario(params: ScenarioParams, max_attempts: int = 25) -> Scenario:
    rng = random.Random(params.seed)

    if params.template == "custom":
        if not params.custom_file:
            raise ScenarioError("custom template requires a network file")
        doc = json.loads(open(params.custom_file).read())
    elif params.template in ("fig2", "fig3"):
        doc = _fixture(params.template)
    elif params.template == "campus":
        doc = campus_network()
    else:
        doc = cloud_network()

    topo, snmt = parse_network(doc)
    default_action = params.default_action or \
        _TEMPLATE_DEFAULTS.get(params.template, "permit")

    if params.template == "fig3":
        return _fig3_scenario(params, doc, topo, snmt, default_action)

    names = sorted(SERVICES)
    app_names = sorted(rng.sample(names, min(params.num_apps, len(names))))
    table = _build_table(doc, snmt, app_names)

    intents = _consistent_intents(rng, snmt, table, app_names,
                                  ["permit"] * params.num_permit +
                                  ["deny"] * params.num_deny)
    rng.shuffle(intents)

    scenario = Scenario(params, topo, snmt, table, {}, default_action,
                        intents, app_names)

    target = params.target_conflict_ratio
    achieved = None
    prob = target
    for attempt in range(max_attempts):
        sub = random.Random(params.seed * 10007 + attempt)
        scenario.acls = _build_acls(sub, (topo, snmt, table, default_action),
                                    intents, scenario, prob)
        if target is None:
            break
        achieved = measure_conflict_ratio(scenario)
        if abs(achieved - target) <= 0.05:
            break
        # Steer the forcing probability toward the shortfall or overshoot.
        prob = min(1.0, max(0.0, prob - (achieved - target) * 0.5))
    else:
        raise ScenarioError(
            f"could not reach conflict ratio {target} "
            f"(best attempt achieved {achieved:.3f})")

    for _ in range(params.num_protect):
        placed = False
        for base_idx, app in _protect_candidates(rng, scenario)[:10]:
            if scenario.table.size <= 4096 and not _protect_is_safe(scenario, base_idx, app):
                continue
            base = scenario.intents[base_idx]
            text = f"Protect all {app.upper()} traffic."
            ir = _ir_json("any", [], "any", [], app, SERVICES[app],
                          ANY_TIME, "protect")
            scenario.intents.append(IntentSpec(text, "protect", ir, base_idx))
            placed = True
            break
        if not placed:
            break

    scenario.ground_truth = {
        "achieved_conflict_ratio": measure_conflict_ratio(scenario)
        if target is not None else None,
    }
    return scenario


def _fig3_scenario(params: ScenarioParams, doc, topo, snmt,
                   default_action: str) -> Scenario:
    """The fixed planning walkthrough: two deny intents whose optimal plan
    needs 3 rules versus 4 at bottlenecks and 7 at endpoints."""
    table = _build_table(doc, snmt, [])
    P = parse_prefix
    acls = {
        Interface.parse("B@1"): [
            Rule(P("10.1.0.0/24"), P("10.2.0.0/24"), ("tcp", None), "deny"),
            Rule(P("10.1.0.0/24"), P("10.4.0.0/24"), ("tcp", None), "deny")],
        Interface.parse("B@5"): [Rule(None, P("10.3.0.0/22"), ("tcp", None), "deny")],
        Interface.parse("B@6"): [Rule(None, P("10.3.0.0/22"), ("tcp", None), "deny")],
    }

    def pairs_of(name):
        return [{"gateway": str(g), "prefix": str(p)} for g, p in snmt.entries[name]]

    intents = [
        IntentSpec("Block all traffic from a to anywhere.", "deny",
                   _ir_json("a", pairs_of("a"), "any", [], "any", [],
                            ANY_TIME, "deny")),
        IntentSpec("Block all traffic from anywhere to c.", "deny",
                   _ir_json("any", [], "c", pairs_of("c"), "any", [],
                            ANY_TIME, "deny")),
    ]
    return Scenario(params, topo, snmt, table, acls, default_action, intents,
                    [], ground_truth={"plan_totals":
                                      {"endpoint": 7, "bottleneck": 4, "xumi": 3}})
