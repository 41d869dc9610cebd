"""Conflict detection against the per-flow brute-force oracle.

The engine reports (interface, position, timed flow set); the oracle reports
(interface, position, flow, date) samples.  They are compared by mapping each
sampled date to its time atom, which is lossless because the sample dates
cover every atom the context can produce.
"""

import pytest

from aclwright.conflict import (Environment, compute_tmf, detect_all,
                                intersect_rules, resolve)
from aclwright.flowset import GlobalFlowTable, Rule, TimedFlowSet
from aclwright.netmodel import Interface, parse_prefix
from aclwright.oracle import (brute_force_conflicts, first_match,
                              sample_dates, time_holds)
from aclwright.timealg import ANY_TIME, TimeAtomizer, TimeRange, WEEKDAYS

from conftest import load_fixture, random_rule, random_time, seeded

HTTP = ("tcp", 80)


def fig2_rule(rng, table, action=None):
    """Random rule over the fig2 universe: entity atoms or wildcards only."""
    def pick(atoms):
        return None if rng.random() < 0.3 else rng.choice(atoms)
    app = (None, None) if rng.random() < 0.3 else rng.choice(table.app_atoms)
    return Rule(pick(table.src_atoms), pick(table.dst_atoms), app,
                action or rng.choice(("permit", "deny")), random_time(rng))


def fig2_env(acls=None, default="permit", apps=(HTTP,)):
    topo, snmt = load_fixture("fig2.json")
    prefixes = [parse_prefix(f"10.{i}.0.0/16") for i in (1, 2, 3)]
    table = GlobalFlowTable(prefixes, prefixes, list(apps))
    return Environment(table, topo, snmt, acls or {}, default_action=default)


def engine_samples(det, env):
    """Flatten a detection result to (iface, pos, flow, atom) tuples."""
    out = set()
    for rec in det.records:
        for atom in rec.flows.nonempty_atoms():
            for fi in rec.flows.slice(atom).indices():
                out.add((rec.interface, rec.position, fi, atom))
    return out


def oracle_samples(intent_rules, action, env, atomizer):
    raw = brute_force_conflicts(intent_rules, action, env.table, env.topo,
                                env.snmt, env.acls, env.all_defaults(),
                                routing=env.routing)
    return {(s.interface, s.position, s.flow_index, atomizer.atom_at(s.date))
            for s in raw}


class TestTmf:
    @pytest.mark.parametrize("seed", range(12))
    def test_partition_matches_first_match(self, seed):
        rng = seeded(seed)
        from conftest import make_universe
        table = make_universe(rng, max_flows=256)
        rules = [random_rule(rng, table) for _ in range(rng.randint(0, 12))]
        default = rng.choice(("permit", "deny"))
        atz = TimeAtomizer([r.time for r in rules])
        parts = compute_tmf(rules, default, table, atz)

        # Every (flow, date) must be owned by exactly the first-match position.
        dates = sample_dates(rules)
        owner = {}
        for pos, action, tfs in parts:
            for atom in tfs.nonempty_atoms():
                for fi in tfs.slice(atom).indices():
                    assert (fi, atom) not in owner, "TMF slices overlap"
                    owner[(fi, atom)] = (pos, action)
        for fi in range(table.size):
            flow = table.flow_at(fi)
            for date in dates:
                atom = atz.atom_at(date)
                assert owner[(fi, atom)] == first_match(rules, flow, date, default)

    def test_default_owns_remainder(self):
        env = fig2_env()
        atz = TimeAtomizer([])
        parts = compute_tmf([], "deny", env.table, atz)
        assert len(parts) == 1
        pos, action, tfs = parts[0]
        assert (pos, action) == (1, "deny")
        assert tfs.slice(0) == env.table.full()


class TestDetectAll:
    def test_single_conflict_fig2(self):
        b2 = Interface("B", 2)
        env = fig2_env({b2: [Rule(parse_prefix("10.2.0.0/16"),
                                  parse_prefix("10.3.0.0/16"), HTTP, "deny")]})
        intent = [Rule(parse_prefix("10.2.0.0/16"), parse_prefix("10.3.0.0/16"),
                       HTTP, "permit")]
        det = detect_all(intent, "permit", env)
        assert [(r.interface, r.position, r.is_default) for r in det.records] \
            == [(b2, 1, False)]

    def test_matches_oracle_random(self):
        for seed in range(15):
            rng = seeded(1000 + seed)
            apps = [HTTP, ("udp", 53)]
            env = fig2_env(default=rng.choice(("permit", "deny")), apps=apps)
            gws = [Interface("C", 2), Interface("A", 1), Interface("B", 2),
                   Interface("A", 3), Interface("B", 1)]
            env.acls = {i: [fig2_rule(rng, env.table)
                            for _ in range(rng.randint(0, 6))]
                        for i in rng.sample(gws, rng.randint(1, len(gws)))}
            action = rng.choice(("permit", "deny"))
            intent = [fig2_rule(rng, env.table, action=action)
                      for _ in range(rng.randint(1, 2))]
            det = detect_all(intent, action, env)
            assert engine_samples(det, env) == \
                oracle_samples(intent, action, env, det.atomizer), f"seed {seed}"

    def test_shadowed_rule_not_reported(self):
        b2 = Interface("B", 2)
        shadow = Rule(None, parse_prefix("10.3.0.0/16"), (None, None), "permit")
        dead = Rule(parse_prefix("10.2.0.0/16"), parse_prefix("10.3.0.0/16"),
                    HTTP, "deny")
        env = fig2_env({b2: [shadow, dead]})
        intent = [Rule(parse_prefix("10.2.0.0/16"), parse_prefix("10.3.0.0/16"),
                       HTTP, "permit")]
        det = detect_all(intent, "permit", env)
        assert det.records == []
        # The overlap-only ablation wrongly flags the shadowed rule.
        naive = detect_all(intent, "permit", env, use_tmf=False, use_path=False)
        assert any(r.position == 2 for r in naive.records)

    def test_off_path_interface_dropped(self):
        c2 = Interface("C", 2)  # DC1's gateway, off the DC2->DC3 paths
        env = fig2_env({c2: [Rule(None, None, (None, None), "deny")]})
        intent = [Rule(parse_prefix("10.2.0.0/16"), parse_prefix("10.3.0.0/16"),
                       HTTP, "permit")]
        det = detect_all(intent, "permit", env)
        assert all(r.interface != c2 for r in det.records)
        naive = detect_all(intent, "permit", env, use_path=False)
        assert any(r.interface == c2 for r in naive.records)

    def test_early_termination_examines_fewer_positions(self):
        b2 = Interface("B", 2)
        rules = [Rule(None, None, (None, None), "deny")] + \
                [Rule(None, None, HTTP, "deny") for _ in range(10)]
        env = fig2_env({b2: rules})
        intent = [Rule(parse_prefix("10.2.0.0/16"), parse_prefix("10.3.0.0/16"),
                       HTTP, "permit")]
        det = detect_all(intent, "permit", env)
        naive = detect_all(intent, "permit", env, use_tmf=False)
        assert det.positions_examined < naive.positions_examined

    def test_default_conflict_flagged(self):
        env = fig2_env(default="deny")
        intent = [Rule(parse_prefix("10.2.0.0/16"), parse_prefix("10.3.0.0/16"),
                       HTTP, "permit")]
        det = detect_all(intent, "permit", env)
        assert det.records and all(r.is_default for r in det.records)


class TestIntersectRules:
    def test_nested_prefixes(self):
        a = Rule(parse_prefix("10.1.0.0/16"), None, (None, None), "permit")
        b = Rule(parse_prefix("10.1.2.0/24"), None, HTTP, "deny")
        got = intersect_rules(a, b, "deny")
        assert got == Rule(parse_prefix("10.1.2.0/24"), None, HTTP, "deny")

    def test_disjoint_prefixes(self):
        a = Rule(parse_prefix("10.1.0.0/16"), None, (None, None), "permit")
        b = Rule(parse_prefix("10.2.0.0/16"), None, (None, None), "permit")
        assert intersect_rules(a, b, "permit") is None

    def test_app_meet(self):
        a = Rule(None, None, ("tcp", None), "permit")
        b = Rule(None, None, ("tcp", 80), "permit")
        assert intersect_rules(a, b, "deny").app == ("tcp", 80)
        c = Rule(None, None, ("udp", 53), "permit")
        assert intersect_rules(a, c, "deny") is None

    def test_time_meet(self):
        a = Rule(None, None, (None, None), "permit", TimeRange(WEEKDAYS))
        b = Rule(None, None, (None, None), "permit", TimeRange(0b1100000))
        assert intersect_rules(a, b, "permit") is None


class TestResolve:
    def intent_and_env(self):
        b2 = Interface("B", 2)
        conflict_rule = Rule(parse_prefix("10.2.0.0/16"),
                             parse_prefix("10.3.0.0/16"), HTTP, "deny")
        env = fig2_env({b2: [conflict_rule]}, apps=[HTTP, ("udp", 53)])
        intent = [Rule(parse_prefix("10.2.0.0/16"), parse_prefix("10.3.0.0/16"),
                       (None, None), "permit")]
        return env, intent

    def test_protect_carves_out_flows(self):
        env, intent = self.intent_and_env()
        det = detect_all(intent, "permit", env)
        protect = [Rule(None, None, HTTP, "permit")]
        ri = resolve(intent, "permit", det, env, protect_intents=protect)
        # Protect rules carry the anti-intent action.
        assert all(r.action == "deny" for r in ri.protect_rules)
        assert len(ri.protect_rules) == 1
        # The remaining flow excludes exactly the protected HTTP traffic.
        http = env.table.attr_index("app", HTTP)
        for atom in range(len(det.atomizer)):
            assert not (ri.flow.slice(atom) & http &
                        env.table.expand_rule(ri.protect_rules[0]))
        assert len(ri.protected_flows) > 0
        assert ri.cost == len(intent) + 1

    def test_irrelevant_protect_dropped(self):
        env, intent = self.intent_and_env()
        det = detect_all(intent, "permit", env)
        protect = [Rule(None, None, ("udp", 53), "permit")]  # no UDP conflicts
        ri = resolve(intent, "permit", det, env, protect_intents=protect)
        assert ri.protect_rules == []
        assert ri.flow.slices == det.intent_flows.slices

    def test_no_protect_keeps_full_intent(self):
        env, intent = self.intent_and_env()
        det = detect_all(intent, "permit", env)
        ri = resolve(intent, "permit", det, env)
        assert ri.protect_rules == []
        assert ri.cost == len(intent)
