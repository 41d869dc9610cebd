"""Shared fixtures: small universes, fixture networks, random generators.

The random generators build rules and universes small enough for the naive
per-flow oracle, with enough structural variety (wildcards, supernets,
protocol wildcards, day masks, date windows) to exercise every code path of
the bit algebra.
"""

import datetime
import json
import random
from importlib import resources

import pytest

from aclwright.flowset import GlobalFlowTable, Rule
from aclwright.netmodel import parse_network, parse_prefix
from aclwright.timealg import ALL_DAYS, ANY_TIME, TimeRange

APP_POOL = [("tcp", 80), ("tcp", 443), ("tcp", 22), ("udp", 53),
            ("udp", 123), ("icmp", None), ("ospf", None)]

BASE_DATE = datetime.date(2026, 1, 5)  # a Monday


def load_fixture(name):
    text = resources.files("aclwright.fixtures").joinpath(name).read_text()
    return parse_network(json.loads(text))


@pytest.fixture(scope="session")
def fig2_net():
    return load_fixture("fig2.json")


@pytest.fixture(scope="session")
def fig3_net():
    return load_fixture("fig3.json")


def make_universe(rng, max_flows=4096):
    """A random flow table: power-of-two prefix atom counts so supernet
    aggregation stays exact, and 1-4 application atoms."""
    n_app = rng.randint(1, 4)
    budget = max_flows // n_app
    n_src = 2 ** rng.randint(0, 3)
    n_dst = 2 ** rng.randint(0, 3)
    while n_src * n_dst > budget:
        if n_src >= n_dst:
            n_src //= 2
        else:
            n_dst //= 2
    src_atoms = [parse_prefix(f"10.0.{i}.0/24") for i in range(n_src)]
    dst_atoms = [parse_prefix(f"10.64.{i}.0/24") for i in range(n_dst)]
    apps = rng.sample(APP_POOL, n_app)
    return GlobalFlowTable(src_atoms, dst_atoms, apps)


def random_prefix(rng, atoms, base_octet):
    """None, a single atom, or an aligned supernet of a power-of-two run."""
    roll = rng.random()
    if roll < 0.2:
        return None
    if roll < 0.7 or len(atoms) == 1:
        return rng.choice(atoms)
    span = 2 ** rng.randint(1, max(1, len(atoms).bit_length() - 1))
    span = min(span, len(atoms))
    start = rng.randrange(0, len(atoms), span)
    return parse_prefix(f"10.{base_octet}.{start}.0/{24 - span.bit_length() + 1}")


def random_app(rng, table):
    roll = rng.random()
    if roll < 0.25:
        return (None, None)
    atom = rng.choice(table.app_atoms)
    if roll < 0.5 and atom[1] is not None:
        # Protocol wildcard, legal only when no (proto, any) atom conflicts.
        if not any(a == (atom[0], None) for a in table.app_atoms):
            return (atom[0], None)
    return atom


def random_time(rng):
    roll = rng.random()
    if roll < 0.4:
        return ANY_TIME
    mask = rng.randint(1, ALL_DAYS)
    if roll < 0.7:
        return TimeRange(mask)
    lo = BASE_DATE + datetime.timedelta(days=rng.randint(-20, 20))
    hi = lo + datetime.timedelta(days=rng.randint(0, 15))
    return TimeRange(mask, (lo, hi))


def random_rule(rng, table, action=None):
    return Rule(
        random_prefix(rng, table.src_atoms, 0),
        random_prefix(rng, table.dst_atoms, 64),
        random_app(rng, table),
        action or rng.choice(("permit", "deny")),
        random_time(rng))


def naive_expand(table, rule):
    """Index set of `rule` computed by per-flow attribute checks."""
    from aclwright.oracle import app_matches
    out = set()
    for fi in range(table.size):
        src, dst, app = table.flow_at(fi)
        if rule.src is not None and not src.subnet_of(rule.src):
            continue
        if rule.dst is not None and not dst.subnet_of(rule.dst):
            continue
        if app_matches(rule.app, app):
            out.add(fi)
    return out


def seeded(seed):
    return random.Random(seed)


def pytest_terminal_summary(terminalreporter):
    """Echo one PASS/FAIL line per acceptance criterion after the run."""
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(line)
