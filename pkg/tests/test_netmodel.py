"""Topology, mapping table, and routing, checked against networkx directly."""

import json
from importlib import resources

import networkx as nx
import pytest

from aclwright.netmodel import (Interface, NetworkError, Routing, SNMT,
                                Topology, dump_network, parse_network,
                                parse_prefix, snmt_match)

from conftest import load_fixture


class TestInterface:
    def test_parse_and_str(self):
        i = Interface.parse("A@3")
        assert (i.router, i.index) == ("A", 3)
        assert str(i) == "A@3"
        assert Interface.parse(str(i)) == i

    def test_ordering(self):
        assert Interface("A", 2) < Interface("A", 10) < Interface("B", 1)

    def test_bad(self):
        for text in ("A", "A@", "@3", "A@x"):
            with pytest.raises(NetworkError):
                Interface.parse(text)


class TestTopologyValidation:
    def base(self):
        return {
            "routers": ["A", "B"],
            "interfaces": ["A@1", "A@2", "B@1", "B@2"],
            "links": [["A@1", "B@1"]],
            "snmt": {"x": [{"gateway": "A@2", "prefix": "10.1.0.0/24"}],
                     "y": [{"gateway": "B@2", "prefix": "10.2.0.0/24"}]},
            "finest_prefixes": ["10.1.0.0/24", "10.2.0.0/24"],
        }

    def test_ok(self):
        topo, snmt = parse_network(self.base())
        assert len(topo.interfaces) == 4
        assert set(snmt.entries) == {"x", "y"}

    def test_undeclared_link_endpoint(self):
        doc = self.base()
        doc["links"].append(["A@2", "B@9"])
        with pytest.raises(NetworkError):
            parse_network(doc)

    def test_interface_in_two_links(self):
        doc = self.base()
        doc["interfaces"].append("B@3")
        doc["links"].append(["A@1", "B@3"])
        with pytest.raises(NetworkError):
            parse_network(doc)

    def test_self_link(self):
        doc = self.base()
        doc["links"] = [["A@1", "A@2"]]
        with pytest.raises(NetworkError):
            parse_network(doc)

    def test_entity_prefix_must_decompose(self):
        doc = self.base()
        doc["snmt"]["x"] = [{"gateway": "A@2", "prefix": "10.1.0.0/23"}]
        with pytest.raises(NetworkError):
            parse_network(doc)

    def test_overlapping_finest_rejected(self):
        doc = self.base()
        doc["finest_prefixes"] = ["10.1.0.0/24", "10.1.0.0/25"]
        with pytest.raises(NetworkError):
            parse_network(doc)

    def test_dump_roundtrip(self):
        topo, snmt = parse_network(self.base())
        topo2, snmt2 = parse_network(dump_network(topo, snmt))
        assert topo2.interfaces == topo.interfaces
        assert topo2.links == topo.links
        assert {n: sorted((str(g), str(p)) for g, p in pairs)
                for n, pairs in snmt2.entries.items()} == \
               {n: sorted((str(g), str(p)) for g, p in pairs)
                for n, pairs in snmt.entries.items()}


class TestSnmtMatch:
    def test_exact_and_containing(self, fig2_net):
        _, snmt = fig2_net
        hits = snmt_match(parse_prefix("10.1.0.0/16"), snmt)
        assert {m.entity for m in hits} == {"DC1"}
        # A host inside DC1 also matches via containment.
        hits = snmt_match(parse_prefix("10.1.2.3/32"), snmt)
        assert {m.entity for m in hits} == {"DC1"}

    def test_no_match(self, fig2_net):
        _, snmt = fig2_net
        assert snmt_match(parse_prefix("192.168.0.0/24"), snmt) == []


class TestRouting:
    def test_fig2_triangle_paths(self, fig2_net):
        topo, snmt = fig2_net
        routing = Routing(topo)
        # DC2 gateway A@1 to DC3 gateway B@2: direct A-B plus detour A-C-B.
        paths = routing.interface_paths(Interface("A", 1), Interface("B", 2))
        assert paths[0] == (Interface("A", 1), Interface("A", 3),
                            Interface("B", 1), Interface("B", 2))
        routers = [tuple(i.router for i in p) for p in paths]
        assert routers == [("A", "A", "B", "B"), ("A", "A", "C", "C", "B", "B")]

    def test_paths_sorted_shortest_first(self, fig2_net):
        topo, _ = fig2_net
        routing = Routing(topo)
        for a, b in [("A", 1), ("B", 2)], [("C", 2), ("A", 1)]:
            paths = routing.interface_paths(Interface(*a), Interface(*b))
            lengths = [len(p) for p in paths]
            assert lengths == sorted(lengths)

    def test_same_router_pair(self, fig3_net):
        topo, _ = fig3_net
        routing = Routing(topo)
        paths = routing.interface_paths(Interface("A", 2), Interface("A", 3))
        assert paths == [(Interface("A", 2), Interface("A", 3))]

    def test_matches_networkx_shortest(self, fig3_net):
        topo, _ = fig3_net
        routing = Routing(topo)
        g = topo.graph
        paths = routing.interface_paths(Interface("A", 2), Interface("D", 4))
        hops = [len({i.router for i in p}) for p in paths]
        assert min(hops) - 0 == nx.shortest_path_length(g, "A", "D") + 1

    def test_fig3_two_disjoint_paths_a_to_c(self, fig3_net):
        topo, snmt = fig3_net
        routing = Routing(topo)
        paths = routing.interface_paths(Interface("A", 2), Interface("B", 2))
        upper = [tuple(sorted({i.router for i in p})) for p in paths]
        assert ("A", "B") in upper
        paths2 = routing.interface_paths(Interface("A", 2), Interface("D", 2))
        assert any({i.router for i in p} == {"A", "C", "D"} for p in paths2)
