"""Network topology, routing, and the semantics-network mapping table (SNMT).

The SNMT grounds natural-language entity names in (gateway interface, IP
prefix) pairs; its registry of finest prefixes defines the atoms the flow
universe is built from.  Routing is k-shortest loop-free paths by hop count
with lexicographic tie-breaking so results are reproducible byte-for-byte.
"""

from __future__ import annotations

import ipaddress
import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import networkx as nx

IPv4Net = ipaddress.IPv4Network


class NetworkError(ValueError):
    """Raised for malformed network documents or inconsistent model state."""


def parse_prefix(text: str) -> IPv4Net:
    try:
        return ipaddress.IPv4Network(text, strict=True)
    except (ipaddress.AddressValueError, ipaddress.NetmaskValueError, ValueError) as e:
        raise NetworkError(f"malformed prefix {text!r}: {e}") from e


def net_key(net: IPv4Net) -> Tuple[int, int]:
    return (int(net.network_address), net.prefixlen)


def prefix_contains(outer: IPv4Net, inner: IPv4Net) -> bool:
    return inner.subnet_of(outer)


@dataclass(frozen=True, order=True)
class Interface:
    """A router interface, displayed as ``router@index``."""

    router: str
    index: int

    def __str__(self):
        return f"{self.router}@{self.index}"

    @classmethod
    def parse(cls, text: str) -> "Interface":
        router, _, idx = text.rpartition("@")
        if not router or not idx.isdigit():
            raise NetworkError(f"malformed interface {text!r}, expected 'router@index'")
        return cls(router, int(idx))


Path = Tuple[Interface, ...]


@dataclass
class Topology:
    routers: Tuple[str, ...]
    interfaces: Tuple[Interface, ...]
    links: Tuple[Tuple[Interface, Interface], ...]
    k: int = 4

    def __post_init__(self):
        self._iface_set = set(self.interfaces)
        router_set = set(self.routers)
        seen = set()
        self._link_ifaces: Dict[Tuple[str, str], Tuple[Interface, Interface]] = {}
        for a, b in self.links:
            for end in (a, b):
                if end not in self._iface_set:
                    raise NetworkError(f"link endpoint {end} is not a declared interface")
                if end in seen:
                    raise NetworkError(f"interface {end} appears in more than one link")
                seen.add(end)
            if a.router == b.router:
                raise NetworkError(f"self-link on router {a.router}")
            key = (a.router, b.router)
            if key in self._link_ifaces or key[::-1] in self._link_ifaces:
                raise NetworkError(f"parallel link between {a.router} and {b.router}")
            self._link_ifaces[key] = (a, b)
            self._link_ifaces[key[::-1]] = (b, a)
        for iface in self.interfaces:
            if iface.router not in router_set:
                raise NetworkError(f"interface {iface} references unknown router {iface.router}")
        self._graph = nx.Graph()
        self._graph.add_nodes_from(self.routers)
        self._graph.add_edges_from(sorted((a.router, b.router) for a, b in self.links))

    @property
    def graph(self) -> nx.Graph:
        return self._graph

    def has_interface(self, iface: Interface) -> bool:
        return iface in self._iface_set

    def link_between(self, ra: str, rb: str) -> Tuple[Interface, Interface]:
        """(interface on ra, interface on rb) of the ra--rb link."""
        return self._link_ifaces[(ra, rb)]

    def host_facing(self) -> List[Interface]:
        in_links = {i for pair in self.links for i in pair}
        return [i for i in self.interfaces if i not in in_links]


@dataclass
class SNMT:
    """entity name -> list of (gateway interface, prefix) pairs."""

    entries: Dict[str, List[Tuple[Interface, IPv4Net]]]
    finest_prefixes: Tuple[IPv4Net, ...]

    def __post_init__(self):
        finest = sorted(self.finest_prefixes, key=net_key)
        for a, b in zip(finest, finest[1:]):
            if a.overlaps(b):
                raise NetworkError(f"finest prefixes {a} and {b} overlap")
        self.finest_prefixes = tuple(finest)
        for name, pairs in self.entries.items():
            for _, prefix in pairs:
                covered = sum(f.num_addresses for f in finest if f.subnet_of(prefix))
                if covered != prefix.num_addresses:
                    raise NetworkError(
                        f"entity {name!r} prefix {prefix} is not covered by finest prefixes")

    def gateways_for_prefix(self, prefix: IPv4Net) -> List[Interface]:
        gws = {gw for m in snmt_match(prefix, self) for gw in (m.gateway,)}
        return sorted(gws)


@dataclass(frozen=True)
class SnmtMatch:
    entity: str
    gateway: Interface
    prefix: IPv4Net


def snmt_match(p: IPv4Net, snmt: SNMT) -> List[SnmtMatch]:
    """All SNMT entries whose prefix equals or contains `p` (may be empty)."""
    out = []
    for entity in sorted(snmt.entries):
        for gw, prefix in snmt.entries[entity]:
            if p.subnet_of(prefix):
                out.append(SnmtMatch(entity, gw, prefix))
    return out


# ---------------------------------------------------------------------------
# Parsing

def parse_network(document) -> Tuple[Topology, SNMT]:
    """Build (Topology, SNMT) from a fixture document (dict or JSON text).

    Schema: {"routers": [...], "interfaces": ["R@i", ...],
    "links": [["A@1","B@1"], ...], "snmt": {entity: [{"gateway": "R@i",
    "prefix": "a.b.c.d/len"}, ...]}, "finest_prefixes": [...],
    "routing": {"k": 4}}.
    """
    if isinstance(document, str):
        document = json.loads(document)
    routers = list(document.get("routers", []))
    if not routers:
        raise NetworkError("no routers")
    if len(set(routers)) != len(routers):
        raise NetworkError("duplicate router names")

    ifaces = [Interface.parse(t) for t in document.get("interfaces", [])]
    if len(set(ifaces)) != len(ifaces):
        raise NetworkError("duplicate interface declarations")

    links = []
    for a, b in document.get("links", []):
        links.append((Interface.parse(a), Interface.parse(b)))
    k = int(document.get("routing", {}).get("k", 4))
    topo = Topology(tuple(routers), tuple(ifaces), tuple(links), k=k)

    entries: Dict[str, List[Tuple[Interface, IPv4Net]]] = {}
    for entity, pairs in document.get("snmt", {}).items():
        if entity in entries:
            raise NetworkError(f"duplicate entity {entity!r}")
        lst = []
        for pair in pairs:
            gw = Interface.parse(pair["gateway"])
            if not topo.has_interface(gw):
                raise NetworkError(f"entity {entity!r} gateway {gw} is not declared")
            lst.append((gw, parse_prefix(pair["prefix"])))
        entries[entity] = lst
    finest = tuple(parse_prefix(t) for t in document.get("finest_prefixes", []))
    snmt = SNMT(entries, finest)
    return topo, snmt


def dump_network(topo: Topology, snmt: SNMT) -> dict:
    return {
        "routers": list(topo.routers),
        "interfaces": [str(i) for i in topo.interfaces],
        "links": [[str(a), str(b)] for a, b in topo.links],
        "snmt": {
            entity: [{"gateway": str(gw), "prefix": str(p)} for gw, p in pairs]
            for entity, pairs in snmt.entries.items()
        },
        "finest_prefixes": [str(p) for p in snmt.finest_prefixes],
        "routing": {"k": topo.k},
    }


# ---------------------------------------------------------------------------
# Routing

class Routing:
    """k-shortest-path routing over a topology, with caching.

    Paths are hop-count shortest, loop-free, ordered by (length, lexicographic
    router sequence) and truncated to the topology's k.
    """

    def __init__(self, topo: Topology):
        self.topo = topo
        self._router_paths = lru_cache(maxsize=None)(self._router_paths_uncached)

    def _router_paths_uncached(self, src: str, dst: str) -> Tuple[Tuple[str, ...], ...]:
        if src == dst:
            return ((src,),)
        g = self.topo.graph
        if src not in g or dst not in g:
            return ()
        candidates: List[Tuple[str, ...]] = []
        cutoff_len = None
        try:
            for path in nx.shortest_simple_paths(g, src, dst):
                if cutoff_len is not None and len(path) > cutoff_len:
                    break
                candidates.append(tuple(path))
                if cutoff_len is None and len(candidates) == self.topo.k:
                    cutoff_len = len(path)
        except nx.NetworkXNoPath:
            return ()
        candidates.sort(key=lambda p: (len(p), p))
        return tuple(candidates[: self.topo.k])

    def interface_paths(self, src_gw: Interface, dst_gw: Interface) -> List[Path]:
        """Interface sequences traversed from a source gateway to a destination
        gateway: the gateway interfaces plus both endpoints of every link."""
        if src_gw == dst_gw:
            return []
        out: List[Path] = []
        for rpath in self._router_paths(src_gw.router, dst_gw.router):
            ifaces: List[Interface] = [src_gw]
            for ra, rb in zip(rpath, rpath[1:]):
                ifaces.extend(self.topo.link_between(ra, rb))
            ifaces.append(dst_gw)
            out.append(tuple(ifaces))
        return out


def k_shortest_paths(src_gws: Sequence[Interface], dst_gws: Sequence[Interface],
                     topo: Topology,
                     routing: Optional[Routing] = None) -> Dict[Tuple[Interface, Interface], List[Path]]:
    """All k-shortest interface paths for each (source gw, destination gw) pair.

    Disconnected pairs map to an empty list.  Gateway sets must be disjoint.
    """
    src_gws = sorted(set(src_gws))
    dst_gws = sorted(set(dst_gws))
    overlap = set(src_gws) & set(dst_gws)
    if overlap:
        raise NetworkError(f"source and destination gateways overlap: {sorted(overlap)}")
    for gw in list(src_gws) + list(dst_gws):
        if not topo.has_interface(gw):
            raise NetworkError(f"gateway {gw} is not a declared interface")
    routing = routing or Routing(topo)
    return {(s, d): routing.interface_paths(s, d) for s in src_gws for d in dst_gws}
