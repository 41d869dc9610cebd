"""Bitset-backed flow sets over a finite flow universe.

The universe is the cross product of source atoms, destination atoms, and
application atoms.  Source and destination atoms are the finest prefixes of
the mapping table (or a declared subset of them when sources and sinks play
asymmetric roles); application atoms are disjoint (protocol, port) pairs.
Flows are enumerated destination-major: the flow at index
``(d * n_src + s) * n_app + a`` pairs destination atom ``d`` with source atom
``s`` and application atom ``a``.  A flow set is one Python integer whose bit
``i`` says whether flow ``i`` is in the set, so unions, intersections, and
differences are single machine-word-parallel operations.
"""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .netmodel import IPv4Net, net_key, parse_prefix
from .timealg import ANY_TIME, TimeAtomizer, TimeRange

# (protocol, port); port None means every port of the protocol.
AppAtom = Tuple[str, Optional[int]]


class FlowSetError(ValueError):
    """Raised when a rule cannot be expressed exactly in the universe."""


@dataclass(frozen=True)
class FlowSet:
    """An immutable subset of a flow universe of `size` flows."""

    bits: int
    size: int

    def __post_init__(self):
        if self.bits < 0 or self.bits >> self.size:
            raise FlowSetError(f"bits out of range for universe of {self.size} flows")

    def _check(self, other: "FlowSet"):
        if self.size != other.size:
            raise FlowSetError(f"universe size mismatch: {self.size} vs {other.size}")

    def __and__(self, other):
        self._check(other)
        return FlowSet(self.bits & other.bits, self.size)

    def __or__(self, other):
        self._check(other)
        return FlowSet(self.bits | other.bits, self.size)

    def __sub__(self, other):
        self._check(other)
        return FlowSet(self.bits & ~other.bits, self.size)

    def __xor__(self, other):
        self._check(other)
        return FlowSet(self.bits ^ other.bits, self.size)

    def __invert__(self):
        return FlowSet(~self.bits & ((1 << self.size) - 1), self.size)

    def __contains__(self, index: int) -> bool:
        return 0 <= index < self.size and bool(self.bits >> index & 1)

    def __bool__(self):
        return self.bits != 0

    def __le__(self, other):
        self._check(other)
        return self.bits & ~other.bits == 0

    def __len__(self):
        return self.bits.bit_count()

    def indices(self) -> List[int]:
        return [i for i in range(self.size) if self.bits >> i & 1]

    def to_bitstring(self) -> str:
        """Characters left to right are flows 0, 1, 2, ..."""
        return "".join("1" if self.bits >> i & 1 else "0" for i in range(self.size))

    @classmethod
    def from_bitstring(cls, s: str) -> "FlowSet":
        bits = 0
        for i, ch in enumerate(s):
            if ch == "1":
                bits |= 1 << i
            elif ch != "0":
                raise FlowSetError(f"bad bitstring character {ch!r}")
        return cls(bits, len(s))

    @classmethod
    def from_indices(cls, indices, size: int) -> "FlowSet":
        bits = 0
        for i in indices:
            if not 0 <= i < size:
                raise FlowSetError(f"flow index {i} outside universe of {size}")
            bits |= 1 << i
        return cls(bits, size)


def _as_app(spec) -> AppAtom:
    if spec is None:
        return (None, None)
    proto, port = spec
    if proto is not None:
        proto = str(proto).lower()
        if proto == "any":
            proto = None
    if proto is None and port is not None:
        raise FlowSetError("application port given without a protocol")
    return (proto, None if port is None else int(port))


@dataclass(frozen=True)
class Rule:
    """One ACL rule: match on src/dst prefix, application, and time scope.

    `src`/`dst` of None match any address; `app` of (None, None) matches any
    application.  `action` is "permit" or "deny".
    """

    src: Optional[IPv4Net]
    dst: Optional[IPv4Net]
    app: AppAtom
    action: str
    time: TimeRange = ANY_TIME

    def __post_init__(self):
        if self.action not in ("permit", "deny"):
            raise FlowSetError(f"bad action {self.action!r}")
        object.__setattr__(self, "app", _as_app(self.app))

    @property
    def anti_action(self) -> str:
        return "deny" if self.action == "permit" else "permit"

    def to_json(self) -> dict:
        proto, port = self.app
        return {
            "src": str(self.src) if self.src else "any",
            "dst": str(self.dst) if self.dst else "any",
            "proto": proto or "any",
            "port": port,
            "action": self.action,
            "time": self.time.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Rule":
        def net(v):
            return None if v in (None, "any") else parse_prefix(v)
        proto = obj.get("proto", "any")
        return cls(net(obj.get("src")), net(obj.get("dst")),
                   (None if proto in (None, "any") else proto, obj.get("port")),
                   obj["action"], TimeRange.from_json(obj.get("time")))

    def __str__(self):
        proto, port = self.app
        app = "any" if proto is None else (proto if port is None else f"{proto}:{port}")
        time = "" if self.time.is_any else f" time={self.time}"
        return f"{self.action} {self.src or 'any'} -> {self.dst or 'any'} {app}{time}"


class GlobalFlowTable:
    """The flow universe plus precomputed per-attribute-atom flow sets."""

    def __init__(self, src_atoms: Sequence[IPv4Net], dst_atoms: Sequence[IPv4Net],
                 app_atoms: Sequence[AppAtom]):
        self.src_atoms = tuple(sorted(src_atoms, key=net_key))
        self.dst_atoms = tuple(sorted(dst_atoms, key=net_key))
        self.app_atoms = tuple(sorted(_as_app(a) for a in app_atoms))
        for atoms, kind in ((self.src_atoms, "source"), (self.dst_atoms, "destination")):
            for a, b in zip(atoms, atoms[1:]):
                if a.overlaps(b):
                    raise FlowSetError(f"{kind} atoms {a} and {b} overlap")
        for (pa, qa), (pb, qb) in zip(self.app_atoms, self.app_atoms[1:]):
            if pa == pb and (qa is None or qb is None or qa == qb):
                raise FlowSetError(f"application atoms ({pa},{qa}) and ({pb},{qb}) overlap")
        if not (self.src_atoms and self.dst_atoms and self.app_atoms):
            raise FlowSetError("empty attribute atom list")

        self.n_src = len(self.src_atoms)
        self.n_dst = len(self.dst_atoms)
        self.n_app = len(self.app_atoms)
        self.size = self.n_src * self.n_dst * self.n_app

        # Per-atom index sets, destination-major flow ordering.
        self._src_index = []
        for s in range(self.n_src):
            bits = 0
            for d in range(self.n_dst):
                for a in range(self.n_app):
                    bits |= 1 << (d * self.n_src + s) * self.n_app + a
            self._src_index.append(bits)
        self._dst_index = []
        for d in range(self.n_dst):
            bits = 0
            for s in range(self.n_src):
                for a in range(self.n_app):
                    bits |= 1 << (d * self.n_src + s) * self.n_app + a
            self._dst_index.append(bits)
        self._app_index = []
        for a in range(self.n_app):
            bits = 0
            for d in range(self.n_dst):
                for s in range(self.n_src):
                    bits |= 1 << (d * self.n_src + s) * self.n_app + a
            self._app_index.append(bits)
        self._prefix_cache: Dict[Tuple[str, Tuple[int, int]], int] = {}

    # -- basic sets ---------------------------------------------------------

    def empty(self) -> FlowSet:
        return FlowSet(0, self.size)

    def full(self) -> FlowSet:
        return FlowSet((1 << self.size) - 1, self.size)

    def flow_at(self, index: int) -> Tuple[IPv4Net, IPv4Net, AppAtom]:
        if not 0 <= index < self.size:
            raise FlowSetError(f"flow index {index} outside universe")
        index, a = divmod(index, self.n_app)
        d, s = divmod(index, self.n_src)
        return (self.src_atoms[s], self.dst_atoms[d], self.app_atoms[a])

    def flow_index(self, src: IPv4Net, dst: IPv4Net, app: AppAtom) -> int:
        s = self.src_atoms.index(src)
        d = self.dst_atoms.index(dst)
        a = self.app_atoms.index(_as_app(app))
        return (d * self.n_src + s) * self.n_app + a

    # -- attribute expansion ------------------------------------------------

    def _prefix_bits(self, kind: str, prefix: Optional[IPv4Net]) -> int:
        atoms = self.src_atoms if kind == "src" else self.dst_atoms
        index = self._src_index if kind == "src" else self._dst_index
        if prefix is None:
            return (1 << self.size) - 1
        key = (kind, net_key(prefix))
        cached = self._prefix_cache.get(key)
        if cached is not None:
            return cached
        bits = 0
        covered = 0
        for i, atom in enumerate(atoms):
            if atom.subnet_of(prefix):
                bits |= index[i]
                covered += atom.num_addresses
        if covered != prefix.num_addresses:
            raise FlowSetError(
                f"{kind} prefix {prefix} does not decompose into universe atoms")
        self._prefix_cache[key] = bits
        return bits

    def _app_bits(self, app: AppAtom) -> int:
        proto, port = _as_app(app)
        if proto is None:
            return (1 << self.size) - 1
        bits = 0
        hit = False
        for i, (p, q) in enumerate(self.app_atoms):
            if p != proto:
                continue
            if port is None or q == port:
                bits |= self._app_index[i]
                hit = True
            elif q is None:
                raise FlowSetError(
                    f"application ({proto},{port}) is finer than catalog atom ({p},any)")
        if not hit:
            raise FlowSetError(f"application ({proto},{port}) matches no catalog atom")
        return bits

    def attr_index(self, kind: str, value) -> FlowSet:
        """Flow set selected by one attribute: kind is src, dst, or app."""
        if kind in ("src", "dst"):
            return FlowSet(self._prefix_bits(kind, value), self.size)
        if kind == "app":
            return FlowSet(self._app_bits(value), self.size)
        raise FlowSetError(f"unknown attribute kind {kind!r}")

    def expand_rule(self, rule: Rule) -> FlowSet:
        """Flows matched by a rule, ignoring its time scope."""
        bits = (self._prefix_bits("src", rule.src)
                & self._prefix_bits("dst", rule.dst)
                & self._app_bits(rule.app))
        return FlowSet(bits, self.size)


@dataclass(frozen=True)
class TimedFlowSet:
    """One flow set per time atom; algebra is applied atom-wise."""

    slices: Tuple[int, ...]
    size: int

    @classmethod
    def empty(cls, table: GlobalFlowTable, atomizer: TimeAtomizer) -> "TimedFlowSet":
        return cls((0,) * len(atomizer), table.size)

    @classmethod
    def expand(cls, table: GlobalFlowTable, atomizer: TimeAtomizer,
               rule: Rule) -> "TimedFlowSet":
        bits = table.expand_rule(rule).bits
        active = atomizer.atoms_for(rule.time)
        return cls(tuple(bits if t in active else 0 for t in range(len(atomizer))),
                   table.size)

    def _check(self, other: "TimedFlowSet"):
        if self.size != other.size or len(self.slices) != len(other.slices):
            raise FlowSetError("timed flow set shape mismatch")

    def __and__(self, other):
        self._check(other)
        return TimedFlowSet(tuple(a & b for a, b in zip(self.slices, other.slices)), self.size)

    def __or__(self, other):
        self._check(other)
        return TimedFlowSet(tuple(a | b for a, b in zip(self.slices, other.slices)), self.size)

    def __sub__(self, other):
        self._check(other)
        return TimedFlowSet(tuple(a & ~b for a, b in zip(self.slices, other.slices)), self.size)

    def __bool__(self):
        return any(self.slices)

    def __le__(self, other):
        self._check(other)
        return all(a & ~b == 0 for a, b in zip(self.slices, other.slices))

    def __len__(self):
        return sum(s.bit_count() for s in self.slices)

    def slice(self, t: int) -> FlowSet:
        return FlowSet(self.slices[t], self.size)

    def nonempty_atoms(self) -> List[int]:
        return [t for t, s in enumerate(self.slices) if s]
