"""Time ranges and their atomization.

A rule's time scope is a day-of-week mask optionally restricted to a date
window.  Conflict and TMF computations need exact set algebra over these
scopes, so a working context's distinct ranges are atomized: the time line is
split into (day-of-week, date-interval) cells and cells with identical
membership across all ranges are grouped into atoms.  All flow-set algebra is
then applied atom-wise.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass
from typing import FrozenSet, Iterable, Optional, Tuple

ALL_DAYS = 0b1111111  # bit 0 = Monday ... bit 6 = Sunday
WEEKDAYS = 0b0011111
WEEKEND = 0b1100000

_DAY_NAMES = ["mon", "tue", "wed", "thu", "fri", "sat", "sun"]


@dataclass(frozen=True)
class TimeRange:
    """Day-of-week set plus an optional inclusive date window."""

    dow_mask: int = ALL_DAYS
    window: Optional[Tuple[datetime.date, datetime.date]] = None

    def __post_init__(self):
        if not 0 < self.dow_mask <= ALL_DAYS:
            raise ValueError(f"dow_mask must be a nonzero 7-bit set, got {self.dow_mask:#x}")
        if self.window is not None:
            start, end = self.window
            if start > end:
                raise ValueError(f"date window start {start} after end {end}")

    @property
    def is_any(self) -> bool:
        return self.dow_mask == ALL_DAYS and self.window is None

    def days(self):
        return [d for d in range(7) if self.dow_mask >> d & 1]

    def intersect(self, other: "TimeRange") -> Optional["TimeRange"]:
        mask = self.dow_mask & other.dow_mask
        if mask == 0:
            return None
        if self.window is None:
            window = other.window
        elif other.window is None:
            window = self.window
        else:
            lo = max(self.window[0], other.window[0])
            hi = min(self.window[1], other.window[1])
            if lo > hi:
                return None
            window = (lo, hi)
        return TimeRange(mask, window)

    def to_json(self):
        if self.is_any:
            return "any"
        out = {"days": [_DAY_NAMES[d] for d in self.days()]}
        if self.window is not None:
            out["window"] = [self.window[0].isoformat(), self.window[1].isoformat()]
        return out

    @classmethod
    def from_json(cls, obj) -> "TimeRange":
        if obj is None or obj == "any":
            return ANY_TIME
        mask = 0
        for name in obj.get("days", _DAY_NAMES):
            mask |= 1 << _DAY_NAMES.index(str(name).lower()[:3])
        window = None
        if obj.get("window"):
            lo, hi = obj["window"]
            window = (datetime.date.fromisoformat(lo), datetime.date.fromisoformat(hi))
        return cls(mask or ALL_DAYS, window)

    def sort_key(self):
        window = self.window or (datetime.date.min, datetime.date.min)
        return (self.window is not None, window, self.dow_mask)

    def __str__(self):
        if self.is_any:
            return "any"
        days = ",".join(_DAY_NAMES[d] for d in self.days())
        if self.window is None:
            return days
        return f"{days}[{self.window[0]}..{self.window[1]}]"


ANY_TIME = TimeRange()


def _dows_in_interval(lo: Optional[datetime.date], hi: Optional[datetime.date]) -> int:
    """Day-of-week mask actually realizable inside [lo, hi) (None = unbounded)."""
    if lo is None or hi is None or (hi - lo).days >= 7:
        return ALL_DAYS
    mask = 0
    d = lo
    while d < hi:
        mask |= 1 << d.weekday()
        d += datetime.timedelta(days=1)
    return mask


class TimeAtomizer:
    """Minimal regions of the Boolean algebra generated by a set of TimeRanges.

    The universal range is always part of the context so the atoms cover all
    of time; atom ids are stable for a fixed input set.
    """

    def __init__(self, ranges: Iterable[TimeRange]):
        ranges = sorted(set(ranges) | {ANY_TIME}, key=TimeRange.sort_key)
        self.ranges = ranges

        # Elementary date intervals from all window endpoints (half-open).
        points = sorted({p for r in ranges if r.window for p in
                         (r.window[0], r.window[1] + datetime.timedelta(days=1))})
        bounds = [None] + points + [None]
        intervals = list(zip(bounds[:-1], bounds[1:]))

        # Cell = (dow, interval); group cells by their membership signature.
        cells_by_sig = {}
        for lo, hi in intervals:
            realizable = _dows_in_interval(lo, hi)
            rep = lo if lo is not None else (
                (hi - datetime.timedelta(days=1)) if hi is not None else None)
            for dow in range(7):
                if not realizable >> dow & 1:
                    continue
                sig = []
                for idx, r in enumerate(ranges):
                    if not r.dow_mask >> dow & 1:
                        continue
                    if r.window is not None:
                        if rep is None or not (r.window[0] <= rep <= r.window[1]):
                            continue
                        # rep is the interval's low endpoint; the elementary
                        # interval never straddles a window boundary, so one
                        # representative decides membership -- except the
                        # unbounded tail, where rep must still fit the window.
                        if hi is None and rep > r.window[1]:
                            continue
                    sig.append(idx)
                cells_by_sig.setdefault(frozenset(sig), []).append((dow, lo, hi))

        self.atoms: Tuple[FrozenSet[int], ...] = tuple(sorted(cells_by_sig, key=sorted))
        self._atom_id = {sig: i for i, sig in enumerate(self.atoms)}
        self._cells = {self._atom_id[s]: cells for s, cells in cells_by_sig.items()}
        self._range_idx = {r: i for i, r in enumerate(ranges)}
        self.universal: FrozenSet[int] = frozenset(range(len(self.atoms)))

    def __len__(self):
        return len(self.atoms)

    def atoms_for(self, tr: TimeRange) -> FrozenSet[int]:
        """Atom ids whose region lies inside `tr` (must be a context range)."""
        idx = self._range_idx.get(tr)
        if idx is None:
            raise KeyError(f"time range {tr} is not part of this atomization context")
        return frozenset(a for a, sig in enumerate(self.atoms) if idx in sig)

    def describe(self, atom: int) -> str:
        cells = self._cells[atom]
        days = sorted({c[0] for c in cells})
        spans = sorted({(c[1], c[2]) for c in cells},
                       key=lambda s: (s[0] or datetime.date.min, s[1] or datetime.date.max))
        day_s = ",".join(_DAY_NAMES[d] for d in days)
        span_s = ";".join(f"[{lo or '-inf'}..{hi or '+inf'})" for lo, hi in spans)
        return f"{day_s} {span_s}"

    def contains(self, tr: TimeRange, atom: int) -> bool:
        return atom in self.atoms_for(tr)

    def atom_at(self, date: datetime.date) -> int:
        """Id of the atom whose region contains the given concrete date."""
        dow = date.weekday()
        for atom, cells in self._cells.items():
            for d, lo, hi in cells:
                if d != dow:
                    continue
                if (lo is None or date >= lo) and (hi is None or date < hi):
                    return atom
        raise KeyError(f"no atom contains {date}")
