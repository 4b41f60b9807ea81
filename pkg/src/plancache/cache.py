"""2-gram plan-transition cache used as a fast local planner.

Each entry records one ordered verb pair ``from -> to`` together with a
per-field integer range of the task states under which the transition
has historically fired, and a transition count.  A query filters the
entries whose ranges contain the current state and picks the survivor
with the highest score

    score = count * importance(to)

where ``importance`` is the smoothed confirmation ratio of the target
verb across all contexts: ``(confirmations + 1) / (candidacies + 1)``,
clamped to [0, 1].  Smoothing keeps fresh and prefilled entries
selectable; without it a never-validated entry would score zero.

Scores are exact rationals so that selection and any re-derivation of
it agree bit-for-bit.

All public methods are atomic under a coarse lock, making one cache
safely shareable between an agent loop and a background updater.
Entries are a few dozen bytes each (see :meth:`PlanCache.size_bytes`),
so lock granularity is irrelevant.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator

from .plans import PlanKind, parse_kind


class SchemaMismatch(ValueError):
    """A state vector does not conform to the cache's field schema."""


class FormatError(ValueError):
    """Malformed cache file; carries the 1-based offending line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


NUMERIC_WIDTH = 4
BINARY_WIDTH = 1
_FIELD_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*):([14])$")


@dataclass(frozen=True)
class FieldSpec:
    name: str
    width: int  # 4 = numeric, 1 = binary

    def __post_init__(self) -> None:
        if self.width not in (NUMERIC_WIDTH, BINARY_WIDTH):
            raise ValueError(f"field width must be 1 or 4, got {self.width}")


@dataclass(frozen=True)
class FieldSchema:
    """Declares field order, names and width class for state vectors."""

    fields: tuple[FieldSpec, ...]

    def __post_init__(self) -> None:
        if not self.fields:
            raise ValueError("schema needs at least one field")
        names = [f.name for f in self.fields]
        if len(set(names)) != len(names):
            raise ValueError("duplicate field names in schema")

    def __len__(self) -> int:
        return len(self.fields)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.fields)

    def state(self, *values: int) -> "StateVector":
        return StateVector(self, tuple(values))

    def spec_string(self) -> str:
        return ",".join(f"{f.name}:{f.width}" for f in self.fields)

    @classmethod
    def parse(cls, text: str) -> "FieldSchema":
        specs = []
        for token in text.split(","):
            m = _FIELD_RE.match(token.strip())
            if not m:
                raise ValueError(f"bad schema field {token!r}")
            specs.append(FieldSpec(m.group(1), int(m.group(2))))
        return cls(tuple(specs))


@dataclass(frozen=True)
class StateVector:
    """Ordered integer task-state fields under a fixed schema."""

    schema: FieldSchema
    values: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.values) != len(self.schema):
            raise SchemaMismatch(
                f"expected {len(self.schema)} values, got {len(self.values)}"
            )
        for spec, value in zip(self.schema.fields, self.values):
            if value < 0:
                raise ValueError(f"field {spec.name} is negative: {value}")
            if spec.width == BINARY_WIDTH and value not in (0, 1):
                raise ValueError(f"binary field {spec.name} holds {value}")

    def as_dict(self) -> dict[str, int]:
        return dict(zip(self.schema.names, self.values))


@dataclass(frozen=True)
class MetadataRange:
    """Per-field closed integer intervals aligned to a schema."""

    bounds: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        for lo, hi in self.bounds:
            if lo > hi:
                raise ValueError(f"range min {lo} exceeds max {hi}")

    @classmethod
    def point(cls, state: StateVector) -> "MetadataRange":
        return cls(tuple((v, v) for v in state.values))

    def contains(self, state: StateVector) -> bool:
        return all(lo <= v <= hi for (lo, hi), v in zip(self.bounds, state.values))

    def widened(self, state: StateVector) -> "MetadataRange":
        return MetadataRange(
            tuple(
                (min(lo, v), max(hi, v))
                for (lo, hi), v in zip(self.bounds, state.values)
            )
        )

    def union(self, other: "MetadataRange") -> "MetadataRange":
        return MetadataRange(
            tuple(
                (min(a_lo, b_lo), max(a_hi, b_hi))
                for (a_lo, a_hi), (b_lo, b_hi) in zip(self.bounds, other.bounds)
            )
        )

    def spec_string(self) -> str:
        return ",".join(f"{lo}:{hi}" for lo, hi in self.bounds)


@dataclass
class CacheEntry:
    """One stored transition ``from -> to`` with its state envelope."""

    from_kind: PlanKind
    to_kind: PlanKind
    bounds: MetadataRange
    count: int = 0


@dataclass
class PlanStats:
    """Global confirmation tallies for one target verb.

    The raw counters are independent tallies; ``confirm_count`` may
    legitimately run ahead of ``candidate_count`` (confirmations also
    come from miss-inserts that never passed through a query).  The
    smoothed importance is clamped to [0, 1] at read time instead.
    """

    kind: PlanKind
    candidate_count: int = 0
    confirm_count: int = 0

    @property
    def importance(self) -> Fraction:
        raw = Fraction(self.confirm_count + 1, self.candidate_count + 1)
        return min(raw, Fraction(1))


@dataclass(frozen=True)
class PrefillTransition:
    from_kind: PlanKind
    to_kind: PlanKind
    count: int
    bounds: MetadataRange


HEADER = "PCACHE v1"


class PlanCache:
    """The cache-as-planner for one agent."""

    def __init__(self, schema: FieldSchema):
        self.schema = schema
        self._entries: dict[tuple[PlanKind, PlanKind], CacheEntry] = {}
        self._stats: dict[PlanKind, PlanStats] = {}
        self._lock = threading.RLock()

    # ------------------------------------------------------------------
    # introspection
    # ------------------------------------------------------------------

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PlanCache):
            return NotImplemented
        return (
            self.schema == other.schema
            and self._entries == other._entries
            and self._stats == other._stats
        )

    @property
    def entry_count(self) -> int:
        with self._lock:
            return len(self._entries)

    def entries(self) -> list[CacheEntry]:
        with self._lock:
            return [self._entries[k] for k in sorted(self._entries, key=self._key_sort)]

    def stats(self) -> list[PlanStats]:
        with self._lock:
            return [self._stats[k] for k in sorted(self._stats, key=lambda k: k.value)]

    def stats_for(self, kind: PlanKind) -> PlanStats:
        with self._lock:
            return self._row(kind)

    def importance(self, kind: PlanKind) -> Fraction:
        with self._lock:
            row = self._stats.get(kind)
            return row.importance if row is not None else Fraction(1)

    def size_bytes(self) -> int:
        """Memory footprint: N x (4 + sum of field widths)."""
        with self._lock:
            per_entry = 4 + sum(f.width for f in self.schema.fields)
            return len(self._entries) * per_entry

    @staticmethod
    def _key_sort(key: tuple[PlanKind, PlanKind]) -> tuple[str, str]:
        return (key[0].value, key[1].value)

    def _row(self, kind: PlanKind) -> PlanStats:
        row = self._stats.get(kind)
        if row is None:
            row = PlanStats(kind)
            self._stats[kind] = row
        return row

    def _check(self, state: StateVector) -> None:
        if state.schema != self.schema:
            raise SchemaMismatch(
                f"state schema {state.schema.spec_string()!r} does not match "
                f"cache schema {self.schema.spec_string()!r}"
            )

    # ------------------------------------------------------------------
    # queries
    # ------------------------------------------------------------------

    def feasible_set(
        self, prev: PlanKind, state: StateVector
    ) -> list[tuple[CacheEntry, Fraction]]:
        """Entries reachable from ``prev`` whose ranges contain ``state``.

        Scores are computed against the pre-query statistics; as a side
        effect every surviving candidate's target verb gets one
        candidacy tick (it "appeared as a feasible candidate").
        """
        with self._lock:
            self._check(state)
            hits: list[tuple[CacheEntry, Fraction]] = []
            for key in sorted(self._entries, key=self._key_sort):
                entry = self._entries[key]
                if entry.from_kind != prev or not entry.bounds.contains(state):
                    continue
                score = entry.count * self._row(entry.to_kind).importance
                hits.append((entry, score))
            for entry, _ in hits:
                self._row(entry.to_kind).candidate_count += 1
            return hits

    def query(
        self, prev: PlanKind, state: StateVector
    ) -> tuple[PlanKind | None, list[tuple[CacheEntry, Fraction]]]:
        """One filter-then-argmax round; returns (selection, candidates).

        Selection is the highest-scoring candidate with score > 0; ties
        break deterministically by higher count, then lexicographic
        verb, then smaller target id (moot for verb-level entries but
        kept for replay stability).  ``None`` means a cache miss.
        """
        with self._lock:
            hits = self.feasible_set(prev, state)
            live = [(entry, score) for entry, score in hits if score > 0]
            if not live:
                return None, hits
            live.sort(key=lambda es: (-es[1], -es[0].count, es[0].to_kind.value))
            return live[0][0].to_kind, hits

    def select(self, prev: PlanKind, state: StateVector) -> PlanKind | None:
        return self.query(prev, state)[0]

    # ------------------------------------------------------------------
    # updates
    # ------------------------------------------------------------------

    def reinforce(self, from_kind: PlanKind, to_kind: PlanKind, state: StateVector) -> None:
        """Count one observed/confirmed firing of ``from -> to`` at ``state``."""
        with self._lock:
            self._check(state)
            key = (from_kind, to_kind)
            entry = self._entries.get(key)
            if entry is None:
                entry = CacheEntry(from_kind, to_kind, MetadataRange.point(state), 0)
                self._entries[key] = entry
            entry.count += 1
            entry.bounds = entry.bounds.widened(state)
            self._row(to_kind).confirm_count += 1

    def penalize(self, from_kind: PlanKind, wrong_to: PlanKind) -> None:
        """Back out one firing of a mispredicted transition.

        Counts floor at zero and the entry is retained: a zero-count
        entry scores zero (unselectable) but keeps its range metadata.
        Penalizing an absent entry is a no-op.
        """
        with self._lock:
            entry = self._entries.get((from_kind, wrong_to))
            if entry is None:
                return
            if entry.count > 0:
                entry.count -= 1
            row = self._row(wrong_to)
            if row.confirm_count > 0:
                row.confirm_count -= 1

    def prefill(self, transitions: Iterable[PrefillTransition]) -> None:
        """Warm-start from offline bigram statistics.

        Re-inserting an existing key unions the ranges and sums the
        counts.  Each prefilled count registers as both a candidacy and
        a confirmation so prefilled verbs start at importance 1 and act
        immediately.
        """
        with self._lock:
            for t in transitions:
                if t.count < 1:
                    raise ValueError("prefill counts must be >= 1")
                if len(t.bounds.bounds) != len(self.schema):
                    raise SchemaMismatch(
                        f"range arity {len(t.bounds.bounds)} does not match "
                        f"schema arity {len(self.schema)}"
                    )
                key = (t.from_kind, t.to_kind)
                entry = self._entries.get(key)
                if entry is None:
                    self._entries[key] = CacheEntry(
                        t.from_kind, t.to_kind, t.bounds, t.count
                    )
                else:
                    entry.count += t.count
                    entry.bounds = entry.bounds.union(t.bounds)
                row = self._row(t.to_kind)
                row.candidate_count += t.count
                row.confirm_count += t.count

    # ------------------------------------------------------------------
    # serialization (.pcache, versioned line format)
    # ------------------------------------------------------------------

    def dumps(self) -> str:
        with self._lock:
            lines = [HEADER, f"SCHEMA {self.schema.spec_string()}"]
            for key in sorted(self._entries, key=self._key_sort):
                e = self._entries[key]
                lines.append(
                    f"E {e.from_kind.value} {e.to_kind.value} {e.count} "
                    f"{e.bounds.spec_string()}"
                )
            for kind in sorted(self._stats, key=lambda k: k.value):
                s = self._stats[kind]
                lines.append(f"S {kind.value} {s.candidate_count} {s.confirm_count}")
            return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "PlanCache":
        lines = text.splitlines()
        if not lines or lines[0].strip() != HEADER:
            raise FormatError(1, f"expected header {HEADER!r}")
        if len(lines) < 2 or not lines[1].startswith("SCHEMA "):
            raise FormatError(2, "expected SCHEMA line")
        try:
            schema = FieldSchema.parse(lines[1][len("SCHEMA "):])
        except ValueError as exc:
            raise FormatError(2, str(exc)) from None
        cache = cls(schema)
        for line_no, raw in enumerate(lines[2:], start=3):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("E "):
                cache._load_entry(line_no, line, schema)
            elif line.startswith("S "):
                cache._load_stats(line_no, line)
            else:
                raise FormatError(line_no, f"unrecognized line {line!r}")
        return cache

    def _load_entry(self, line_no: int, line: str, schema: FieldSchema) -> None:
        parts = line.split()
        if len(parts) != 5:
            raise FormatError(line_no, "entry line needs 5 fields")
        _, from_s, to_s, count_s, ranges_s = parts
        try:
            from_kind = parse_kind(from_s)
            to_kind = parse_kind(to_s)
        except ValueError as exc:
            raise FormatError(line_no, str(exc)) from None
        try:
            count = int(count_s)
        except ValueError:
            raise FormatError(line_no, f"bad count {count_s!r}") from None
        if count < 0:
            raise FormatError(line_no, f"negative count {count}")
        bounds = []
        for token in ranges_s.split(","):
            lo_s, sep, hi_s = token.partition(":")
            if not sep:
                raise FormatError(line_no, f"bad range token {token!r}")
            try:
                lo, hi = int(lo_s), int(hi_s)
            except ValueError:
                raise FormatError(line_no, f"bad range token {token!r}") from None
            if lo > hi:
                raise FormatError(line_no, f"range min {lo} exceeds max {hi}")
            if lo < 0:
                raise FormatError(line_no, f"negative range bound {lo}")
            bounds.append((lo, hi))
        if len(bounds) != len(schema):
            raise FormatError(
                line_no,
                f"range arity {len(bounds)} does not match schema arity {len(schema)}",
            )
        key = (from_kind, to_kind)
        if key in self._entries:
            raise FormatError(line_no, f"duplicate entry {from_s} -> {to_s}")
        self._entries[key] = CacheEntry(
            from_kind, to_kind, MetadataRange(tuple(bounds)), count
        )
        self._row(to_kind)

    def _load_stats(self, line_no: int, line: str) -> None:
        parts = line.split()
        if len(parts) != 4:
            raise FormatError(line_no, "stats line needs 4 fields")
        _, kind_s, cand_s, conf_s = parts
        try:
            kind = parse_kind(kind_s)
            cand, conf = int(cand_s), int(conf_s)
        except ValueError as exc:
            raise FormatError(line_no, str(exc)) from None
        if cand < 0 or conf < 0:
            raise FormatError(line_no, "negative stats counter")
        row = self._row(kind)
        row.candidate_count = cand
        row.confirm_count = conf

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "PlanCache":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.loads(fh.read())
