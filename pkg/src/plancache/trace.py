"""Episode traces: one timestamped JSON event per line.

The trace is the system of record: every report metric is derived from
it, which is what makes `replay` exact.  Files start with a version
header line followed by JSONL events with non-decreasing ticks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

TRACE_HEADER = "PTRACE v1"


class TraceError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class EventKind(str, Enum):
    EPISODE_START = "EPISODE_START"
    EPISODE_END = "EPISODE_END"
    PLAN_START = "PLAN_START"
    PLAN_END = "PLAN_END"
    PLAN_FAILED = "PLAN_FAILED"
    CACHE_QUERY = "CACHE_QUERY"
    QUERY_ISSUED = "QUERY_ISSUED"
    QUERY_SUPPRESSED = "QUERY_SUPPRESSED"
    RESOLVED = "RESOLVED"
    PREEMPT = "PREEMPT"
    MISS_FALLBACK = "MISS_FALLBACK"
    ENV_PERTURB = "ENV_PERTURB"


@dataclass(frozen=True)
class TraceEvent:
    tick: int
    agent: int | None
    kind: EventKind
    data: dict

    def to_json_line(self) -> str:
        return json.dumps(
            {"tick": self.tick, "agent": self.agent, "kind": self.kind.value,
             "data": self.data},
            sort_keys=True,
            separators=(",", ":"),
        )

    @classmethod
    def from_json_line(cls, line: str, line_no: int = 0) -> "TraceEvent":
        try:
            raw = json.loads(line)
            return cls(
                tick=raw["tick"],
                agent=raw["agent"],
                kind=EventKind(raw["kind"]),
                data=raw["data"],
            )
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise TraceError(line_no, f"bad trace event: {exc}") from None


class TraceCollector:
    """Accumulates events, enforcing the non-decreasing tick invariant."""

    def __init__(self):
        self.events: list[TraceEvent] = []

    def emit(self, tick: int, agent: int | None, kind: EventKind, **data) -> TraceEvent:
        if self.events and tick < self.events[-1].tick:
            raise ValueError(
                f"tick went backwards: {tick} after {self.events[-1].tick}"
            )
        event = TraceEvent(tick, agent, kind, data)
        self.events.append(event)
        return event


def write_trace(path, events) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(TRACE_HEADER + "\n")
        for event in events:
            fh.write(event.to_json_line() + "\n")


def read_trace(path) -> list:
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if first != TRACE_HEADER:
            raise TraceError(1, f"expected header {TRACE_HEADER!r}")
        events = []
        for line_no, line in enumerate(fh, start=2):
            line = line.strip()
            if line:
                events.append(TraceEvent.from_json_line(line, line_no))
        return events


def dumps_trace(events) -> str:
    return TRACE_HEADER + "\n" + "".join(e.to_json_line() + "\n" for e in events)


def loads_trace(text: str) -> list:
    lines = text.splitlines()
    if not lines or lines[0] != TRACE_HEADER:
        raise TraceError(1, f"expected header {TRACE_HEADER!r}")
    return [
        TraceEvent.from_json_line(line, i)
        for i, line in enumerate(lines[1:], start=2)
        if line.strip()
    ]
