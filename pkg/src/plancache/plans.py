"""Plan vocabulary: verbs and bound plan symbols.

The cache keys on bare verbs (`PlanKind`); execution needs a bound
argument (`PlanId`).  The two are deliberately distinct: a verb is
convertible to a `PlanId` only through an argument resolver that knows
the current world.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class PlanKind(str, Enum):
    EXPLORE = "Explore"
    GO_TO = "GoTo"
    GO_GRASP = "GoGrasp"
    PUT_INTO = "PutInto"
    TRANSPORT = "Transport"
    WAIT = "Wait"


# Verbs that must carry an argument (a room id or an object id).
REQUIRES_TARGET = frozenset(
    {PlanKind.EXPLORE, PlanKind.GO_TO, PlanKind.GO_GRASP, PlanKind.PUT_INTO}
)


def parse_kind(name: str) -> PlanKind:
    try:
        return PlanKind(name)
    except ValueError:
        raise ValueError(f"unknown plan kind {name!r}") from None


@dataclass(frozen=True)
class PlanId:
    """A plan verb plus its bound argument, e.g. GoGrasp(712)."""

    kind: PlanKind
    target: int | None = None

    def __post_init__(self) -> None:
        if self.kind in REQUIRES_TARGET:
            if self.target is None:
                raise ValueError(f"{self.kind.value} requires a target")
        elif self.target is not None:
            raise ValueError(f"{self.kind.value} takes no target")

    @property
    def verb(self) -> PlanKind:
        return self.kind

    def label(self) -> str:
        if self.target is None:
            return self.kind.value
        return f"{self.kind.value}({self.target})"

    def sort_key(self) -> tuple[str, int]:
        return (self.kind.value, -1 if self.target is None else self.target)

    def to_payload(self) -> dict:
        return {"kind": self.kind.value, "target": self.target}

    @classmethod
    def from_payload(cls, data: dict) -> "PlanId":
        return cls(parse_kind(data["kind"]), data.get("target"))

    @classmethod
    def parse(cls, text: str) -> "PlanId":
        """Parse labels like ``GoGrasp(712)`` or ``Transport``."""
        text = text.strip()
        if text.endswith(")") and "(" in text:
            name, _, arg = text[:-1].partition("(")
            return cls(parse_kind(name), int(arg))
        return cls(parse_kind(text))
