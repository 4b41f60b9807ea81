"""Background cache updater: periodic validation, correction, suppression.

One updater per agent.  It issues oracle queries periodically while a
plan is executing, matches the delayed answer against the plans
actually executed since the query went out, and either reinforces the
matching transition (confirmation) or rewrites the cache and swaps in
the oracle's plan (correction).  Two suppression rules withhold
queries that could not yield new information:

* after a confirmation, no queries until the confirmed current plan
  finishes;
* after a correction that replaced the ongoing plan, no queries until
  the replacement finishes.

At most one query is outstanding per agent.  A cache-miss fallback is
a blocking query routed through the same single slot; if a periodic
query is already in flight when the miss occurs, the agent stalls on
that query and reuses its answer instead of issuing a second call.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from .cache import PlanCache, StateVector
from .gridworld import PlanInstance
from .planners import PlannerRequest
from .plans import PlanId, PlanKind

DEFAULT_QUERY_PERIOD = 5
WINDOW_CAP = 16  # memory guard only; the logical window is "since issue"


class StaleResponse(RuntimeError):
    """Arrived answer no longer matches the outstanding query."""


class SuppressionMode(str, Enum):
    NONE = "none"
    CONFIRMATION_HOLD = "confirmation_hold"
    CORRECTION_HOLD = "correction_hold"


@dataclass
class SuppressionState:
    mode: SuppressionMode = SuppressionMode.NONE
    until_plan: PlanInstance | None = None
    announced: bool = False  # one QUERY_SUPPRESSED event per hold

    def clear(self) -> None:
        self.mode = SuppressionMode.NONE
        self.until_plan = None
        self.announced = False


@dataclass
class PendingQuery:
    query_id: int
    issued_at: int
    request: PlannerRequest
    active_plan: PlanInstance | None
    blocking: bool = False
    prev_verb: PlanKind = PlanKind.WAIT
    decision_state: StateVector | None = None
    miss_from: int | None = None  # tick the agent started stalling


class Outcome(str, Enum):
    CONFIRMED = "confirmed"
    CORRECTED = "corrected"
    MISS_INSERT = "miss_insert"


@dataclass
class Resolution:
    outcome: Outcome
    response_plan: PlanId
    matched: PlanInstance | None = None
    replacement: PlanInstance | None = None
    penalized: PlanKind | None = None
    stall: int = 0
    prev_verb: PlanKind | None = None
    decision_state: StateVector | None = None


@dataclass
class WindowEntry:
    started_at: int
    instance: PlanInstance


class CacheUpdater:
    def __init__(
        self,
        agent_id: int,
        cache: PlanCache,
        query_period: int = DEFAULT_QUERY_PERIOD,
        apply_updates: bool = True,
        apply_replacement: bool = True,
    ):
        self.agent_id = agent_id
        self.cache = cache
        self.query_period = query_period
        self.apply_updates = apply_updates
        self.apply_replacement = apply_replacement
        self.pending: PendingQuery | None = None
        self.suppression = SuppressionState()
        self.window: deque = deque(maxlen=WINDOW_CAP)
        self.last_issue: int | None = None
        self.stale_dropped = 0

    # ------------------------------------------------------------------
    # agent-loop notifications
    # ------------------------------------------------------------------

    def note_plan_start(self, tick: int, instance: PlanInstance) -> None:
        self.window.append(WindowEntry(tick, instance))

    def note_plan_end(self, tick: int, instance: PlanInstance) -> None:
        """Any termination of the held plan releases the hold and resets
        the period timer."""
        if (
            self.suppression.mode is not SuppressionMode.NONE
            and self.suppression.until_plan is instance
        ):
            self.suppression.clear()
            self.last_issue = tick

    # ------------------------------------------------------------------
    # query control
    # ------------------------------------------------------------------

    def query_gate(self, now: int) -> str:
        """One of 'issue', 'pending', 'early', or a suppression mode value."""
        if self.pending is not None:
            return "pending"
        if self.last_issue is not None and now - self.last_issue < self.query_period:
            return "early"
        if self.suppression.mode is not SuppressionMode.NONE:
            return self.suppression.mode.value
        return "issue"

    def record_issue(
        self,
        now: int,
        query_id: int,
        request: PlannerRequest,
        active_plan: PlanInstance | None,
    ) -> PendingQuery:
        assert self.pending is None, "one query in flight per agent"
        self.pending = PendingQuery(query_id, now, request, active_plan)
        self.last_issue = now
        return self.pending

    def begin_miss(
        self,
        now: int,
        query_id: int,
        request: PlannerRequest,
        prev_verb: PlanKind,
        decision_state: StateVector,
    ) -> tuple[int, bool]:
        """Route a cache-miss fallback through the single query slot.

        If a periodic query is already in flight, its (sooner) answer is
        awaited and reused as the fallback answer rather than issuing a
        second call, preserving the one-in-flight rule.  Returns
        (query id to wait on, whether the caller must issue a new call).
        """
        if self.pending is not None:
            p = self.pending
            p.blocking = True
            p.prev_verb = prev_verb
            p.decision_state = decision_state
            p.miss_from = now
            return p.query_id, False
        self.pending = PendingQuery(
            query_id,
            now,
            request,
            active_plan=None,
            blocking=True,
            prev_verb=prev_verb,
            decision_state=decision_state,
            miss_from=now,
        )
        self.last_issue = now
        return query_id, True

    # ------------------------------------------------------------------
    # resolution
    # ------------------------------------------------------------------

    def _find_match(
        self, pending: PendingQuery, plan: PlanId, current: PlanInstance | None
    ) -> PlanInstance | None:
        """Most recent full-instance match among plans executed since the
        query was issued, or the currently executing plan."""
        if current is not None and current.plan == plan:
            return current
        for entry in reversed(self.window):
            if entry.started_at >= pending.issued_at and entry.instance.plan == plan:
                return entry.instance
        return None

    def resolve(
        self,
        now: int,
        query_id: int,
        plan: PlanId,
        current: PlanInstance | None,
        state_now: StateVector,
        compiler,
    ) -> Resolution:
        """Apply a delivered oracle answer.

        ``compiler`` maps a PlanId to a PlanInstance or None; it is only
        consulted for corrections, to decide executability of the
        replacement.  Raises StaleResponse for superseded or unknown
        query ids; the caller counts and drops those.
        """
        if self.pending is None or self.pending.query_id != query_id:
            self.stale_dropped += 1
            raise StaleResponse(f"query {query_id} is no longer outstanding")
        pending, self.pending = self.pending, None

        if pending.blocking:
            stalled_from = (
                pending.miss_from if pending.miss_from is not None else pending.issued_at
            )
            # The fallback answer is fresh oracle knowledge: restart the
            # periodic timer rather than querying again moments later.
            self.last_issue = now
            return Resolution(
                Outcome.MISS_INSERT,
                plan,
                stall=now - stalled_from,
                prev_verb=pending.prev_verb,
                decision_state=pending.decision_state,
            )

        match = self._find_match(pending, plan, current)
        if match is not None:
            if self.apply_updates:
                self.cache.reinforce(match.pred, plan.kind, match.state_at_start)
            if current is not None and not current.done:
                self.suppression = SuppressionState(
                    SuppressionMode.CONFIRMATION_HOLD, current
                )
            return Resolution(Outcome.CONFIRMED, plan, matched=match)

        # Correction: the cache's choice diverged from the oracle.
        issue_verb = (
            pending.active_plan.plan.kind
            if pending.active_plan is not None
            else pending.prev_verb
        )
        if current is not None:
            executing_verb = current.plan.kind
        elif self.window:
            executing_verb = self.window[-1].instance.plan.kind
        else:
            executing_verb = issue_verb
        if self.apply_updates:
            self.cache.reinforce(issue_verb, plan.kind, state_now)
            self.cache.penalize(issue_verb, executing_verb)
        replacement = None
        if self.apply_replacement:
            instance = compiler(plan)
            if instance is not None:
                replacement = instance
                self.suppression = SuppressionState(
                    SuppressionMode.CORRECTION_HOLD, instance
                )
        return Resolution(
            Outcome.CORRECTED, plan, replacement=replacement, penalized=executing_verb
        )

    def insert_miss_answer(self, res: Resolution) -> None:
        """Insert a fallback answer as a fresh entry; called once the plan
        actually starts executing, so unexecutable stale answers never
        poison the cache."""
        if self.apply_updates:
            self.cache.reinforce(
                res.prev_verb, res.response_plan.kind, res.decision_state
            )
