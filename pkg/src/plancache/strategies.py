"""The four execution strategies over environment + planner.

* ``sync``          -- block on the planner at every plan boundary.
* ``parallel``      -- prefetch the next plan while the current one runs;
                       stale prefetches trigger replans, higher-priority
                       arrivals preempt.
* ``speculative``   -- a cheap error-prone drafter proposes plans that are
                       executed provisionally while a slow target planner
                       verifies them; mispredictions are undone by
                       compiling corrective plans.
* ``agenticcache``  -- the transition cache answers plan boundaries
                       instantly; a background updater validates and
                       corrects it asynchronously (see updater module).

All strategies are driven by one deterministic tick scheduler: planner
responses are delivered from a heap keyed by (due tick, issue order),
agents are processed in id order, and every random draw comes from a
seeded stream, so a (scenario, seed, config) triple fully determines
the trace.
"""

from __future__ import annotations

import heapq
import random
from collections import deque
from dataclasses import dataclass, field, replace as dc_replace

from .cache import PlanCache
from .gridworld import (
    GRIDWORLD_SCHEMA,
    NOOP,
    GridWorld,
    PlanInstance,
    resolve_target,
    world_from_scenario,
)
from .planners import (
    CostModel,
    DelayedPlanner,
    LatencySpec,
    PlannerRequest,
    ScriptedOracle,
    build_planner,
)
from .plans import PlanId, PlanKind
from .trace import EventKind, TraceCollector
from .updater import CacheUpdater, Outcome, StaleResponse

STRATEGY_KINDS = ("sync", "parallel", "speculative", "agenticcache")

HISTORY_DEPTH = 8


@dataclass(frozen=True)
class StrategyConfig:
    kind: str = "agenticcache"
    planner: str = "scripted"
    planner_latency: LatencySpec = LatencySpec.constant(10)
    error_rate: float = 0.0
    query_period: int = 5
    speculative_depth: int = 3
    drafter_error_rate: float = 0.3
    drafter_latency: LatencySpec = LatencySpec.constant(0)
    cache_file: str | None = None
    apply_updates: bool = True
    apply_replacement: bool = True
    cost_model: CostModel = field(default_factory=CostModel)
    endpoint: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy {self.kind!r}")
        if self.speculative_depth < 1:
            raise ValueError("speculative depth must be >= 1")
        if self.cache_file is not None and self.kind != "agenticcache":
            raise ValueError("cache file is only valid for the agenticcache strategy")

    def to_payload(self) -> dict:
        return {
            "kind": self.kind,
            "planner": self.planner,
            "planner_latency": str(self.planner_latency),
            "error_rate": self.error_rate,
            "query_period": self.query_period,
            "speculative_depth": self.speculative_depth,
            "drafter_error_rate": self.drafter_error_rate,
            "drafter_latency": str(self.drafter_latency),
            "cache_file": self.cache_file,
            "apply_updates": self.apply_updates,
            "apply_replacement": self.apply_replacement,
            "price_in": self.cost_model.price_in,
            "price_out": self.cost_model.price_out,
        }


@dataclass
class AgentSlot:
    aid: int
    active: PlanInstance | None = None
    prev_verb: PlanKind = PlanKind.WAIT
    waiting_reason: str | None = None
    waiting_since: int = 0
    waiting_qid: int | None = None
    history: deque = field(default_factory=lambda: deque(maxlen=HISTORY_DEPTH))
    stall_ticks: int = 0
    miss_stall_ticks: int = 0


@dataclass(frozen=True)
class _Delivery:
    due: int
    seq: int
    aid: int
    qid: int
    resp: object
    mode: str
    issued_at: int
    request: PlannerRequest

    def __lt__(self, other: "_Delivery") -> bool:
        return (self.due, self.seq) < (other.due, other.seq)


class BaseRuntime:
    """Tick loop, planner response scheduling, plan lifecycle, tracing."""

    def __init__(
        self,
        world: GridWorld,
        config: StrategyConfig,
        seed: int,
        episode: int,
        collector: TraceCollector | None = None,
    ):
        self.world = world
        self.config = config
        self.seed = seed
        self.episode = episode
        self.collector = collector or TraceCollector()
        self.slots = [AgentSlot(a.aid) for a in world.agents]
        self.planner = build_planner(
            config.planner,
            config.planner_latency,
            config.error_rate,
            random.Random(f"{seed}/planner"),
            endpoint=config.endpoint,
        )
        self._heap: list = []
        self._qseq = 0

    # -- plumbing ------------------------------------------------------

    @property
    def now(self) -> int:
        return self.world.tick

    def emit(self, agent: int | None, kind: EventKind, **data) -> None:
        self.collector.emit(self.now, agent, kind, **data)

    def _next_qid(self) -> int:
        self._qseq += 1
        return self._qseq

    def build_request(self, aid: int) -> PlannerRequest:
        return PlannerRequest(
            agent_id=aid,
            observation=self.world.observation(aid),
            state=self.world.state_vector(aid),
            history=tuple(self.slots[aid].history),
            goal={"targets_total": self.world.targets_total},
            tick=self.now,
        )

    def issue(self, aid: int, qid: int, request: PlannerRequest, mode: str, planner=None) -> None:
        planner = planner or self.planner
        resp = planner.plan(request)
        self.emit(
            aid,
            EventKind.QUERY_ISSUED,
            query_id=qid,
            mode=mode,
            latency=resp.latency_ticks,
        )
        delivery = _Delivery(
            self.now + resp.latency_ticks, self._qseq, aid, qid, resp, mode,
            self.now, request,
        )
        if delivery.due <= self.now:
            self.on_response(self.slots[aid], delivery)
        else:
            heapq.heappush(self._heap, delivery)

    def deliver_due(self) -> None:
        while self._heap and self._heap[0].due <= self.now:
            d = heapq.heappop(self._heap)
            self.on_response(self.slots[d.aid], d)

    # -- plan lifecycle ------------------------------------------------

    def start_plan(self, slot: AgentSlot, inst: PlanInstance, **extra) -> None:
        request = self.build_request(slot.aid)
        inst.pred = slot.prev_verb
        inst.state_at_start = self.world.state_vector(slot.aid)
        inst.started_at = self.now
        slot.active = inst
        slot.waiting_reason = None
        slot.waiting_qid = None
        slot.history.append(inst.plan)
        payload = {
            "plan": inst.plan.to_payload(),
            "pred": inst.pred.value,
            "state": list(inst.state_at_start.values),
            "corrective": inst.corrective,
            "request": request.to_payload(),
        }
        if inst.undoes is not None:
            payload["undoes"] = inst.undoes
        payload.update(extra)
        self.emit(slot.aid, EventKind.PLAN_START, **payload)
        self.on_plan_started(slot, inst)

    def finish_plan(self, slot: AgentSlot, failed: bool = False, preempted: bool = False) -> None:
        inst = slot.active
        kind = EventKind.PLAN_FAILED if failed else EventKind.PLAN_END
        reason = "failed" if failed else ("preempted" if preempted else "completed")
        self.emit(
            slot.aid,
            kind,
            plan=inst.plan.to_payload(),
            reason=reason,
            ticks=inst.ticks_run(),
            corrective=inst.corrective,
        )
        slot.prev_verb = inst.plan.kind
        slot.active = None
        self.on_plan_finished(slot, inst, failed=failed, preempted=preempted)

    # -- strategy hooks --------------------------------------------------

    def decide(self, slot: AgentSlot) -> None:
        raise NotImplementedError

    def on_response(self, slot: AgentSlot, d: _Delivery) -> None:
        raise NotImplementedError

    def on_plan_started(self, slot: AgentSlot, inst: PlanInstance) -> None:
        pass

    def on_plan_finished(
        self, slot: AgentSlot, inst: PlanInstance, failed: bool, preempted: bool
    ) -> None:
        pass

    def pre_step(self) -> None:
        pass

    # -- main loop -------------------------------------------------------

    def run(self) -> TraceCollector:
        world = self.world
        self.emit(
            None,
            EventKind.EPISODE_START,
            episode=self.episode,
            seed=self.seed,
            scenario=world.name,
            strategy=self.config.kind,
            schema=GRIDWORLD_SCHEMA.spec_string(),
            config=self.config.to_payload(),
            targets_total=world.targets_total,
            budget=world.budget,
            agents=len(world.agents),
            cache_entries_start=self.cache_entries_payload(),
            perturbation_rate=world.perturbation_rate,
        )
        while world.tick < world.budget and not world.complete:
            self.deliver_due()
            if world.complete:
                break
            for slot in self.slots:
                if slot.active is None and slot.waiting_reason is None:
                    self.decide(slot)
            self.pre_step()
            actions = {}
            for slot in self.slots:
                if slot.active is not None:
                    actions[slot.aid] = slot.active.queue[0]
                else:
                    actions[slot.aid] = NOOP
                    slot.stall_ticks += 1
                    if slot.waiting_reason == "miss":
                        slot.miss_stall_ticks += 1
            result = world.step(actions)
            for oid, cell in result.perturbed:
                self.emit(None, EventKind.ENV_PERTURB, object=oid, to=list(cell))
            for slot in self.slots:
                inst = slot.active
                if inst is None:
                    continue
                if result.ok[slot.aid]:
                    inst.queue.popleft()
                    inst.executed.append(result.executed[slot.aid])
                    if inst.done:
                        self.finish_plan(slot)
                else:
                    self.finish_plan(slot, failed=True)
        stall_total = sum(s.stall_ticks for s in self.slots)
        miss_stall = sum(s.miss_stall_ticks for s in self.slots)
        self.emit(
            None,
            EventKind.EPISODE_END,
            success=world.success_metric(),
            delivered=world.delivered,
            total=world.targets_total,
            ticks=world.tick,
            stall_ticks=stall_total,
            miss_stall_ticks=miss_stall,
            in_flight_at_end=len(self._heap),
            reason="completed" if world.complete else "budget",
            cache_entries_end=self.cache_entries_payload(),
        )
        return self.collector

    def cache_entries_payload(self):
        return None


# ----------------------------------------------------------------------
# synchronous baseline
# ----------------------------------------------------------------------


class SyncRuntime(BaseRuntime):
    """Block for the planner's full latency at every plan boundary."""

    def decide(self, slot: AgentSlot) -> None:
        self._query(slot, "blocking")

    def _query(self, slot: AgentSlot, mode: str) -> None:
        qid = self._next_qid()
        slot.waiting_reason = "sync"
        slot.waiting_since = self.now
        slot.waiting_qid = qid
        self.issue(slot.aid, qid, self.build_request(slot.aid), mode)

    def on_response(self, slot: AgentSlot, d: _Delivery) -> None:
        stall = self.now - d.issued_at
        self.emit(
            slot.aid,
            EventKind.RESOLVED,
            query_id=d.qid,
            outcome="blocking",
            plan=d.resp.plan.to_payload(),
            tokens_in=d.resp.tokens_in,
            tokens_out=d.resp.tokens_out,
            stall=stall,
        )
        inst = self.world.compile_plan(slot.aid, d.resp.plan)
        if inst is None:
            self._query(slot, "replan")
        else:
            self.start_plan(slot, inst)


# ----------------------------------------------------------------------
# parallelized planning-acting
# ----------------------------------------------------------------------


def preempts(new_kind: PlanKind, current_kind: PlanKind) -> bool:
    """Fixed verb priority standing in for learned plan importance."""
    if new_kind == PlanKind.TRANSPORT and current_kind != PlanKind.TRANSPORT:
        return True
    return new_kind == PlanKind.GO_GRASP and current_kind == PlanKind.EXPLORE


class ParallelRuntime(BaseRuntime):
    """Prefetch the next plan while the current one executes."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._prefetch: dict[int, object] = {}  # aid -> response
        self._outstanding: dict[int, int] = {}  # aid -> qid

    def decide(self, slot: AgentSlot) -> None:
        resp = self._prefetch.pop(slot.aid, None)
        if resp is not None:
            inst = self.world.compile_plan(slot.aid, resp.plan)
            if inst is not None:
                self.start_plan(slot, inst)
            else:
                # Prefetched plan went stale while we executed.
                self._blocking(slot, "replan")
            return
        if slot.aid in self._outstanding:
            slot.waiting_reason = "parallel"
            slot.waiting_since = self.now
            return
        self._blocking(slot, "blocking")

    def _blocking(self, slot: AgentSlot, mode: str) -> None:
        qid = self._next_qid()
        slot.waiting_reason = "parallel"
        slot.waiting_since = self.now
        slot.waiting_qid = qid
        self._outstanding[slot.aid] = qid
        self.issue(slot.aid, qid, self.build_request(slot.aid), mode)

    def on_plan_started(self, slot: AgentSlot, inst: PlanInstance) -> None:
        if slot.aid not in self._outstanding and slot.aid not in self._prefetch:
            qid = self._next_qid()
            self._outstanding[slot.aid] = qid
            # Ask for the plan that should FOLLOW the one just started.
            base = self.build_request(slot.aid)
            request = dc_replace(
                base,
                observation=self.world.project_observation(base.observation, inst.plan),
            )
            self.issue(slot.aid, qid, request, "prefetch")

    def on_response(self, slot: AgentSlot, d: _Delivery) -> None:
        self._outstanding.pop(slot.aid, None)
        stall = self.now - slot.waiting_since if slot.waiting_reason else 0
        self.emit(
            slot.aid,
            EventKind.RESOLVED,
            query_id=d.qid,
            outcome="prefetch",
            plan=d.resp.plan.to_payload(),
            tokens_in=d.resp.tokens_in,
            tokens_out=d.resp.tokens_out,
            stall=stall,
        )
        if slot.active is None:
            # Agent is at (or stalled at) a plan boundary: consume now.
            inst = self.world.compile_plan(slot.aid, d.resp.plan)
            if inst is not None:
                self.start_plan(slot, inst)
            else:
                self._blocking(slot, "replan")
            return
        inst = self.world.compile_plan(slot.aid, d.resp.plan)
        if inst is not None and preempts(d.resp.plan.kind, slot.active.plan.kind):
            self.emit(
                slot.aid,
                EventKind.PREEMPT,
                old=slot.active.plan.to_payload(),
                new=d.resp.plan.to_payload(),
                by="priority",
            )
            self.finish_plan(slot, preempted=True)
            self.start_plan(slot, inst)
        else:
            self._prefetch[slot.aid] = d.resp


# ----------------------------------------------------------------------
# speculative planning
# ----------------------------------------------------------------------


@dataclass
class Draft:
    index: int  # 0-based position in the window
    plan: PlanId
    verify_qid: int
    target_plan: PlanId | None = None
    instance: PlanInstance | None = None


@dataclass
class SpecState:
    window: list = field(default_factory=list)
    window_no: int = 0
    halted: bool = False
    undo_queue: list = field(default_factory=list)
    correct_next: PlanId | None = None


class SpeculativeRuntime(BaseRuntime):
    """Draft plans provisionally; verify against the slow target planner."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.drafter = DelayedPlanner(
            ScriptedOracle(),
            self.config.drafter_latency,
            self.config.drafter_error_rate,
            random.Random(f"{self.seed}/drafter"),
        )
        self.spec = [SpecState() for _ in self.slots]
        self._verify_window: dict[int, tuple[int, int]] = {}  # qid -> (aid, window_no)

    def decide(self, slot: AgentSlot) -> None:
        st = self.spec[slot.aid]
        if st.undo_queue:
            self.start_plan(slot, st.undo_queue.pop(0))
            return
        if st.correct_next is not None:
            plan, st.correct_next = st.correct_next, None
            inst = self.world.compile_plan(slot.aid, plan)
            if inst is not None:
                self.start_plan(slot, inst, window_fix=True)
                return
            # Correction no longer executable: drop it, start a new window.
        if st.window and (len(st.window) >= self.config.speculative_depth or st.halted):
            if any(d.target_plan is None for d in st.window):
                slot.waiting_reason = "verify"
                slot.waiting_since = self.now
                return
            # Fully verified window: commit and speculate again.
            st.window = []
            st.window_no += 1
            st.halted = False
        self._propose(slot)

    def _propose(self, slot: AgentSlot) -> None:
        st = self.spec[slot.aid]
        request = self.build_request(slot.aid)
        qid = self._next_qid()
        slot.waiting_reason = "draft"
        slot.waiting_since = self.now
        slot.waiting_qid = qid
        self.issue(slot.aid, qid, request, "draft", planner=self.drafter)

    def on_response(self, slot: AgentSlot, d: _Delivery) -> None:
        if d.mode == "draft":
            self._on_draft(slot, d)
        else:
            self._on_verify(slot, d)

    def _on_draft(self, slot: AgentSlot, d: _Delivery) -> None:
        st = self.spec[slot.aid]
        self.emit(
            slot.aid,
            EventKind.RESOLVED,
            query_id=d.qid,
            outcome="draft",
            plan=d.resp.plan.to_payload(),
            tokens_in=d.resp.tokens_in,
            tokens_out=d.resp.tokens_out,
            stall=self.now - d.issued_at,
        )
        verify_qid = self._next_qid()
        draft = Draft(index=len(st.window), plan=d.resp.plan, verify_qid=verify_qid)
        st.window.append(draft)
        self._verify_window[verify_qid] = (slot.aid, st.window_no)
        # Verification runs against the same snapshot the drafter saw.
        self.issue(slot.aid, verify_qid, d.request, "verify")
        inst = self.world.compile_plan(slot.aid, draft.plan)
        if inst is None:
            st.halted = True
            slot.waiting_reason = None
            return
        draft.instance = inst
        self.start_plan(slot, inst, window=st.window_no, draft=draft.index)

    def _on_verify(self, slot: AgentSlot, d: _Delivery) -> None:
        _, window_no = self._verify_window.pop(d.qid, (slot.aid, -1))
        st = self.spec[slot.aid]
        if window_no != st.window_no:
            self.emit(
                slot.aid,
                EventKind.RESOLVED,
                query_id=d.qid,
                outcome="stale",
                tokens_in=d.resp.tokens_in,
                tokens_out=d.resp.tokens_out,
            )
            return
        draft = next(dr for dr in st.window if dr.verify_qid == d.qid)
        draft.target_plan = d.resp.plan
        if d.resp.plan == draft.plan:
            self.emit(
                slot.aid,
                EventKind.RESOLVED,
                query_id=d.qid,
                outcome="verify_ok",
                draft=draft.index,
                tokens_in=d.resp.tokens_in,
                tokens_out=d.resp.tokens_out,
            )
            if slot.waiting_reason == "verify" and all(
                dr.target_plan is not None for dr in st.window
            ):
                slot.waiting_reason = None  # decide() commits this tick
            return
        # Misprediction: everything executed from this draft onward is wrong.
        started = [dr for dr in st.window if dr.instance is not None]
        last_started = started[-1].index if started else -1
        executed_wrong = max(0, last_started - draft.index + 1)
        self.emit(
            slot.aid,
            EventKind.RESOLVED,
            query_id=d.qid,
            outcome="verify_fail",
            draft=draft.index,
            first_fail=draft.index + 1,
            proposed=len(st.window),
            executed=last_started + 1,
            rollback_depth=executed_wrong,
            full_window=len(st.window) >= self.config.speculative_depth,
            plan=d.resp.plan.to_payload(),
            tokens_in=d.resp.tokens_in,
            tokens_out=d.resp.tokens_out,
        )
        if (
            slot.active is not None
            and any(dr.instance is slot.active for dr in st.window[draft.index:])
        ):
            self.emit(
                slot.aid,
                EventKind.PREEMPT,
                old=slot.active.plan.to_payload(),
                new=d.resp.plan.to_payload(),
                by="rollback",
            )
            self.finish_plan(slot, preempted=True)
        undo = []
        for dr in reversed(st.window[draft.index:]):
            if dr.instance is not None and dr.instance.executed:
                undo.append(
                    dr.instance.undo_instance(
                        {"window": st.window_no, "draft": dr.index,
                         "plan": dr.instance.plan.to_payload()}
                    )
                )
        st.undo_queue = undo
        st.correct_next = d.resp.plan
        st.window = []
        st.window_no += 1
        st.halted = False
        slot.waiting_reason = None

    def on_plan_finished(self, slot, inst, failed, preempted):
        st = self.spec[slot.aid]
        if failed and any(dr.instance is inst for dr in st.window):
            st.halted = True


# ----------------------------------------------------------------------
# cache-driven planning
# ----------------------------------------------------------------------


class CacheRuntime(BaseRuntime):
    """Plan boundaries answered by the per-agent transition cache; a
    background updater validates asynchronously (see updater module)."""

    def __init__(self, *args, caches: list | None = None, **kwargs):
        super().__init__(*args, **kwargs)
        if caches is None:
            caches = [PlanCache(GRIDWORLD_SCHEMA) for _ in self.slots]
        if len(caches) != len(self.slots):
            raise ValueError("need one cache per agent")
        self.caches = caches
        self.updaters = [
            CacheUpdater(
                slot.aid,
                caches[slot.aid],
                query_period=self.config.query_period,
                apply_updates=self.config.apply_updates,
                apply_replacement=self.config.apply_replacement,
            )
            for slot in self.slots
        ]

    def cache_entries_payload(self):
        return [c.entry_count for c in self.caches]

    def decide(self, slot: AgentSlot) -> None:
        world = self.world
        cache = self.caches[slot.aid]
        state = world.state_vector(slot.aid)
        selected, candidates = cache.query(slot.prev_verb, state)
        cand_payload = [
            {"to": e.to_kind.value, "count": e.count, "score": float(score)}
            for e, score in candidates
        ]
        inst = None
        note = None
        if selected is not None:
            plan_id = resolve_target(world, slot.aid, selected)
            inst = world.compile_plan(slot.aid, plan_id) if plan_id is not None else None
            if inst is None:
                note = "unresolved"  # selected verb cannot bind/compile now
        if inst is not None:
            self.emit(
                slot.aid,
                EventKind.CACHE_QUERY,
                result="hit",
                prev=slot.prev_verb.value,
                state=list(state.values),
                selected=selected.value,
                candidates=cand_payload,
                cache_entries=cache.entry_count,
            )
            self.start_plan(slot, inst)
            return
        payload = {
            "result": "miss",
            "prev": slot.prev_verb.value,
            "state": list(state.values),
            "selected": selected.value if selected is not None else None,
            "candidates": cand_payload,
            "cache_entries": cache.entry_count,
        }
        if note:
            payload["note"] = note
        self.emit(slot.aid, EventKind.CACHE_QUERY, **payload)
        self._blocking_fallback(slot, state)

    def _blocking_fallback(self, slot: AgentSlot, state) -> None:
        updater = self.updaters[slot.aid]
        qid = self._next_qid()
        request = self.build_request(slot.aid)
        wait_qid, must_issue = updater.begin_miss(
            self.now, qid, request, slot.prev_verb, state
        )
        slot.waiting_reason = "miss"
        slot.waiting_since = self.now
        slot.waiting_qid = wait_qid
        if must_issue:
            self.issue(slot.aid, qid, request, "miss")

    def pre_step(self) -> None:
        for slot in self.slots:
            if slot.active is None or slot.waiting_reason is not None:
                continue
            updater = self.updaters[slot.aid]
            gate = updater.query_gate(self.now)
            if gate == "issue":
                qid = self._next_qid()
                request = self.build_request(slot.aid)
                updater.record_issue(self.now, qid, request, slot.active)
                self.issue(slot.aid, qid, request, "periodic")
            elif gate in ("confirmation_hold", "correction_hold"):
                if not updater.suppression.announced:
                    updater.suppression.announced = True
                    self.emit(slot.aid, EventKind.QUERY_SUPPRESSED, reason=gate)

    def on_plan_started(self, slot: AgentSlot, inst: PlanInstance) -> None:
        self.updaters[slot.aid].note_plan_start(self.now, inst)

    def on_plan_finished(self, slot, inst, failed, preempted):
        self.updaters[slot.aid].note_plan_end(self.now, inst)

    def on_response(self, slot: AgentSlot, d: _Delivery) -> None:
        updater = self.updaters[slot.aid]
        cache = self.caches[slot.aid]
        try:
            res = updater.resolve(
                self.now,
                d.qid,
                d.resp.plan,
                slot.active,
                self.world.state_vector(slot.aid),
                compiler=lambda pid: self.world.compile_plan(slot.aid, pid),
            )
        except StaleResponse:
            self.emit(
                slot.aid,
                EventKind.RESOLVED,
                query_id=d.qid,
                outcome="stale",
                tokens_in=d.resp.tokens_in,
                tokens_out=d.resp.tokens_out,
            )
            return
        if res.outcome is Outcome.MISS_INSERT:
            inst = self.world.compile_plan(slot.aid, d.resp.plan)
            if inst is None:
                # Target went stale during the stall; the verb may still
                # bind to a fresh argument (entries are verb-level anyway).
                rebound = resolve_target(self.world, slot.aid, d.resp.plan.kind)
                if rebound is not None:
                    inst = self.world.compile_plan(slot.aid, rebound)
            self.emit(
                slot.aid,
                EventKind.RESOLVED,
                query_id=d.qid,
                outcome="miss_insert",
                plan=d.resp.plan.to_payload(),
                tokens_in=d.resp.tokens_in,
                tokens_out=d.resp.tokens_out,
                stall=res.stall,
                executable=inst is not None,
            )
            if inst is not None:
                updater.insert_miss_answer(res)
            self.emit(
                slot.aid,
                EventKind.MISS_FALLBACK,
                stall_ticks=res.stall,
                plan=d.resp.plan.to_payload(),
                cache_entries=cache.entry_count,
            )
            if inst is None:
                # The answer went stale during the stall; ask again.
                self._blocking_fallback(slot, self.world.state_vector(slot.aid))
            else:
                self.start_plan(slot, inst)
            return
        if res.outcome is Outcome.CONFIRMED:
            self.emit(
                slot.aid,
                EventKind.RESOLVED,
                query_id=d.qid,
                outcome="confirmed",
                plan=d.resp.plan.to_payload(),
                matched_start=res.matched.started_at,
                tokens_in=d.resp.tokens_in,
                tokens_out=d.resp.tokens_out,
                cache_entries=cache.entry_count,
            )
            return
        # Corrected
        self.emit(
            slot.aid,
            EventKind.RESOLVED,
            query_id=d.qid,
            outcome="corrected",
            plan=d.resp.plan.to_payload(),
            penalized=res.penalized.value if res.penalized else None,
            replaced=res.replacement is not None,
            tokens_in=d.resp.tokens_in,
            tokens_out=d.resp.tokens_out,
            cache_entries=cache.entry_count,
        )
        if res.replacement is not None:
            old = slot.active
            self.emit(
                slot.aid,
                EventKind.PREEMPT,
                old=old.plan.to_payload() if old else None,
                new=res.replacement.plan.to_payload(),
                by="correction",
            )
            if old is not None:
                self.finish_plan(slot, preempted=True)
            self.start_plan(slot, res.replacement)


# ----------------------------------------------------------------------
# batch running
# ----------------------------------------------------------------------

_RUNTIMES = {
    "sync": SyncRuntime,
    "parallel": ParallelRuntime,
    "speculative": SpeculativeRuntime,
    "agenticcache": CacheRuntime,
}


def _clone_cache(cache: PlanCache) -> PlanCache:
    return PlanCache.loads(cache.dumps())


def run_episode(
    scenario: dict,
    config: StrategyConfig,
    seed: int,
    episode: int = 0,
    budget: int | None = None,
    perturbation_rate: float | None = None,
    caches: list | None = None,
    warm_cache: PlanCache | None = None,
):
    """Run one episode; returns (events, caches-after) with local ticks."""
    world = world_from_scenario(
        scenario, seed, budget=budget, perturbation_rate=perturbation_rate
    )
    cls = _RUNTIMES[config.kind]
    if config.kind == "agenticcache":
        if caches is None:
            if warm_cache is not None:
                caches = [_clone_cache(warm_cache) for _ in world.agents]
            else:
                caches = [PlanCache(GRIDWORLD_SCHEMA) for _ in world.agents]
        runtime = cls(world, config, seed, episode, caches=caches)
        runtime.run()
        return runtime.collector.events, runtime.caches
    runtime = cls(world, config, seed, episode)
    runtime.run()
    return runtime.collector.events, None


def _shift(events: list, offset: int) -> list:
    if offset == 0:
        return list(events)
    return [dc_replace(e, tick=e.tick + offset) for e in events]


def run_batch(
    scenario: dict,
    config: StrategyConfig,
    seed: int,
    episodes: int = 1,
    carry_cache: bool = False,
    budget: int | None = None,
    perturbation_rate: float | None = None,
    warm_cache: PlanCache | None = None,
    workers: int = 1,
) -> list:
    """Run a run: one or more episodes concatenated on a global tick axis.

    With ``carry_cache`` the per-agent caches persist across episodes
    (which forces sequential execution); otherwise episodes are
    independent and may fan out across worker threads.
    """
    if config.kind == "agenticcache" and warm_cache is None and config.cache_file:
        warm_cache = PlanCache.load(config.cache_file)
    if carry_cache and config.kind != "agenticcache":
        raise ValueError("carry_cache only applies to agenticcache")

    results: list[list] = []
    if carry_cache or workers <= 1 or episodes == 1:
        caches = None
        for ep in range(episodes):
            events, caches_after = run_episode(
                scenario,
                config,
                seed + ep,
                episode=ep,
                budget=budget,
                perturbation_rate=perturbation_rate,
                caches=caches if carry_cache else None,
                warm_cache=warm_cache,
            )
            results.append(events)
            if carry_cache:
                caches = caches_after
    else:
        from concurrent.futures import ThreadPoolExecutor

        def one(ep: int):
            return run_episode(
                scenario,
                config,
                seed + ep,
                episode=ep,
                budget=budget,
                perturbation_rate=perturbation_rate,
                warm_cache=warm_cache,
            )[0]

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(episodes)))

    merged: list = []
    offset = 0
    for events in results:
        merged.extend(_shift(events, offset))
        offset = merged[-1].tick if merged else 0
    return merged
