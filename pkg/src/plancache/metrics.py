"""Trace analytics: episode reports, locality, prefill extraction, accuracy.

Every metric is derived from the event trace, never from runtime-only
state.  ``run`` and ``replay`` therefore share one code path: the
report of a live run is literally the report of its trace.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .cache import FieldSchema, MetadataRange, PrefillTransition, StateVector
from .gridworld import Observation
from .planners import CostModel, PlannerRequest, scripted_plan
from .plans import PlanId, parse_kind
from .trace import EventKind, TraceEvent

GROWTH_CHECKPOINTS = (0, 500, 1000, 1500, 2000, 3000, 4000, 5000, 6000)


@dataclass
class EpisodeReport:
    episode: int
    seed: int
    scenario: str
    strategy: str
    success: float
    ticks: int
    tick_offset: int
    stall_ticks: int
    miss_stall_ticks: int
    oracle_queries: int
    tokens_in: int
    tokens_out: int
    cost: float
    cache_hits: int
    cache_misses: int
    fallback_latencies: list = field(default_factory=list)
    confirmations: int = 0
    corrections: int = 0
    stale_dropped: int = 0
    preemptions: int = 0
    plans: int = 0
    corrective_plans: int = 0
    plan_failures: int = 0
    replans: int = 0
    perturbations: int = 0
    in_flight_at_end: int = 0
    accuracy_series: list = field(default_factory=list)
    cache_entry_trajectory: list = field(default_factory=list)
    rollbacks: list = field(default_factory=list)

    @property
    def cache_queries(self) -> int:
        return self.cache_hits + self.cache_misses

    @property
    def tokens_total(self) -> int:
        return self.tokens_in + self.tokens_out

    def to_payload(self) -> dict:
        return {
            "episode": self.episode,
            "seed": self.seed,
            "scenario": self.scenario,
            "strategy": self.strategy,
            "success": self.success,
            "ticks": self.ticks,
            "tick_offset": self.tick_offset,
            "stall_ticks": self.stall_ticks,
            "miss_stall_ticks": self.miss_stall_ticks,
            "oracle_queries": self.oracle_queries,
            "tokens_in": self.tokens_in,
            "tokens_out": self.tokens_out,
            "cost": self.cost,
            "cache_hits": self.cache_hits,
            "cache_misses": self.cache_misses,
            "fallback_latencies": self.fallback_latencies,
            "confirmations": self.confirmations,
            "corrections": self.corrections,
            "stale_dropped": self.stale_dropped,
            "preemptions": self.preemptions,
            "plans": self.plans,
            "corrective_plans": self.corrective_plans,
            "plan_failures": self.plan_failures,
            "replans": self.replans,
            "perturbations": self.perturbations,
            "in_flight_at_end": self.in_flight_at_end,
            "accuracy_series": self.accuracy_series,
            "cache_entry_trajectory": self.cache_entry_trajectory,
            "rollbacks": self.rollbacks,
        }

    @classmethod
    def from_payload(cls, d: dict) -> "EpisodeReport":
        return cls(**d)


def split_episodes(events) -> list:
    """Slice a (possibly multi-episode) event stream at episode markers."""
    episodes: list[list[TraceEvent]] = []
    current: list[TraceEvent] | None = None
    for event in events:
        if event.kind is EventKind.EPISODE_START:
            current = []
            episodes.append(current)
        if current is None:
            raise ValueError("trace does not begin with EPISODE_START")
        current.append(event)
    return episodes


def _request_from_payload(payload: dict, schema: FieldSchema) -> PlannerRequest:
    return PlannerRequest(
        agent_id=payload["agent_id"],
        observation=Observation.from_payload(payload["observation"]),
        state=StateVector(schema, tuple(payload["state"])),
        history=tuple(PlanId.parse(p) for p in payload["history"]),
        goal=payload["goal"],
        tick=payload["tick"],
    )


def derive_report(episode_events, reference=scripted_plan) -> EpisodeReport:
    """Compute one EpisodeReport from one episode's event slice."""
    start = episode_events[0]
    if start.kind is not EventKind.EPISODE_START:
        raise ValueError("episode slice must start with EPISODE_START")
    end = episode_events[-1]
    if end.kind is not EventKind.EPISODE_END:
        raise ValueError("episode slice must end with EPISODE_END")
    schema = FieldSchema.parse(start.data["schema"])
    config = start.data["config"]
    cost_model = CostModel(config.get("price_in", 0.0), config.get("price_out", 0.0))
    n_agents = start.data["agents"]

    report = EpisodeReport(
        episode=start.data["episode"],
        seed=start.data["seed"],
        scenario=start.data["scenario"],
        strategy=start.data["strategy"],
        success=end.data["success"],
        ticks=end.data["ticks"],
        tick_offset=start.tick,
        stall_ticks=end.data["stall_ticks"],
        miss_stall_ticks=end.data["miss_stall_ticks"],
        oracle_queries=0,
        tokens_in=0,
        tokens_out=0,
        cost=0.0,
        cache_hits=0,
        cache_misses=0,
        in_flight_at_end=end.data["in_flight_at_end"],
    )

    entries_by_agent: dict[int, int] = {}
    entries_start = start.data.get("cache_entries_start")
    if entries_start is not None:
        entries_by_agent = {aid: n for aid, n in enumerate(entries_start)}
        report.cache_entry_trajectory.append(
            [start.tick, sum(entries_by_agent.values()) / max(1, n_agents)]
        )

    def note_entries(agent: int | None, tick: int, count) -> None:
        if count is None or agent is None:
            return
        entries_by_agent[agent] = count
        mean = sum(entries_by_agent.values()) / max(1, len(entries_by_agent))
        traj = report.cache_entry_trajectory
        if traj and traj[-1][0] == tick:
            traj[-1][1] = mean
        else:
            traj.append([tick, mean])

    # plan spans for the accuracy series: (start_tick, agent, length, correct)
    open_spans: dict[int, dict] = {}
    spans: list[tuple[int, int, int, bool]] = []

    def close_span(agent: int, ticks_run: int) -> None:
        span = open_spans.pop(agent, None)
        if span is None:
            return
        spans.append((span["tick"], agent, ticks_run, span["correct"]))

    for event in episode_events:
        kind, data, agent = event.kind, event.data, event.agent
        if kind is EventKind.QUERY_ISSUED:
            report.oracle_queries += 1
            if data.get("mode") == "replan":
                report.replans += 1
        elif kind is EventKind.RESOLVED:
            report.tokens_in += data.get("tokens_in", 0)
            report.tokens_out += data.get("tokens_out", 0)
            outcome = data.get("outcome")
            if outcome == "confirmed":
                report.confirmations += 1
            elif outcome == "corrected":
                report.corrections += 1
            elif outcome == "stale":
                report.stale_dropped += 1
            elif outcome == "verify_fail":
                report.rollbacks.append(
                    {
                        "first_fail": data["first_fail"],
                        "proposed": data["proposed"],
                        "executed": data["executed"],
                        "rollback_depth": data["rollback_depth"],
                        "full_window": data["full_window"],
                    }
                )
            note_entries(agent, event.tick, data.get("cache_entries"))
        elif kind is EventKind.CACHE_QUERY:
            if data["result"] == "hit":
                report.cache_hits += 1
            else:
                report.cache_misses += 1
            note_entries(agent, event.tick, data.get("cache_entries"))
        elif kind is EventKind.MISS_FALLBACK:
            report.fallback_latencies.append(data["stall_ticks"])
            note_entries(agent, event.tick, data.get("cache_entries"))
        elif kind is EventKind.PREEMPT:
            report.preemptions += 1
        elif kind is EventKind.PLAN_START:
            report.plans += 1
            if data.get("corrective"):
                report.corrective_plans += 1
            request = _request_from_payload(data["request"], schema)
            correct = reference(request) == PlanId.from_payload(data["plan"])
            open_spans[agent] = {"tick": event.tick, "correct": correct}
        elif kind is EventKind.PLAN_END:
            close_span(agent, data["ticks"])
        elif kind is EventKind.PLAN_FAILED:
            report.plan_failures += 1
            close_span(agent, data["ticks"])
        elif kind is EventKind.ENV_PERTURB:
            report.perturbations += 1

    for agent, span in sorted(open_spans.items()):
        # trailing-open plan at budget exhaustion
        spans.append((span["tick"], agent, end.tick - span["tick"], span["correct"]))

    report.cost = (
        report.tokens_in * cost_model.price_in / 1000.0
        + report.tokens_out * cost_model.price_out / 1000.0
    )
    report.accuracy_series = _accuracy_from_spans(spans)
    return report


def _accuracy_from_spans(spans) -> list:
    frames: list[tuple[int, int, bool]] = []
    for start_tick, agent, length, correct in spans:
        for i in range(length):
            frames.append((start_tick + i, agent, correct))
    frames.sort(key=lambda f: (f[0], f[1]))
    series = []
    balance = 0
    for n, (_, _, correct) in enumerate(frames, start=1):
        balance += 1 if correct else -1
        series.append(balance / n)
    return series


def derive_reports(events, reference=scripted_plan) -> list:
    return [derive_report(ep, reference) for ep in split_episodes(events)]


# ----------------------------------------------------------------------
# plan execution accuracy over an arbitrary trace
# ----------------------------------------------------------------------


def plan_execution_accuracy(events, reference=scripted_plan) -> list:
    """Per-frame cumulative (correct - wrong) / frames over a whole trace."""
    spans = []
    schema: FieldSchema | None = None
    open_spans: dict[int, dict] = {}
    last_tick = 0
    for event in events:
        last_tick = event.tick
        if event.kind is EventKind.EPISODE_START:
            schema = FieldSchema.parse(event.data["schema"])
        elif event.kind is EventKind.PLAN_START:
            request = _request_from_payload(event.data["request"], schema)
            correct = reference(request) == PlanId.from_payload(event.data["plan"])
            open_spans[event.agent] = {"tick": event.tick, "correct": correct}
        elif event.kind in (EventKind.PLAN_END, EventKind.PLAN_FAILED):
            span = open_spans.pop(event.agent, None)
            if span is not None:
                spans.append(
                    (span["tick"], event.agent, event.data["ticks"], span["correct"])
                )
        elif event.kind is EventKind.EPISODE_END:
            for agent, span in sorted(open_spans.items()):
                spans.append(
                    (span["tick"], agent, event.tick - span["tick"], span["correct"])
                )
            open_spans.clear()
    for agent, span in sorted(open_spans.items()):
        spans.append((span["tick"], agent, last_tick - span["tick"], span["correct"]))
    return _accuracy_from_spans(spans)


# ----------------------------------------------------------------------
# 2-gram locality analysis
# ----------------------------------------------------------------------


def plan_bigrams(events):
    """Yield (from_verb, to_verb, state_values) for every completed-plan
    adjacency (PLAN_END followed by the same agent's next PLAN_START),
    never crossing episode boundaries."""
    last_end: dict[int, str] = {}
    for event in events:
        if event.kind is EventKind.EPISODE_START:
            last_end.clear()
        elif event.kind is EventKind.PLAN_END:
            last_end[event.agent] = event.data["plan"]["kind"]
        elif event.kind is EventKind.PLAN_FAILED:
            last_end.pop(event.agent, None)
        elif event.kind is EventKind.PLAN_START:
            prev = last_end.pop(event.agent, None)
            if prev is not None:
                yield prev, event.data["plan"]["kind"], tuple(event.data["state"])


def locality_table(events) -> tuple:
    """Row-normalized bigram frequencies over verb pairs.

    Returns (verbs, table) where table[from][to] is P(to | from); rows
    with zero support are omitted.
    """
    counts: dict[str, dict[str, int]] = {}
    for prev, nxt, _ in plan_bigrams(events):
        counts.setdefault(prev, {}).setdefault(nxt, 0)
        counts[prev][nxt] += 1
    table: dict[str, dict[str, float]] = {}
    for prev in sorted(counts):
        row_total = sum(counts[prev].values())
        table[prev] = {
            nxt: counts[prev][nxt] / row_total for nxt in sorted(counts[prev])
        }
    verbs = sorted(set(table) | {v for row in table.values() for v in row})
    return verbs, table


# ----------------------------------------------------------------------
# offline prefill extraction
# ----------------------------------------------------------------------


def extract_prefill(events, success_only: bool = False) -> tuple:
    """Bigram counts and per-field state ranges from executed traces.

    Returns (schema, transitions) ready for PlanCache.prefill.  With
    ``success_only`` only episodes that fully succeeded contribute.
    """
    schema: FieldSchema | None = None
    acc: dict[tuple[str, str], dict] = {}
    for episode in split_episodes(events):
        start = episode[0]
        if schema is None:
            schema = FieldSchema.parse(start.data["schema"])
        if success_only:
            end = episode[-1]
            if end.kind is not EventKind.EPISODE_END or end.data["success"] < 1.0:
                continue
        for prev, nxt, values in plan_bigrams(episode):
            slot = acc.setdefault(
                (prev, nxt),
                {"count": 0, "lo": list(values), "hi": list(values)},
            )
            slot["count"] += 1
            slot["lo"] = [min(a, b) for a, b in zip(slot["lo"], values)]
            slot["hi"] = [max(a, b) for a, b in zip(slot["hi"], values)]
    if schema is None:
        raise ValueError("no episodes in trace")
    transitions = [
        PrefillTransition(
            parse_kind(prev),
            parse_kind(nxt),
            slot["count"],
            MetadataRange(tuple(zip(slot["lo"], slot["hi"]))),
        )
        for (prev, nxt), slot in sorted(acc.items())
    ]
    return schema, transitions


# ----------------------------------------------------------------------
# run-level aggregation
# ----------------------------------------------------------------------


def growth_at(trajectory, checkpoints=GROWTH_CHECKPOINTS) -> list:
    """Step-function sample of a (tick, value) trajectory at checkpoints."""
    values = []
    for t in checkpoints:
        current = 0.0
        for tick, value in trajectory:
            if tick <= t:
                current = value
            else:
                break
        values.append(current)
    return values


def merge_trajectories(reports) -> list:
    merged = []
    for report in reports:
        merged.extend(report.cache_entry_trajectory)
    merged.sort(key=lambda p: p[0])
    return merged


def aggregate(reports) -> dict:
    """Summarize one run (an ordered list of EpisodeReports)."""
    n = len(reports)
    if n == 0:
        return {"episodes": 0}
    queries = sum(r.oracle_queries for r in reports)
    hits = sum(r.cache_hits for r in reports)
    misses = sum(r.cache_misses for r in reports)
    fallbacks = [latency for r in reports for latency in r.fallback_latencies]
    trajectory = merge_trajectories(reports)
    rollback_depths = [
        rb["rollback_depth"]
        for r in reports
        for rb in r.rollbacks
        if rb["rollback_depth"] > 0
    ]
    return {
        "episodes": n,
        "strategy": reports[0].strategy,
        "scenario": reports[0].scenario,
        "success_rate": sum(r.success for r in reports) / n,
        "total_ticks": sum(r.ticks for r in reports),
        "stall_ticks": sum(r.stall_ticks for r in reports),
        "miss_stall_ticks": sum(r.miss_stall_ticks for r in reports),
        "oracle_queries": queries,
        "tokens_in": sum(r.tokens_in for r in reports),
        "tokens_out": sum(r.tokens_out for r in reports),
        "tokens_total": sum(r.tokens_total for r in reports),
        "cost": sum(r.cost for r in reports),
        "cache_hits": hits,
        "cache_misses": misses,
        "hit_rate": hits / (hits + misses) if hits + misses else None,
        "mean_fallback_latency": (
            sum(fallbacks) / len(fallbacks) if fallbacks else None
        ),
        "confirmations": sum(r.confirmations for r in reports),
        "corrections": sum(r.corrections for r in reports),
        "preemptions": sum(r.preemptions for r in reports),
        "stale_dropped": sum(r.stale_dropped for r in reports),
        "plans": sum(r.plans for r in reports),
        "plan_failures": sum(r.plan_failures for r in reports),
        "replans": sum(r.replans for r in reports),
        "perturbations": sum(r.perturbations for r in reports),
        "growth_checkpoints": list(GROWTH_CHECKPOINTS),
        "growth_entries": growth_at(trajectory) if trajectory else None,
        "mean_rollback_depth": (
            sum(rollback_depths) / len(rollback_depths) if rollback_depths else None
        ),
        "final_accuracy": (
            sum(r.accuracy_series[-1] for r in reports if r.accuracy_series)
            / max(1, sum(1 for r in reports if r.accuracy_series))
        ),
    }
