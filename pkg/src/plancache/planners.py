"""Planner backends: scripted oracle, latency/noise wrapper, remote client.

The scripted oracle is a deterministic greedy policy for the transport
gridworld and stands in for the slow model: explore unvisited rooms,
grasp the nearest needed object or container, fill a held container to
capacity, and transport when full or when the remaining budget gets
tight.  Token counts are synthesized so cost and token trends are
measurable: ``tokens_in = 50 + 2 * len(visible)`` (prompt grows with
the observation) and ``tokens_out = 12`` (one-line answer).  The
constants are arbitrary but fixed.

Latency is measured in environment ticks, never wall time, so the
asynchronous delay between issuing a query and receiving its answer is
exactly reproducible.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

import requests

from .cache import StateVector
from .gridworld import (
    CONTAINER,
    CONTAINER_CAPACITY,
    TARGET,
    Observation,
    choose_explore,
    choose_grasp,
    choose_put,
    goal_distance,
    legal_plans,
    unpossessed_targets,
)
from .plans import PlanId, PlanKind

TOKENS_IN_BASE = 50
TOKENS_IN_PER_ITEM = 2
TOKENS_OUT = 12

# Remaining-budget slack below which a loaded agent heads for the goal.
PRESSURE_MARGIN = 8


class OracleUnavailable(RuntimeError):
    """The remote planner could not produce a usable answer."""


@dataclass(frozen=True)
class PlannerRequest:
    agent_id: int
    observation: Observation
    state: StateVector
    history: tuple[PlanId, ...]
    goal: dict
    tick: int

    def to_payload(self) -> dict:
        return {
            "agent_id": self.agent_id,
            "observation": self.observation.to_payload(),
            "state": list(self.state.values),
            "history": [p.label() for p in self.history],
            "goal": self.goal,
            "tick": self.tick,
        }


@dataclass(frozen=True)
class PlannerResponse:
    plan: PlanId
    tokens_in: int
    tokens_out: int
    latency_ticks: int

    def __post_init__(self) -> None:
        if self.tokens_in < 0 or self.tokens_out < 0:
            raise ValueError("token counts must be >= 0")
        if self.latency_ticks < 0:
            raise ValueError("latency must be >= 0")


@dataclass(frozen=True)
class CostModel:
    """Prices per 1k tokens."""

    price_in: float = 0.00125
    price_out: float = 0.01

    def __post_init__(self) -> None:
        if self.price_in < 0 or self.price_out < 0:
            raise ValueError("prices must be >= 0")


def cost_of(responses, model: CostModel) -> float:
    total = 0.0
    for r in responses:
        total += r.tokens_in * model.price_in / 1000.0
        total += r.tokens_out * model.price_out / 1000.0
    return total


def token_cost(tokens_in: int, tokens_out: int, model: CostModel) -> float:
    return tokens_in * model.price_in / 1000.0 + tokens_out * model.price_out / 1000.0


# ----------------------------------------------------------------------
# scripted oracle
# ----------------------------------------------------------------------


def scripted_plan(req: PlannerRequest) -> PlanId:
    """Greedy-optimal next plan for the transport task, pure in the request."""
    obs = req.observation
    if obs.finished >= obs.targets_total:
        return PlanId(PlanKind.WAIT)

    held_targets = [i for i in obs.inventory if i.kind == TARGET]
    held_containers = [i for i in obs.inventory if i.kind == CONTAINER]
    deliverable = bool(held_targets) or any(c.load > 0 for c in held_containers)

    # A full container goes straight to the goal zone.
    if any(c.load >= CONTAINER_CAPACITY for c in held_containers):
        return PlanId(PlanKind.TRANSPORT)
    put = choose_put(obs)
    if put is not None:
        return put
    if deliverable and obs.remaining <= goal_distance(obs) + PRESSURE_MARGIN:
        return PlanId(PlanKind.TRANSPORT)
    grasp = choose_grasp(obs)
    if grasp is not None:
        return grasp
    if obs.hand_space == 0:
        return PlanId(PlanKind.TRANSPORT)
    unvisited = [r for r in obs.rooms if r not in obs.visited]
    if unvisited:
        return choose_explore(obs)
    if deliverable:
        # Nothing in sight and nowhere new: bank what we carry.
        return PlanId(PlanKind.TRANSPORT)
    if unpossessed_targets(obs) > 0 and len(obs.rooms) > 1:
        # Targets exist somewhere unseen (e.g. moved); sweep rooms again.
        return choose_explore(obs)
    return PlanId(PlanKind.WAIT)


class ScriptedOracle:
    """Reference planner; deterministic and instantaneous."""

    name = "scripted"

    def plan(self, req: PlannerRequest) -> PlannerResponse:
        plan = scripted_plan(req)
        return PlannerResponse(
            plan=plan,
            tokens_in=TOKENS_IN_BASE + TOKENS_IN_PER_ITEM * len(req.observation.visible),
            tokens_out=TOKENS_OUT,
            latency_ticks=0,
        )


# ----------------------------------------------------------------------
# latency / noise wrapper
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class LatencySpec:
    """Constant or uniform-integer latency distribution over ticks."""

    low: int
    high: int

    def __post_init__(self) -> None:
        if self.low < 0 or self.high < self.low:
            raise ValueError("latency bounds must satisfy 0 <= low <= high")

    @classmethod
    def constant(cls, ticks: int) -> "LatencySpec":
        return cls(ticks, ticks)

    @classmethod
    def parse(cls, text: str) -> "LatencySpec":
        if ":" in text:
            lo, hi = text.split(":", 1)
            return cls(int(lo), int(hi))
        return cls.constant(int(text))

    def draw(self, rng: random.Random) -> int:
        if self.low == self.high:
            return self.low
        return rng.randint(self.low, self.high)

    def __str__(self) -> str:
        if self.low == self.high:
            return str(self.low)
        return f"{self.low}:{self.high}"


class DelayedPlanner:
    """Adds response delay and plan corruption to an inner planner.

    With probability ``error_rate`` the returned plan is replaced by a
    uniformly random plan that is legal under the request's own
    observation, which models a weak model tier.
    """

    def __init__(self, inner, latency: LatencySpec, error_rate: float, rng: random.Random):
        if not 0.0 <= error_rate <= 1.0:
            raise ValueError("error_rate must be in [0, 1]")
        self.inner = inner
        self.latency = latency
        self.error_rate = error_rate
        self.rng = rng
        self.name = getattr(inner, "name", "planner")

    def plan(self, req: PlannerRequest) -> PlannerResponse:
        resp = self.inner.plan(req)
        plan = resp.plan
        if self.error_rate > 0 and self.rng.random() < self.error_rate:
            options = legal_plans(req.observation)
            plan = self.rng.choice(options) if options else PlanId(PlanKind.WAIT)
        return PlannerResponse(
            plan=plan,
            tokens_in=resp.tokens_in,
            tokens_out=resp.tokens_out,
            latency_ticks=self.latency.draw(self.rng),
        )


# ----------------------------------------------------------------------
# remote client (plumbing for driving a real model; off by default)
# ----------------------------------------------------------------------


class RemotePlanner:
    """POSTs the request as JSON to ``<endpoint>/plan``.

    Expected reply: ``{"plan": "GoGrasp", "target": 712}`` or a label
    like ``{"plan": "GoGrasp(712)"}``.  Any transport, protocol or
    parse failure maps to OracleUnavailable.
    """

    name = "remote"

    def __init__(self, endpoint: str, timeout: float = 10.0):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout

    def plan(self, req: PlannerRequest) -> PlannerResponse:
        try:
            http_resp = requests.post(
                f"{self.endpoint}/plan",
                json=req.to_payload(),
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise OracleUnavailable(f"request failed: {exc}") from exc
        if http_resp.status_code != 200:
            raise OracleUnavailable(f"status {http_resp.status_code}")
        try:
            body = http_resp.json()
            label = body["plan"]
            if "target" in body and body["target"] is not None:
                plan = PlanId(PlanKind(label), body["target"])
            else:
                plan = PlanId.parse(label)
        except (ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
            raise OracleUnavailable(f"unparseable plan answer: {exc}") from exc
        return PlannerResponse(
            plan=plan,
            tokens_in=int(body.get("tokens_in", 0)),
            tokens_out=int(body.get("tokens_out", 0)),
            latency_ticks=0,
        )


def build_planner(
    kind: str,
    latency: LatencySpec,
    error_rate: float,
    rng: random.Random,
    endpoint: str | None = None,
    timeout: float = 10.0,
):
    if kind == "scripted":
        inner = ScriptedOracle()
    elif kind == "remote":
        if not endpoint:
            raise ValueError("remote planner needs an endpoint")
        inner = RemotePlanner(endpoint, timeout)
    else:
        raise ValueError(f"unknown planner kind {kind!r}")
    return DelayedPlanner(inner, latency, error_rate, rng)
