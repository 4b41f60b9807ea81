"""Deterministic multi-agent transport gridworld.

Rooms on a 4-connected grid, target objects, containers with capacity
three, and a goal zone.  High-level plans compile to queues of
single-tick primitives via BFS shortest paths.  An optional
perturbation teleports one on-floor object per tick with configured
probability, which is the minimal dynamic that invalidates cached
plans (an agent walking to a grasped-for object arrives to find it
gone).

Everything is driven by an explicit ``random.Random`` and fixed
iteration orders, so identical (scenario, seed) pairs give
byte-identical episode traces.
"""

from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from .cache import FieldSchema, FieldSpec, StateVector
from .plans import PlanId, PlanKind

Cell = tuple[int, int]

HAND_CAPACITY = 2
CONTAINER_CAPACITY = 3
SCENARIO_HEADER = "PSCEN v1"

TARGET = "target"
CONTAINER = "container"

# Task-state metadata fields used as cache filter keys: episode step
# index, held item count, finished sub-goals, visited room count.
# The step index is reported at bucket granularity: a strictly
# per-tick value could never fall inside a previously observed range,
# which would starve a cold cache of hits forever.
STEP_BUCKET = 200

GRIDWORLD_SCHEMA = FieldSchema(
    (
        FieldSpec("steps", 4),
        FieldSpec("held", 4),
        FieldSpec("finished", 4),
        FieldSpec("visited", 4),
    )
)

_NEIGHBOR_OFFSETS = ((1, 0), (-1, 0), (0, 1), (0, -1))


class ScenarioError(ValueError):
    pass


# ----------------------------------------------------------------------
# primitives
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class Primitive:
    """One-tick atomic action.  ``items`` concretizes deposits for undo."""

    op: str  # move|grasp|put|deposit|release|takeout|undeposit|noop
    dx: int = 0
    dy: int = 0
    obj: int | None = None
    container: int | None = None
    items: tuple[tuple[int, tuple[int, ...]], ...] = ()

    def inverse(self) -> "Primitive":
        if self.op == "move":
            return Primitive("move", -self.dx, -self.dy)
        if self.op == "grasp":
            return Primitive("release", obj=self.obj)
        if self.op == "release":
            return Primitive("grasp", obj=self.obj)
        if self.op == "put":
            return Primitive("takeout", obj=self.obj, container=self.container)
        if self.op == "takeout":
            return Primitive("put", obj=self.obj, container=self.container)
        if self.op == "deposit":
            return Primitive("undeposit", items=self.items)
        if self.op == "undeposit":
            return Primitive("deposit", items=self.items)
        return Primitive("noop")


NOOP = Primitive("noop")


@dataclass
class PlanInstance:
    """A plan bound to an agent with its compiled primitive queue."""

    plan: PlanId
    agent: int
    queue: deque
    executed: list = field(default_factory=list)
    pred: PlanKind = PlanKind.WAIT
    state_at_start: StateVector | None = None
    started_at: int | None = None
    corrective: bool = False
    undoes: dict | None = None

    @property
    def done(self) -> bool:
        return not self.queue

    def ticks_run(self) -> int:
        return len(self.executed)

    def undo_instance(self, tag: dict) -> "PlanInstance":
        """Corrective twin reversing everything executed so far."""
        prims = [p.inverse() for p in reversed(self.executed)]
        return PlanInstance(
            plan=self.plan,
            agent=self.agent,
            queue=deque(prims if prims else [NOOP]),
            corrective=True,
            undoes=tag,
        )


# ----------------------------------------------------------------------
# observations
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ObsItem:
    oid: int
    kind: str
    pos: Cell | None
    load: int = 0

    def to_payload(self) -> dict:
        return {
            "id": self.oid,
            "kind": self.kind,
            "pos": list(self.pos) if self.pos is not None else None,
            "load": self.load,
        }

    @classmethod
    def from_payload(cls, d: dict) -> "ObsItem":
        pos = d.get("pos")
        return cls(d["id"], d["kind"], tuple(pos) if pos is not None else None, d.get("load", 0))


@dataclass(frozen=True)
class Observation:
    """Per-agent view: same-room objects plus own inventory and progress."""

    agent_id: int
    pos: Cell
    room: int
    visible: tuple[ObsItem, ...]
    inventory: tuple[ObsItem, ...]
    visited: tuple[int, ...]
    finished: int
    targets_total: int
    rooms: tuple[int, ...]
    goal_cells: tuple[Cell, ...]
    tick: int
    budget: int

    @property
    def remaining(self) -> int:
        return self.budget - self.tick

    @property
    def hand_space(self) -> int:
        return HAND_CAPACITY - len(self.inventory)

    def to_payload(self) -> dict:
        return {
            "agent": self.agent_id,
            "pos": list(self.pos),
            "room": self.room,
            "visible": [o.to_payload() for o in self.visible],
            "inventory": [o.to_payload() for o in self.inventory],
            "visited": list(self.visited),
            "finished": self.finished,
            "targets_total": self.targets_total,
            "rooms": list(self.rooms),
            "goal_cells": [list(c) for c in self.goal_cells],
            "tick": self.tick,
            "budget": self.budget,
        }

    @classmethod
    def from_payload(cls, d: dict) -> "Observation":
        return cls(
            agent_id=d["agent"],
            pos=tuple(d["pos"]),
            room=d["room"],
            visible=tuple(ObsItem.from_payload(o) for o in d["visible"]),
            inventory=tuple(ObsItem.from_payload(o) for o in d["inventory"]),
            visited=tuple(d["visited"]),
            finished=d["finished"],
            targets_total=d["targets_total"],
            rooms=tuple(d["rooms"]),
            goal_cells=tuple(tuple(c) for c in d["goal_cells"]),
            tick=d["tick"],
            budget=d["budget"],
        )


# ----------------------------------------------------------------------
# world state
# ----------------------------------------------------------------------


@dataclass
class WorldObject:
    oid: int
    kind: str
    pos: Cell | None = None
    holder: int | None = None
    inside: int | None = None
    delivered: bool = False
    contents: list = field(default_factory=list)


@dataclass
class AgentBody:
    aid: int
    pos: Cell
    held: list = field(default_factory=list)
    visited: set = field(default_factory=set)


@dataclass
class StepResult:
    ok: dict
    fail_reason: dict
    executed: dict  # aid -> concretized primitive actually applied
    perturbed: list


class GridWorld:
    def __init__(
        self,
        width: int,
        height: int,
        walls: frozenset,
        rooms: list,
        goal_cells: tuple,
        objects: dict,
        agents: list,
        budget: int,
        perturbation_rate: float,
        rng: random.Random,
        name: str = "adhoc",
    ):
        self.width = width
        self.height = height
        self.walls = walls
        self.rooms = rooms  # list[list[Cell]] indexed by room id
        self.goal_cells = goal_cells
        self.objects = objects
        self.agents = agents
        self.budget = budget
        self.perturbation_rate = perturbation_rate
        self.rng = rng
        self.name = name
        self.tick = 0
        self.delivered = 0
        self.targets_total = sum(1 for o in objects.values() if o.kind == TARGET)
        self.room_of: dict[Cell, int] = {}
        for rid, cells in enumerate(rooms):
            for cell in cells:
                if cell in self.room_of:
                    raise ScenarioError(f"cell {cell} assigned to two rooms")
                self.room_of[cell] = rid
        self.passable_cells = sorted(
            (x, y)
            for x in range(width)
            for y in range(height)
            if (x, y) not in walls
        )
        for cell in self.passable_cells:
            if cell not in self.room_of:
                raise ScenarioError(f"passable cell {cell} belongs to no room")
        for agent in self.agents:
            agent.visited.add(self.room_of[agent.pos])

    # ------------------------------------------------------------------
    # geometry
    # ------------------------------------------------------------------

    def passable(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height and cell not in self.walls

    def bfs_path(self, src: Cell, dsts: Iterable[Cell]) -> list | None:
        """Shortest path from src to the nearest of dsts (may be empty)."""
        goal = set(dsts)
        if not goal:
            return None
        if src in goal:
            return []
        parent: dict[Cell, Cell] = {src: src}
        frontier = deque([src])
        while frontier:
            cell = frontier.popleft()
            for dx, dy in _NEIGHBOR_OFFSETS:
                nxt = (cell[0] + dx, cell[1] + dy)
                if nxt in parent or not self.passable(nxt):
                    continue
                parent[nxt] = cell
                if nxt in goal:
                    path = [nxt]
                    while path[-1] != src:
                        path.append(parent[path[-1]])
                    path.reverse()
                    return path[1:]
                frontier.append(nxt)
        return None

    def _moves_to(self, aid: int, dsts: Iterable[Cell]) -> list | None:
        path = self.bfs_path(self.agents[aid].pos, dsts)
        if path is None:
            return None
        prims = []
        cur = self.agents[aid].pos
        for cell in path:
            prims.append(Primitive("move", cell[0] - cur[0], cell[1] - cur[1]))
            cur = cell
        return prims

    # ------------------------------------------------------------------
    # views
    # ------------------------------------------------------------------

    def observation(self, aid: int) -> Observation:
        agent = self.agents[aid]
        room = self.room_of[agent.pos]
        visible = tuple(
            ObsItem(o.oid, o.kind, o.pos, len(o.contents))
            for o in (self.objects[i] for i in sorted(self.objects))
            if o.pos is not None and self.room_of.get(o.pos) == room
        )
        inventory = tuple(
            ObsItem(self.objects[i].oid, self.objects[i].kind, None,
                    len(self.objects[i].contents))
            for i in agent.held
        )
        return Observation(
            agent_id=aid,
            pos=agent.pos,
            room=room,
            visible=visible,
            inventory=inventory,
            visited=tuple(sorted(agent.visited)),
            finished=self.delivered,
            targets_total=self.targets_total,
            rooms=tuple(range(len(self.rooms))),
            goal_cells=self.goal_cells,
            tick=self.tick,
            budget=self.budget,
        )

    def state_vector(self, aid: int) -> StateVector:
        agent = self.agents[aid]
        return GRIDWORLD_SCHEMA.state(
            self.tick // STEP_BUCKET,
            len(agent.held),
            self.delivered,
            len(agent.visited),
        )

    def success_metric(self) -> float:
        if self.targets_total == 0:
            return 1.0
        return self.delivered / self.targets_total

    @property
    def complete(self) -> bool:
        return self.delivered >= self.targets_total

    def conservation_ok(self) -> bool:
        for o in self.objects.values():
            states = [
                o.pos is not None,
                o.holder is not None,
                o.inside is not None,
                o.delivered,
            ]
            if sum(states) != 1:
                return False
        return True

    def project_observation(self, obs: Observation, plan: PlanId) -> Observation:
        """Anticipated view of this agent's world after ``plan`` completes.

        Used when a planner is asked for the plan *following* the
        ongoing one (parallelized planning-acting).  Pose, inventory and
        progress are projected symbolically; visibility at the projected
        position reflects the world as it stands at query time, so the
        answer can already be stale by the time the plan completes.
        """
        from dataclasses import replace

        pos, room = obs.pos, obs.room
        inventory = obs.inventory
        finished = obs.finished
        if plan.kind == PlanKind.GO_GRASP:
            obj = self.objects.get(plan.target)
            if obj is None or obj.pos is None or obs.hand_space <= 0:
                return obs
            pos = obj.pos
            room = self.room_of[pos]
            inventory = obs.inventory + (
                ObsItem(obj.oid, obj.kind, None, len(obj.contents)),
            )
        elif plan.kind == PlanKind.PUT_INTO:
            if not any(i.kind == TARGET for i in obs.inventory):
                return obs
            projected = []
            dropped = False
            for item in obs.inventory:
                if not dropped and item.kind == TARGET:
                    dropped = True
                    continue
                if item.oid == plan.target:
                    projected.append(replace(item, load=item.load + 1))
                else:
                    projected.append(item)
            inventory = tuple(projected)
        elif plan.kind == PlanKind.TRANSPORT:
            deliverable = sum(1 for i in obs.inventory if i.kind == TARGET) + sum(
                i.load for i in obs.inventory if i.kind == CONTAINER
            )
            pos = min(obs.goal_cells)
            room = self.room_of[pos]
            inventory = ()
            finished = obs.finished + deliverable
        elif plan.kind in (PlanKind.EXPLORE, PlanKind.GO_TO):
            if plan.target is None or not (0 <= plan.target < len(self.rooms)):
                return obs
            room = plan.target
            pos = sorted(self.rooms[room])[0]
        else:  # Wait
            return obs
        held_ids = {i.oid for i in inventory}
        visible = tuple(
            ObsItem(o.oid, o.kind, o.pos, len(o.contents))
            for o in (self.objects[i] for i in sorted(self.objects))
            if o.pos is not None
            and self.room_of.get(o.pos) == room
            and o.oid not in held_ids
        )
        return replace(
            obs,
            pos=pos,
            room=room,
            visible=visible,
            inventory=inventory,
            finished=finished,
            visited=tuple(sorted(set(obs.visited) | {room})),
        )

    # ------------------------------------------------------------------
    # plan compilation
    # ------------------------------------------------------------------

    def compile_plan(self, aid: int, plan: PlanId) -> PlanInstance | None:
        """Compile to a primitive queue, or None when not executable."""
        agent = self.agents[aid]
        prims: list | None
        if plan.kind == PlanKind.WAIT:
            prims = [NOOP]
        elif plan.kind in (PlanKind.GO_TO, PlanKind.EXPLORE):
            if plan.target is None or not (0 <= plan.target < len(self.rooms)):
                return None
            if self.room_of[agent.pos] == plan.target:
                prims = [NOOP]
            else:
                prims = self._moves_to(aid, self.rooms[plan.target])
        elif plan.kind == PlanKind.GO_GRASP:
            obj = self.objects.get(plan.target)
            if obj is None or obj.pos is None or len(agent.held) >= HAND_CAPACITY:
                return None
            moves = self._moves_to(aid, [obj.pos])
            prims = None if moves is None else moves + [Primitive("grasp", obj=obj.oid)]
        elif plan.kind == PlanKind.PUT_INTO:
            cont = self.objects.get(plan.target)
            if (
                cont is None
                or cont.kind != CONTAINER
                or cont.holder != aid
                or len(cont.contents) >= CONTAINER_CAPACITY
            ):
                return None
            held_targets = [i for i in agent.held if self.objects[i].kind == TARGET]
            if not held_targets:
                return None
            prims = [Primitive("put", obj=held_targets[0], container=cont.oid)]
        elif plan.kind == PlanKind.TRANSPORT:
            if not agent.held:
                return None
            moves = self._moves_to(aid, self.goal_cells)
            prims = None if moves is None else moves + [Primitive("deposit")]
        else:  # pragma: no cover - closed enum
            return None
        if prims is None:
            return None
        return PlanInstance(plan=plan, agent=aid, queue=deque(prims))

    # ------------------------------------------------------------------
    # stepping
    # ------------------------------------------------------------------

    def step(self, actions: dict) -> StepResult:
        """Advance one tick; conflicting grasps resolve to the lower agent id."""
        ok: dict[int, bool] = {}
        reason: dict[int, str | None] = {}
        executed: dict[int, Primitive] = {}
        for aid in sorted(actions):
            success, why, concrete = self._execute(aid, actions[aid])
            ok[aid] = success
            reason[aid] = why
            executed[aid] = concrete
        for agent in self.agents:
            agent.visited.add(self.room_of[agent.pos])
        perturbed = []
        if self.perturbation_rate > 0 and self.rng.random() < self.perturbation_rate:
            loose = sorted(
                o.oid for o in self.objects.values()
                if o.pos is not None and not o.delivered
            )
            if loose:
                oid = self.rng.choice(loose)
                cell = self.rng.choice(self.passable_cells)
                self.objects[oid].pos = cell
                perturbed.append((oid, cell))
        self.tick += 1
        return StepResult(ok, reason, executed, perturbed)

    def _execute(self, aid: int, prim: Primitive) -> tuple[bool, str | None, Primitive]:
        agent = self.agents[aid]
        op = prim.op
        if op == "noop":
            return True, None, prim
        if op == "move":
            nxt = (agent.pos[0] + prim.dx, agent.pos[1] + prim.dy)
            if not self.passable(nxt):
                return False, "blocked", prim
            agent.pos = nxt
            return True, None, prim
        if op == "grasp":
            obj = self.objects.get(prim.obj)
            if obj is None or obj.pos != agent.pos:
                return False, "object-gone", prim
            if len(agent.held) >= HAND_CAPACITY:
                return False, "hands-full", prim
            obj.pos = None
            obj.holder = aid
            agent.held.append(obj.oid)
            return True, None, prim
        if op == "release":
            obj = self.objects.get(prim.obj)
            if obj is None or obj.holder != aid:
                return False, "not-held", prim
            obj.holder = None
            obj.pos = agent.pos
            agent.held.remove(obj.oid)
            return True, None, prim
        if op == "put":
            obj = self.objects.get(prim.obj)
            cont = self.objects.get(prim.container)
            if obj is None or cont is None or obj.holder != aid or cont.holder != aid:
                return False, "not-held", prim
            if len(cont.contents) >= CONTAINER_CAPACITY:
                return False, "container-full", prim
            obj.holder = None
            obj.inside = cont.oid
            cont.contents.append(obj.oid)
            agent.held.remove(obj.oid)
            return True, None, prim
        if op == "takeout":
            obj = self.objects.get(prim.obj)
            cont = self.objects.get(prim.container)
            if obj is None or cont is None or cont.holder != aid or obj.inside != cont.oid:
                return False, "not-inside", prim
            if len(agent.held) >= HAND_CAPACITY:
                return False, "hands-full", prim
            obj.inside = None
            obj.holder = aid
            cont.contents.remove(obj.oid)
            agent.held.append(obj.oid)
            return True, None, prim
        if op == "deposit":
            if agent.pos not in self.goal_cells:
                return False, "not-at-goal", prim
            if not agent.held:
                return False, "empty-handed", prim
            manifest = []
            for oid in list(agent.held):
                obj = self.objects[oid]
                manifest.append((oid, tuple(obj.contents)))
                if obj.kind == TARGET:
                    obj.holder = None
                    obj.delivered = True
                    self.delivered += 1
                else:
                    for inner in list(obj.contents):
                        self.objects[inner].inside = None
                        self.objects[inner].delivered = True
                        self.delivered += 1
                    obj.contents.clear()
                    obj.holder = None
                    obj.delivered = True  # container consumed on delivery
                agent.held.remove(oid)
            return True, None, Primitive("deposit", items=tuple(manifest))
        if op == "undeposit":
            for oid, contents in prim.items:
                obj = self.objects[oid]
                if not obj.delivered or len(agent.held) >= HAND_CAPACITY:
                    return False, "cannot-restore", prim
                obj.delivered = False
                obj.holder = aid
                agent.held.append(oid)
                if obj.kind == TARGET:
                    self.delivered -= 1
                else:
                    for inner in contents:
                        self.objects[inner].delivered = False
                        self.objects[inner].inside = oid
                        obj.contents.append(inner)
                        self.delivered -= 1
            return True, None, prim
        return False, f"unknown-op-{op}", prim  # pragma: no cover


# ----------------------------------------------------------------------
# policy helpers shared by the scripted oracle and the argument resolver
# ----------------------------------------------------------------------


def _manhattan(a: Cell, b: Cell) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def _nearest(pos: Cell, items: list) -> ObsItem:
    return min(items, key=lambda o: (_manhattan(pos, o.pos), o.oid))


def unpossessed_targets(obs: Observation) -> int:
    """Undelivered targets not already in this agent's hands/containers."""
    held_targets = sum(1 for i in obs.inventory if i.kind == TARGET)
    stowed = sum(i.load for i in obs.inventory if i.kind == CONTAINER)
    return obs.targets_total - obs.finished - held_targets - stowed


def choose_grasp(obs: Observation) -> PlanId | None:
    if obs.hand_space <= 0:
        return None
    held_containers = [i for i in obs.inventory if i.kind == CONTAINER]
    vis_targets = [o for o in obs.visible if o.kind == TARGET]
    vis_containers = [o for o in obs.visible if o.kind == CONTAINER]
    if not held_containers and vis_containers and unpossessed_targets(obs) >= 2:
        return PlanId(PlanKind.GO_GRASP, _nearest(obs.pos, vis_containers).oid)
    if vis_targets:
        return PlanId(PlanKind.GO_GRASP, _nearest(obs.pos, vis_targets).oid)
    return None


def choose_put(obs: Observation) -> PlanId | None:
    if not any(i.kind == TARGET for i in obs.inventory):
        return None
    for item in obs.inventory:
        if item.kind == CONTAINER and item.load < CONTAINER_CAPACITY:
            return PlanId(PlanKind.PUT_INTO, item.oid)
    return None


def choose_explore(obs: Observation) -> PlanId:
    unvisited = [r for r in obs.rooms if r not in obs.visited]
    if unvisited:
        return PlanId(PlanKind.EXPLORE, min(unvisited))
    others = [r for r in obs.rooms if r != obs.room]
    if not others:
        return PlanId(PlanKind.EXPLORE, obs.room)
    later = [r for r in others if r > obs.room]
    return PlanId(PlanKind.EXPLORE, later[0] if later else others[0])


def goal_distance(obs: Observation) -> int:
    return min(_manhattan(obs.pos, c) for c in obs.goal_cells)


def resolve_target(world: GridWorld, aid: int, verb: PlanKind) -> PlanId | None:
    """Bind a cache-selected verb to a concrete argument, or give up."""
    obs = world.observation(aid)
    if verb == PlanKind.WAIT:
        return PlanId(PlanKind.WAIT)
    if verb == PlanKind.TRANSPORT:
        return PlanId(PlanKind.TRANSPORT) if obs.inventory else None
    if verb == PlanKind.PUT_INTO:
        return choose_put(obs)
    if verb == PlanKind.GO_GRASP:
        return choose_grasp(obs)
    if verb == PlanKind.EXPLORE:
        return choose_explore(obs)
    if verb == PlanKind.GO_TO:
        pick = choose_explore(obs)
        return PlanId(PlanKind.GO_TO, pick.target)
    return None  # pragma: no cover - closed enum


def legal_plans(obs: Observation) -> list:
    """Plans an agent could start right now, judged from its own view."""
    plans = [PlanId(PlanKind.WAIT)]
    for rid in obs.rooms:
        plans.append(PlanId(PlanKind.EXPLORE, rid))
        plans.append(PlanId(PlanKind.GO_TO, rid))
    if obs.hand_space > 0:
        for o in obs.visible:
            plans.append(PlanId(PlanKind.GO_GRASP, o.oid))
    if any(i.kind == TARGET for i in obs.inventory):
        for i in obs.inventory:
            if i.kind == CONTAINER and i.load < CONTAINER_CAPACITY:
                plans.append(PlanId(PlanKind.PUT_INTO, i.oid))
    if obs.inventory:
        plans.append(PlanId(PlanKind.TRANSPORT))
    return plans


# ----------------------------------------------------------------------
# scenarios
# ----------------------------------------------------------------------


def _cells_from_spec(spec: dict) -> list:
    cells: list[Cell] = []
    for rect in spec.get("rects", []):
        x0, y0, x1, y1 = rect
        for x in range(x0, x1 + 1):
            for y in range(y0, y1 + 1):
                cells.append((x, y))
    for cell in spec.get("cells", []):
        cells.append(tuple(cell))
    return cells


def world_from_scenario(
    data: dict,
    seed: int,
    budget: int | None = None,
    perturbation_rate: float | None = None,
) -> GridWorld:
    if data.get("format") != SCENARIO_HEADER:
        raise ScenarioError(f"expected scenario format {SCENARIO_HEADER!r}")
    width, height = data["grid"]
    walls = frozenset(tuple(c) for c in data.get("walls", []))
    room_specs = sorted(data["rooms"], key=lambda r: r["id"])
    if [r["id"] for r in room_specs] != list(range(len(room_specs))):
        raise ScenarioError("room ids must be 0..n-1")
    rooms = [
        [c for c in _cells_from_spec(spec) if c not in walls] for spec in room_specs
    ]
    objects = {}
    for spec in data["objects"]:
        oid = spec["id"]
        if oid in objects:
            raise ScenarioError(f"duplicate object id {oid}")
        if spec["kind"] not in (TARGET, CONTAINER):
            raise ScenarioError(f"unknown object kind {spec['kind']!r}")
        objects[oid] = WorldObject(oid, spec["kind"], pos=tuple(spec["pos"]))
    agents = [AgentBody(i, tuple(pos)) for i, pos in enumerate(data["agents"])]
    return GridWorld(
        width=width,
        height=height,
        walls=walls,
        rooms=rooms,
        goal_cells=tuple(tuple(c) for c in data["goal_cells"]),
        objects=objects,
        agents=agents,
        budget=budget if budget is not None else data["budget"],
        perturbation_rate=(
            perturbation_rate
            if perturbation_rate is not None
            else data.get("perturbation_rate", 0.0)
        ),
        rng=random.Random(f"{seed}/env"),
        name=data.get("name", "scenario"),
    )


def load_scenario(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
