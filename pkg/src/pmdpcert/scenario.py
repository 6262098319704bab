"""Gridworld scenario builders for the delivery mission.

Two contexts are supported. In the open context the UAV may fly and land
anywhere; losing connection forces a landing in place (probability p1 per
move) and a grounded UAV waits to reconnect (probability p2 per step). The
ground robot random-walks uniformly over stay-plus-cardinal moves. A crash
is a grounded UAV sharing the robot's cell. In the rooftop context the UAV
moves only between designated rooftop cells along corridor edges, the robot
walks street cells only, and a guarded Deliver action finishes the mission;
ground interactions are structurally impossible.

Moves compose simultaneously (UAV and robot advance in the same step) and
labels are read on the post-state. Where the grounded UAV and the robot
land on the same cell, crash takes precedence over goal.

Coordinates are (x, y), 0-based, x rightward, y upward.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

from .expr import ParameterRegion, Var, const, one_minus, scaled
from .model import PMDP, ParametricDistribution


class ScenarioError(Exception):
    pass


class InvalidScenario(ScenarioError):
    def __init__(self, reasons):
        if isinstance(reasons, str):
            reasons = [reasons]
        super().__init__("; ".join(reasons))
        self.reasons = tuple(reasons)


class OutOfRange(ScenarioError):
    def __init__(self, state, count):
        super().__init__(f"state {state} not in [0, {count})")


class Mode(enum.Enum):
    FLYING = "flying"
    GROUNDED = "grounded"
    DELIVERED = "delivered"


class Context(enum.Enum):
    OPEN = "open"
    ROOFTOP = "rooftop"


# Canonical move order; action indices and robot fan-out follow it.
_DIRS = (("stay", 0, 0), ("n", 0, 1), ("s", 0, -1), ("e", 1, 0), ("w", -1, 0))


@dataclass(frozen=True)
class GridScenario:
    width: int
    height: int
    uav_start: tuple
    robot_start: tuple
    goal: tuple
    context: Context = Context.OPEN
    rooftops: frozenset = frozenset()
    rooftop_edges: frozenset = frozenset()  # frozenset of 2-cell frozensets

    def in_bounds(self, cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def cells(self):
        for y in range(self.height):
            for x in range(self.width):
                yield (x, y)

    def problems(self) -> list:
        """(field, reason) pairs for every violated invariant; empty = valid."""
        out = []
        if self.width < 1 or self.height < 1:
            out.append(("width", "grid dimensions must be positive"))
            return out
        for name in ("uav_start", "robot_start", "goal"):
            if not self.in_bounds(getattr(self, name)):
                out.append((name, f"{getattr(self, name)} out of bounds"))
        if self.uav_start == self.robot_start:
            out.append(("robot_start", "uav_start and robot_start must differ"))
        if self.context is Context.OPEN:
            return out

        if not self.rooftops:
            out.append(("rooftops", "rooftop context requires a nonempty rooftop set"))
            return out
        for c in self.rooftops:
            if not self.in_bounds(c):
                out.append(("rooftops", f"rooftop {c} out of bounds"))
        if self.uav_start not in self.rooftops:
            out.append(("uav_start", "must be a rooftop cell"))
        if self.robot_start in self.rooftops:
            out.append(("robot_start", "must be a street cell"))
        if self.goal in self.rooftops:
            out.append(("goal", "must be a street cell"))
        if not any(_adjacent(self.goal, r) for r in self.rooftops):
            out.append(("goal", "must be adjacent to at least one rooftop"))
        for edge in self.rooftop_edges:
            ends = tuple(edge)
            if len(ends) != 2:
                out.append(("rooftop_edges", f"edge {set(edge)} must join two distinct cells"))
            elif not all(e in self.rooftops for e in ends):
                out.append(("rooftop_edges", f"edge {set(edge)} leaves the rooftop set"))
        if not _connected(self.rooftops, self.rooftop_edges):
            out.append(("rooftop_edges", "rooftop corridor graph must be connected"))
        return out


@dataclass(frozen=True)
class CompositeState:
    uav_pos: tuple
    mode: Mode
    robot_pos: tuple


def _adjacent(a, b) -> bool:
    return abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1


def _manhattan(a, b) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def _connected(nodes, edges) -> bool:
    nodes = set(nodes)
    if not nodes:
        return False
    adj = {n: set() for n in nodes}
    for edge in edges:
        ends = tuple(edge)
        if len(ends) == 2 and all(e in adj for e in ends):
            adj[ends[0]].add(ends[1])
            adj[ends[1]].add(ends[0])
    seen = set()
    stack = [next(iter(sorted(nodes)))]
    while stack:
        n = stack.pop()
        if n in seen:
            continue
        seen.add(n)
        stack.extend(adj[n] - seen)
    return seen == nodes


def _require_valid(s: GridScenario, context: Context):
    problems = [f"{field}: {reason}" for field, reason in s.problems()]
    if s.context is not context:
        problems.insert(0, f"scenario context is {s.context.value}, expected {context.value}")
    if problems:
        raise InvalidScenario(problems)


def full_region() -> ParameterRegion:
    return ParameterRegion({"p1": (0, 1), "p2": (0, 1)})


# ---------------------------------------------------------------------------
# Open context
# ---------------------------------------------------------------------------

def _cell_index(s: GridScenario, cell) -> int:
    return cell[1] * s.width + cell[0]


def _moves(s: GridScenario, cell):
    out = []
    for _, dx, dy in _DIRS:
        dest = (cell[0] + dx, cell[1] + dy)
        if s.in_bounds(dest):
            out.append(dest)
    return out


def encode_open(s: GridScenario, cs: CompositeState) -> int:
    ncells = s.width * s.height
    mode_bit = 0 if cs.mode is Mode.FLYING else 1
    return (_cell_index(s, cs.uav_pos) * 2 + mode_bit) * ncells + _cell_index(s, cs.robot_pos)


def decode_open(state: int, s: GridScenario) -> CompositeState:
    ncells = s.width * s.height
    if not (0 <= state < 2 * ncells * ncells):
        raise OutOfRange(state, 2 * ncells * ncells)
    robot = state % ncells
    rest = state // ncells
    mode = Mode.GROUNDED if rest % 2 else Mode.FLYING
    uav = rest // 2
    return CompositeState(
        uav_pos=(uav % s.width, uav // s.width),
        mode=mode,
        robot_pos=(robot % s.width, robot // s.width),
    )


def build_open(s: GridScenario, region: ParameterRegion = None) -> PMDP:
    """Compose UAV motion, robot motion, and communication status over the
    whole grid; state space is cells x {Flying, Grounded} x cells."""
    _require_valid(s, Context.OPEN)
    region = region or full_region()
    ncells = s.width * s.height
    n = 2 * ncells * ncells
    p1, p2 = Var("p1"), Var("p2")

    # One distinct expression per (branch, robot fan-out); shared instances
    # keep instantiation cheap.
    lose = {k: scaled(p1, Fraction(1, k)) for k in range(1, 6)}
    keep = {k: scaled(one_minus(p1), Fraction(1, k)) for k in range(1, 6)}
    up = {k: scaled(p2, Fraction(1, k)) for k in range(1, 6)}
    down = {k: scaled(one_minus(p2), Fraction(1, k)) for k in range(1, 6)}

    enabled = [None] * n
    crash, goal = set(), set()
    for uav in s.cells():
        for robot in s.cells():
            r_supp = _moves(s, robot)
            k = len(r_supp)
            fly_id = encode_open(s, CompositeState(uav, Mode.FLYING, robot))
            gnd_id = encode_open(s, CompositeState(uav, Mode.GROUNDED, robot))

            acts = []
            for dest in _moves(s, uav):
                support = []
                for r2 in r_supp:
                    support.append((encode_open(s, CompositeState(dest, Mode.FLYING, r2)), keep[k]))
                    support.append((encode_open(s, CompositeState(dest, Mode.GROUNDED, r2)), lose[k]))
                acts.append(ParametricDistribution(support))
            enabled[fly_id] = tuple(acts)

            support = []
            for r2 in r_supp:
                support.append((encode_open(s, CompositeState(uav, Mode.FLYING, r2)), up[k]))
                support.append((encode_open(s, CompositeState(uav, Mode.GROUNDED, r2)), down[k]))
            enabled[gnd_id] = (ParametricDistribution(support),)

            if uav == robot:
                crash.add(gnd_id)
            if uav == s.goal:
                goal.add(fly_id)
                if uav != robot:
                    goal.add(gnd_id)

    return PMDP(
        state_count=n,
        initial=encode_open(s, CompositeState(s.uav_start, Mode.FLYING, s.robot_start)),
        enabled=enabled,
        labels={"crash": crash, "goal": goal},
        region=region,
    )


# ---------------------------------------------------------------------------
# Rooftop (landing-zone) context
# ---------------------------------------------------------------------------

def _rooftop_tables(s: GridScenario):
    roofs = sorted(s.rooftops, key=lambda c: _cell_index(s, c))
    streets = sorted((c for c in s.cells() if c not in s.rooftops),
                     key=lambda c: _cell_index(s, c))
    return roofs, streets


_MODE_CODE = {Mode.FLYING: 0, Mode.GROUNDED: 1, Mode.DELIVERED: 2}
_MODE_FROM = {v: k for k, v in _MODE_CODE.items()}


def encode_rooftop(s: GridScenario, cs: CompositeState) -> int:
    roofs, streets = _rooftop_tables(s)
    u = roofs.index(cs.uav_pos)
    r = streets.index(cs.robot_pos)
    return (u * 3 + _MODE_CODE[cs.mode]) * len(streets) + r


def decode_rooftop(state: int, s: GridScenario) -> CompositeState:
    roofs, streets = _rooftop_tables(s)
    n = 3 * len(roofs) * len(streets)
    if not (0 <= state < n):
        raise OutOfRange(state, n)
    r = state % len(streets)
    rest = state // len(streets)
    return CompositeState(
        uav_pos=roofs[rest // 3],
        mode=_MODE_FROM[rest % 3],
        robot_pos=streets[r],
    )


def build_rooftop(s: GridScenario, region: ParameterRegion = None) -> PMDP:
    """Landing-zone variant: the UAV transits between rooftops (atomic moves,
    loss grounds it at the destination rooftop), the robot walks streets, and
    Deliver is enabled beside the goal only while the robot is at Manhattan
    distance >= 2 from it."""
    _require_valid(s, Context.ROOFTOP)
    region = region or full_region()
    roofs, streets = _rooftop_tables(s)
    street_set = set(streets)
    n = 3 * len(roofs) * len(streets)
    p1, p2 = Var("p1"), Var("p2")

    neighbors = {r: set() for r in roofs}
    for edge in s.rooftop_edges:
        a, b = tuple(edge)
        neighbors[a].add(b)
        neighbors[b].add(a)

    max_fan = 5
    lose = {k: scaled(p1, Fraction(1, k)) for k in range(1, max_fan + 1)}
    keep = {k: scaled(one_minus(p1), Fraction(1, k)) for k in range(1, max_fan + 1)}
    up = {k: scaled(p2, Fraction(1, k)) for k in range(1, max_fan + 1)}
    down = {k: scaled(one_minus(p2), Fraction(1, k)) for k in range(1, max_fan + 1)}

    def street_moves(cell):
        out = []
        for _, dx, dy in _DIRS:
            dest = (cell[0] + dx, cell[1] + dy)
            if dest == cell or (s.in_bounds(dest) and dest in street_set):
                out.append(dest)
        return out

    enabled = [None] * n
    goal_states = set()
    for u in roofs:
        dests = [u] + sorted(neighbors[u], key=lambda c: _cell_index(s, c))
        can_deliver = _adjacent(u, s.goal)
        for r in streets:
            r_supp = street_moves(r)
            k = len(r_supp)
            fly_id = encode_rooftop(s, CompositeState(u, Mode.FLYING, r))
            gnd_id = encode_rooftop(s, CompositeState(u, Mode.GROUNDED, r))
            dlv_id = encode_rooftop(s, CompositeState(u, Mode.DELIVERED, r))

            acts = []
            for dest in dests:
                support = []
                for r2 in r_supp:
                    support.append((encode_rooftop(s, CompositeState(dest, Mode.FLYING, r2)), keep[k]))
                    support.append((encode_rooftop(s, CompositeState(dest, Mode.GROUNDED, r2)), lose[k]))
                acts.append(ParametricDistribution(support))
            if can_deliver and _manhattan(r, s.goal) >= 2:
                acts.append(ParametricDistribution([(dlv_id, const(1))]))
            enabled[fly_id] = tuple(acts)

            support = []
            for r2 in r_supp:
                support.append((encode_rooftop(s, CompositeState(u, Mode.FLYING, r2)), up[k]))
                support.append((encode_rooftop(s, CompositeState(u, Mode.GROUNDED, r2)), down[k]))
            enabled[gnd_id] = (ParametricDistribution(support),)

            enabled[dlv_id] = (ParametricDistribution([(dlv_id, const(1))]),)
            goal_states.add(dlv_id)

    return PMDP(
        state_count=n,
        initial=encode_rooftop(s, CompositeState(s.uav_start, Mode.FLYING, s.robot_start)),
        enabled=enabled,
        labels={"crash": set(), "goal": goal_states},
        region=region,
    )


def build(s: GridScenario, region: ParameterRegion = None) -> PMDP:
    if s.context is Context.OPEN:
        return build_open(s, region)
    return build_rooftop(s, region)


def decode(state: int, s: GridScenario) -> CompositeState:
    if s.context is Context.OPEN:
        return decode_open(state, s)
    return decode_rooftop(state, s)


def encode(s: GridScenario, cs: CompositeState) -> int:
    if s.context is Context.OPEN:
        return encode_open(s, cs)
    return encode_rooftop(s, cs)


def state_count(s: GridScenario) -> int:
    ncells = s.width * s.height
    if s.context is Context.OPEN:
        return 2 * ncells * ncells
    roofs, streets = _rooftop_tables(s)
    return 3 * len(roofs) * len(streets)


# ---------------------------------------------------------------------------
# JSON schema
# ---------------------------------------------------------------------------

def scenario_to_dict(s: GridScenario) -> dict:
    out = {
        "kind": s.context.value,
        "width": s.width,
        "height": s.height,
        "uav_start": list(s.uav_start),
        "robot_start": list(s.robot_start),
        "goal": list(s.goal),
    }
    if s.context is Context.ROOFTOP:
        out["rooftops"] = [list(c) for c in sorted(s.rooftops)]
        out["rooftop_edges"] = [[list(a), list(b)] for a, b in
                                sorted(tuple(sorted(e)) for e in s.rooftop_edges)]
    return out


def scenario_from_dict(d: dict) -> GridScenario:
    try:
        kind = Context(d.get("kind", "open"))
        s = GridScenario(
            width=int(d["width"]),
            height=int(d["height"]),
            uav_start=tuple(d["uav_start"]),
            robot_start=tuple(d["robot_start"]),
            goal=tuple(d["goal"]),
            context=kind,
            rooftops=frozenset(tuple(c) for c in d.get("rooftops", [])),
            rooftop_edges=frozenset(frozenset((tuple(a), tuple(b)))
                                    for a, b in d.get("rooftop_edges", [])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidScenario(f"bad scenario object: {exc}") from exc
    return s


# ---------------------------------------------------------------------------
# Reference layouts
# ---------------------------------------------------------------------------

def reference_open() -> GridScenario:
    """5x5 open-context reference layout (shipped as reference-open.json)."""
    return GridScenario(5, 5, uav_start=(0, 0), robot_start=(4, 4), goal=(4, 0))


def reference_rooftop() -> GridScenario:
    """5x5 rooftop preset: three corridor-linked rooftops over street grid."""
    return GridScenario(
        5, 5,
        uav_start=(1, 3), robot_start=(0, 0), goal=(4, 1),
        context=Context.ROOFTOP,
        rooftops=frozenset({(1, 3), (3, 3), (3, 1)}),
        rooftop_edges=frozenset({
            frozenset({(1, 3), (3, 3)}),
            frozenset({(3, 3), (3, 1)}),
        }),
    )
