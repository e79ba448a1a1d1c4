"""Grid-world same-day-delivery simulator.

Orders arrive at random cells, vehicles accept them, fetch the parcel at the
central depot and drive it to the customer before its deadline. Every time
step is a decision point for every vehicle.

The module is functional at its core (:func:`reset`, :func:`step`,
:func:`observe`); :class:`SameDayEnv` wraps those in the usual
``reset()/step()`` object API.
"""
from __future__ import annotations

import copy
import dataclasses
import json
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import NamedTuple, Sequence

import numpy as np

from .kernels import insertion_scan


class GridCoord(NamedTuple):
    x: int
    y: int


class OrderStatus(IntEnum):
    INACTIVE = -1
    OPEN = 0
    ASSIGNED_OTHER = 1
    ASSIGNED_SELF_UNPICKED = 2
    ONBOARD = 3
    DELIVERED = 4


# legal global transitions; ASSIGNED_OTHER only exists in per-agent views
LEGAL_TRANSITIONS = {
    (OrderStatus.INACTIVE, OrderStatus.OPEN),
    (OrderStatus.OPEN, OrderStatus.INACTIVE),
    (OrderStatus.OPEN, OrderStatus.ASSIGNED_SELF_UNPICKED),
    (OrderStatus.OPEN, OrderStatus.ASSIGNED_OTHER),
    (OrderStatus.ASSIGNED_SELF_UNPICKED, OrderStatus.ONBOARD),
    (OrderStatus.ASSIGNED_SELF_UNPICKED, OrderStatus.INACTIVE),
    (OrderStatus.ONBOARD, OrderStatus.DELIVERED),
    (OrderStatus.ONBOARD, OrderStatus.INACTIVE),
    (OrderStatus.DELIVERED, OrderStatus.INACTIVE),
}

WAIT = 0
ACCEPT = 1
TO_DEPOT = 2

EVENT_KINDS = (
    "OrderGenerated", "OrderSuppressed", "OrderAccepted", "OrderExpired", "Pickup",
    "Delivery", "DeadlineMissed", "InvalidAction", "EpisodeEnd",
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ZoneSpec:
    """Axis-aligned block of cells ``[x0, x1) x [y0, y1)`` with its own demand."""

    x0: int
    x1: int
    y0: int
    y1: int
    probability_share: float
    reward_max: int
    reward_min: int

    def contains(self, x: int, y: int) -> bool:
        return self.x0 <= x < self.x1 and self.y0 <= y < self.y1


def quadrant_zones(grid_size: int, shares, reward_ranges) -> tuple[ZoneSpec, ...]:
    """Four quadrants in row-major order: top-left, top-right, bottom-left, bottom-right.

    ``reward_ranges`` are ``(max, min)`` pairs.
    """
    h = grid_size // 2
    boxes = [(0, h, 0, h), (h, grid_size, 0, h), (0, h, h, grid_size), (h, grid_size, h, grid_size)]
    return tuple(
        ZoneSpec(x0, x1, y0, y1, float(s), int(rmax), int(rmin))
        for (x0, x1, y0, y1), s, (rmax, rmin) in zip(boxes, shares, reward_ranges)
    )


@dataclass(frozen=True)
class ScenarioConfig:
    grid_size: int = 5
    fleet_size: int = 1
    expected_orders: float = 5.0
    n_slots: int = 15
    t_e: int = 144
    t_c: int | None = None  # None: orders may arrive until t_e
    delta: int = 48
    t_p: int = 1
    t_d: int = 1
    t_a: int = 1
    r: float = 3.0
    pi1: float = 5.0
    pi2: float = 5.0
    pi3: float = 5.0
    zones: tuple[ZoneSpec, ...] | None = None
    seed: int = 0
    # fleet size the observation is laid out for; a larger value pads the
    # other-vehicle block so one network fits several fleet sizes
    obs_fleet: int | None = None

    @property
    def cutoff(self) -> int:
        return self.t_e if self.t_c is None else self.t_c

    @property
    def arrival_probability(self) -> float:
        return self.expected_orders / self.cutoff if self.cutoff > 0 else 0.0

    @property
    def action_dim(self) -> int:
        # wait, accept, depot, then one move per slot (slot j -> action j + 3)
        return self.n_slots + 3

    @property
    def obs_dim(self) -> int:
        return 1 + 2 * self.observed_fleet + 9 * self.n_slots

    @property
    def observed_fleet(self) -> int:
        return self.fleet_size if self.obs_fleet is None else self.obs_fleet

    @property
    def depot(self) -> GridCoord:
        c = (self.grid_size - 1) // 2
        return GridCoord(c, c)

    @property
    def max_reward(self) -> float:
        if self.zones:
            return float(max(z.reward_max for z in self.zones))
        return float(self.r)

    def validate(self) -> None:
        if self.grid_size < 2:
            raise ConfigError("grid_size must be at least 2")
        if self.fleet_size < 1:
            raise ConfigError("fleet_size must be at least 1")
        if self.observed_fleet < self.fleet_size:
            raise ConfigError("obs_fleet cannot be smaller than fleet_size")
        if self.n_slots < 1:
            raise ConfigError("n_slots must be at least 1")
        if self.t_e < 1 or self.delta < 0:
            raise ConfigError("t_e must be positive and delta non-negative")
        if self.cutoff > self.t_e or self.cutoff < 0:
            raise ConfigError("t_c must lie in [0, t_e]")
        if min(self.t_p, self.t_d, self.t_a) < 0:
            raise ConfigError("service times must be non-negative")
        if self.expected_orders < 0 or self.arrival_probability > 1:
            raise ConfigError("expected_orders must give an arrival probability in [0, 1]")
        if self.r <= 0:
            raise ConfigError("r must be positive")
        if self.zones:
            total = sum(z.probability_share for z in self.zones)
            if not math.isclose(total, 1.0, abs_tol=1e-9):
                raise ConfigError(f"zone shares sum to {total}, not 1")
            for z in self.zones:
                if not 0 < z.probability_share <= 1:
                    raise ConfigError("zone probability_share must lie in (0, 1]")
                if not 0 < z.reward_min <= z.reward_max:
                    raise ConfigError("zone rewards need 0 < reward_min <= reward_max")
            for x in range(self.grid_size):
                for y in range(self.grid_size):
                    hits = sum(z.contains(x, y) for z in self.zones)
                    if hits != 1:
                        raise ConfigError(f"cell ({x}, {y}) is covered by {hits} zones")
            d = self.depot
            for z in self.zones:
                if (z.x1 - z.x0) * (z.y1 - z.y0) - int(z.contains(d.x, d.y)) < 1:
                    raise ConfigError("every zone needs a non-depot cell")

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        if self.zones is not None:
            out["zones"] = [dataclasses.asdict(z) for z in self.zones]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        data = dict(data)
        zones = data.pop("zones", None)
        if zones is not None:
            data["zones"] = tuple(ZoneSpec(**z) for z in zones)
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        return cls.from_dict(json.loads(text))


@dataclass(slots=True)
class OrderSlot:
    location: GridCoord = GridCoord(0, 0)
    request_time: int = -1
    deadline: int = -1
    reward: float = 0.0
    status: OrderStatus = OrderStatus.INACTIVE
    assignee: int | None = None
    zone: int | None = None
    delivered_at: int = -1


@dataclass(slots=True)
class VehicleState:
    id: int
    position: GridCoord
    busy_until: int = 0


class Arrival(NamedTuple):
    """One pre-drawn exogenous order arrival."""

    t: int
    location: GridCoord
    reward: float
    zone: int | None


@dataclass
class WorldState:
    t: int
    vehicles: list[VehicleState]
    slots: list[OrderSlot]
    depot: GridCoord
    arrivals: dict[int, Arrival] = field(default_factory=dict)
    seed: int = 0

    def copy(self) -> "WorldState":
        return copy.deepcopy(self)

    def open_slot(self) -> int | None:
        for j, s in enumerate(self.slots):
            if s.status == OrderStatus.OPEN:
                return j
        return None


@dataclass(frozen=True, slots=True)
class Event:
    t: int
    event: str
    vehicle: int | None = None
    slot: int | None = None
    reward: float = 0.0

    def to_dict(self) -> dict:
        return {"t": self.t, "event": self.event, "vehicle": self.vehicle,
                "slot": self.slot, "reward": self.reward}


@dataclass
class StepOutcome:
    next_state: WorldState
    rewards: list[float]
    events: list[Event]
    done: bool


class ContractError(RuntimeError):
    pass


def manhattan(a: GridCoord, b: GridCoord) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def move_toward(src: GridCoord, dst: GridCoord) -> GridCoord:
    """One 4-neighbour step toward ``dst``; the axis with the larger gap moves first, x on ties."""
    dx = dst[0] - src[0]
    dy = dst[1] - src[1]
    if dx == 0 and dy == 0:
        return GridCoord(src[0], src[1])
    if abs(dx) >= abs(dy):
        return GridCoord(src[0] + (1 if dx > 0 else -1), src[1])
    return GridCoord(src[0], src[1] + (1 if dy > 0 else -1))


def route_length(route: Sequence[GridCoord]) -> int:
    return sum(manhattan(route[i - 1], route[i]) for i in range(1, len(route)))


def insertion_cost(route: Sequence[GridCoord], new_stop: GridCoord) -> tuple[int, int]:
    """Cheapest way to splice ``new_stop`` into ``route``.

    ``route`` runs from its start location to the depot, both included; a
    one-element route is read as start -> start. Returns the added length and
    the index the new stop would take (earliest index on ties).
    """
    if len(route) == 0:
        raise ValueError("route needs at least a start location")
    if len(route) == 1:
        route = [route[0], route[0]]
    xs = np.fromiter((p[0] for p in route), dtype=np.int64, count=len(route))
    ys = np.fromiter((p[1] for p in route), dtype=np.int64, count=len(route))
    return insertion_scan(xs, ys, int(new_stop[0]), int(new_stop[1]))


def pending_route(state: WorldState, vehicle_id: int) -> list[GridCoord]:
    """The route an acceptance conflict is priced against.

    A vehicle at the depot counts every order it holds; a vehicle out on the
    road only counts the parcels still waiting at the depot. Either way the
    new parcel starts from the depot, so the route is depot -> stops -> depot,
    stops in order of request.
    """
    v = state.vehicles[vehicle_id]
    at_depot = v.position == state.depot
    keep = (OrderStatus.ASSIGNED_SELF_UNPICKED, OrderStatus.ONBOARD) if at_depot \
        else (OrderStatus.ASSIGNED_SELF_UNPICKED,)
    held = sorted(
        (s.request_time, j) for j, s in enumerate(state.slots)
        if s.assignee == vehicle_id and s.status in keep
    )
    return [state.depot] + [state.slots[j].location for _, j in held] + [state.depot]


def resolve_acceptance(state: WorldState, accepting_vehicles) -> int:
    """Winner among simultaneous acceptors: least insertion cost, then lowest id."""
    j = state.open_slot()
    if j is None:
        raise ContractError("no open order to resolve")
    if not accepting_vehicles:
        raise ContractError("no accepting vehicles")
    target = state.slots[j].location
    return min(
        sorted(accepting_vehicles),
        key=lambda i: (insertion_cost(pending_route(state, i), target)[0], i),
    )


def _draw_arrivals(config: ScenarioConfig, rng: np.random.Generator) -> dict[int, Arrival]:
    """Pre-draw the whole day's arrival stream so it cannot depend on actions."""
    g = config.grid_size
    depot = config.depot
    p = config.arrival_probability
    last = min(config.cutoff, config.t_e - 1)
    cells = [GridCoord(x, y) for y in range(g) for x in range(g) if (x, y) != depot]
    zone_cells = None
    shares = None
    if config.zones:
        zone_cells = [[c for c in cells if z.contains(c.x, c.y)] for z in config.zones]
        shares = np.array([z.probability_share for z in config.zones])
    out = {}
    if p <= 0:
        return out
    # fixed draw count per step keeps the stream aligned across configs
    for t in range(1, last + 1):
        u = rng.random()
        if zone_cells is None:
            loc = cells[int(rng.integers(len(cells)))]
            reward, zone = float(config.r), None
        else:
            zone = int(rng.choice(len(zone_cells), p=shares))
            pool = zone_cells[zone]
            loc = pool[int(rng.integers(len(pool)))]
            z = config.zones[zone]
            reward = float(rng.integers(z.reward_min, z.reward_max + 1))
        if u < p:
            out[t] = Arrival(t, loc, reward, zone)
    return out


def reset(config: ScenarioConfig, seed: int | None = None) -> WorldState:
    """Fresh day: clock at 0, vehicles at the depot, every slot inactive."""
    config.validate()
    seed = config.seed if seed is None else int(seed)
    rng = np.random.default_rng(seed)
    depot = config.depot
    return WorldState(
        t=0,
        vehicles=[VehicleState(i, depot) for i in range(config.fleet_size)],
        slots=[OrderSlot() for _ in range(config.n_slots)],
        depot=depot,
        arrivals=_draw_arrivals(config, rng),
        seed=seed,
    )


def generate_order(state: WorldState, config: ScenarioConfig) -> tuple[int | None, Event | None]:
    """Reveal the arrival scheduled for ``state.t``, if any, into a free slot."""
    arrival = state.arrivals.get(state.t)
    if arrival is None:
        return None, None
    for j, s in enumerate(state.slots):
        if s.status == OrderStatus.INACTIVE:
            s.location = arrival.location
            s.request_time = state.t
            s.deadline = min(state.t + config.delta, config.t_e)
            s.reward = arrival.reward
            s.status = OrderStatus.OPEN
            s.assignee = None
            s.zone = arrival.zone
            s.delivered_at = -1
            return j, Event(state.t, "OrderGenerated", None, j, 0.0)
    return None, Event(state.t, "OrderSuppressed", None, None, 0.0)


def _clear(slot: OrderSlot) -> None:
    slot.status = OrderStatus.INACTIVE
    slot.assignee = None


def step(state: WorldState, actions: Sequence[int], config: ScenarioConfig) -> StepOutcome:
    """Advance one decision point. Mutates ``state`` and returns it as ``next_state``."""
    m = config.fleet_size
    if len(actions) != m:
        raise ContractError(f"expected {m} actions, got {len(actions)}")
    if state.t >= config.t_e:
        raise ContractError("episode already finished")
    n_act = config.action_dim
    t = state.t
    slots = state.slots
    vehicles = state.vehicles
    rewards = [0.0] * m
    events: list[Event] = []
    busy = [v.busy_until > t for v in vehicles]
    acts = [int(a) for a in actions]
    for a in acts:
        if not 0 <= a < n_act:
            raise ContractError(f"action {a} outside [0, {n_act})")

    # movement targets are judged against the state before anything happens
    valid_target = [True] * m
    for i, a in enumerate(acts):
        if a >= 3 and not busy[i]:
            s = slots[a - 3]
            if s.assignee != i or s.status not in (OrderStatus.ASSIGNED_SELF_UNPICKED, OrderStatus.ONBOARD):
                valid_target[i] = False

    # (a) acceptance
    open_j = state.open_slot()
    acceptors = [i for i in range(m) if acts[i] == ACCEPT and not busy[i]]
    if acceptors:
        if open_j is None:
            for i in acceptors:
                rewards[i] -= config.pi1
                events.append(Event(t, "InvalidAction", i, None, -config.pi1))
        else:
            winner = resolve_acceptance(state, acceptors)
            s = slots[open_j]
            s.status = OrderStatus.ASSIGNED_SELF_UNPICKED
            s.assignee = winner
            gain = s.reward / 3.0
            rewards[winner] += gain
            events.append(Event(t, "OrderAccepted", winner, open_j, gain))
            if config.t_a > 0:
                vehicles[winner].busy_until = t + config.t_a

    # (b, c) services preempt movement, then movement
    for i, v in enumerate(vehicles):
        if busy[i] or v.busy_until > t:
            continue
        a = acts[i]
        if a >= 3 and not valid_target[i]:
            rewards[i] -= config.pi1
            events.append(Event(t, "InvalidAction", i, a - 3, -config.pi1))
        serviced = False
        for j, s in enumerate(slots):
            if s.assignee == i and s.status == OrderStatus.ONBOARD and s.location == v.position:
                s.status = OrderStatus.DELIVERED
                s.delivered_at = t
                gain = 2.0 * s.reward / 3.0
                rewards[i] += gain
                events.append(Event(t, "Delivery", i, j, gain))
                v.busy_until = t + config.t_d
                serviced = config.t_d > 0
                break
        else:
            if v.position == state.depot:
                for j, s in enumerate(slots):
                    if s.assignee == i and s.status == OrderStatus.ASSIGNED_SELF_UNPICKED:
                        s.status = OrderStatus.ONBOARD
                        events.append(Event(t, "Pickup", i, j, 0.0))
                        v.busy_until = t + config.t_p
                        serviced = config.t_p > 0
                        break
        if serviced:
            continue
        if a == TO_DEPOT:
            v.position = move_toward(v.position, state.depot)
        elif a >= 3 and valid_target[i]:
            v.position = move_toward(v.position, slots[a - 3].location)

    # (d) unaccepted arrivals leave silently
    if open_j is not None and slots[open_j].status == OrderStatus.OPEN:
        _clear(slots[open_j])
        events.append(Event(t, "OrderExpired", None, open_j, 0.0))

    # exogenous phase
    state.t = t + 1
    nt = state.t
    done = nt >= config.t_e
    for j, s in enumerate(slots):
        if s.status in (OrderStatus.ASSIGNED_SELF_UNPICKED, OrderStatus.ONBOARD) and (s.deadline < nt or done):
            rewards[s.assignee] -= config.pi2
            events.append(Event(nt, "DeadlineMissed", s.assignee, j, -config.pi2))
            _clear(s)
        elif s.status == OrderStatus.DELIVERED and s.delivered_at < t:
            _clear(s)
    if nt <= config.cutoff and not done:
        _, ev = generate_order(state, config)
        if ev is not None:
            events.append(ev)
    if done:
        for i, v in enumerate(vehicles):
            pen = 0.0 if v.position == state.depot else -config.pi3
            rewards[i] += pen
            events.append(Event(nt, "EpisodeEnd", i, None, pen))
    return StepOutcome(state, rewards, events, done)


def observer_status(slot: OrderSlot, vehicle_id: int) -> OrderStatus:
    if slot.status in (OrderStatus.ASSIGNED_SELF_UNPICKED, OrderStatus.ONBOARD) and slot.assignee != vehicle_id:
        return OrderStatus.ASSIGNED_OTHER
    return slot.status


def observe(state: WorldState, vehicle_id: int, config: ScenarioConfig, out: np.ndarray | None = None) -> np.ndarray:
    """Egocentric feature vector of length ``1 + 2m + 9 * n_slots``.

    ``m`` is ``config.observed_fleet``; positions of vehicles beyond the real
    fleet read as -1.
    """
    if not 0 <= vehicle_id < config.fleet_size:
        raise ContractError(f"no vehicle {vehicle_id}")
    if out is None:
        out = np.zeros(config.obs_dim, dtype=np.float32)
    elif out.dtype != np.float32 or not out.flags.c_contiguous:
        out[:] = observe(state, vehicle_id, config)
        return out
    else:
        out.fill(0.0)
    # item writes through a memoryview are several times cheaper than numpy
    # indexing, and only the non-zero features are written
    m = out.data
    g = float(config.grid_size)
    t = state.t
    me = state.vehicles[vehicle_id]
    m[0] = t / config.t_e
    m[1] = me.position[0] / g
    m[2] = me.position[1] / g
    k = 3
    for v in state.vehicles:
        if v.id != vehicle_id:
            m[k] = v.position[0] / g
            m[k + 1] = v.position[1] / g
            k += 2
    for _ in range(config.observed_fleet - config.fleet_size):
        m[k] = m[k + 1] = -1.0
        k += 2
    delta = config.delta
    # plain-int status codes: enum member lookups dominate this loop otherwise
    for s in state.slots:
        st = int(s.status)
        if st != -1:
            if (st == 2 or st == 3) and s.assignee != vehicle_id:
                st = 1
            x, y = s.location
            m[k] = x / g
            m[k + 1] = y / g
            m[k + 8] = max(s.deadline - t, 0) / delta if delta else 0.0
        m[k + 3 + st] = 1.0
        k += 9
    return out


class SameDayEnv:
    """Object wrapper: ``obs = env.reset(seed)``; ``obs, rewards, done, events = env.step(actions)``."""

    def __init__(self, config: ScenarioConfig):
        config.validate()
        self.config = config
        self.state: WorldState | None = None
        self._obs = np.zeros((config.fleet_size, config.obs_dim), dtype=np.float32)

    def reset(self, seed: int | None = None) -> np.ndarray:
        self.state = reset(self.config, seed)
        return self.observations()

    def observations(self) -> np.ndarray:
        for i in range(self.config.fleet_size):
            observe(self.state, i, self.config, self._obs[i])
        return self._obs.copy()

    def step(self, actions):
        outcome = step(self.state, actions, self.config)
        return self.observations(), outcome.rewards, outcome.done, outcome.events
