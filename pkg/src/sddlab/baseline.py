"""Exact accept-and-route baseline.

At every order arrival a single-vehicle routing model is solved: choose which
open orders to accept and the visiting sequence that maximises collected
reward minus travel cost, subject to pickup-before-delivery at the depot,
per-order deadlines and the end-of-day return. The model is solved exactly
by branch and bound: an outer search over accept flags, an inner
depth-first search over visiting sequences (see
:func:`sddlab.kernels.sequence_search`). Time propagation along the
sequence replaces the big-M precedence rows of the algebraic model; the
algebraic rows are re-checked in :func:`validate_solution`.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels
from .env import (
    ACCEPT, TO_DEPOT, WAIT, GridCoord, OrderStatus, ScenarioConfig, WorldState, manhattan,
)

V, P, D, T, R = "V", "P", "D", "T", "R"
INF = math.inf


class InstanceError(ValueError):
    pass


@dataclass
class RoutingInstance:
    """Node-indexed routing model for one vehicle.

    ``kinds[i]`` is one of V, P, D, T, R. D nodes are orders not yet on the
    vehicle (``accepted[i]`` marks the subset A already promised); T nodes
    are parcels on board. ``remaining_times[i]`` is the latest service start
    for D and T nodes, ``inf`` elsewhere.
    """

    kinds: list[str]
    dist: np.ndarray
    remaining_times: list[float]
    rewards: list[float]
    accepted: list[bool]
    locations: list[GridCoord] | None = None
    slots: list[int | None] | None = None
    travel_cost: float = 0.001
    travel_time: float = 1.0
    service_time: float = 1.0
    horizon_remaining: float = INF

    def __post_init__(self):
        self.dist = np.asarray(self.dist, dtype=np.float64)
        n = len(self.kinds)
        for name in ("remaining_times", "rewards", "accepted"):
            if len(getattr(self, name)) != n:
                raise InstanceError(f"{name} has {len(getattr(self, name))} entries for {n} nodes")
        if self.dist.shape != (n, n):
            raise InstanceError(f"dist must be {n}x{n}")
        for kind in (V, P, R):
            if self.kinds.count(kind) != 1:
                raise InstanceError(f"exactly one {kind} node required")
        if any(k not in (V, P, D, T, R) for k in self.kinds):
            raise InstanceError("unknown node kind")

    @property
    def v(self) -> int:
        return self.kinds.index(V)

    @property
    def p(self) -> int:
        return self.kinds.index(P)

    @property
    def r(self) -> int:
        return self.kinds.index(R)

    @property
    def d_nodes(self) -> list[int]:
        return [i for i, k in enumerate(self.kinds) if k == D]

    @property
    def a_nodes(self) -> list[int]:
        return [i for i, k in enumerate(self.kinds) if k == D and self.accepted[i]]

    @property
    def t_nodes(self) -> list[int]:
        return [i for i, k in enumerate(self.kinds) if k == T]

    def check(self) -> None:
        """Raise if the distance matrix or deadlines break the model's assumptions."""
        c = self.dist
        if not np.allclose(c, c.T) or np.any(np.diag(c) != 0) or np.any(c < 0):
            raise InstanceError("dist must be symmetric, non-negative, zero on the diagonal")
        via = c[:, :, None] + c[None, :, :]
        if np.any(c[:, None, :] > via + 1e-9):
            raise InstanceError("dist violates the triangle inequality")
        for i in self.d_nodes + self.t_nodes:
            if self.remaining_times[i] < 0:
                raise InstanceError(f"node {i} has negative remaining time")
        if any(self.accepted[i] for i, k in enumerate(self.kinds) if k != D):
            raise InstanceError("only D nodes can be pre-accepted")

    @classmethod
    def from_points(cls, kinds, locations, remaining_times, rewards, accepted, **kw) -> "RoutingInstance":
        locs = [GridCoord(int(x), int(y)) for x, y in locations]
        n = len(locs)
        dist = np.array([[manhattan(locs[i], locs[j]) for j in range(n)] for i in range(n)], dtype=np.float64)
        return cls(list(kinds), dist, [float(x) for x in remaining_times], [float(x) for x in rewards],
                   [bool(a) for a in accepted], locations=locs, **kw)

    def to_dict(self) -> dict:
        return {
            "kinds": list(self.kinds),
            "dist": self.dist.tolist(),
            "remaining_times": [None if math.isinf(x) else x for x in self.remaining_times],
            "rewards": list(self.rewards),
            "accepted": list(self.accepted),
            "locations": None if self.locations is None else [list(p) for p in self.locations],
            "slots": self.slots,
            "travel_cost": self.travel_cost,
            "travel_time": self.travel_time,
            "service_time": self.service_time,
            "horizon_remaining": None if math.isinf(self.horizon_remaining) else self.horizon_remaining,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RoutingInstance":
        data = dict(data)
        locations = data.pop("locations", None)
        if data.get("dist") is None:
            if locations is None:
                raise InstanceError("instance needs either dist or locations")
            inst = cls.from_points(
                data["kinds"], locations, [INF if x is None else x for x in data["remaining_times"]],
                data["rewards"], data["accepted"],
                **{k: data[k] for k in ("slots", "travel_cost", "travel_time", "service_time") if k in data},
                horizon_remaining=INF if data.get("horizon_remaining") is None else data["horizon_remaining"],
            )
            return inst
        return cls(
            kinds=list(data["kinds"]),
            dist=np.asarray(data["dist"], dtype=np.float64),
            remaining_times=[INF if x is None else float(x) for x in data["remaining_times"]],
            rewards=[float(x) for x in data["rewards"]],
            accepted=[bool(x) for x in data["accepted"]],
            locations=None if locations is None else [GridCoord(*p) for p in locations],
            slots=data.get("slots"),
            travel_cost=float(data.get("travel_cost", 0.001)),
            travel_time=float(data.get("travel_time", 1.0)),
            service_time=float(data.get("service_time", 1.0)),
            horizon_remaining=INF if data.get("horizon_remaining") is None else float(data["horizon_remaining"]),
        )


OPTIMAL = "optimal"
NEAR_OPTIMAL = "near_optimal"
INFEASIBLE = "infeasible"


@dataclass
class RoutingSolution:
    accept: dict[int, bool]
    route: list[int]
    visit_times: list[float]
    objective: float
    status: str = OPTIMAL
    lateness: float = 0.0
    nodes_explored: int = 0

    @property
    def near_optimal(self) -> bool:
        return self.status == NEAR_OPTIMAL

    def to_dict(self) -> dict:
        return {
            "accept": {str(k): v for k, v in sorted(self.accept.items())},
            "route": list(self.route),
            "visit_times": list(self.visit_times),
            "objective": self.objective,
            "status": self.status,
            "lateness": self.lateness,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RoutingSolution":
        return cls(
            accept={int(k): bool(v) for k, v in data["accept"].items()},
            route=[int(x) for x in data["route"]],
            visit_times=[float(x) for x in data["visit_times"]],
            objective=float(data["objective"]),
            status=data.get("status", OPTIMAL),
            lateness=float(data.get("lateness", 0.0)),
        )


@dataclass
class SolverConfig:
    travel_cost: float = 0.001
    time_limit: float = 10.0  # seconds per solve
    chunk: int = 200_000  # search expansions between wall-clock checks

    def __post_init__(self):
        if self.time_limit <= 0:
            raise ValueError("time_limit must be positive")
        if self.travel_cost < 0:
            raise ValueError("travel_cost must be non-negative")


def route_distance(instance: RoutingInstance, route: Sequence[int]) -> float:
    return float(sum(instance.dist[route[q - 1], route[q]] for q in range(1, len(route))))


def propagate_times(instance: RoutingInstance, route: Sequence[int], start: float) -> list[float]:
    """Earliest service start at every route position."""
    d, tt = instance.service_time, instance.travel_time
    times = [float(start)]
    for q in range(1, len(route)):
        times.append(times[-1] + d + instance.dist[route[q - 1], route[q]] * tt)
    return times


def objective_value(instance: RoutingInstance, accepted_nodes, distance: float) -> float:
    return math.fsum(instance.rewards[i] for i in accepted_nodes) - instance.travel_cost * distance


class _SeqResult(NamedTuple):
    found: bool
    complete: bool
    lateness: float
    distance: float
    route: list[int]
    expansions: int


def _sequence(inst: RoutingInstance, members: Sequence[int], n_new: int, wall_end: float,
              chunk: int, soft: bool = False) -> _SeqResult:
    """Shortest sequence through ``members`` (P among them) from V to R."""
    d_set = set(inst.d_nodes)
    p = inst.p
    rest = sorted((i for i in members if i != p), key=lambda i: (inst.remaining_times[i], i))
    order = [inst.v, p] + rest + [inst.r]
    k = len(order) - 2
    dist = np.ascontiguousarray(inst.dist[np.ix_(order, order)])
    deadline = np.array([inst.remaining_times[i] if inst.kinds[i] in (D, T) else INF for i in order])
    deadline[-1] = inst.horizon_remaining
    needs_pickup = np.array([i in d_set for i in order], dtype=np.bool_)
    use_memo = k <= kernels.MAX_MEMO_NODES
    size = (1 << k) * k if use_memo else 1
    memo_late = np.full(size, INF)
    memo_dist = np.full(size, INF)
    n = k + 2
    path = np.zeros(n, dtype=np.int64)
    cand = np.zeros(n, dtype=np.int64)
    cand[0] = 1
    dist_at = np.zeros(n)
    time_at = np.zeros(n)
    start = inst.service_time * n_new
    time_at[0] = start
    late_at = np.zeros(n)
    mask_at = np.zeros(n, dtype=np.int64)
    depth = np.zeros(1, dtype=np.int64)
    best_path = np.zeros(n + 1, dtype=np.int64)
    best_val = np.array([INF, INF, 0.0])
    complete = False
    expansions = 0
    while True:
        status = kernels.sequence_search(
            dist, deadline, needs_pickup, 1, start, inst.service_time, inst.travel_time,
            soft, use_memo, path, cand, dist_at, time_at, late_at, mask_at, depth,
            best_path, best_val, memo_late, memo_dist, chunk)
        expansions += chunk
        if status == kernels.SEARCH_DONE:
            complete = True
            break
        if time.perf_counter() >= wall_end:
            break
    found = best_val[2] > 0
    route = [order[int(q)] for q in best_path[: int(best_val[2])]] if found else []
    return _SeqResult(found, complete, float(best_val[0]), float(best_val[1]), route, expansions)


def solve_exact(instance: RoutingInstance, config: SolverConfig | None = None) -> RoutingSolution:
    """Optimal accept flags and route for ``instance``.

    Branches on the accept flag of every not-yet-accepted order (include
    first, largest reward first) and solves the sequencing problem at each
    leaf. A subtree is cut when its reward bound cannot beat the incumbent
    or when an order cannot be reached before its deadline even on its own.
    If the wall-clock budget runs out the incumbent is returned with status
    ``near_optimal``. If even the promised orders cannot all be served in
    time, the route with least total lateness is returned with status
    ``infeasible``.
    """
    cfg = config or SolverConfig(travel_cost=instance.travel_cost)
    wall_end = time.perf_counter() + cfg.time_limit
    inst = instance
    m = inst.travel_cost
    d, tt = inst.service_time, inst.travel_time
    vv, pp, rr = inst.v, inst.p, inst.r
    a_nodes = inst.a_nodes
    mandatory = [pp] + a_nodes + inst.t_nodes
    fresh = sorted((i for i in inst.d_nodes if not inst.accepted[i]), key=lambda i: (-inst.rewards[i], i))
    suffix = [0.0] * (len(fresh) + 1)
    for q in range(len(fresh) - 1, -1, -1):
        suffix[q] = suffix[q + 1] + inst.rewards[fresh[q]]
    c = inst.dist
    explored = 0
    timed_out = False
    best: tuple[float, list[int], list[int]] | None = None  # objective, chosen, route

    def dist_bound(members) -> float:
        return max((c[vv, i] + c[i, rr] for i in members), default=c[vv, rr])

    def reachable_alone(i: int, n_new: int) -> bool:
        arrive = d * n_new + 2 * d + (c[vv, pp] + c[pp, i]) * tt
        return arrive <= inst.remaining_times[i] and arrive + d + c[i, rr] * tt <= inst.horizon_remaining

    def leaf(chosen: list[int]) -> bool:
        nonlocal best, explored, timed_out
        res = _sequence(inst, mandatory + chosen, len(chosen), wall_end, cfg.chunk)
        explored += res.expansions
        if not res.complete:
            timed_out = True
        if res.found:
            obj = objective_value(inst, a_nodes + chosen, res.distance)
            if best is None or obj > best[0]:
                best = (obj, list(chosen), res.route)
        return res.found

    base_found = leaf([])
    if not base_found and not timed_out:
        res = _sequence(inst, mandatory, 0, time.perf_counter() + cfg.time_limit, cfg.chunk, soft=True)
        route = res.route
        return RoutingSolution(
            accept={i: inst.accepted[i] for i in inst.d_nodes},
            route=route,
            visit_times=propagate_times(inst, route, 0.0),
            objective=objective_value(inst, a_nodes, res.distance),
            status=INFEASIBLE,
            lateness=res.lateness,
            nodes_explored=explored + res.expansions,
        )

    def branch(q: int, chosen: list[int], chosen_reward: float) -> None:
        nonlocal timed_out
        if time.perf_counter() >= wall_end:
            timed_out = True
            return
        bound = (math.fsum(inst.rewards[i] for i in a_nodes) + chosen_reward + suffix[q]
                 - m * dist_bound(mandatory + chosen))
        if best is not None and bound <= best[0]:
            return
        if q == len(fresh):
            if chosen:
                leaf(chosen)
            return
        i = fresh[q]
        if reachable_alone(i, len(chosen) + 1):
            branch(q + 1, chosen + [i], chosen_reward + inst.rewards[i])
        branch(q + 1, chosen, chosen_reward)

    if fresh:
        branch(0, [], 0.0)

    if best is None:
        # budget ran out before any feasible sequence was found
        res = _sequence(inst, mandatory, 0, time.perf_counter() + cfg.time_limit, cfg.chunk, soft=True)
        return RoutingSolution(
            accept={i: inst.accepted[i] for i in inst.d_nodes},
            route=res.route,
            visit_times=propagate_times(inst, res.route, 0.0),
            objective=objective_value(inst, a_nodes, res.distance),
            status=INFEASIBLE if res.lateness > 0 else NEAR_OPTIMAL,
            lateness=res.lateness,
            nodes_explored=explored,
        )
    obj, chosen, route = best
    chosen_set = set(chosen)
    return RoutingSolution(
        accept={i: inst.accepted[i] or i in chosen_set for i in inst.d_nodes},
        route=route,
        visit_times=propagate_times(inst, route, d * len(chosen)),
        objective=obj,
        status=NEAR_OPTIMAL if timed_out else OPTIMAL,
        nodes_explored=explored,
    )


# -- independent algebraic check -------------------------------------------

# row order of the algebraic model; ``first`` reports the earliest violated row
CONSTRAINTS = (
    "objective", "leave_start", "pickup_visit", "order_visit", "onboard_visit", "single_return",
    "flow_conservation", "keep_accepted", "time_propagation", "pickup_first", "start_time", "deadline",
    "horizon",
)
_ORDER = {name: k for k, name in enumerate(CONSTRAINTS)}


@dataclass
class Violation:
    constraint: str
    message: str

    @property
    def sort_key(self):
        return (_ORDER.get(self.constraint, 99), self.message)


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def first(self) -> Violation | None:
        return min(self.violations, key=lambda v: v.sort_key) if self.violations else None

    def add(self, constraint: str, message: str) -> None:
        self.violations.append(Violation(constraint, message))


def big_m(instance: RoutingInstance) -> float:
    n = len(instance.kinds)
    span = float(instance.dist.max()) * instance.travel_time
    horizon = instance.horizon_remaining
    if math.isinf(horizon):
        horizon = instance.service_time * n + span * n + instance.service_time * n
    return horizon + instance.service_time * n + span


def validate_solution(instance: RoutingInstance, solution: RoutingSolution, tol: float = 1e-9) -> ValidationReport:
    """Check a solution against every row of the algebraic routing model.

    Works on the arc variables implied by ``solution.route`` and on the
    reported ``visit_times``; nodes off the route get ``B = 0``. Violations
    carry one of the labels in :data:`CONSTRAINTS`.
    """
    rep = ValidationReport()
    inst = instance
    route = list(solution.route)
    n = len(inst.kinds)
    d, tt = inst.service_time, inst.travel_time
    vv, pp, rr = inst.v, inst.p, inst.r
    counts = [route.count(i) for i in range(n)]
    y = {i: bool(solution.accept.get(i, False)) for i in inst.d_nodes}

    if not route or route[0] != vv or counts[vv] != 1:
        rep.add("leave_start", "route must leave the vehicle location exactly once, first")
    if counts[pp] != 1:
        rep.add("pickup_visit", f"depot pickup node visited {counts[pp]} times")
    for i in inst.d_nodes:
        if counts[i] != int(y[i]):
            rep.add("order_visit", f"order node {i}: visited {counts[i]} times, accept flag {int(y[i])}")
    for i in inst.t_nodes:
        if counts[i] != 1:
            rep.add("onboard_visit", f"on-board node {i} visited {counts[i]} times")
    if not route or route[-1] != rr or counts[rr] != 1:
        rep.add("single_return", "route must end with a single return to the depot")
    for i in range(n):
        if counts[i] > 1 and inst.kinds[i] in (P, D, T):
            rep.add("flow_conservation", f"flow through node {i} is not conserved")
    for i in inst.a_nodes:
        if not y[i]:
            rep.add("keep_accepted", f"previously accepted node {i} was dropped")

    times = list(solution.visit_times)
    if len(times) != len(route):
        rep.add("time_propagation", "visit_times do not match the route length")
        times = propagate_times(inst, route, d * sum(y[i] and not inst.accepted[i] for i in y))
    b = [0.0] * n
    for q, i in enumerate(route):
        b[i] = times[q]
    big = big_m(inst)
    x = np.zeros((n, n))
    for q in range(1, len(route)):
        x[route[q - 1], route[q]] = 1.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            lhs = b[i] + d + inst.dist[i, j] * tt - big * (1.0 - x[i, j])
            if lhs > b[j] + tol:
                rep.add("time_propagation", f"arc {i}->{j}: B_i + d + c_ij t - M(1 - x_ij) = {lhs:g} > B_j = {b[j]:g}")
    pos = {i: q for q, i in enumerate(route)}
    for j in inst.d_nodes:
        lhs = b[pp] + inst.dist[pp, j] * tt - big * (1.0 - float(y[j]))
        if lhs > b[j] + tol or (y[j] and j in pos and pp in pos and pos[pp] > pos[j]):
            rep.add("pickup_first", f"order node {j} served before its pickup at the depot")
    expected_start = d * sum(1 for i in inst.d_nodes if y[i] and not inst.accepted[i])
    if route and route[0] == vv and abs(b[vv] - expected_start) > tol:
        rep.add("start_time", f"start time {b[vv]:g} != d * new accepts = {expected_start:g}")
    for i in inst.d_nodes + inst.t_nodes:
        if counts[i] and b[i] > inst.remaining_times[i] + tol:
            rep.add("deadline", f"node {i} served at {b[i]:g} after its limit {inst.remaining_times[i]:g}")
    if counts[rr] and b[rr] > inst.horizon_remaining + tol:
        rep.add("horizon", f"return at {b[rr]:g} after end of day {inst.horizon_remaining:g}")
    expected_obj = objective_value(inst, [i for i in inst.d_nodes if y[i]], route_distance(inst, route))
    if abs(expected_obj - solution.objective) > 1e-9:
        rep.add("objective", f"objective {solution.objective!r} != reward - travel cost {expected_obj!r}")
    return rep


# -- environment glue -------------------------------------------------------

def build_instance(state: WorldState, vehicle_id: int, config: ScenarioConfig,
                   travel_cost: float = 0.001) -> RoutingInstance:
    """Routing model for one vehicle: the open order plus everything it holds."""
    veh = state.vehicles[vehicle_id]
    kinds, locs, rem, rew, acc, slots = [V, P], [veh.position, state.depot], [INF, INF], [0.0, 0.0], [False, False], [None, None]
    t = state.t
    for j, s in enumerate(state.slots):
        mine = s.assignee == vehicle_id
        if s.status == OrderStatus.OPEN or (mine and s.status == OrderStatus.ASSIGNED_SELF_UNPICKED):
            kinds.append(D)
            acc.append(s.status != OrderStatus.OPEN)
            rew.append(float(s.reward))
        elif mine and s.status == OrderStatus.ONBOARD:
            kinds.append(T)
            acc.append(False)
            rew.append(0.0)
        else:
            continue
        locs.append(s.location)
        rem.append(float(s.deadline - t))
        slots.append(j)
    kinds.append(R)
    locs.append(state.depot)
    rem.append(INF)
    rew.append(0.0)
    acc.append(False)
    slots.append(None)
    return RoutingInstance.from_points(
        kinds, locs, rem, rew, acc, slots=slots, travel_cost=travel_cost,
        travel_time=1.0, service_time=float(config.t_d), horizon_remaining=float(config.t_e - t),
    )


@dataclass
class Plan:
    instance: RoutingInstance
    solution: RoutingSolution

    def order_slots(self) -> set[int]:
        out = set()
        for i in self.solution.route:
            if self.instance.kinds[i] in (D, T):
                out.add(self.instance.slots[i])
        return out


def _own_orders(state: WorldState, vehicle_id: int) -> dict[int, OrderStatus]:
    return {
        j: s.status for j, s in enumerate(state.slots)
        if s.assignee == vehicle_id and s.status in (OrderStatus.ASSIGNED_SELF_UNPICKED, OrderStatus.ONBOARD)
    }


def _follow(state: WorldState, vehicle_id: int, plan: Plan) -> int:
    own = _own_orders(state, vehicle_id)
    unpicked = any(st == OrderStatus.ASSIGNED_SELF_UNPICKED for st in own.values())
    pos = state.vehicles[vehicle_id].position
    inst = plan.instance
    for i in plan.solution.route[1:]:
        kind = inst.kinds[i]
        if kind == P:
            if unpicked:
                return TO_DEPOT
        elif kind in (D, T):
            j = inst.slots[i]
            if j in own:
                return j + 3
        elif kind == R:
            return WAIT if pos == state.depot and not own else TO_DEPOT
    return WAIT if pos == state.depot else TO_DEPOT


def mip_policy_step(state: WorldState, vehicle_id: int, cached: Plan | None, config: ScenarioConfig,
                    solver: SolverConfig | None = None) -> tuple[int, Plan | None]:
    """One vehicle's action under the re-optimising routing policy.

    Re-solves whenever an order is open or the cached plan no longer covers
    exactly the orders the vehicle holds; otherwise follows the cached route.
    Returns the action and the plan to cache for the next decision point.
    """
    solver = solver or SolverConfig()
    own = _own_orders(state, vehicle_id)
    open_j = state.open_slot()
    if open_j is not None:
        inst = build_instance(state, vehicle_id, config, solver.travel_cost)
        sol = solve_exact(inst, solver)
        plan = Plan(inst, sol)
        node = inst.slots.index(open_j)
        if sol.accept.get(node, False):
            return ACCEPT, plan
        return _follow(state, vehicle_id, plan), plan
    if cached is None or cached.order_slots() != set(own):
        inst = build_instance(state, vehicle_id, config, solver.travel_cost)
        cached = Plan(inst, solve_exact(inst, solver))
    return _follow(state, vehicle_id, cached), cached


class MipPolicy:
    """Fleet wrapper around :func:`mip_policy_step` with one cached plan per vehicle."""

    name = "mip"

    def __init__(self, config: ScenarioConfig, solver: SolverConfig | None = None):
        self.config = config
        self.solver = solver or SolverConfig()
        self.plans: list[Plan | None] = [None] * config.fleet_size
        self.solves = 0
        self.near_optimal_solves = 0
        self.infeasible_solves = 0

    def reset(self) -> None:
        self.plans = [None] * self.config.fleet_size
        self.solves = self.near_optimal_solves = self.infeasible_solves = 0

    def act(self, state: WorldState) -> list[int]:
        actions = []
        for i in range(self.config.fleet_size):
            before = self.plans[i]
            a, plan = mip_policy_step(state, i, before, self.config, self.solver)
            if plan is not before and plan is not None:
                self.solves += 1
                self.near_optimal_solves += plan.solution.status == NEAR_OPTIMAL
                self.infeasible_solves += plan.solution.status == INFEASIBLE
            self.plans[i] = plan
            actions.append(a)
        return actions
