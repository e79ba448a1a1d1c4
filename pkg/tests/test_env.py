import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_insertion
from sddlab.env import (
    ACCEPT, TO_DEPOT, WAIT, Arrival, ConfigError, ContractError, GridCoord, LEGAL_TRANSITIONS,
    OrderStatus, SameDayEnv, ScenarioConfig, generate_order, insertion_cost, manhattan,
    move_toward, observe, observer_status, pending_route, quadrant_zones, reset, resolve_acceptance, step,
)


def cfg(**kw):
    base = dict(grid_size=5, expected_orders=0, n_slots=3)
    base.update(kw)
    return ScenarioConfig(**base)


def put_order(state, j, loc, t=None, deadline=None, reward=3.0, status=OrderStatus.OPEN, assignee=None):
    s = state.slots[j]
    s.location = GridCoord(*loc)
    s.request_time = state.t if t is None else t
    s.deadline = (s.request_time + 48) if deadline is None else deadline
    s.reward = reward
    s.status = status
    s.assignee = assignee
    return s


# manhattan / move_toward -----------------------------------------------------

@pytest.mark.parametrize("a,b,d", [((0, 0), (0, 0), 0), ((1, 2), (4, 6), 7), ((5, 5), (0, 9), 9)])
def test_manhattan_examples(a, b, d):
    assert manhattan(GridCoord(*a), GridCoord(*b)) == d


@pytest.mark.parametrize("src,dst,nxt", [((2, 3), (5, 3), (3, 3)), ((2, 3), (4, 6), (2, 4)), ((1, 1), (1, 1), (1, 1))])
def test_move_toward_examples(src, dst, nxt):
    assert move_toward(GridCoord(*src), GridCoord(*dst)) == GridCoord(*nxt)


coords = st.tuples(st.integers(0, 9), st.integers(0, 9)).map(lambda p: GridCoord(*p))


@given(coords, coords, coords)
def test_manhattan_metric(a, b, c):
    assert manhattan(a, b) == manhattan(b, a)
    assert manhattan(a, c) <= manhattan(a, b) + manhattan(b, c)


@given(coords, coords)
def test_move_toward_reduces_distance_by_one(a, b):
    n = move_toward(a, b)
    assert manhattan(a, n) == (0 if a == b else 1)
    assert manhattan(n, b) == max(manhattan(a, b) - 1, 0)


# insertion -------------------------------------------------------------------

def test_insertion_examples():
    depot = GridCoord(2, 2)
    assert insertion_cost([depot, GridCoord(0, 0), depot], GridCoord(4, 4)) == (8, 1)
    assert insertion_cost([depot, GridCoord(4, 2), depot], GridCoord(3, 2))[0] == 0
    assert insertion_cost([depot], GridCoord(0, 0))[0] == 8


@given(st.lists(coords, min_size=2, max_size=8), coords)
def test_insertion_matches_brute_force(route, stop):
    assert insertion_cost(route, stop) == brute_force_insertion(route, stop)


# reset / config ---------------------------------------------------------------

@pytest.mark.parametrize("g,depot", [(5, (2, 2)), (10, (4, 4))])
def test_reset_depot(g, depot):
    s = reset(cfg(grid_size=g))
    assert s.depot == GridCoord(*depot)
    assert s.t == 0
    assert all(v.position == s.depot for v in s.vehicles)
    assert all(sl.status == OrderStatus.INACTIVE for sl in s.slots)


def test_reset_fleet():
    s = reset(cfg(fleet_size=3))
    assert len(s.vehicles) == 3 and all(v.position == s.depot for v in s.vehicles)


@pytest.mark.parametrize("bad", [dict(t_c=200), dict(n_slots=0), dict(t_p=-1), dict(grid_size=1), dict(expected_orders=500)])
def test_reset_rejects_invalid_config(bad):
    with pytest.raises(ConfigError):
        reset(cfg(**bad))


def test_zone_shares_must_sum_to_one():
    zones = quadrant_zones(5, (0.3, 0.4, 0.2, 0.2), ((12, 8), (8, 6), (5, 3), (3, 1)))
    with pytest.raises(ConfigError):
        cfg(zones=zones).validate()


def test_zones_partition_grid():
    zones = quadrant_zones(10, (0.3, 0.4, 0.2, 0.1), ((12, 8), (8, 6), (5, 3), (3, 1)))
    for x in range(10):
        for y in range(10):
            assert sum(z.contains(x, y) for z in zones) == 1


def test_config_json_roundtrip():
    zones = quadrant_zones(5, (0.3, 0.4, 0.2, 0.1), ((12, 8), (8, 6), (5, 3), (3, 1)))
    c = cfg(zones=zones, t_c=100)
    doc = json.loads(c.to_json())
    assert doc["t_c"] == 100 and doc["grid_size"] == 5
    assert ScenarioConfig.from_json(c.to_json()) == c
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({**doc, "bogus": 1})


# order generation --------------------------------------------------------------

def test_arrival_probability():
    c = ScenarioConfig(expected_orders=30, t_c=144)
    assert c.arrival_probability == pytest.approx(30 / 144)
    assert c.arrival_probability == pytest.approx(0.2083, abs=1e-4)


def test_zero_expected_orders_never_generate():
    c = cfg(expected_orders=0)
    s = reset(c, seed=3)
    assert not s.arrivals
    for _ in range(c.t_e):
        out = step(s, [WAIT], c)
    assert not any(e.event == "OrderGenerated" for e in out.events)


def test_generated_order_fields():
    c = cfg(expected_orders=30)
    s = reset(c, seed=0)
    s.t = 120
    s.arrivals = {120: Arrival(120, GridCoord(0, 1), 3.0, None)}
    j, ev = generate_order(s, c)
    slot = s.slots[j]
    assert ev.event == "OrderGenerated"
    assert slot.status == OrderStatus.OPEN and slot.deadline == 144 and slot.reward == 3.0


def test_arrival_suppressed_when_slots_full():
    c = cfg(n_slots=1)
    s = reset(c)
    put_order(s, 0, (0, 0), status=OrderStatus.ASSIGNED_SELF_UNPICKED, assignee=0)
    s.arrivals = {0: Arrival(0, GridCoord(1, 1), 3.0, None)}
    j, ev = generate_order(s, c)
    assert j is None and ev.event == "OrderSuppressed"


def test_homogeneous_locations_avoid_depot():
    c = ScenarioConfig(grid_size=3, expected_orders=100, t_c=144)
    s = reset(c, seed=1)
    assert all(a.location != s.depot for a in s.arrivals.values())
    assert all(a.reward == 3.0 for a in s.arrivals.values())


def test_heterogeneous_rewards_inside_zone_range():
    zones = quadrant_zones(5, (0.3, 0.4, 0.2, 0.1), ((12, 8), (8, 6), (5, 3), (3, 1)))
    c = ScenarioConfig(grid_size=5, expected_orders=100, t_c=144, zones=zones)
    for seed in range(5):
        for a in reset(c, seed).arrivals.values():
            z = zones[a.zone]
            assert z.contains(*a.location)
            assert z.reward_min <= a.reward <= z.reward_max and a.reward == int(a.reward)


def test_arrival_stream_independent_of_actions():
    c = ScenarioConfig(expected_orders=30, n_slots=15)
    a, b = reset(c, seed=9), reset(c, seed=9)
    rng = np.random.default_rng(0)
    gen_a, gen_b = [], []
    for _ in range(c.t_e):
        oa = step(a, [WAIT], c)
        ob = step(b, [int(rng.integers(c.action_dim))], c)
        gen_a += [(e.t) for e in oa.events if e.event in ("OrderGenerated", "OrderSuppressed")]
        gen_b += [(e.t) for e in ob.events if e.event in ("OrderGenerated", "OrderSuppressed")]
    assert gen_a == gen_b


# acceptance conflicts ------------------------------------------------------------

def test_resolve_single_acceptor():
    c = cfg(fleet_size=2)
    s = reset(c)
    put_order(s, 0, (0, 0))
    assert resolve_acceptance(s, {1}) == 1


def test_resolve_tie_goes_to_lowest_id():
    c = cfg(fleet_size=2)
    s = reset(c)
    put_order(s, 0, (4, 0))
    assert resolve_acceptance(s, {0, 1}) == 0


def test_resolve_min_insertion_cost():
    c = cfg(fleet_size=2)
    s = reset(c)
    # vehicle 0 already holds (4,4) so (4,2) lies on its way; vehicle 1 holds (0,0)
    put_order(s, 1, (4, 4), status=OrderStatus.ASSIGNED_SELF_UNPICKED, assignee=0)
    put_order(s, 2, (0, 0), status=OrderStatus.ASSIGNED_SELF_UNPICKED, assignee=1)
    put_order(s, 0, (4, 2))
    costs = [insertion_cost(pending_route(s, i), GridCoord(4, 2))[0] for i in (0, 1)]
    assert costs == [0, 4]
    assert resolve_acceptance(s, {0, 1}) == 0


def test_resolve_without_open_order_raises():
    s = reset(cfg())
    with pytest.raises(ContractError):
        resolve_acceptance(s, {0})


def test_pending_route_en_route_ignores_onboard():
    c = cfg()
    s = reset(c)
    put_order(s, 0, (0, 0), status=OrderStatus.ONBOARD, assignee=0)
    put_order(s, 1, (4, 4), status=OrderStatus.ASSIGNED_SELF_UNPICKED, assignee=0)
    assert pending_route(s, 0) == [s.depot, GridCoord(0, 0), GridCoord(4, 4), s.depot]
    s.vehicles[0].position = GridCoord(1, 2)
    assert pending_route(s, 0) == [s.depot, GridCoord(4, 4), s.depot]


# step ---------------------------------------------------------------------------

def test_accept_reward_and_lifecycle():
    c = cfg()
    s = reset(c)
    put_order(s, 0, (2, 0))
    rewards = []
    out = step(s, [ACCEPT], c)
    rewards.append(out.rewards[0])
    assert out.rewards == [1.0]
    assert s.slots[0].status == OrderStatus.ASSIGNED_SELF_UNPICKED
    # t=1 loads at the depot, t=2..3 drive two cells, t=4 delivers
    for _ in range(4):
        out = step(s, [3], c)
        rewards.append(out.rewards[0])
    assert [e.event for e in out.events] == ["Delivery"]
    assert rewards == [1.0, 0.0, 0.0, 0.0, 2.0]
    assert s.slots[0].status == OrderStatus.DELIVERED
    step(s, [WAIT], c)
    assert s.slots[0].status == OrderStatus.INACTIVE


def test_accept_without_open_order_penalised():
    c = cfg()
    s = reset(c)
    assert step(s, [ACCEPT], c).rewards == [-5.0]


def test_deadline_clipped_to_horizon():
    c = cfg(expected_orders=30)
    s = reset(c)
    s.t = 120
    s.arrivals = {120: Arrival(120, GridCoord(0, 0), 3.0, None)}
    j, _ = generate_order(s, c)
    assert s.slots[j].deadline == 144


def test_open_order_expires_when_not_accepted():
    c = cfg()
    s = reset(c)
    put_order(s, 0, (0, 0))
    out = step(s, [WAIT], c)
    assert s.slots[0].status == OrderStatus.INACTIVE
    assert "OrderExpired" in [e.event for e in out.events] and out.rewards == [0.0]


def test_invalid_move_penalised_and_stays():
    c = cfg()
    s = reset(c)
    out = step(s, [3], c)
    assert out.rewards == [-5.0] and s.vehicles[0].position == s.depot


def test_move_to_depot_and_wait():
    c = cfg()
    s = reset(c)
    s.vehicles[0].position = GridCoord(0, 2)
    step(s, [TO_DEPOT], c)
    assert s.vehicles[0].position == GridCoord(1, 2)
    step(s, [WAIT], c)
    assert s.vehicles[0].position == GridCoord(1, 2)


def test_deadline_miss_penalty():
    c = cfg()
    s = reset(c)
    put_order(s, 0, (0, 0), t=0, deadline=2, status=OrderStatus.ONBOARD, assignee=0)
    s.vehicles[0].position = GridCoord(4, 4)
    total = 0.0
    for _ in range(3):
        out = step(s, [WAIT], c)
        total += out.rewards[0]
    assert total == -5.0 and s.slots[0].status == OrderStatus.INACTIVE


def test_episode_end_penalty_off_depot():
    c = cfg(t_e=3)
    s = reset(c)
    s.vehicles[0].position = GridCoord(0, 0)
    for _ in range(2):
        assert not step(s, [WAIT], c).done
    out = step(s, [WAIT], c)
    assert out.done and out.rewards == [-5.0] and s.t == c.t_e
    with pytest.raises(ContractError):
        step(s, [WAIT], c)


def test_wrong_action_count_raises():
    c = cfg(fleet_size=2)
    with pytest.raises(ContractError):
        step(reset(c), [WAIT], c)


def test_episode_has_exactly_horizon_steps():
    c = ScenarioConfig(expected_orders=5, n_slots=5)
    s = reset(c, 4)
    n = 0
    while True:
        n += 1
        if step(s, [WAIT], c).done:
            break
    assert n == 144


# observation ------------------------------------------------------------------------

def test_observation_length():
    assert ScenarioConfig(fleet_size=3, n_slots=10).obs_dim == 97
    c = cfg(fleet_size=3, n_slots=10)
    assert observe(reset(c), 0, c).shape == (97,)


def test_observation_empty_world_slots():
    c = cfg(fleet_size=2)
    o = observe(reset(c), 1, c)
    blocks = o[1 + 2 * 2:].reshape(c.n_slots, 9)
    expected = np.zeros(9)
    expected[2] = 1.0  # one-hot index 0 is INACTIVE
    assert np.array_equal(blocks, np.tile(expected, (c.n_slots, 1)))


def test_observation_is_observer_relative():
    c = cfg(fleet_size=2)
    s = reset(c)
    put_order(s, 0, (0, 0), status=OrderStatus.ASSIGNED_SELF_UNPICKED, assignee=1)
    onehot = lambda o: int(np.argmax(o[5 + 2:5 + 8])) - 1  # noqa: E731
    assert onehot(observe(s, 0, c)) == OrderStatus.ASSIGNED_OTHER
    assert onehot(observe(s, 1, c)) == OrderStatus.ASSIGNED_SELF_UNPICKED
    s.slots[0].status = OrderStatus.ONBOARD
    assert onehot(observe(s, 1, c)) == OrderStatus.ONBOARD


def test_observation_padding_for_larger_layout():
    c = cfg(fleet_size=2, obs_fleet=4)
    assert c.obs_dim == 1 + 8 + 9 * c.n_slots
    o = observe(reset(c), 0, c)
    assert o[3:5].tolist() == pytest.approx([0.4, 0.4])  # the other real vehicle, at the depot
    assert o[5:9].tolist() == [-1.0] * 4
    with pytest.raises(ConfigError):
        cfg(fleet_size=3, obs_fleet=2).validate()


def reference_observation(state, i, c):
    """Feature vector written out field by field."""
    g = c.grid_size
    me = state.vehicles[i]
    out = [state.t / c.t_e, me.position.x / g, me.position.y / g]
    for v in state.vehicles:
        if v.id != i:
            out += [v.position.x / g, v.position.y / g]
    out += [-1.0, -1.0] * (c.observed_fleet - c.fleet_size)
    for sl in state.slots:
        st = observer_status(sl, i)
        flags = [0.0] * 6
        flags[int(st) + 1] = 1.0
        if st == OrderStatus.INACTIVE:
            out += [0.0, 0.0, *flags, 0.0]
        else:
            out += [sl.location.x / g, sl.location.y / g, *flags, max(sl.deadline - state.t, 0) / c.delta]
    return np.array(out, dtype=np.float32)


@pytest.mark.parametrize("m,obs_fleet", [(1, None), (3, None), (2, 5)])
def test_observation_matches_field_by_field_reference(m, obs_fleet):
    c = ScenarioConfig(fleet_size=m, expected_orders=30, n_slots=6, obs_fleet=obs_fleet)
    rng = np.random.default_rng(m)
    s = reset(c, 4)
    buf = np.zeros(c.obs_dim, dtype=np.float32)
    for _ in range(c.t_e):
        for i in range(m):
            want = reference_observation(s, i, c)
            assert np.array_equal(observe(s, i, c), want)
            assert np.array_equal(observe(s, i, c, buf), want)
        acts = [ACCEPT if rng.random() < 0.3 else int(rng.integers(c.action_dim)) for _ in range(m)]
        if step(s, acts, c).done:
            break


def test_env_wrapper_shapes():
    c = ScenarioConfig(fleet_size=2, expected_orders=5, n_slots=5)
    env = SameDayEnv(c)
    obs = env.reset(1)
    assert obs.shape == (2, c.obs_dim) and obs.dtype == np.float32
    obs, rewards, done, events = env.step([WAIT, WAIT])
    assert len(rewards) == 2 and not done


# fuzzed invariants -------------------------------------------------------------------

def legal_step(st0, st1, refilled):
    """One step may free a slot and then refill it with a new arrival."""
    if refilled:
        return st1 == OrderStatus.OPEN and (st0 == OrderStatus.INACTIVE or (st0, OrderStatus.INACTIVE) in LEGAL_TRANSITIONS)
    return st0 == st1 or (st0, st1) in LEGAL_TRANSITIONS


def run_random_episode(c, seed):
    rng = np.random.default_rng(seed)
    s = reset(c, seed)
    trace = []
    while True:
        acts = [int(a) for a in rng.integers(c.action_dim, size=c.fleet_size)]
        out = step(s, acts, c)
        trace.append((tuple(out.rewards), tuple(out.events), tuple(v.position for v in s.vehicles)))
        if out.done:
            return trace


def test_determinism_over_random_episodes():
    c = ScenarioConfig(fleet_size=2, expected_orders=30, n_slots=15)
    for seed in range(10):
        assert run_random_episode(c, seed) == run_random_episode(c, seed)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 3), st.sampled_from([3, 5, 10]), st.sampled_from([5, 30]))
def test_random_play_invariants(seed, m, g, orders):
    c = ScenarioConfig(grid_size=g, fleet_size=m, expected_orders=orders, n_slots=5)
    rng = np.random.default_rng(seed)
    s = reset(c, seed)
    positive = 0.0
    generated = 0.0
    while True:
        before = [(sl.status, sl.assignee) for sl in s.slots]
        pos = [v.position for v in s.vehicles]
        out = step(s, [int(a) for a in rng.integers(c.action_dim, size=m)], c)
        refilled = {e.slot for e in out.events if e.event == "OrderGenerated"}
        for j, ((st0, _), sl) in enumerate(zip(before, s.slots)):
            assert legal_step(st0, sl.status, j in refilled)
            assert (sl.assignee is None) == (sl.status in (OrderStatus.INACTIVE, OrderStatus.OPEN))
        for p0, v in zip(pos, s.vehicles):
            assert manhattan(p0, v.position) <= 1
            assert 0 <= v.position.x < g and 0 <= v.position.y < g
        assert sum(sl.status == OrderStatus.OPEN for sl in s.slots) <= 1
        positive += sum(r for e in out.events for r in [e.reward] if r > 0)
        generated += sum(s.slots[e.slot].reward for e in out.events if e.event == "OrderGenerated")
        assert positive <= generated + 1e-9
        if out.done:
            break
    assert s.t == c.t_e
    assert math.isfinite(positive)
