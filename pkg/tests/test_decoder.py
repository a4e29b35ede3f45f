import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from retimetable.decoder import (DecodeResult, DecoderConfig, decode, penalized_fitness,
                                 penalty_constants, request_kick, resolve_forward)
from retimetable.generator import GeneratorParams, generate_instance
from retimetable.model import (Instance, Node, Perturbation, Route, SpacingTable, Train,
                               apply_perturbation)
from retimetable.motifs import lock_motif, shuttle_motif
from retimetable.oracle import best_permutation_exhaustive
from retimetable.schedule import Schedule
from retimetable.validate import validate_schedule

from builders import one_train, pair_on_edge, with_perturbation


@pytest.fixture(scope="module")
def small_instances():
    out = []
    for topo in ("line", "cross", "star"):
        for seed in range(2):
            inst = generate_instance(GeneratorParams(topology=topo, seed=seed, trains=8,
                                                     nodes=6, connection_fraction=0.5))
            out.append(apply_perturbation(inst))
    return out


def test_single_train_unperturbed_is_base():
    inst = one_train()
    res = decode(inst, [0])
    assert res.complete
    assert res.schedule == inst.base_schedule()
    assert penalized_fitness(res, inst) == 0


def test_follower_shifted_by_violated_headway():
    # leader delayed 70 s: follower's base departure is now 30 s inside the headway
    inst = apply_perturbation(with_perturbation(pair_on_edge(gap=60, d1=100), 0, 70, node=0))
    res = decode(inst, [0, 1])
    assert res.schedule[0].departures == (70, 170)
    assert res.schedule[1].departures[0] == 100 + 30
    assert res.schedule[1].arrivals == (100, 200 + 30)


def test_locked_order_kicks_the_obstacle():
    inst = apply_perturbation(lock_motif())
    res = decode(inst, [1, 0])
    assert res.complete
    assert res.kick_counts == (0, 1)
    assert res.realized_order == (0, 1)
    assert validate_schedule(inst, res.schedule) == []
    _, best = best_permutation_exhaustive(inst)
    assert penalized_fitness(res, inst) == best == min(
        penalized_fitness(decode(inst, p), inst) for p in ([0, 1], [1, 0]))


def test_obstacle_at_kick_limit_leaves_current_train_out():
    inst = apply_perturbation(lock_motif())
    res = decode(inst, [1, 0], DecoderConfig(kick_limit=0))
    assert res.unscheduled == {0}
    assert set(res.schedule.entries) == {1}
    assert res.realized_order == (1,)
    assert validate_schedule(inst, res.schedule) == []


def test_kick_limit_bounds_every_scheduled_train(small_instances):
    rng = np.random.default_rng(5)
    for inst in small_instances:
        for limit in (0, 1, 2):
            for _ in range(10):
                res = decode(inst, rng.permutation(len(inst.trains)), DecoderConfig(kick_limit=limit))
                for c in res.schedule.entries:
                    assert res.kick_counts[c] <= limit
                assert validate_schedule(inst, res.schedule) == []


def test_resolve_forward():
    assert resolve_forward(100, 90, 20, 1000) == 110
    assert resolve_forward(200, 90, 20, 1000) == 200
    assert resolve_forward(100, 990, 20, 1000) is None


def test_request_kick():
    assert request_kick(3, [0, 0, 0, 4], 5) == 3
    assert request_kick(3, [0, 0, 0, 5], 5) is None


def _stacked_node(windows, floor, dwell, gap):
    """One node with one inside track; trains 0.. sit there for ``windows``,
    the last train needs ``dwell`` seconds from ``floor`` on."""
    node = Node(0, (0,), (Route(None, 0, None),))
    trains = []
    for c, (a, d) in enumerate(windows):
        trains.append(Train(c, (0,), (a,), (d,), (0,), (d - a,), (d - a,), ()))
    c = len(windows)
    trains.append(Train(c, (0,), (floor,), (floor + dwell,), (0,), (dwell,), (dwell,), ()))
    return Instance((node,), (), tuple(trains), SpacingTable(0, gap), (), 100_000)


def _first_free_slot(windows, floor, dwell, gap):
    t = floor
    while True:
        if all(t >= d + gap or a >= t + dwell + gap for a, d in windows):
            return t
        t += 1


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 400), st.integers(0, 60)), min_size=1, max_size=6),
       st.integers(0, 300), st.integers(0, 40), st.integers(0, 20))
def test_chained_conflicts_reach_first_free_slot(raw, floor, dwell, gap):
    # disjoint, well-separated windows so the placed trains are consistent
    windows, t = [], 0
    for start, length in raw:
        t += start + gap + 1
        windows.append((t, t + length))
        t += length
    inst = _stacked_node(windows, floor, dwell, gap)
    n = len(windows)
    res = decode(inst, list(range(n + 1)))
    assert res.complete
    assert res.schedule[n].arrivals[0] == _first_free_slot(windows, floor, dwell, gap)


def _two_route_node(conflict_on_route0):
    """Follower at node 1 may use inside track 2 (route 0) or 3 (route 1)."""
    from retimetable.model import Edge
    nodes = (Node(0, (1,), (Route(None, 1, 0),)),
             Node(1, (2, 3), (Route(0, 2, None), Route(0, 3, None))))
    edges = (Edge(0, 0, 1, (0,)),)
    # leader sits on track 2 (or 3) at node 1 from 100 to 300
    lead = Train(0, (0, 1), (0, 100), (0, 300), (0, 0 if conflict_on_route0 else 1),
                 (0, 200), (0, 200), (100,))
    follow = Train(1, (0, 1), (50, 150), (50, 150), (0, 0), (0, 0), (0, 600), (100,))
    return Instance(nodes, edges, (lead, follow), SpacingTable(50, 30), (), 5000)


def test_free_route_beats_conflicted_route():
    inst = _two_route_node(conflict_on_route0=True)
    res = decode(inst, [0, 1], DecoderConfig(record_trace=True))
    fits = [f for c, k, f in res.trace if c == 1 and k == 1][0]
    by_route = {r: d for r, d, _ in fits}
    assert by_route[0] > by_route[1]
    assert res.schedule[1].routes[1] == 1
    assert res.schedule[1].departures[1] == 150


def test_exact_tie_between_routes():
    from retimetable.model import Edge
    nodes = (Node(0, (1,), (Route(None, 1, 0),)),
             Node(1, (2, 3), (Route(0, 2, None), Route(0, 3, None))))
    edges = (Edge(0, 0, 1, (0,)),)
    t = Train(0, (0, 1), (0, 100), (0, 100), (0, 1), (0, 0), (10, 10), (100,))
    inst = Instance(nodes, edges, (t,), SpacingTable(5, 5), (), 1000)
    res = decode(inst, [0])
    assert res.schedule[0].routes == (0, 0)


def test_penalty_formula():
    class Fake:
        trains = [None] * 10
        max_itinerary = 5
        horizon = 10_000
    assert penalty_constants(Fake) == (500_000, 10_000)
    res = DecodeResult(Schedule(), (), (0,) * 10, frozenset({3, 7}))
    assert penalized_fitness(res, Fake) == 520_000


def test_delay_sum_example():
    # one train 600 s late at each of its nodes, nothing else
    inst = one_train()
    base = inst.base_schedule()[0]
    late = Schedule({0: type(base)(tuple(a + 600 for a in base.arrivals),
                                   tuple(d + 600 for d in base.departures), base.routes)})
    res = DecodeResult(late, (0,), (0,), frozenset())
    assert penalized_fitness(res, inst) == 1200


def test_incomplete_always_worse_than_complete(small_instances):
    for inst in small_instances:
        p_base, p_unit = penalty_constants(inst)
        worst_complete = sum(len(t.itinerary) * inst.horizon - sum(t.base_arrivals)
                             for t in inst.trains)
        assert p_base + p_unit > worst_complete


def test_successor_waits_for_predecessor():
    inst = apply_perturbation(shuttle_motif())
    res = decode(inst, [1, 0])
    assert res.complete
    assert res.realized_order == (0, 1)
    assert res.kick_counts == (0, 1)  # the deferral counts as a kick
    assert res.schedule[1].departures[0] >= res.schedule[0].arrivals[-1] + 200
    assert validate_schedule(inst, res.schedule) == []


def test_literal_connection_mode():
    inst = apply_perturbation(shuttle_motif())
    cfg = DecoderConfig(connection_mode="literal")
    res = decode(inst, [0, 1], cfg)
    bad = validate_schedule(inst, res.schedule, connection_mode="literal")
    assert bad == []
    if res.complete:
        assert res.schedule[1].departures[0] == res.schedule[0].departures[-1]


def test_invalid_permutation():
    with pytest.raises(ValueError):
        decode(one_train(), [1])
    with pytest.raises(ValueError):
        DecoderConfig(connection_mode="x")


def test_deterministic(small_instances):
    inst = small_instances[0]
    perm = np.random.default_rng(1).permutation(len(inst.trains))
    a, b = decode(inst, perm), decode(inst, perm)
    assert a.schedule == b.schedule and a.kick_counts == b.kick_counts
    assert a.realized_order == b.realized_order and a.steps == b.steps


def _final_insertion(trace, c, m):
    rows = [(k, fits) for cc, k, fits in trace if cc == c]
    return rows[-m:]


def test_per_node_greediness(small_instances):
    rng = np.random.default_rng(2)
    for inst in small_instances:
        for _ in range(5):
            res = decode(inst, rng.permutation(len(inst.trains)),
                         DecoderConfig(record_trace=True))
            for c, tt in res.schedule.entries.items():
                m = len(inst.trains[c].itinerary)
                rows = _final_insertion(res.trace, c, m)
                assert [k for k, _ in rows] == list(range(m))
                for k, fits in rows:
                    free = [(d, r) for r, d, kicks in fits if kicks == []]
                    pool = free or [(d, r) for r, d, kicks in fits if kicks]
                    assert (tt.departures[k], tt.routes[k]) == min(pool)


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.sampled_from(["line", "cross", "star"]), st.integers(0, 50), st.integers(0, 2**32 - 1))
def test_complete_decodes_are_feasible(topology, seed, perm_seed):
    inst = apply_perturbation(generate_instance(GeneratorParams(
        topology=topology, seed=seed, trains=6, nodes=5, connection_fraction=0.4)))
    perm = np.random.default_rng(perm_seed).permutation(len(inst.trains))
    res = decode(inst, perm)
    assert validate_schedule(inst, res.schedule) == []
    assert set(res.realized_order) == set(res.schedule.entries)
    assert res.complete == (not res.unscheduled)
    for c, tt in res.schedule.entries.items():
        t = inst.trains[c]
        assert all(a >= a0 for a, a0 in zip(tt.arrivals, t.base_arrivals))
        assert all(d >= d0 for d, d0 in zip(tt.departures, t.base_departures))


def test_decoder_terminates_within_bound(small_instances):
    for inst in small_instances:
        for perm in itertools.islice(itertools.permutations(range(len(inst.trains))), 20):
            res = decode(inst, perm)
            n = len(inst.trains)
            insertions = len(res.realized_order) + res.total_kicks + len(res.unscheduled)
            assert insertions <= (DecoderConfig().kick_limit + 1) * n * 2
