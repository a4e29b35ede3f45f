import pytest

from retimetable.generator import GeneratorParams, generate_instance
from retimetable.model import Instance, SpacingTable, apply_perturbation
from retimetable.motifs import shuttle_motif
from retimetable.schedule import Schedule, TrainTimes
from retimetable.validate import (KIND_ORDER, Violation, count_constraints, format_report,
                                  validate_schedule)

from builders import gate_pair, one_train, pair_on_edge


def _edit(sched, c, **changes):
    tt = sched[c]
    fields = {"arrivals": tt.arrivals, "departures": tt.departures, "routes": tt.routes}
    fields.update({k: tuple(v) for k, v in changes.items()})
    entries = dict(sched.entries)
    entries[c] = TrainTimes(**fields)
    return Schedule(entries)


@pytest.mark.parametrize("topology", ["line", "cross", "star"])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_base_timetable_is_clean(topology, seed):
    inst = generate_instance(GeneratorParams(topology=topology, seed=seed, trains=12))
    assert validate_schedule(inst, inst.base_schedule()) == []


def test_stop_bound_violation_slack():
    inst = one_train()
    sched = _edit(inst.base_schedule(), 0, departures=(9, 100))  # stop_min 10 at node 0
    bad = validate_schedule(inst, sched)
    kinds = [(v.kind, v.slack) for v in bad]
    assert ("StopBound", -1) in kinds


def test_edge_spacing_violation_slack():
    inst = pair_on_edge(gap=60, d1=55)
    bad = validate_schedule(inst, inst.base_schedule())
    assert [(v.kind, v.slack) for v in bad] == [("EdgeSpacing", -5)]
    assert bad[0].subjects == ((0, 0), (1, 0))


def test_edge_spacing_either_order_is_fine():
    inst = pair_on_edge(gap=60, d1=60)
    assert validate_schedule(inst, inst.base_schedule()) == []
    # the follower overtakes on the track: departs after, arrives before
    sched = _edit(inst.base_schedule(), 1, arrivals=(60, 90), departures=(60, 90))
    bad = validate_schedule(inst, sched)
    assert any(v.kind == "EdgeSpacing" for v in bad)


def test_node_spacing_same_inside_track():
    inst = pair_on_edge(gap=60, d1=60, inside=(2,))
    sched = inst.base_schedule()
    # both on inside track 2 at node 1: train 0 there [100,100], train 1 at 160
    assert validate_schedule(inst, sched) == []
    sched = _edit(sched, 0, arrivals=(0, 100), departures=(0, 150))
    bad = [v for v in validate_schedule(inst, sched) if v.kind == "NodeSpacing"]
    # 160 - 150 - 30 = -20, the other order is far worse
    assert [v.slack for v in bad] == [-20]


def _gate_schedule(inst):
    return Schedule({
        0: TrainTimes((0, 100, 250), (0, 150, 250), (0, 0, 0)),
        1: TrainTimes((0, 300, 450), (0, 350, 450), (0, 1, 0)),
    })


@pytest.mark.parametrize("cat, expected", [
    ("II", 300 - 100 - 260),  # a' >= a + eps
    ("IO", 350 - 100 - 260),  # d' >= a + eps
    ("OI", 300 - 150 - 260),  # a' >= d + eps
    ("OO", 350 - 150 - 260),  # d' >= d + eps
])
def test_gate_categories_bind_arrival_or_departure(cat, expected):
    eps = {k: 0 for k in ("II", "IO", "OI", "OO")}
    eps[cat] = 260
    inst = gate_pair(eps, cat[0], cat[1])
    bad = validate_schedule(inst, _gate_schedule(inst))
    assert [(v.kind, v.detail, v.slack) for v in bad] == [("Gate", cat, expected)]


def test_gate_satisfied_when_spaced():
    eps = {k: 100 for k in ("II", "IO", "OI", "OO")}
    inst = gate_pair(eps, "O", "I")
    assert validate_schedule(inst, _gate_schedule(inst)) == []


def test_turnaround_connection():
    inst = shuttle_motif()
    base = inst.base_schedule()
    assert validate_schedule(inst, base) == []
    early = _edit(base, 1, arrivals=(100, 350), departures=(250, 350))
    bad = validate_schedule(inst, early)
    assert [(v.kind, v.slack) for v in bad if v.kind == "Connection"] == [("Connection", -50)]


def test_turnaround_connection_platform():
    inst = shuttle_motif()
    # the only inside track at node 1 is shared, so any usable route is fine
    sched = _edit(inst.base_schedule(), 1, routes=(1, 1))
    assert validate_schedule(inst, sched) == []
    from dataclasses import replace
    from retimetable.model import Node, Route
    two = list(inst.nodes)
    two[1] = Node(1, (3, 6), inst.nodes[1].routes + (Route(None, 6, 0),))
    inst2 = replace(inst, nodes=tuple(two))
    bad = validate_schedule(inst2, _edit(inst.base_schedule(), 1, routes=(4, 1)))
    assert [(v.kind, v.detail) for v in bad] == [("Connection", "platform")]


def test_literal_connection_mode():
    inst = shuttle_motif()
    base = inst.base_schedule()
    bad = validate_schedule(inst, base, connection_mode="literal")
    kinds = sorted((v.kind, v.detail) for v in bad)
    # trip 2 leaves at 300, trip 1 at 100; routes differ; arrival 400 != 300 + 200
    assert kinds == [("Connection", "arrival"), ("Connection", "departure"),
                     ("Connection", "route")]
    with pytest.raises(ValueError):
        validate_schedule(inst, base, connection_mode="bogus")


def test_floor_violations_use_perturbed_instance():
    from builders import with_perturbation
    inst = with_perturbation(one_train(), 0, 100, node=0)
    pinst = apply_perturbation(inst)
    bad = validate_schedule(pinst, inst.base_schedule())
    assert [(v.kind, v.detail, v.slack) for v in bad] == [("InitialTime", "departure", -100)]


def test_speed_violation():
    inst = one_train()
    sched = _edit(inst.base_schedule(), 0, arrivals=(0, 90), departures=(10, 90))
    bad = validate_schedule(inst, sched)
    assert ("Speed", -10) in [(v.kind, v.slack) for v in bad]


def test_missing_route_is_reported_not_raised():
    inst = one_train()
    sched = _edit(inst.base_schedule(), 0, routes=(0, 7))
    bad = validate_schedule(inst, sched)
    assert [v.kind for v in bad] == ["Malformed"]
    sched = _edit(inst.base_schedule(), 0, arrivals=(0,))
    assert [v.kind for v in validate_schedule(inst, sched)] == ["Malformed"]


def test_horizon():
    inst = one_train(horizon=1000)
    sched = _edit(inst.base_schedule(), 0, arrivals=(0, 1100), departures=(10, 1100))
    bad = validate_schedule(inst, sched)
    assert [(v.kind, v.slack) for v in bad if v.kind == "Horizon"] == [("Horizon", -100)] * 2


def test_partial_schedule_only_checks_scheduled_trains():
    inst = pair_on_edge(gap=60, d1=55)
    partial = Schedule({0: inst.base_schedule()[0]})
    assert validate_schedule(inst, partial) == []


def test_order_is_canonical_and_slacks_negative():
    inst = generate_instance(GeneratorParams(seed=3, trains=12))
    sched = inst.base_schedule()
    shifted = Schedule({c: TrainTimes(tuple(a - 50 for a in tt.arrivals),
                                      tuple(d - 20 for d in tt.departures), tt.routes)
                        for c, tt in sched.entries.items()})
    bad = validate_schedule(inst, shifted)
    assert bad
    assert all(v.slack < 0 for v in bad)
    assert bad == sorted(bad, key=Violation.sort_key)
    assert [KIND_ORDER.index(v.kind) for v in bad] == sorted(KIND_ORDER.index(v.kind) for v in bad)
    assert validate_schedule(inst, shifted) == bad


def test_report_format():
    inst = pair_on_edge(gap=60, d1=55)
    text = format_report(validate_schedule(inst, inst.base_schedule()))
    lines = text.strip().splitlines()
    assert lines[-1] == "1 violations"
    assert lines[0].startswith("EdgeSpacing")
    assert format_report([]).strip() == "0 violations"


def test_count_constraints_one_train():
    counts = count_constraints(one_train())
    assert counts == {"InitialTime": 4, "StopBound": 2, "Speed": 1, "EdgeSpacing": 0,
                      "NodeSpacing": 0, "Connection": 0, "Gate": 0}


def test_count_constraints_empty():
    inst = Instance(one_train().nodes, one_train().edges, (), SpacingTable(), (), 100)
    assert set(count_constraints(inst).values()) == {0}


def test_count_constraints_shared_edge():
    counts = count_constraints(pair_on_edge())
    assert counts["EdgeSpacing"] == 4
    # one shared inside track at node 0, two candidate tracks at node 1
    assert counts["NodeSpacing"] == 2 * 3
