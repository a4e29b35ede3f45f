import json

import pytest

from retimetable.decoder import decode
from retimetable.generator import GeneratorParams, generate_instance
from retimetable.model import (DanglingReferenceError, Edge, InfeasibleBaseError, Instance,
                               InstanceError, Node, Perturbation, Route, SpacingTable, Train,
                               apply_perturbation, dumps_instance, instance_to_dict,
                               load_instance, loads_instance, save_instance)
from retimetable.schedule import total_delay

from builders import one_train, with_perturbation

MINIMAL = {
    "nodes": [{"id": 0, "tracks": [0], "routes": [[None, 0, None]]}],
    "edges": [],
    "trains": [{"id": 0, "itinerary": [0], "base_arrivals": [0], "base_departures": [30],
                "base_routes": [0], "stop_min": [30], "stop_max": [60], "travel_min": []}],
    "spacing": {"edge_default": 10, "node_default": 10},
    "gates": [],
    "connections": [],
    "perturbation": None,
    "horizon": 1000,
}


def test_minimal_document():
    inst = loads_instance(json.dumps(MINIMAL))
    assert len(inst.trains) == 1
    assert inst.route_options[0] == ((0,),)


def test_unknown_node_is_a_reference_error():
    doc = json.loads(json.dumps(MINIMAL))
    doc["trains"][0]["itinerary"] = [99]
    with pytest.raises(DanglingReferenceError, match="99"):
        loads_instance(json.dumps(doc))


def test_parse_error_names_line_and_column():
    with pytest.raises(InstanceError, match=r"line 1, column \d+"):
        loads_instance('{"nodes": [')


def test_schema_error_names_field():
    doc = json.loads(json.dumps(MINIMAL))
    doc["trains"][0]["stop_min"] = ["soon"]
    with pytest.raises(InstanceError, match="trains/0/stop_min/0"):
        loads_instance(json.dumps(doc))


def test_infeasible_base_is_rejected_with_violations():
    doc = json.loads(json.dumps(MINIMAL))
    doc["trains"][0]["base_departures"] = [10]  # dwell 10 < stop_min 30
    with pytest.raises(InfeasibleBaseError) as info:
        loads_instance(json.dumps(doc))
    assert info.value.violations[0].kind == "StopBound"
    assert info.value.violations[0].slack == -20


def test_short_horizon_rejected():
    doc = json.loads(json.dumps(MINIMAL))
    doc["horizon"] = 35
    with pytest.raises(InstanceError, match="horizon"):
        loads_instance(json.dumps(doc))


def test_round_trip_generator_instance(tmp_path):
    inst = generate_instance(GeneratorParams(seed=42, trains=10, topology="cross"))
    path = tmp_path / "inst.json"
    save_instance(inst, path)
    back = load_instance(path)
    assert back == inst
    assert dumps_instance(back) == path.read_text()


def test_golden_instances_load():
    from importlib import resources
    for name in ("golden_overtake.json", "golden_cross.json"):
        text = resources.files("retimetable.data").joinpath(name).read_text()
        inst = loads_instance(text)
        assert inst.perturbation is not None


def test_zero_delay_keeps_floors():
    inst = with_perturbation(one_train(), 0, 0, node=0)
    p = apply_perturbation(inst)
    assert p.trains[0].floor_departures == inst.trains[0].base_departures
    assert p.trains[0].floor_arrivals == inst.trains[0].base_arrivals


def test_at_node_raises_departure_floor_only():
    inst = with_perturbation(one_train(), 0, 600, node=0)
    t = apply_perturbation(inst).trains[0]
    assert t.floor_departures == (10 + 600, 100)
    assert t.floor_arrivals == (0, 100)
    assert t.base_departures == (10, 100)


def test_on_leg_raises_arrival_floor_downstream():
    inst = with_perturbation(one_train(), 0, 45, leg=0)
    t = apply_perturbation(inst).trains[0]
    assert t.floor_arrivals == (0, 145)
    assert t.floor_departures == (10, 100)


def test_apply_twice_is_noop():
    inst = with_perturbation(one_train(), 0, 600, node=0)
    once = apply_perturbation(inst)
    assert apply_perturbation(once) is once


def test_delay_propagates_to_every_downstream_node():
    n = 4
    nodes = [Node(0, (100,), (Route(None, 100, 0),))]
    for i in range(1, n - 1):
        nodes.append(Node(i, (100 + i,), (Route(i - 1, 100 + i, i),)))
    nodes.append(Node(n - 1, (100 + n - 1,), (Route(n - 2, 100 + n - 1, None),)))
    edges = tuple(Edge(i, i, i + 1, (i,)) for i in range(n - 1))
    arr = (0, 100, 200, 300)
    # tight downstream: dwell fixed at zero, running times exact; the origin
    # platform may be held
    t = Train(0, tuple(range(n)), arr, arr, (0,) * n, (0,) * n, (3600, 0, 0, 0), (100,) * 3)
    inst = Instance(tuple(nodes), edges, (t,), SpacingTable(0, 0), (), 10_000,
                    Perturbation(0, 600, node=0))
    res = decode(apply_perturbation(inst), [0])
    assert total_delay(inst, res.schedule) == 600 * (n - 1)


def test_instance_document_keys():
    doc = instance_to_dict(one_train())
    assert set(doc) == {"nodes", "edges", "trains", "spacing", "gates", "connections",
                        "perturbation", "horizon"}


def test_spacing_overrides_round_trip():
    inst = one_train()
    from dataclasses import replace
    inst = replace(inst, spacing=SpacingTable(30, 30, {(0, 0, 0): 45}, {}))
    back = loads_instance(dumps_instance(inst))
    assert back.spacing.edge(0, 0, 0) == 45
    assert back.spacing.edge(0, 0, 1) == 30
