import xml.etree.ElementTree as ET

import pytest

from retimetable.decoder import decode
from retimetable.diagram import PathError, emit_spacetime_svg, train_points
from retimetable.model import apply_perturbation
from retimetable.motifs import overtake_motif

from builders import one_train

NS = "{http://www.w3.org/2000/svg}"


def polylines(svg, group):
    root = ET.fromstring(svg.encode())
    g = root.find(f"{NS}g[@id='schedule-{group}']")
    return [[tuple(map(float, p.split(","))) for p in pl.get("points").split()]
            for pl in g.findall(f"{NS}polyline")]


def test_one_train_monotone_polyline():
    inst = one_train()
    svg = emit_spacetime_svg(inst, [inst.base_schedule()])
    root = ET.fromstring(svg.encode())
    assert root.get("version") == "1.1"
    (line,) = polylines(svg, 0)
    xs = [x for x, _ in line]
    ys = [y for _, y in line]
    assert xs == sorted(xs) and ys == sorted(ys)
    assert root.find(f"{NS}g[@id='schedule-1']") is None


def test_base_and_reconstructed_diverge_at_perturbation():
    inst = apply_perturbation(overtake_motif())
    base = inst.base_schedule()
    new = decode(inst, (1, 0)).schedule
    # slow train, delayed when leaving node 0
    pts_base = train_points(inst, 0, base[0], (0, 1, 2))[0]
    pts_new = train_points(inst, 0, new[0], (0, 1, 2))[0]
    same = [a == b for a, b in zip(pts_base, pts_new)]
    # arrival at node 0 agrees; the departure from node 0 is the first difference
    assert same.index(False) == 1
    svg = emit_spacetime_svg(inst, [base, new], trains=[0])
    (b,), (n,) = polylines(svg, 0), polylines(svg, 1)
    assert b[0] == n[0] and b[1] != n[1]
    assert 'stroke-dasharray' in svg


def test_empty_selection_gives_axes():
    inst = overtake_motif()
    svg = emit_spacetime_svg(inst, [inst.base_schedule()], trains=[])
    root = ET.fromstring(svg.encode())
    assert root.find(f"{NS}g[@id='axes']") is not None
    assert polylines(svg, 0) == []


def test_path_errors():
    inst = overtake_motif()
    sched = [inst.base_schedule()]
    for path in ([0, 2], [], [0, 9], [0, 1, 0]):
        with pytest.raises(PathError):
            emit_spacetime_svg(inst, sched, path=path)


def test_train_must_be_in_every_schedule():
    inst = apply_perturbation(overtake_motif())
    base = inst.base_schedule()
    from retimetable.schedule import Schedule
    with pytest.raises(ValueError):
        emit_spacetime_svg(inst, [base, Schedule({0: base[0]})], trains=[1])


def test_run_broken_off_path():
    inst = overtake_motif()
    runs = train_points(inst, 1, inst.base_schedule()[1], (1, 2))
    assert len(runs) == 1 and [p for _, p in runs[0]] == [0, 0, 1, 1]
