"""Space/time (train graph) diagrams as SVG.

Time runs left to right, stations top to bottom along a chosen node path.
Each train becomes a polyline through its arrival and departure points; the
first schedule is drawn solid and a second one, if given, dashed on top.
"""
from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

from .model import Instance
from .schedule import Schedule

WIDTH, HEIGHT = 900, 500
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 20, 40
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
          "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")
STYLES = ({"stroke-width": "1.5"},
          {"stroke-width": "2", "stroke-dasharray": "6,3"})


class PathError(ValueError):
    pass


def check_path(inst: Instance, path: Sequence[int]) -> None:
    if not path:
        raise PathError("the node path is empty")
    for i in path:
        if not 0 <= i < len(inst.nodes):
            raise PathError(f"node {i} does not exist")
    if len(set(path)) != len(path):
        raise PathError("the node path repeats a node")
    for u, v in zip(path, path[1:]):
        if (u, v) not in inst.edge_between:
            raise PathError(f"nodes {u} and {v} are not adjacent; the path is not a connected chain")


def train_points(inst: Instance, c: int, times, path: Sequence[int]):
    """Runs of ``(time, path_position)`` points of train ``c`` along ``path``.

    A run is broken where the train leaves the path or moves between path
    nodes that are not neighbours on it.
    """
    pos = {i: p for p, i in enumerate(path)}
    runs, cur, prev = [], [], None
    for k, i in enumerate(inst.trains[c].itinerary):
        p = pos.get(i)
        if p is None or (prev is not None and abs(p - prev) != 1):
            if len(cur) > 1:
                runs.append(cur)
            cur = []
        if p is not None:
            cur.append((times.arrivals[k], p))
            cur.append((times.departures[k], p))
        prev = p
    if len(cur) > 1:
        runs.append(cur)
    return runs


def emit_spacetime_svg(inst: Instance, schedules: Sequence[Schedule],
                       path: Sequence[int] | None = None,
                       trains: Sequence[int] | None = None,
                       labels: Sequence[str] = ("base", "reconstructed")) -> str:
    """SVG text of one or two schedules along ``path``.

    ``trains`` defaults to the trains present in every schedule; ``path``
    defaults to the longest itinerary among them.
    """
    if not 1 <= len(schedules) <= 2:
        raise ValueError("pass one or two schedules")
    common = set.intersection(*(set(s.entries) for s in schedules))
    if trains is None:
        trains = sorted(common)
    else:
        missing = set(trains) - common
        if missing:
            raise ValueError(f"trains {sorted(missing)} are not in every schedule")
        trains = sorted(trains)
    if path is None:
        path = max((inst.trains[c].itinerary for c in trains), key=len, default=())
        if not path:
            path = (0,)
    path = tuple(path)
    check_path(inst, path)

    runs = []  # (schedule index, train, points)
    for s_idx, sched in enumerate(schedules):
        for c in trains:
            for run in train_points(inst, c, sched[c], path):
                runs.append((s_idx, c, run))
    times = [t for *_, run in runs for t, _ in run]
    t_lo, t_hi = (min(times), max(times)) if times else (0, 1)
    if t_hi == t_lo:
        t_hi = t_lo + 1
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B
    step = plot_h / max(1, len(path) - 1)

    def sx(t):
        return MARGIN_L + (t - t_lo) / (t_hi - t_lo) * plot_w

    def sy(p):
        return MARGIN_T + p * step

    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
           f'width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
           '<g id="axes" font-family="sans-serif" font-size="11" fill="#333">']
    for p, i in enumerate(path):
        y = sy(p)
        out.append(f'<line x1="{MARGIN_L}" y1="{y:.2f}" x2="{WIDTH - MARGIN_R}" '
                   f'y2="{y:.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{MARGIN_L - 8}" y="{y + 4:.2f}" text-anchor="end">node {i}</text>')
    base_y = HEIGHT - MARGIN_B + 15
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        t = t_lo + frac * (t_hi - t_lo)
        out.append(f'<text x="{sx(t):.2f}" y="{base_y}" text-anchor="middle">{int(round(t))} s</text>')
    out.append('</g>')
    for s_idx in range(len(schedules)):
        label = escape(labels[s_idx] if s_idx < len(labels) else f"schedule {s_idx}")
        attrs = " ".join(f'{k}="{v}"' for k, v in STYLES[s_idx].items())
        out.append(f'<g id="schedule-{s_idx}" class="{label}" fill="none" {attrs}>')
        for s, c, run in runs:
            if s != s_idx:
                continue
            pts = " ".join(f"{sx(t):.2f},{sy(p):.2f}" for t, p in run)
            out.append(f'<polyline data-train="{c}" stroke="{COLORS[c % len(COLORS)]}" '
                       f'points="{pts}"/>')
        out.append('</g>')
    out.append('</svg>')
    return "\n".join(out) + "\n"
