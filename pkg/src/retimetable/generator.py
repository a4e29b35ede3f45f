"""Synthetic instance generator.

Three topology families: a single line, two lines crossing at a shared
middle node, and a star of arms around a hub. Base timetables are made
feasible by construction: desired departures are decoded in departure order
against inflated constants, and the resulting schedule becomes the base
timetable for the true constants. The inflation leaves buffer time in the
base timetable, as real timetables have.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .decoder import DecoderConfig, decode
from .model import (Connection, Edge, GateGroup, GateMember, Instance, InstanceError,
                    Node, Perturbation, Route, SpacingTable, Train, check_instance)
from .validate import validate_schedule

TOPOLOGIES = ("line", "cross", "star")


@dataclass(frozen=True)
class GeneratorParams:
    topology: str = "line"
    nodes: int = 6
    trains: int = 10
    tracks_per_edge: int = 2
    inside_tracks: int = 2
    seed: int = 0
    max_stops: int = 12  # longest itinerary, in nodes
    span: int | None = None  # window for desired departures; default scales with trains
    run_time: tuple[int, int] = (120, 300)  # per-edge nominal running time
    speed_factor: tuple[float, float] = (0.7, 1.4)
    dwell: tuple[int, int] = (20, 60)
    dwell_slack: int = 300
    edge_gamma: int = 60
    node_gamma: int = 30
    gate_fraction: float = 0.5
    gate_eps: tuple[int, int] = (10, 40)
    connection_fraction: float = 0.2
    turnaround: int = 300
    buffer: float = 1.25  # inflation of constants while building the base timetable
    delay: int = 600
    perturb_on_leg: bool = False
    horizon_margin: int = 4 * 3600
    retries: int = 10

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"topology must be one of {TOPOLOGIES}")
        if self.nodes < 2:
            raise ValueError("need at least two nodes")
        if self.trains < 1:
            raise ValueError("need at least one train")


def _topology(p: GeneratorParams):
    """Edge list and the node chains trains may run along."""
    n = p.nodes
    if p.topology == "line":
        chain = list(range(n))
        return [(i, i + 1) for i in range(n - 1)], [chain]
    if p.topology == "cross":
        n = max(n, 5)
        la = (n + 1) // 2
        a = list(range(la))
        mid = la // 2
        rest = list(range(la, n))
        half = len(rest) // 2
        b = rest[:half] + [mid] + rest[half:]
        edges = [(a[i], a[i + 1]) for i in range(len(a) - 1)]
        edges += [(b[i], b[i + 1]) for i in range(len(b) - 1)]
        return edges, [a, b]
    # star: hub 0 with arms of roughly equal length
    n = max(n, 4)
    arms = 3 if n < 10 else 4
    per = (n - 1) // arms
    extra = (n - 1) % arms
    edges, arm_nodes, nxt = [], [], 1
    for arm in range(arms):
        length = per + (1 if arm < extra else 0)
        nodes = list(range(nxt, nxt + length))
        nxt += length
        prev = 0
        for v in nodes:
            edges.append((prev, v))
            prev = v
        arm_nodes.append(nodes)
    chains = []
    for x in range(arms):
        for y in range(arms):
            if x != y:
                chains.append(list(reversed(arm_nodes[x])) + [0] + arm_nodes[y])
    return edges, chains


def _build_network(p: GeneratorParams, rng):
    edge_pairs, chains = _topology(p)
    n_nodes = 1 + max(max(e) for e in edge_pairs)
    next_track = 0
    edges = []
    for e_id, (u, v) in enumerate(edge_pairs):
        tracks = tuple(range(next_track, next_track + p.tracks_per_edge))
        next_track += p.tracks_per_edge
        edges.append(Edge(e_id, u, v, tracks))
    incident = {i: [] for i in range(n_nodes)}
    for e in edges:
        incident[e.u].append(e)
        incident[e.v].append(e)
    nodes = []
    for i in range(n_nodes):
        inside = tuple(range(next_track, next_track + p.inside_tracks))
        next_track += p.inside_tracks
        routes = []
        for e_in in incident[i]:
            for e_out in incident[i]:
                if e_in.id == e_out.id:
                    continue
                for t_in in e_in.tracks:
                    for u in inside:
                        for t_out in e_out.tracks:
                            routes.append(Route(t_in, u, t_out))
        for e in incident[i]:
            for u in inside:
                for t in e.tracks:
                    routes.append(Route(None, u, t))
                    routes.append(Route(t, u, None))
        gates = []
        if len(incident[i]) >= 2 and rng.random() < p.gate_fraction:
            e1, e2 = (incident[i][j] for j in rng.choice(len(incident[i]), 2, replace=False))
            members = tuple([GateMember(t, "I") for t in e1.tracks]
                            + [GateMember(t, "O") for t in e2.tracks])
            eps = {cat: int(rng.integers(p.gate_eps[0], p.gate_eps[1] + 1))
                   for cat in ("II", "IO", "OI", "OO")}
            gates.append(GateGroup(members, eps))
        nodes.append(Node(i, inside, tuple(routes), tuple(gates)))
    run_time = {}
    for e in edges:
        run_time[e.id] = int(rng.integers(p.run_time[0], p.run_time[1] + 1))
    return nodes, edges, chains, run_time


def _scale(x, f):
    return int(round(x * f))


def _draft(p: GeneratorParams, rng):
    """Network plus trains with desired times only (floors at the origin)."""
    nodes, edges, chains, run_time = _build_network(p, rng)
    edge_between = {}
    for e in edges:
        edge_between[(e.u, e.v)] = edge_between[(e.v, e.u)] = e.id
    span = p.span if p.span is not None else max(1800, 90 * p.trains)
    n_return = int(round(p.connection_fraction * p.trains / 2))
    n_first = p.trains - n_return

    specs = []  # (itinerary, desired departure, travel, stop_min, stop_max)
    for _ in range(n_first):
        chain = chains[int(rng.integers(len(chains)))]
        length = int(rng.integers(2, min(len(chain), p.max_stops) + 1))
        start = int(rng.integers(0, len(chain) - length + 1))
        path = chain[start:start + length]
        if rng.random() < 0.5:
            path = path[::-1]
        speed = float(rng.uniform(*p.speed_factor))
        travel = [max(1, _scale(run_time[edge_between[(path[k], path[k + 1])]], speed))
                  for k in range(len(path) - 1)]
        stop_min = [int(rng.integers(p.dwell[0], p.dwell[1] + 1)) for _ in path]
        stop_max = [s + p.dwell_slack for s in stop_min]
        # origin and terminus platforms can be held much longer
        stop_max[0] = stop_min[0] + 4 * 3600
        stop_max[-1] = stop_min[-1] + 4 * 3600
        dep = int(rng.integers(0, span + 1))
        specs.append([path, dep, travel, stop_min, stop_max])

    # return trips of some trains, tied by a turnaround connection
    connections = []
    order = rng.permutation(n_first)[:n_return]
    for pred in sorted(int(x) for x in order):
        path, dep, travel, stop_min, stop_max = specs[pred]
        arrive = dep + sum(travel) + sum(stop_min[1:-1])
        back = [path[::-1], arrive + p.turnaround + int(rng.integers(0, 900)),
                travel[::-1], stop_min[::-1], stop_max[::-1]]
        connections.append(Connection(pred, len(specs), path[-1], p.turnaround))
        specs.append(back)

    trains = []
    for c, (path, dep, travel, stop_min, stop_max) in enumerate(specs):
        m = len(path)
        fa = [0] * m
        fd = [0] * m
        fa[0] = max(0, dep - 60)
        fd[0] = dep
        trains.append(Train(c, tuple(path), tuple(fa), tuple(fd), (0,) * m,
                            tuple(stop_min), tuple(stop_max), tuple(travel)))
    spacing = SpacingTable(p.edge_gamma, p.node_gamma)
    return nodes, edges, trains, spacing, connections, specs


def _inflate(nodes, trains, spacing, connections, f):
    nodes_i = []
    for n in nodes:
        gates = tuple(GateGroup(g.members, {k: _scale(v, f) for k, v in g.eps.items()})
                      for g in n.gate_groups)
        nodes_i.append(replace(n, gate_groups=gates))
    trains_i = [replace(t,
                        travel_min=tuple(_scale(x, f) for x in t.travel_min),
                        stop_min=tuple(min(_scale(x, f), mx)
                                       for x, mx in zip(t.stop_min, t.stop_max)))
                for t in trains]
    spacing_i = SpacingTable(_scale(spacing.edge_default, f), _scale(spacing.node_default, f))
    conns_i = [replace(x, turnaround=_scale(x.turnaround, f)) for x in connections]
    return nodes_i, trains_i, spacing_i, conns_i


def generate_instance(params: GeneratorParams) -> Instance:
    """Deterministic instance with a feasible base timetable and a perturbation."""
    for attempt in range(params.retries):
        rng = np.random.default_rng([params.seed, attempt])
        nodes, edges, trains, spacing, conns, specs = _draft(params, rng)
        nodes_i, trains_i, spacing_i, conns_i = _inflate(
            nodes, trains, spacing, conns, params.buffer)
        latest = max(s[1] for s in specs)
        work_h = latest + 24 * 3600
        draft = Instance(tuple(nodes_i), tuple(edges), tuple(trains_i), spacing_i,
                         tuple(conns_i), work_h)
        order = sorted(range(len(trains)), key=lambda c: (specs[c][1], c))
        res = decode(draft, order, DecoderConfig(kick_limit=10))
        if not res.complete:
            continue
        final = []
        for t in trains:
            tt = res.schedule[t.id]
            final.append(Train(t.id, t.itinerary, tt.arrivals, tt.departures, tt.routes,
                               t.stop_min, t.stop_max, t.travel_min))
        horizon = max(max(tt.departures) for tt in res.schedule.entries.values())
        horizon += params.horizon_margin
        pert = _perturbation(params, rng, final)
        inst = Instance(tuple(nodes), tuple(edges), tuple(final), spacing,
                        tuple(conns), horizon, pert)
        check_instance(inst)
        if validate_schedule(inst, inst.base_schedule()):
            continue
        return inst
    raise InstanceError(
        f"could not build a feasible base timetable in {params.retries} attempts")


def _perturbation(p: GeneratorParams, rng, trains) -> Perturbation | None:
    if p.delay <= 0:
        return None
    movers = [t for t in trains if len(t.itinerary) >= 2]
    if not movers:
        return None
    t = movers[int(rng.integers(len(movers)))]
    k = int(rng.integers(0, len(t.itinerary) - 1))
    if p.perturb_on_leg:
        return Perturbation(t.id, p.delay, leg=k)
    return Perturbation(t.id, p.delay, node=t.itinerary[k])
