"""Domain data for train re-timetabling.

A network is a graph of nodes (stations, junctions) joined by edges that
carry one or more tracks. Every track, whether it lies on an edge or inside
a node, has a global integer id. A node lists the physically possible
``(incoming, inside, outgoing)`` track triplets a train may take through it.

All times are integer seconds from an epoch at 0.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from importlib import resources
from typing import Iterable, Mapping

import jsonschema

GATE_CATEGORIES = ("II", "IO", "OI", "OO")
CONNECTION_MODES = ("turnaround", "literal")


class InstanceError(ValueError):
    """Raised when an instance document is malformed or inconsistent."""


class DanglingReferenceError(InstanceError):
    """A dangling id was found while resolving an instance."""


class InfeasibleBaseError(InstanceError):
    """The base timetable of an instance violates its own constraints."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "\n".join(str(v) for v in self.violations[:20])
        super().__init__(
            f"base timetable has {len(self.violations)} violation(s):\n{lines}")


@dataclass(frozen=True)
class Route:
    """A track triplet through a node. ``None`` means no edge on that side."""
    incoming_track: int | None
    inside_track: int
    outgoing_track: int | None


@dataclass(frozen=True)
class GateMember:
    track: int
    direction: str  # "I" binds the arrival, "O" binds the departure


@dataclass(frozen=True)
class GateGroup:
    members: tuple[GateMember, ...]
    eps: Mapping[str, int]

    def __post_init__(self):
        for cat in GATE_CATEGORIES:
            if self.eps.get(cat, -1) < 0:
                raise InstanceError(f"gate eps[{cat}] must be a non-negative integer")


@dataclass(frozen=True)
class Node:
    id: int
    tracks: tuple[int, ...]
    routes: tuple[Route, ...]
    gate_groups: tuple[GateGroup, ...] = ()


@dataclass(frozen=True)
class Edge:
    id: int
    u: int
    v: int
    tracks: tuple[int, ...]


@dataclass(frozen=True)
class Train:
    """One train (or one one-way trip of a shuttling train).

    Per-position arrays are indexed by itinerary position, not node id.
    ``travel_min[k]`` is the minimum running time from position ``k`` to
    ``k + 1``. The floors default to the base times and are only raised by
    :func:`apply_perturbation`.
    """
    id: int
    itinerary: tuple[int, ...]
    base_arrivals: tuple[int, ...]
    base_departures: tuple[int, ...]
    base_routes: tuple[int, ...]
    stop_min: tuple[int, ...]
    stop_max: tuple[int, ...]
    travel_min: tuple[int, ...]
    floor_arrivals: tuple[int, ...] | None = None
    floor_departures: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.floor_arrivals is None:
            object.__setattr__(self, "floor_arrivals", self.base_arrivals)
        if self.floor_departures is None:
            object.__setattr__(self, "floor_departures", self.base_departures)

    def __len__(self):
        return len(self.itinerary)


@dataclass(frozen=True)
class SpacingTable:
    """Safety headways, sparse over a per-table default.

    Keys are ``(leading_train, following_train, edge_or_node)``.
    """
    edge_default: int = 0
    node_default: int = 0
    edge_overrides: Mapping[tuple[int, int, int], int] = field(default_factory=dict)
    node_overrides: Mapping[tuple[int, int, int], int] = field(default_factory=dict)

    def edge(self, lead: int, follow: int, edge: int) -> int:
        return self.edge_overrides.get((lead, follow, edge), self.edge_default)

    def node(self, lead: int, follow: int, node: int) -> int:
        return self.node_overrides.get((lead, follow, node), self.node_default)

    @cached_property
    def max_value(self) -> int:
        vals = [self.edge_default, self.node_default]
        vals += list(self.edge_overrides.values()) + list(self.node_overrides.values())
        return max(vals)


@dataclass(frozen=True)
class Connection:
    predecessor: int
    successor: int
    node: int
    turnaround: int


@dataclass(frozen=True)
class Perturbation:
    """A single delay. Exactly one of ``node`` / ``leg`` is set.

    ``node`` delays the departure from that node; ``leg`` (an itinerary
    position ``k``) delays the arrival at position ``k + 1``.
    """
    train: int
    delay: int
    node: int | None = None
    leg: int | None = None


@dataclass(frozen=True)
class Instance:
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    trains: tuple[Train, ...]
    spacing: SpacingTable
    connections: tuple[Connection, ...]
    horizon: int
    perturbation: Perturbation | None = None
    perturbed: bool = False

    # lookups built lazily; the instance itself is immutable

    @cached_property
    def edge_between(self) -> dict[tuple[int, int], int]:
        out = {}
        for e in self.edges:
            out[(e.u, e.v)] = e.id
            out[(e.v, e.u)] = e.id
        return out

    @cached_property
    def track_owner(self) -> dict[int, tuple[str, int]]:
        owner = {}
        for e in self.edges:
            for t in e.tracks:
                owner[t] = ("edge", e.id)
        for n in self.nodes:
            for t in n.tracks:
                owner[t] = ("node", n.id)
        return owner

    @cached_property
    def pred_of(self) -> dict[int, Connection]:
        return {c.successor: c for c in self.connections}

    @cached_property
    def succ_of(self) -> dict[int, Connection]:
        return {c.predecessor: c for c in self.connections}

    @cached_property
    def leg_edges(self) -> tuple[tuple[int, ...], ...]:
        """Edge id of every itinerary leg, per train."""
        return tuple(
            tuple(self.edge_between[(t.itinerary[k], t.itinerary[k + 1])]
                  for k in range(len(t.itinerary) - 1))
            for t in self.trains)

    @cached_property
    def route_options(self) -> tuple[tuple[tuple[int, ...], ...], ...]:
        """Route indices usable by each train at each itinerary position.

        The incoming track must lie on the arriving edge (ignored at the
        origin) and the outgoing track on the departing edge (ignored at the
        terminus). Linking consecutive positions is left to the callers.
        """
        edge_tracks = [set(e.tracks) for e in self.edges]
        out = []
        for t in self.trains:
            legs = self.leg_edges[t.id]
            per_pos = []
            last = len(t.itinerary) - 1
            for k, i in enumerate(t.itinerary):
                ok = []
                for r_idx, r in enumerate(self.nodes[i].routes):
                    if k > 0 and r.incoming_track not in edge_tracks[legs[k - 1]]:
                        continue
                    if k < last and r.outgoing_track not in edge_tracks[legs[k]]:
                        continue
                    ok.append(r_idx)
                per_pos.append(tuple(ok))
            out.append(tuple(per_pos))
        return tuple(out)

    @property
    def max_itinerary(self) -> int:
        return max((len(t.itinerary) for t in self.trains), default=0)

    @cached_property
    def max_constant(self) -> int:
        """Largest spacing, gate or turnaround constant in the instance."""
        vals = [self.spacing.max_value, 0]
        for n in self.nodes:
            for g in n.gate_groups:
                vals += list(g.eps.values())
        vals += [c.turnaround for c in self.connections]
        return max(vals)

    def base_schedule(self):
        from .schedule import Schedule
        return Schedule.from_trains(
            (t.id, t.base_arrivals, t.base_departures, t.base_routes)
            for t in self.trains)


# ---------------------------------------------------------------------------
# perturbation

def apply_perturbation(inst: Instance) -> Instance:
    """Return a copy of ``inst`` whose time floors include the delay.

    Base times are left untouched so that delays stay measured against the
    original timetable. Applying twice is a no-op.
    """
    p = inst.perturbation
    if p is None or inst.perturbed:
        return inst
    train = inst.trains[p.train]
    arr = list(train.floor_arrivals)
    dep = list(train.floor_departures)
    if p.node is not None:
        k = train.itinerary.index(p.node)
        dep[k] = train.base_departures[k] + p.delay
    else:
        arr[p.leg + 1] = train.base_arrivals[p.leg + 1] + p.delay
    trains = list(inst.trains)
    trains[p.train] = replace(train, floor_arrivals=tuple(arr),
                              floor_departures=tuple(dep))
    return replace(inst, trains=tuple(trains), perturbed=True)


# ---------------------------------------------------------------------------
# (de)serialisation

def _schema():
    text = resources.files("retimetable.data").joinpath(
        "instance.schema.json").read_text()
    return json.loads(text)


def instance_to_dict(inst: Instance) -> dict:
    nodes = []
    for n in inst.nodes:
        nodes.append({
            "id": n.id,
            "tracks": list(n.tracks),
            "routes": [[r.incoming_track, r.inside_track, r.outgoing_track]
                       for r in n.routes],
        })
    gates = []
    for n in inst.nodes:
        for g in n.gate_groups:
            gates.append({
                "node": n.id,
                "members": [[m.track, m.direction] for m in g.members],
                "eps": {k: g.eps[k] for k in GATE_CATEGORIES},
            })
    trains = []
    for t in inst.trains:
        trains.append({
            "id": t.id,
            "itinerary": list(t.itinerary),
            "base_arrivals": list(t.base_arrivals),
            "base_departures": list(t.base_departures),
            "base_routes": list(t.base_routes),
            "stop_min": list(t.stop_min),
            "stop_max": list(t.stop_max),
            "travel_min": list(t.travel_min),
        })
    sp = inst.spacing
    spacing = {
        "edge_default": sp.edge_default,
        "node_default": sp.node_default,
        "edge": [[a, b, e, v] for (a, b, e), v in sorted(sp.edge_overrides.items())],
        "node": [[a, b, n, v] for (a, b, n), v in sorted(sp.node_overrides.items())],
    }
    pert = None
    if inst.perturbation is not None:
        p = inst.perturbation
        pert = {"train": p.train, "delay": p.delay}
        if p.node is not None:
            pert["at_node"] = p.node
        else:
            pert["on_leg"] = p.leg
    return {
        "nodes": nodes,
        "edges": [{"id": e.id, "from": e.u, "to": e.v, "tracks": list(e.tracks)}
                  for e in inst.edges],
        "trains": trains,
        "spacing": spacing,
        "gates": gates,
        "connections": [{"predecessor": c.predecessor, "successor": c.successor,
                         "node": c.node, "turnaround": c.turnaround}
                        for c in inst.connections],
        "perturbation": pert,
        "horizon": inst.horizon,
    }


def dumps_instance(inst: Instance) -> str:
    """Serialise to the JSON instance document (deterministic)."""
    return json.dumps(instance_to_dict(inst), indent=1, sort_keys=True) + "\n"


def save_instance(inst: Instance, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_instance(inst))


def instance_from_dict(doc: dict, check_base: bool = True) -> Instance:
    try:
        jsonschema.validate(doc, _schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InstanceError(f"invalid field at {where}: {exc.message}") from None

    gates_by_node: dict[int, list[GateGroup]] = {}
    for g in doc["gates"]:
        grp = GateGroup(tuple(GateMember(t, d) for t, d in g["members"]),
                        dict(g["eps"]))
        gates_by_node.setdefault(g["node"], []).append(grp)
    nodes = tuple(
        Node(n["id"], tuple(n["tracks"]),
             tuple(Route(*r) for r in n["routes"]),
             tuple(gates_by_node.pop(n["id"], ())))
        for n in doc["nodes"])
    if gates_by_node:
        raise DanglingReferenceError(f"gate group references unknown node {min(gates_by_node)}")
    edges = tuple(Edge(e["id"], e["from"], e["to"], tuple(e["tracks"]))
                  for e in doc["edges"])
    trains = tuple(
        Train(t["id"], tuple(t["itinerary"]), tuple(t["base_arrivals"]),
              tuple(t["base_departures"]), tuple(t["base_routes"]),
              tuple(t["stop_min"]), tuple(t["stop_max"]), tuple(t["travel_min"]))
        for t in doc["trains"])
    sp = doc["spacing"]
    spacing = SpacingTable(
        sp["edge_default"], sp["node_default"],
        {(a, b, e): v for a, b, e, v in sp.get("edge", [])},
        {(a, b, n): v for a, b, n, v in sp.get("node", [])})
    conns = tuple(Connection(c["predecessor"], c["successor"], c["node"],
                             c["turnaround"]) for c in doc["connections"])
    pert = None
    if doc.get("perturbation") is not None:
        p = doc["perturbation"]
        pert = Perturbation(p["train"], p["delay"], p.get("at_node"), p.get("on_leg"))
    inst = Instance(nodes, edges, trains, spacing, conns, doc["horizon"], pert)
    check_instance(inst)
    if check_base:
        from .validate import validate_schedule
        violations = validate_schedule(inst, inst.base_schedule())
        if violations:
            raise InfeasibleBaseError(violations)
    return inst


def loads_instance(text: str, check_base: bool = True) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(
            f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return instance_from_dict(doc, check_base)


def load_instance(path, check_base: bool = True) -> Instance:
    """Read, check and return an (unperturbed) instance from a JSON file."""
    with open(path) as fh:
        return loads_instance(fh.read(), check_base)


# ---------------------------------------------------------------------------
# structural checks

def _dense(ids: Iterable[int], what: str):
    ids = list(ids)
    if ids != list(range(len(ids))):
        raise InstanceError(f"{what} ids must be dense and zero-based in order")


def check_instance(inst: Instance) -> None:
    """Referential integrity and shape checks. Raises :class:`InstanceError`."""
    _dense((n.id for n in inst.nodes), "node")
    _dense((e.id for e in inst.edges), "edge")
    _dense((t.id for t in inst.trains), "train")
    n_nodes = len(inst.nodes)

    owners: dict[int, str] = {}
    for e in inst.edges:
        for end in (e.u, e.v):
            if not 0 <= end < n_nodes:
                raise DanglingReferenceError(f"edge {e.id} references unknown node {end}")
        if not e.tracks:
            raise InstanceError(f"edge {e.id} has no tracks")
        for t in e.tracks:
            if t in owners:
                raise InstanceError(f"track {t} declared twice")
            owners[t] = f"edge {e.id}"
    for n in inst.nodes:
        for t in n.tracks:
            if t in owners:
                raise InstanceError(f"track {t} declared twice")
            owners[t] = f"node {n.id}"
    _dense(sorted(owners), "track")

    incident = {n.id: set() for n in inst.nodes}
    for e in inst.edges:
        incident[e.u].update(e.tracks)
        incident[e.v].update(e.tracks)
    for n in inst.nodes:
        inside = set(n.tracks)
        for r in n.routes:
            if r.inside_track not in inside:
                raise DanglingReferenceError(
                    f"node {n.id} route uses unknown inside track {r.inside_track}")
            for t in (r.incoming_track, r.outgoing_track):
                if t is not None and t not in incident[n.id]:
                    raise DanglingReferenceError(
                        f"node {n.id} route uses unknown edge track {t}")
        for g in n.gate_groups:
            for m in g.members:
                if m.track not in incident[n.id]:
                    raise DanglingReferenceError(
                        f"gate at node {n.id} references unknown track {m.track}")
                if m.direction not in ("I", "O"):
                    raise InstanceError(f"gate direction must be I or O, got {m.direction}")

    for t in inst.trains:
        m = len(t.itinerary)
        if m < 1:
            raise InstanceError(f"train {t.id} has an empty itinerary")
        for i in t.itinerary:
            if not 0 <= i < n_nodes:
                raise DanglingReferenceError(f"train {t.id} references unknown node {i}")
        if len(set(t.itinerary)) != m:
            raise InstanceError(f"train {t.id} visits a node twice")
        for name in ("base_arrivals", "base_departures", "base_routes",
                     "stop_min", "stop_max"):
            if len(getattr(t, name)) != m:
                raise InstanceError(f"train {t.id}: {name} must have {m} entries")
        if len(t.travel_min) != m - 1:
            raise InstanceError(f"train {t.id}: travel_min must have {m - 1} entries")
        for k in range(m - 1):
            if (t.itinerary[k], t.itinerary[k + 1]) not in inst.edge_between:
                raise DanglingReferenceError(
                    f"train {t.id} has no edge between nodes "
                    f"{t.itinerary[k]} and {t.itinerary[k + 1]}")
        for k, i in enumerate(t.itinerary):
            if not inst.nodes[i].routes:
                raise InstanceError(f"node {i} visited by train {t.id} has no routes")
            if not 0 <= t.base_routes[k] < len(inst.nodes[i].routes):
                raise DanglingReferenceError(
                    f"train {t.id} base route {t.base_routes[k]} unknown at node {i}")
            if t.base_departures[k] < t.base_arrivals[k]:
                raise InstanceError(f"train {t.id}: departure before arrival at node {i}")
            if not 0 <= t.stop_min[k] <= t.stop_max[k]:
                raise InstanceError(f"train {t.id}: bad stop bounds at node {i}")

    n_trains = len(inst.trains)
    seen_succ, seen_pred = set(), set()
    for c in inst.connections:
        for who in (c.predecessor, c.successor):
            if not 0 <= who < n_trains:
                raise DanglingReferenceError(f"connection references unknown train {who}")
        if c.successor in seen_succ or c.predecessor in seen_pred:
            raise InstanceError("a train may have at most one connection each way")
        seen_succ.add(c.successor)
        seen_pred.add(c.predecessor)
        if inst.trains[c.predecessor].itinerary[-1] != c.node:
            raise InstanceError(f"connection node {c.node} is not the last node "
                                f"of train {c.predecessor}")
        if inst.trains[c.successor].itinerary[0] != c.node:
            raise InstanceError(f"connection node {c.node} is not the first node "
                                f"of train {c.successor}")
        if c.turnaround < 0:
            raise InstanceError("turnaround must be non-negative")

    sp = inst.spacing
    for key, v in list(sp.edge_overrides.items()) + list(sp.node_overrides.items()):
        if v < 0 or not (0 <= key[0] < n_trains and 0 <= key[1] < n_trains):
            raise InstanceError(f"bad spacing entry {key}: {v}")
    if min(sp.edge_default, sp.node_default) < 0:
        raise InstanceError("spacing defaults must be non-negative")

    p = inst.perturbation
    if p is not None:
        if not 0 <= p.train < n_trains:
            raise DanglingReferenceError(f"perturbation references unknown train {p.train}")
        if p.delay < 0:
            raise InstanceError("perturbation delay must be non-negative")
        train = inst.trains[p.train]
        if (p.node is None) == (p.leg is None):
            raise InstanceError("perturbation needs exactly one of at_node / on_leg")
        if p.node is not None and p.node not in train.itinerary:
            raise InstanceError(f"perturbation node {p.node} not on train {p.train}")
        if p.leg is not None and not 0 <= p.leg < len(train.itinerary) - 1:
            raise InstanceError(f"perturbation leg {p.leg} not on train {p.train}")

    latest = max((max(t.base_departures) for t in inst.trains), default=0)
    if inst.horizon <= latest + inst.max_constant:
        raise InstanceError(
            f"horizon {inst.horizon} must exceed every base time plus every constant")
