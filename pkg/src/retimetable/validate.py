"""Feasibility checking of (partial) schedules.

:func:`validate_schedule` is the single source of truth for feasibility: the
decoder, the oracles and the MIP export are all tested against it.

Spacing constraints are disjunctive. For a pair of trains sharing a resource
either order is acceptable, so a pair is in violation only when neither
order holds; the reported slack is that of the less violated order.
"""
from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass

from .model import CONNECTION_MODES, Instance
from .schedule import Schedule

KIND_ORDER = ("Malformed", "Route", "Horizon", "InitialTime", "StopBound", "Speed",
              "EdgeSpacing", "NodeSpacing", "Connection", "Gate")


@dataclass(frozen=True, order=True)
class Violation:
    """A violated constraint. ``slack`` is negative, its magnitude the amount.

    ``subjects`` are ``(train, node)`` pairs; ``detail`` names the
    inequality (or the gate category for ``Gate``).
    """
    kind: str
    subjects: tuple[tuple[int, int], ...]
    slack: int
    detail: str = ""

    def sort_key(self):
        return (KIND_ORDER.index(self.kind), self.subjects, self.detail, self.slack)

    def __str__(self):
        who = " ".join(f"({c},{i})" for c, i in self.subjects)
        extra = f" [{self.detail}]" if self.detail else ""
        return f"{self.kind}{extra} {who} slack={self.slack}"

    def to_dict(self):
        return {"kind": self.kind, "detail": self.detail, "slack": self.slack,
                "subjects": [list(s) for s in self.subjects]}


def gate_events(inst: Instance, c: int, k: int, route_idx: int, a: int, d: int):
    """Gate events of train ``c`` at itinerary position ``k``.

    Yields ``(group_index, event_type, time)`` with type ``"I"`` (bound to
    the arrival) or ``"O"`` (bound to the departure).
    """
    train = inst.trains[c]
    node = inst.nodes[train.itinerary[k]]
    route = node.routes[route_idx]
    last = len(train.itinerary) - 1
    for g_idx, g in enumerate(node.gate_groups):
        for m in g.members:
            if m.direction == "I" and k > 0 and route.incoming_track == m.track:
                yield g_idx, "I", a
            elif m.direction == "O" and k < last and route.outgoing_track == m.track:
                yield g_idx, "O", d


def _pair_slack_ordered(ev1, ev2, eps):
    """Slack of "events ev1 all precede events ev2" for a gate group."""
    worst, cat = None, ""
    for t1, x1 in ev1:
        for t2, x2 in ev2:
            s = x2 - x1 - eps[t1 + t2]
            if worst is None or s < worst:
                worst, cat = s, t1 + t2
    return worst, cat


def validate_schedule(inst: Instance, sched: Schedule,
                      connection_mode: str = "turnaround") -> list[Violation]:
    """Every violated constraint among the scheduled trains, canonically sorted.

    Floors come from the instance, so pass the perturbed instance to check a
    rescheduled timetable. An empty list means the schedule is feasible.
    """
    if connection_mode not in CONNECTION_MODES:
        raise ValueError(f"unknown connection mode {connection_mode!r}")
    out: list[Violation] = []
    H = inst.horizon
    good: dict[int, object] = {}

    for c, tt in sched.entries.items():
        if not 0 <= c < len(inst.trains):
            out.append(Violation("Malformed", ((c, -1),), -1, "unknown train"))
            continue
        train = inst.trains[c]
        m = len(train.itinerary)
        routes = tt.routes
        if (len(tt.arrivals), len(tt.departures), len(routes)) != (m, m, m):
            out.append(Violation("Malformed", ((c, train.itinerary[0]),), -1,
                                 "entry does not cover the itinerary"))
            continue
        bad = False
        for k, i in enumerate(train.itinerary):
            if routes[k] is None or not 0 <= routes[k] < len(inst.nodes[i].routes):
                out.append(Violation("Malformed", ((c, i),), -1, "missing route"))
                bad = True
        if bad:
            continue
        good[c] = tt
        opts = inst.route_options[c]
        for k, i in enumerate(train.itinerary):
            a, d = tt.arrivals[k], tt.departures[k]
            subj = ((c, i),)
            if routes[k] not in opts[k]:
                out.append(Violation("Route", subj, -1, "route not usable here"))
            if k > 0:
                prev_out = inst.nodes[train.itinerary[k - 1]].routes[routes[k - 1]].outgoing_track
                if inst.nodes[i].routes[routes[k]].incoming_track != prev_out:
                    out.append(Violation("Route", subj, -1, "track mismatch on leg"))
            for name, t in (("arrival", a), ("departure", d)):
                if t > H:
                    out.append(Violation("Horizon", subj, H - t, name))
            s = a - train.floor_arrivals[k]
            if s < 0:
                out.append(Violation("InitialTime", subj, s, "arrival"))
            s = d - train.floor_departures[k]
            if s < 0:
                out.append(Violation("InitialTime", subj, s, "departure"))
            s = d - a - train.stop_min[k]
            if s < 0:
                out.append(Violation("StopBound", subj, s, "min"))
            s = train.stop_max[k] - (d - a)
            if s < 0:
                out.append(Violation("StopBound", subj, s, "max"))
            if k + 1 < m:
                s = tt.arrivals[k + 1] - d - train.travel_min[k]
                if s < 0:
                    out.append(Violation("Speed", ((c, i), (c, train.itinerary[k + 1])), s))

    sp = inst.spacing

    # edge spacing: same directed traversal of the same edge track
    edge_users = defaultdict(list)
    for c, tt in good.items():
        train = inst.trains[c]
        for k in range(len(train.itinerary) - 1):
            i, j = train.itinerary[k], train.itinerary[k + 1]
            track = inst.nodes[i].routes[tt.routes[k]].outgoing_track
            edge_users[(track, i, j)].append((c, tt.departures[k], tt.arrivals[k + 1]))
    for (track, i, j), users in edge_users.items():
        e = inst.edge_between[(i, j)]
        for (c1, d1, a1), (c2, d2, a2) in itertools.combinations(users, 2):
            g12, g21 = sp.edge(c1, c2, e), sp.edge(c2, c1, e)
            s1 = min(d2 - d1 - g12, a2 - a1 - g12)
            s2 = min(d1 - d2 - g21, a1 - a2 - g21)
            s = max(s1, s2)
            if s < 0:
                subj = tuple(sorted(((c1, i), (c2, i))))
                out.append(Violation("EdgeSpacing", subj, s, f"edge {e} track {track}"))

    # node spacing: same inside track
    exempt = {(x.predecessor, x.successor, x.node) for x in inst.connections}
    node_users = defaultdict(list)
    for c, tt in good.items():
        train = inst.trains[c]
        for k, i in enumerate(train.itinerary):
            u = inst.nodes[i].routes[tt.routes[k]].inside_track
            node_users[(i, u)].append((c, tt.arrivals[k], tt.departures[k]))
    for (i, u), users in node_users.items():
        for (c1, a1, d1), (c2, a2, d2) in itertools.combinations(users, 2):
            if (c1, c2, i) in exempt or (c2, c1, i) in exempt:
                continue
            s1 = a2 - d1 - sp.node(c1, c2, i)
            s2 = a1 - d2 - sp.node(c2, c1, i)
            s = max(s1, s2)
            if s < 0:
                subj = tuple(sorted(((c1, i), (c2, i))))
                out.append(Violation("NodeSpacing", subj, s, f"track {u}"))

    # switching gates
    gate_users = defaultdict(lambda: defaultdict(list))
    for c, tt in good.items():
        train = inst.trains[c]
        for k, i in enumerate(train.itinerary):
            for g_idx, typ, t in gate_events(inst, c, k, tt.routes[k],
                                             tt.arrivals[k], tt.departures[k]):
                gate_users[(i, g_idx)][c].append((typ, t))
    for (i, g_idx), users in gate_users.items():
        eps = inst.nodes[i].gate_groups[g_idx].eps
        for c1, c2 in itertools.combinations(sorted(users), 2):
            s1, cat1 = _pair_slack_ordered(users[c1], users[c2], eps)
            s2, cat2 = _pair_slack_ordered(users[c2], users[c1], eps)
            s, cat = (s1, cat1) if s1 >= s2 else (s2, cat2)
            if s < 0:
                out.append(Violation("Gate", ((c1, i), (c2, i)), s, cat))

    # connections
    for x in inst.connections:
        p, q = x.predecessor, x.successor
        if p not in good or q not in good:
            continue
        i = x.node
        pt, qt = good[p], good[q]
        subj = ((p, i), (q, i))
        if connection_mode == "turnaround":
            s = qt.departures[0] - pt.arrivals[-1] - x.turnaround
            if s < 0:
                out.append(Violation("Connection", subj, s, "turnaround"))
            routes = inst.nodes[i].routes
            if routes[pt.routes[-1]].inside_track != routes[qt.routes[0]].inside_track:
                out.append(Violation("Connection", subj, -1, "platform"))
        else:
            diff = qt.departures[0] - pt.departures[-1]
            if diff != 0:
                out.append(Violation("Connection", subj, -abs(diff), "departure"))
            if len(qt.arrivals) > 1:
                diff = qt.arrivals[1] - qt.departures[0] - x.turnaround
                if diff != 0:
                    out.append(Violation("Connection", subj, -abs(diff), "arrival"))
            if pt.routes[-1] != qt.routes[0]:
                out.append(Violation("Connection", subj, -1, "route"))

    out.sort(key=Violation.sort_key)
    return out


def format_report(violations) -> str:
    lines = [str(v) for v in violations]
    lines.append(f"{len(violations)} violations")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# analytic row counts for the MIP export

def shared_edge_tracks(inst: Instance):
    """Yield ``(c1, k1, c2, k2, edge, track)`` for every unordered train pair
    that could run on the same edge track in the same direction."""
    by_leg = defaultdict(list)
    for t in inst.trains:
        opts = inst.route_options[t.id]
        for k in range(len(t.itinerary) - 1):
            i = t.itinerary[k]
            tracks = {inst.nodes[i].routes[r].outgoing_track for r in opts[k]}
            by_leg[(i, t.itinerary[k + 1])].append((t.id, k, tracks))
    for (i, j), users in sorted(by_leg.items()):
        e = inst.edge_between[(i, j)]
        for (c1, k1, t1), (c2, k2, t2) in itertools.combinations(users, 2):
            for track in sorted(t1 & t2):
                yield c1, k1, c2, k2, e, track


def shared_inside_tracks(inst: Instance):
    """Yield ``(c1, k1, c2, k2, node, inside_track)`` for pairs that could
    occupy the same inside track (connected pairs at their node excluded)."""
    exempt = {(x.predecessor, x.successor, x.node) for x in inst.connections}
    by_node = defaultdict(list)
    for t in inst.trains:
        opts = inst.route_options[t.id]
        for k, i in enumerate(t.itinerary):
            tracks = {inst.nodes[i].routes[r].inside_track for r in opts[k]}
            by_node[i].append((t.id, k, tracks))
    for i, users in sorted(by_node.items()):
        for (c1, k1, t1), (c2, k2, t2) in itertools.combinations(users, 2):
            if (c1, c2, i) in exempt or (c2, c1, i) in exempt:
                continue
            for u in sorted(t1 & t2):
                yield c1, k1, c2, k2, i, u


def usable_gate_members(inst: Instance, c: int, k: int, g_idx: int):
    """Indices of gate members train ``c`` may touch at position ``k``."""
    train = inst.trains[c]
    node = inst.nodes[train.itinerary[k]]
    last = len(train.itinerary) - 1
    routes = [node.routes[r] for r in inst.route_options[c][k]]
    out = []
    for m_idx, m in enumerate(node.gate_groups[g_idx].members):
        if m.direction == "I" and k > 0:
            hit = any(r.incoming_track == m.track for r in routes)
        elif m.direction == "O" and k < last:
            hit = any(r.outgoing_track == m.track for r in routes)
        else:
            hit = False
        if hit:
            out.append(m_idx)
    return out


def shared_gates(inst: Instance):
    """Yield ``(c1, k1, c2, k2, node, group, members1, members2)``."""
    by_node = defaultdict(list)
    for t in inst.trains:
        for k, i in enumerate(t.itinerary):
            by_node[i].append((t.id, k))
    for i, users in sorted(by_node.items()):
        for g_idx in range(len(inst.nodes[i].gate_groups)):
            usable = [(c, k, usable_gate_members(inst, c, k, g_idx)) for c, k in users]
            usable = [u for u in usable if u[2]]
            for (c1, k1, m1), (c2, k2, m2) in itertools.combinations(usable, 2):
                yield c1, k1, c2, k2, i, g_idx, m1, m2


def count_constraints(inst: Instance, connection_mode: str = "turnaround") -> dict[str, int]:
    """Number of constraint rows per family in the exported MIP.

    Linking rows (route choice, track continuity along a leg) are not a
    constraint family and are not counted here.
    """
    counts = dict.fromkeys(("InitialTime", "StopBound", "Speed", "EdgeSpacing",
                            "NodeSpacing", "Connection", "Gate"), 0)
    for t in inst.trains:
        m = len(t.itinerary)
        counts["InitialTime"] += 2 * m
        counts["StopBound"] += m
        counts["Speed"] += m - 1
    counts["EdgeSpacing"] = 4 * sum(1 for _ in shared_edge_tracks(inst))
    counts["NodeSpacing"] = 2 * sum(1 for _ in shared_inside_tracks(inst))
    counts["Gate"] = sum(2 * len(m1) * len(m2) for *_, m1, m2 in shared_gates(inst))
    for x in inst.connections:
        node = inst.nodes[x.node]
        if connection_mode == "turnaround":
            ends = (inst.route_options[x.predecessor][-1], inst.route_options[x.successor][0])
            used = {node.routes[r].inside_track for opts in ends for r in opts}
            counts["Connection"] += 1 + len(used)
        else:
            q = inst.trains[x.successor]
            opts = set(inst.route_options[x.predecessor][-1]) | set(inst.route_options[x.successor][0])
            counts["Connection"] += 1 + (len(q.itinerary) > 1) + len(opts)
    return counts
