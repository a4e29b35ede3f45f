"""Exhaustive reference solvers for tiny instances.

``best_permutation_exhaustive`` decodes every permutation. It is the best
the decoder can reach, whatever the search strategy.

``true_optimum_exhaustive`` ignores the decoder. It enumerates route
choices and, for each train pair sharing a resource, which train goes first.
Once routes and orders are fixed every constraint is a difference bound
``x_v >= x_u + w``, so the earliest feasible times are a longest-path
problem. They are pointwise minimal and therefore minimise total arrival
delay. Orders are branched on lazily: only conflicts violated by the current
earliest times are split, and a branch is cut once its earliest times cannot
beat the incumbent. With a ``time_grid`` the earliest times are restricted
to multiples of the grid, computed by a monotone fixpoint iteration.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .decoder import DecoderConfig, decode, penalized_fitness
from .model import Instance
from .schedule import Schedule, TrainTimes


class OracleSizeError(ValueError):
    pass


class OracleInfeasibleError(ValueError):
    pass


MAX_PERMUTATION_TRAINS = 8
MAX_EXACT_TRAINS = 3


def best_permutation_exhaustive(inst: Instance, cfg: DecoderConfig | None = None,
                                max_trains: int = MAX_PERMUTATION_TRAINS):
    """``(permutation, fitness)`` minimising the decoder's penalised fitness.

    Permutations are visited in lexicographic order and only a strictly
    better one replaces the incumbent, so ties resolve to the
    lexicographically smallest.
    """
    n = len(inst.trains)
    if n > max_trains:
        raise OracleSizeError(f"{n} trains is too many for exhaustive search (max {max_trains})")
    best_perm, best_fit = None, None
    for perm in itertools.permutations(range(n)):
        fit = penalized_fitness(decode(inst, perm, cfg), inst)
        if best_fit is None or fit < best_fit:
            best_perm, best_fit = perm, fit
    return best_perm, best_fit


# ---------------------------------------------------------------------------

@dataclass
class _Conflict:
    """Two alternative sets of difference constraints; one must hold."""
    first: list  # constraints (u, v, w) meaning x_v >= x_u + w
    second: list


def _route_paths(inst: Instance, c: int):
    """Every track-consistent route sequence of train ``c``."""
    t = inst.trains[c]
    opts = inst.route_options[c]
    nodes = [inst.nodes[i] for i in t.itinerary]
    out = []

    def rec(k, prefix):
        if k == len(t.itinerary):
            out.append(tuple(prefix))
            return
        for r in opts[k]:
            if k > 0:
                prev = nodes[k - 1].routes[prefix[-1]].outgoing_track
                if nodes[k].routes[r].incoming_track != prev:
                    continue
            prefix.append(r)
            rec(k + 1, prefix)
            prefix.pop()

    rec(0, [])
    return out


def _connection_ok(inst, paths, mode):
    for x in inst.connections:
        rp, rq = paths[x.predecessor][-1], paths[x.successor][0]
        routes = inst.nodes[x.node].routes
        if mode == "turnaround":
            if routes[rp].inside_track != routes[rq].inside_track:
                return False
        elif rp != rq:
            return False
    return True


def _var(c, k, kind):
    return (c, k, kind)


def _fixed_constraints(inst: Instance, mode: str):
    src = "src"
    cons = []
    for t in inst.trains:
        c = t.id
        for k in range(len(t.itinerary)):
            a, d = _var(c, k, "a"), _var(c, k, "d")
            cons.append((src, a, t.floor_arrivals[k]))
            cons.append((src, d, t.floor_departures[k]))
            cons.append((a, d, t.stop_min[k]))
            cons.append((d, a, -t.stop_max[k]))
            if k + 1 < len(t.itinerary):
                cons.append((d, _var(c, k + 1, "a"), t.travel_min[k]))
    for x in inst.connections:
        p, q = x.predecessor, x.successor
        kp = len(inst.trains[p].itinerary) - 1
        if mode == "turnaround":
            cons.append((_var(p, kp, "a"), _var(q, 0, "d"), x.turnaround))
        else:
            cons.append((_var(p, kp, "d"), _var(q, 0, "d"), 0))
            cons.append((_var(q, 0, "d"), _var(p, kp, "d"), 0))
            if len(inst.trains[q].itinerary) > 1:
                cons.append((_var(q, 0, "d"), _var(q, 1, "a"), x.turnaround))
                cons.append((_var(q, 1, "a"), _var(q, 0, "d"), -x.turnaround))
    return cons


def _conflicts(inst: Instance, paths) -> list[_Conflict]:
    """Pairwise disjunctions implied by a fixed choice of routes."""
    sp = inst.spacing
    out = []
    n = len(inst.trains)
    exempt = {(x.predecessor, x.successor, x.node) for x in inst.connections}
    for c1, c2 in itertools.combinations(range(n), 2):
        t1, t2 = inst.trains[c1], inst.trains[c2]
        pos2 = {i: k for k, i in enumerate(t2.itinerary)}
        for k1, i in enumerate(t1.itinerary):
            if i not in pos2:
                continue
            k2 = pos2[i]
            node = inst.nodes[i]
            r1, r2 = node.routes[paths[c1][k1]], node.routes[paths[c2][k2]]
            A1, D1, A2, D2 = (_var(c1, k1, "a"), _var(c1, k1, "d"),
                              _var(c2, k2, "a"), _var(c2, k2, "d"))
            # same directed edge track
            if (k1 + 1 < len(t1.itinerary) and k2 + 1 < len(t2.itinerary)
                    and t1.itinerary[k1 + 1] == t2.itinerary[k2 + 1]
                    and r1.outgoing_track == r2.outgoing_track):
                j = t1.itinerary[k1 + 1]
                e = inst.edge_between[(i, j)]
                g12, g21 = sp.edge(c1, c2, e), sp.edge(c2, c1, e)
                B1, B2 = _var(c1, k1 + 1, "a"), _var(c2, k2 + 1, "a")
                out.append(_Conflict([(D1, D2, g12), (B1, B2, g12)],
                                     [(D2, D1, g21), (B2, B1, g21)]))
            # same inside track
            if (r1.inside_track == r2.inside_track
                    and (c1, c2, i) not in exempt and (c2, c1, i) not in exempt):
                out.append(_Conflict([(D1, A2, sp.node(c1, c2, i))],
                                     [(D2, A1, sp.node(c2, c1, i))]))
            # gates
            for g in node.gate_groups:
                ev1 = _gate_events(g, r1, k1, len(t1.itinerary), A1, D1)
                ev2 = _gate_events(g, r2, k2, len(t2.itinerary), A2, D2)
                if ev1 and ev2:
                    out.append(_Conflict(
                        [(v1, v2, g.eps[x1 + x2]) for x1, v1 in ev1 for x2, v2 in ev2],
                        [(v2, v1, g.eps[x2 + x1]) for x1, v1 in ev1 for x2, v2 in ev2]))
    return out


def _gate_events(group, route, k, m, A, D):
    ev = []
    for mem in group.members:
        if mem.direction == "I" and k > 0 and route.incoming_track == mem.track:
            ev.append(("I", A))
        elif mem.direction == "O" and k < m - 1 and route.outgoing_track == mem.track:
            ev.append(("O", D))
    return ev


def _earliest(variables, cons, horizon, grid):
    """Least solution of ``x_v >= x_u + w`` with ``x_src = 0``, or None.

    ``grid=None``: Bellman-Ford longest paths (positive cycle => None).
    Otherwise values are rounded up to grid multiples after every
    relaxation; the iteration is monotone, so it reaches the least grid
    solution or exceeds the horizon.
    """
    x = dict.fromkeys(variables, -math.inf)
    x["src"] = 0
    rounds = len(variables) + 1 if grid is None else None
    it = 0
    while True:
        changed = False
        for u, v, w in cons:
            xu = x[u]
            if xu == -math.inf:
                continue
            val = xu + w
            if grid is not None:
                val = -(-val // grid) * grid
            if val > x[v]:
                if v == "src":
                    return None
                x[v] = val
                if val > horizon:
                    return None
                changed = True
        if not changed:
            return x
        it += 1
        if rounds is not None and it > rounds:
            return None


def _objective(inst, x):
    return sum(x[_var(t.id, k, "a")] - t.base_arrivals[k]
               for t in inst.trains for k in range(len(t.itinerary)))


def _holds(x, cons):
    return all(x[v] >= x[u] + w for u, v, w in cons)


def true_optimum_exhaustive(inst: Instance, time_grid: int | None = None,
                            connection_mode: str = "turnaround",
                            max_trains: int = MAX_EXACT_TRAINS,
                            max_route_combos: int = 200_000):
    """``(schedule, fitness)`` with the least total arrival delay.

    ``time_grid=None`` is exact over integer seconds. A positive grid
    restricts all times to its multiples (so floors must be reachable on
    the grid for the base schedule to be found). Raises
    :class:`OracleInfeasibleError` if no schedule satisfies the constraints.
    """
    n = len(inst.trains)
    if n > max_trains:
        raise OracleSizeError(f"{n} trains is too many for the exact oracle (max {max_trains})")
    if time_grid is not None and time_grid < 1:
        raise ValueError("time grid must be a positive number of seconds")
    per_train = [_route_paths(inst, c) for c in range(n)]
    combos = math.prod(len(p) for p in per_train)
    if combos > max_route_combos:
        raise OracleSizeError(f"{combos} route combinations exceed the cap of {max_route_combos}")
    variables = ["src"] + [_var(t.id, k, kind) for t in inst.trains
                           for k in range(len(t.itinerary)) for kind in ("a", "d")]
    base = _fixed_constraints(inst, connection_mode)
    best = None  # (objective, paths, times)

    for paths in itertools.product(*per_train):
        if not _connection_ok(inst, paths, connection_mode):
            continue
        conflicts = _conflicts(inst, paths)
        stack = [base]
        while stack:
            cons = stack.pop()
            x = _earliest(variables, cons, inst.horizon, time_grid)
            if x is None:
                continue
            obj = _objective(inst, x)
            if best is not None and obj >= best[0]:
                continue
            open_ = next((cf for cf in conflicts
                          if not _holds(x, cf.first) and not _holds(x, cf.second)), None)
            if open_ is None:
                best = (obj, paths, x)
                continue
            # pushed in reverse so "first" is explored first
            stack.append(cons + open_.second)
            stack.append(cons + open_.first)

    if best is None:
        raise OracleInfeasibleError("no schedule satisfies the constraints")
    obj, paths, x = best
    entries = {}
    for t in inst.trains:
        m = len(t.itinerary)
        entries[t.id] = TrainTimes(tuple(int(x[_var(t.id, k, "a")]) for k in range(m)),
                                   tuple(int(x[_var(t.id, k, "d")]) for k in range(m)),
                                   tuple(paths[t.id]))
    return Schedule(entries), int(obj)
