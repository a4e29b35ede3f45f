"""Semi-greedy scheduler: permutation of trains -> schedule.

Trains are inserted one at a time in permutation order, node by node. At
each node every usable route is tried; its arrival and departure start at
their floors and are pushed forward until no constraint against the trains
already placed is violated. The route giving the earliest departure wins.

A conflict that cannot be solved by waiting (the train would have to
overtake a train it precedes on the same edge track) removes the obstacle
from the schedule. The obstacle is re-inserted right after the current
train. Each train can be removed at most ``kick_limit`` times; trains that
cannot be placed are left out and the decode is flagged incomplete.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .model import CONNECTION_MODES, Instance
from .schedule import Schedule, TrainTimes


@dataclass(frozen=True)
class DecoderConfig:
    kick_limit: int = 5
    connection_mode: str = "turnaround"
    record_trace: bool = False

    def __post_init__(self):
        if self.kick_limit < 0:
            raise ValueError("kick_limit must be non-negative")
        if self.connection_mode not in CONNECTION_MODES:
            raise ValueError(f"unknown connection mode {self.connection_mode!r}")


@dataclass
class DecodeResult:
    schedule: Schedule
    realized_order: tuple[int, ...]
    kick_counts: tuple[int, ...]
    unscheduled: frozenset[int]
    steps: int = 0
    trace: list = field(default_factory=list, repr=False)

    @property
    def complete(self) -> bool:
        return not self.unscheduled

    @property
    def total_kicks(self) -> int:
        return sum(self.kick_counts)

    def to_dict(self) -> dict:
        return {
            "complete": self.complete,
            "realized_order": list(self.realized_order),
            "kick_counts": list(self.kick_counts),
            "unscheduled": sorted(self.unscheduled),
            "schedule": self.schedule.to_dict(),
        }


def resolve_forward(t: int, other: int, gap: int, horizon: int) -> int | None:
    """Smallest time ``>= t`` that is at least ``other + gap``.

    ``None`` signals that the result would fall beyond the horizon.
    """
    if t < other + gap:
        t = other + gap
    return None if t > horizon else t


def request_kick(obstacle: int, kick_counts, kick_limit: int) -> int | None:
    """The train to remove, or ``None`` when it may not be removed again."""
    return obstacle if kick_counts[obstacle] < kick_limit else None


def penalty_constants(inst: Instance) -> tuple[int, int]:
    """``(P_base, P_unit)``: any incomplete decode scores above any complete one."""
    return len(inst.trains) * inst.max_itinerary * inst.horizon, inst.horizon


def penalized_fitness(result: DecodeResult, inst: Instance) -> int:
    """Total arrival delay, or a penalty growing with the unscheduled count."""
    if result.unscheduled:
        p_base, p_unit = penalty_constants(inst)
        return p_base + len(result.unscheduled) * p_unit
    total = 0
    for c, tt in result.schedule.entries.items():
        total += sum(tt.arrivals) - sum(inst.trains[c].base_arrivals)
    return total


class _Fit:
    __slots__ = ("route", "a", "d", "kicks")

    def __init__(self, route, a, d, kicks):
        self.route, self.a, self.d, self.kicks = route, a, d, kicks


class _Decoder:
    """Partial-schedule state for one decode. Never shared."""

    def __init__(self, inst: Instance, cfg: DecoderConfig):
        self.inst = inst
        self.cfg = cfg
        self.H = inst.horizon
        n = len(inst.trains)
        self.kick_counts = [0] * n
        self.placed: dict[int, tuple[list, list, list]] = {}
        # resource -> {train: occupancy}
        self.edge_occ: dict[tuple, dict] = {}
        self.node_occ: dict[tuple, dict] = {}
        self.gate_occ: dict[tuple, dict] = {}
        self.steps = 0
        self.trace = []

    # -- occupancy bookkeeping ------------------------------------------------

    def _resources(self, c, arr, dep, routes):
        inst = self.inst
        train = inst.trains[c]
        it = train.itinerary
        last = len(it) - 1
        for k, i in enumerate(it):
            node = inst.nodes[i]
            route = node.routes[routes[k]]
            yield self.node_occ, (i, route.inside_track), (arr[k], dep[k])
            if k < last:
                yield self.edge_occ, (route.outgoing_track, i, it[k + 1]), (dep[k], arr[k + 1])
            for g_idx, events in self._gate_events(node, route, k, last, arr[k], dep[k]):
                yield self.gate_occ, (i, g_idx), events

    @staticmethod
    def _gate_events(node, route, k, last, a, d):
        for g_idx, g in enumerate(node.gate_groups):
            events = []
            for m in g.members:
                if m.direction == "I":
                    if k > 0 and route.incoming_track == m.track:
                        events.append(("I", a))
                elif k < last and route.outgoing_track == m.track:
                    events.append(("O", d))
            if events:
                yield g_idx, tuple(events)

    def _add(self, c):
        arr, dep, routes = self.placed[c]
        for table, key, occ in self._resources(c, arr, dep, routes):
            table.setdefault(key, {})[c] = occ

    def _remove(self, c):
        arr, dep, routes = self.placed.pop(c)
        for table, key, _ in self._resources(c, arr, dep, routes):
            del table[key][c]

    # -- constraint loop for one route at one node -----------------------------

    def _fit(self, c, k, r_idx, d_prev, kickable):
        """Least (a, d) for route ``r_idx`` at position ``k``, or ``None``.

        Obstacles that must be removed are collected in the returned kick
        set and ignored from then on.
        """
        inst, H = self.inst, self.H
        train = inst.trains[c]
        it = train.itinerary
        last = len(it) - 1
        i = it[k]
        node = inst.nodes[i]
        route = node.routes[r_idx]
        sp = inst.spacing
        fa, fd = train.floor_arrivals[k], train.floor_departures[k]
        smin, smax = train.stop_min[k], train.stop_max[k]

        a = fa
        if k > 0:
            a = max(a, d_prev + train.travel_min[k - 1])
        d = max(fd, a + smin)
        kicks: set[int] = set()

        in_users = out_users = None
        if k > 0:
            e_in = inst.leg_edges[c][k - 1]
            in_users = self.edge_occ.get((route.incoming_track, it[k - 1], i), {})
        if k < last:
            e_out = inst.leg_edges[c][k]
            out_users = self.edge_occ.get((route.outgoing_track, i, it[k + 1]), {})
        node_users = self.node_occ.get((i, route.inside_track), {})
        partner = None
        conn = inst.pred_of.get(c) if k == 0 else None
        if conn is not None:
            partner = conn.predecessor
        gates = [(g_idx, inst.nodes[i].gate_groups[g_idx].eps, ev,
                  self.gate_occ.get((i, g_idx), {}))
                 for g_idx, ev in self._gate_events(node, route, k, last, 0, 0)]
        literal = self.cfg.connection_mode == "literal"

        guard = 0
        while True:
            guard += 1
            self.steps += 1
            if guard > 4 * H + 100:
                raise RuntimeError("constraint loop failed to converge")
            if a > H or d > H:
                return None
            # initial times
            if a < fa:
                a = fa
                continue
            if d < fd:
                d = fd
                continue
            # stopping time
            if d < a + smin:
                d = a + smin
                continue
            if d > a + smax:
                a = d - smax
                continue
            # speed
            if k > 0 and a < d_prev + train.travel_min[k - 1]:
                a = d_prev + train.travel_min[k - 1]
                continue
            # edge spacing, arrival side: order on the edge is already fixed
            moved = False
            if in_users:
                for c2, (d2, a2) in in_users.items():
                    if c2 in kicks:
                        continue
                    g_after = sp.edge(c2, c, e_in)
                    if d_prev >= d2 + g_after:
                        nxt = resolve_forward(a, a2, g_after, H)
                        if nxt is None:
                            return None
                        if nxt != a:
                            a = nxt
                            moved = True
                            break
                    elif a2 < a + sp.edge(c, c2, e_in):
                        # would overtake c2 on the track: remove it instead
                        kicks.add(c2)
                if moved:
                    continue
            # edge spacing, departure side
            if out_users:
                for c2, (d2, a2) in out_users.items():
                    if c2 in kicks:
                        continue
                    g_after = sp.edge(c2, c, e_out)
                    if d >= d2 + g_after or d2 >= d + sp.edge(c, c2, e_out):
                        continue
                    d = d2 + g_after
                    moved = True
                    break
                if moved:
                    continue
            # node spacing
            for c2, (a2, d2) in node_users.items():
                if c2 in kicks or c2 == partner:
                    continue
                g_after = sp.node(c2, c, i)
                if a >= d2 + g_after or a2 >= d + sp.node(c, c2, i):
                    continue
                a = d2 + g_after
                moved = True
                break
            if moved:
                continue
            # switching gates
            for g_idx, eps, my_types, users in gates:
                mine = [(typ, a if typ == "I" else d) for typ, _ in my_types]
                for c2, theirs in users.items():
                    if c2 in kicks:
                        continue
                    after = all(t1 >= t2 + eps[y2 + y1]
                                for y1, t1 in mine for y2, t2 in theirs)
                    if after:
                        continue
                    before = all(t2 >= t1 + eps[y1 + y2]
                                 for y1, t1 in mine for y2, t2 in theirs)
                    if before:
                        continue
                    for y1, _ in mine:
                        need = max(t2 + eps[y2 + y1] for y2, t2 in theirs)
                        if y1 == "I":
                            a = max(a, need)
                        else:
                            d = max(d, need)
                    moved = True
                    break
                if moved:
                    break
            if moved:
                continue
            # connections
            if conn is not None and partner in self.placed:
                p_arr, p_dep, _ = self.placed[partner]
                if literal:
                    if d < p_dep[-1]:
                        d = p_dep[-1]
                        continue
                    if d > p_dep[-1]:
                        return None
                elif d < p_arr[-1] + conn.turnaround:
                    d = p_arr[-1] + conn.turnaround
                    continue
            if literal and k == 1 and c in inst.pred_of:
                target = d_prev + inst.pred_of[c].turnaround
                if a < target:
                    a = target
                    continue
                if a > target:
                    return None
            break

        if any(not kickable(x) for x in kicks):
            return _Fit(r_idx, a, d, None)  # blocked by an obstacle at its limit
        return _Fit(r_idx, a, d, frozenset(kicks))

    # -- train insertion ------------------------------------------------------

    def insert_train(self, c):
        """Place ``c`` node by node.

        Returns ``("placed", kicked)``, ``("blocked", kicked)`` when the only
        routes left need to remove a train at its kick limit, or
        ``("failed", kicked)``. ``kicked`` lists trains removed on the way.
        """
        inst = self.inst
        train = inst.trains[c]
        it = train.itinerary
        opts = inst.route_options[c]
        limit = self.cfg.kick_limit
        literal = self.cfg.connection_mode == "literal"
        conn = inst.pred_of.get(c)
        own_pred = conn.predecessor if conn is not None else None

        def kickable(x):
            # the predecessor pins this train's first departure; it stays put
            return x != own_pred and request_kick(x, self.kick_counts, limit) is not None

        arr, dep, routes = [], [], []
        kicked: list[int] = []
        prev_out = None
        for k, i in enumerate(it):
            node = inst.nodes[i]
            d_prev = dep[-1] if k else None
            fits = []
            for r_idx in opts[k]:
                route = node.routes[r_idx]
                if k > 0 and route.incoming_track != prev_out:
                    continue
                if k == 0 and conn is not None and conn.predecessor in self.placed:
                    p_route = self.placed[conn.predecessor][2][-1]
                    if literal:
                        if r_idx != p_route:
                            continue
                    elif route.inside_track != node.routes[p_route].inside_track:
                        continue
                fit = self._fit(c, k, r_idx, d_prev, kickable)
                if fit is not None:
                    fits.append(fit)
            free = [f for f in fits if f.kicks is not None and not f.kicks]
            costly = [f for f in fits if f.kicks]
            pool = free or costly
            if self.cfg.record_trace:
                self.trace.append((c, k, [(f.route, f.d, None if f.kicks is None
                                           else sorted(f.kicks)) for f in fits]))
            if not pool:
                status = "blocked" if fits else "failed"
                return status, kicked
            best = min(pool, key=lambda f: (f.d, f.route))
            for x in sorted(best.kicks):
                if x in self.placed:
                    self._kick(x, kicked)
            arr.append(best.a)
            dep.append(best.d)
            routes.append(best.route)
            prev_out = node.routes[best.route].outgoing_track
        self.placed[c] = (arr, dep, routes)
        self._add(c)
        return "placed", kicked

    def _kick(self, x, kicked):
        self._remove(x)
        self.kick_counts[x] += 1
        kicked.append(x)
        conn = self.inst.succ_of.get(x)
        if conn is not None and conn.successor in self.placed:
            # the successor's times hang on x; it goes back to the queue too
            s = conn.successor
            self._remove(s)
            self.kick_counts[s] = min(self.kick_counts[s] + 1, self.cfg.kick_limit)
            kicked.append(s)

    # -- main loop ------------------------------------------------------------

    def run(self, perm) -> DecodeResult:
        inst = self.inst
        limit = self.cfg.kick_limit
        pending = deque(perm)
        unscheduled: set[int] = set()
        order: list[int] = []
        while pending:
            c = pending.popleft()
            conn = inst.pred_of.get(c)
            if conn is not None and conn.predecessor not in self.placed:
                p = conn.predecessor
                if p in unscheduled or self.kick_counts[c] >= limit:
                    unscheduled.add(c)
                    continue
                self.kick_counts[c] += 1
                pending.insert(pending.index(p) + 1, c)
                continue
            status, kicked = self.insert_train(c)
            for x in kicked:
                if x in order:
                    order.remove(x)
            if status == "placed":
                order.append(c)
            else:
                unscheduled.add(c)
            pending.extendleft(reversed(kicked))
        sched = Schedule({c: TrainTimes(tuple(a), tuple(d), tuple(r))
                          for c, (a, d, r) in self.placed.items()})
        return DecodeResult(sched, tuple(order), tuple(self.kick_counts),
                            frozenset(unscheduled), self.steps, self.trace)


def check_permutation(inst: Instance, perm) -> None:
    if sorted(perm) != list(range(len(inst.trains))):
        raise ValueError("not a permutation of the instance's trains")


def decode(inst: Instance, perm, cfg: DecoderConfig | None = None) -> DecodeResult:
    """Map a permutation of train ids to a schedule.

    ``inst`` should already carry the perturbation floors (see
    :func:`~retimetable.model.apply_perturbation`). Never raises on
    infeasibility: trains that do not fit are reported in ``unscheduled``.
    """
    perm = list(perm)
    check_permutation(inst, perm)
    return _Decoder(inst, cfg or DecoderConfig()).run(perm)
