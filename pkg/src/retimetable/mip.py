"""Mixed-integer linear program export with warm starts.

The model uses integer times ``a_c_i`` and ``d_c_i`` (train ``c``, node
``i``), a dwell variable ``s_c_i`` carrying the stop-time bounds, one binary
``x_c_i_r`` per usable route and one ordering binary ``y_c_cp_res`` per
train pair and shared resource. Spacing rows are big-M disjunctions that
switch off unless both trains actually use the resource and the ordering
binary selects that side.

Output is CPLEX LP text; a warm start is a plain ``name value`` file.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from .model import Instance
from .schedule import Schedule
from .validate import (count_constraints, shared_edge_tracks, shared_gates,
                       shared_inside_tracks, validate_schedule)

LINKING_FAMILIES = ("RouteChoice", "RouteLink")


class MipTooLargeError(ValueError):
    pass


class WarmStartError(ValueError):
    pass


@dataclass
class Row:
    name: str
    family: str
    terms: dict[str, int]
    sense: str  # ">=", "<=" or "="
    rhs: int

    def activity(self, values) -> int:
        return sum(coef * values[v] for v, coef in self.terms.items())

    def satisfied(self, values) -> bool:
        lhs = self.activity(values)
        if self.sense == ">=":
            return lhs >= self.rhs
        if self.sense == "<=":
            return lhs <= self.rhs
        return lhs == self.rhs


@dataclass
class MipModel:
    big_m: int
    objective: dict[str, int] = field(default_factory=dict)
    objective_constant: int = 0
    bounds: dict[str, tuple[int, int]] = field(default_factory=dict)
    integers: list[str] = field(default_factory=list)
    binaries: list[str] = field(default_factory=list)
    rows: list[Row] = field(default_factory=list)
    y_rows: dict[str, list[int]] = field(default_factory=dict)

    def family_counts(self) -> dict[str, int]:
        out: dict[str, int] = defaultdict(int)
        for r in self.rows:
            out[r.family] += 1
        return dict(out)

    def objective_value(self, values) -> int:
        return sum(c * values[v] for v, c in self.objective.items()) + self.objective_constant

    def violated_rows(self, values) -> list[Row]:
        return [r for r in self.rows if not r.satisfied(values)]

    @property
    def variables(self) -> list[str]:
        return self.integers + self.binaries


def _t(kind, c, i):
    return f"{kind}_{c}_{i}"


def _x(c, i, r):
    return f"x_{c}_{i}_{r}"


def _add(terms, var, coef):
    terms[var] = terms.get(var, 0) + coef
    if terms[var] == 0:
        del terms[var]


def build_model(inst: Instance, connection_mode: str = "turnaround",
                max_rows: int | None = 5_000_000) -> MipModel:
    """Assemble the disjunctive big-M model of ``inst``."""
    if max_rows is not None:
        est = sum(count_constraints(inst, connection_mode).values())
        est += sum(2 * len(t.itinerary) for t in inst.trains)
        if est > max_rows:
            raise MipTooLargeError(
                f"model would have about {est} rows, above the cap of {max_rows}; "
                "raise max_rows or export a smaller instance")
    H = inst.horizon
    M = H + inst.max_constant
    model = MipModel(big_m=M)
    opts = inst.route_options

    def row(name, family, terms, sense, rhs):
        model.rows.append(Row(name, family, terms, sense, rhs))
        return len(model.rows) - 1

    # variables, objective, per-train rows
    for t in inst.trains:
        c, it = t.id, t.itinerary
        for k, i in enumerate(it):
            a, d, s = _t("a", c, i), _t("d", c, i), _t("s", c, i)
            model.bounds[a] = (t.floor_arrivals[k], H)
            model.bounds[d] = (t.floor_departures[k], H)
            model.bounds[s] = (t.stop_min[k], t.stop_max[k])
            model.integers += [a, d, s]
            model.objective[a] = 1
            model.objective_constant -= t.base_arrivals[k]
            for r in opts[c][k]:
                model.binaries.append(_x(c, i, r))
                model.bounds[_x(c, i, r)] = (0, 1)
            row(f"it_a_{c}_{i}", "InitialTime", {a: 1}, ">=", t.floor_arrivals[k])
            row(f"it_d_{c}_{i}", "InitialTime", {d: 1}, ">=", t.floor_departures[k])
            row(f"sb_{c}_{i}", "StopBound", {d: 1, a: -1, s: -1}, "=", 0)
            row(f"rc_{c}_{i}", "RouteChoice", {_x(c, i, r): 1 for r in opts[c][k]}, "=", 1)
        for k in range(len(it) - 1):
            i, j = it[k], it[k + 1]
            row(f"sp_{c}_{i}_{j}", "Speed", {_t("a", c, j): 1, _t("d", c, i): -1},
                ">=", t.travel_min[k])
            edge = inst.edges[inst.edge_between[(i, j)]]
            for track in edge.tracks:
                terms: dict[str, int] = {}
                for r in opts[c][k]:
                    if inst.nodes[i].routes[r].outgoing_track == track:
                        _add(terms, _x(c, i, r), 1)
                for r in opts[c][k + 1]:
                    if inst.nodes[j].routes[r].incoming_track == track:
                        _add(terms, _x(c, j, r), -1)
                if terms:
                    row(f"rl_{c}_{i}_{j}_{track}", "RouteLink", terms, "=", 0)

    def use(c, k, pred):
        """Sum of route binaries of train c at position k selecting a resource."""
        i = inst.trains[c].itinerary[k]
        return {_x(c, i, r): 1 for r in opts[c][k] if pred(inst.nodes[i].routes[r])}

    def disjunct(name, family, y, lead_terms, uses, rhs, y_on):
        """``lead_terms >= rhs`` whenever every ``uses`` sum is 1 and ``y == y_on``."""
        terms = dict(lead_terms)
        const = rhs
        # - M (1 - y)  or  - M y
        if y_on:
            _add(terms, y, -M)
            const -= M
        else:
            _add(terms, y, M)
        for u in uses:
            for v, coef in u.items():
                _add(terms, v, -M * coef)
            const -= M
        idx = row(name, family, terms, ">=", const)
        model.y_rows.setdefault(y, []).append(idx)

    def add_y(name):
        model.binaries.append(name)
        model.bounds[name] = (0, 1)
        return name

    sp = inst.spacing
    for c1, k1, c2, k2, e, track in shared_edge_tracks(inst):
        it1, it2 = inst.trains[c1].itinerary, inst.trains[c2].itinerary
        i, j = it1[k1], it1[k1 + 1]
        y = add_y(f"y_{c1}_{c2}_e{e}t{track}")
        uses = [use(c1, k1, lambda r: r.outgoing_track == track),
                use(c2, k2, lambda r: r.outgoing_track == track)]
        g12, g21 = sp.edge(c1, c2, e), sp.edge(c2, c1, e)
        base = f"es_{c1}_{c2}_e{e}t{track}"
        d1, d2 = _t("d", c1, i), _t("d", c2, i)
        a1, a2 = _t("a", c1, j), _t("a", c2, j)
        disjunct(base + "_dep", "EdgeSpacing", y, {d2: 1, d1: -1}, uses, g12, True)
        disjunct(base + "_arr", "EdgeSpacing", y, {a2: 1, a1: -1}, uses, g12, True)
        disjunct(base + "_dep_r", "EdgeSpacing", y, {d1: 1, d2: -1}, uses, g21, False)
        disjunct(base + "_arr_r", "EdgeSpacing", y, {a1: 1, a2: -1}, uses, g21, False)
        assert it2[k2] == i

    for c1, k1, c2, k2, i, u in shared_inside_tracks(inst):
        y = add_y(f"y_{c1}_{c2}_n{i}u{u}")
        uses = [use(c1, k1, lambda r: r.inside_track == u),
                use(c2, k2, lambda r: r.inside_track == u)]
        base = f"ns_{c1}_{c2}_n{i}u{u}"
        disjunct(base, "NodeSpacing", y, {_t("a", c2, i): 1, _t("d", c1, i): -1},
                 uses, sp.node(c1, c2, i), True)
        disjunct(base + "_r", "NodeSpacing", y, {_t("a", c1, i): 1, _t("d", c2, i): -1},
                 uses, sp.node(c2, c1, i), False)

    for c1, k1, c2, k2, i, g_idx, m1, m2 in shared_gates(inst):
        group = inst.nodes[i].gate_groups[g_idx]
        y = add_y(f"y_{c1}_{c2}_g{i}x{g_idx}")
        for p in m1:
            for q in m2:
                mp, mq = group.members[p], group.members[q]
                u1 = use(c1, k1, _member_pred(mp))
                u2 = use(c2, k2, _member_pred(mq))
                t1 = _t("a" if mp.direction == "I" else "d", c1, i)
                t2 = _t("a" if mq.direction == "I" else "d", c2, i)
                base = f"gt_{c1}_{c2}_g{i}x{g_idx}_{p}_{q}"
                disjunct(base, "Gate", y, {t2: 1, t1: -1}, [u1, u2],
                         group.eps[mp.direction + mq.direction], True)
                disjunct(base + "_r", "Gate", y, {t1: 1, t2: -1}, [u1, u2],
                         group.eps[mq.direction + mp.direction], False)

    for x in inst.connections:
        p, q, i = x.predecessor, x.successor, x.node
        kp = len(inst.trains[p].itinerary) - 1
        node = inst.nodes[i]
        if connection_mode == "turnaround":
            row(f"cn_{p}_{q}", "Connection", {_t("d", q, i): 1, _t("a", p, i): -1},
                ">=", x.turnaround)
            for u in node.tracks:
                terms = {}
                for r in opts[p][kp]:
                    if node.routes[r].inside_track == u:
                        _add(terms, _x(p, i, r), 1)
                for r in opts[q][0]:
                    if node.routes[r].inside_track == u:
                        _add(terms, _x(q, i, r), -1)
                if terms:
                    row(f"cn_{p}_{q}_u{u}", "Connection", terms, "=", 0)
        else:
            row(f"cn_{p}_{q}_dep", "Connection", {_t("d", q, i): 1, _t("d", p, i): -1},
                "=", 0)
            qt = inst.trains[q]
            if len(qt.itinerary) > 1:
                j = qt.itinerary[1]
                row(f"cn_{p}_{q}_arr", "Connection",
                    {_t("a", q, j): 1, _t("d", q, i): -1}, "=", x.turnaround)
            for r in sorted(set(opts[p][kp]) | set(opts[q][0])):
                terms = {}
                if r in opts[p][kp]:
                    terms[_x(p, i, r)] = 1
                if r in opts[q][0]:
                    terms[_x(q, i, r)] = -1
                row(f"cn_{p}_{q}_r{r}", "Connection", terms, "=", 0)
    return model


def _member_pred(m):
    if m.direction == "I":
        return lambda r: r.incoming_track == m.track
    return lambda r: r.outgoing_track == m.track


# ---------------------------------------------------------------------------
# text output

def _expr(terms: dict[str, int]) -> list[str]:
    parts = []
    for v, coef in terms.items():
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        parts.append(f"{sign} {v}" if mag == 1 else f"{sign} {mag} {v}")
    if parts[0].startswith("+ "):
        parts[0] = parts[0][2:]
    return parts


def _wrap(head: str, parts: list[str], tail: str, width: int = 200) -> list[str]:
    lines, cur = [], head
    for p in parts:
        if len(cur) + len(p) + 1 > width:
            lines.append(cur)
            cur = "   " + p
        else:
            cur = f"{cur} {p}"
    cur = f"{cur} {tail}"
    lines.append(cur)
    return lines


def render_lp(model: MipModel) -> str:
    out = ["\\ train re-timetabling model",
           f"\\ big-M = {model.big_m}",
           "Minimize"]
    obj = _expr(model.objective)
    const = model.objective_constant
    if const:
        obj.append(f"- {-const}" if const < 0 else f"+ {const}")
    out += _wrap(" obj:", obj, "")
    out.append("Subject To")
    for r in model.rows:
        out += _wrap(f" {r.name}:", _expr(r.terms), f"{r.sense} {r.rhs}")
    out.append("Bounds")
    for v in model.integers:
        lo, hi = model.bounds[v]
        out.append(f" {lo} <= {v} <= {hi}")
    out.append("General")
    out += _wrap("", model.integers, "")
    out.append("Binary")
    out += _wrap("", model.binaries, "")
    out.append("End")
    return "\n".join(line.rstrip() for line in out) + "\n"


def export_lp(inst: Instance, connection_mode: str = "turnaround",
              max_rows: int | None = 5_000_000) -> str:
    """The instance as CPLEX LP text. Deterministic byte for byte."""
    return render_lp(build_model(inst, connection_mode, max_rows))


# ---------------------------------------------------------------------------
# warm starts

def warm_start_values(inst: Instance, sched: Schedule, model: MipModel,
                      connection_mode: str = "turnaround") -> dict[str, int]:
    """Full variable assignment for a complete, feasible schedule."""
    if set(sched.entries) != set(range(len(inst.trains))):
        raise WarmStartError("schedule is incomplete; warm starts need every train")
    bad = validate_schedule(inst, sched, connection_mode)
    if bad:
        raise WarmStartError(f"schedule is infeasible ({len(bad)} violations), "
                             f"first: {bad[0]}")
    values: dict[str, int] = {}
    for t in inst.trains:
        tt = sched[t.id]
        for k, i in enumerate(t.itinerary):
            values[_t("a", t.id, i)] = tt.arrivals[k]
            values[_t("d", t.id, i)] = tt.departures[k]
            values[_t("s", t.id, i)] = tt.departures[k] - tt.arrivals[k]
            for r in inst.route_options[t.id][k]:
                values[_x(t.id, i, r)] = int(r == tt.routes[k])
    for y, idxs in model.y_rows.items():
        values[y] = 1
        if not all(model.rows[ix].satisfied(values) for ix in idxs):
            values[y] = 0
    missing = [v for v in model.variables if v not in values]
    if missing:
        raise WarmStartError(f"no value for {missing[:5]}")
    broken = model.violated_rows(values)
    if broken:
        raise WarmStartError(f"warm start violates {len(broken)} rows, first: {broken[0].name}")
    return values


def export_warm_start(inst: Instance, sched: Schedule,
                      connection_mode: str = "turnaround",
                      model: MipModel | None = None) -> str:
    """``name value`` lines covering every model variable.

    Refuses (:class:`WarmStartError`) incomplete or infeasible schedules;
    the assignment is checked against every row before it is returned.
    """
    model = model or build_model(inst, connection_mode, max_rows=None)
    values = warm_start_values(inst, sched, model, connection_mode)
    lines = [f"# warm start, objective {model.objective_value(values)}"]
    lines += [f"{v} {values[v]}" for v in model.variables]
    return "\n".join(lines) + "\n"


def read_warm_start(text: str) -> dict[str, int]:
    out = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            name, val = line.split()
            out[name] = int(val)
    return out
