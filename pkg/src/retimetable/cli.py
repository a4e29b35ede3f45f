"""Command-line front end: ``python3 -m retimetable <command> ...``.

Exit status is 0 on success, 1 on domain errors (bad instance, infeasible
schedule, oracle limits) and 2 on usage errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import mip, oracle
from .decoder import (CONNECTION_MODES, DecoderConfig, check_permutation, decode,
                      penalized_fitness)
from .diagram import PathError, emit_spacetime_svg
from .evolve import EAConfig, ProcessEvaluator, run_ea, stats_csv
from .generator import TOPOLOGIES, GeneratorParams, generate_instance
from .model import (InstanceError, Perturbation, apply_perturbation, check_instance,
                    dumps_instance, load_instance)
from .schedule import Schedule
from .validate import format_report, validate_schedule


class DomainError(Exception):
    pass


def _write(path, text):
    Path(path).write_text(text)


def _read_perm(path):
    vals = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            vals.append(int(line))
    return vals


def _load(args, perturbed=True):
    inst = load_instance(args.instance)
    return apply_perturbation(inst) if perturbed else inst


def _decoder_cfg(args):
    return DecoderConfig(kick_limit=args.kick_limit, connection_mode=args.connection_mode)


# -- commands ----------------------------------------------------------------

def cmd_generate(args):
    params = GeneratorParams(topology=args.topology, nodes=args.nodes, trains=args.trains,
                             tracks_per_edge=args.tracks_per_edge,
                             inside_tracks=args.inside_tracks, seed=args.seed,
                             max_stops=args.max_stops, delay=args.delay,
                             edge_gamma=args.edge_gamma, node_gamma=args.node_gamma)
    _write(args.out, dumps_instance(generate_instance(params)))
    return 0


def cmd_perturb(args):
    inst = load_instance(args.instance)
    if args.train is None:
        rng = np.random.default_rng(args.seed)
        movers = [t for t in inst.trains if len(t.itinerary) >= 2]
        if not movers:
            raise DomainError("no train has a leg to delay")
        t = movers[int(rng.integers(len(movers)))]
        k = int(rng.integers(len(t.itinerary) - 1))
        pert = (Perturbation(t.id, args.delay, leg=k) if args.on_leg_random
                else Perturbation(t.id, args.delay, node=t.itinerary[k]))
    elif args.at_node is not None:
        pert = Perturbation(args.train, args.delay, node=args.at_node)
    elif args.on_leg is not None:
        pert = Perturbation(args.train, args.delay, leg=args.on_leg)
    else:
        raise DomainError("give --at-node or --on-leg together with --train")
    new = replace(inst, perturbation=pert)
    check_instance(new)
    _write(args.out, dumps_instance(new))
    return 0


def cmd_decode(args):
    inst = _load(args)
    perm = _read_perm(args.perm)
    try:
        check_permutation(inst, perm)
    except ValueError as exc:
        raise DomainError(str(exc)) from exc
    res = decode(inst, perm, _decoder_cfg(args))
    doc = res.to_dict()
    doc["fitness"] = penalized_fitness(res, inst)
    _write(args.out, json.dumps(doc, indent=1) + "\n")
    if args.schedule_out:
        _write(args.schedule_out, res.schedule.dumps())
    print(f"fitness {doc['fitness']}, {len(res.unscheduled)} unscheduled")
    return 0


def cmd_validate(args):
    inst = _load(args, perturbed=args.perturbed)
    sched = Schedule.loads(Path(args.schedule).read_text())
    bad = validate_schedule(inst, sched, args.connection_mode)
    if args.json:
        _write(args.json, json.dumps([v.to_dict() for v in bad], indent=1) + "\n")
    sys.stdout.write(format_report(bad))
    return 0 if not bad else 1


def cmd_evolve(args):
    inst = _load(args)
    cfg = EAConfig(mu=args.mu, lam=args.lam, tournament_s=args.tournament_s,
                   radius=args.radius, t0=args.t0, t_inf=args.t_inf, n0=args.n0,
                   decay=args.decay, generations=args.generations,
                   time_limit=args.time_limit, stagnation=args.stagnation or None,
                   seed=args.seed, decoder=_decoder_cfg(args))
    latest = {}

    def keep(stats, parents):
        latest["best"] = parents[0]
        latest.setdefault("stats", []).append(stats)

    evaluator = ProcessEvaluator(inst, cfg.decoder, args.workers) if args.workers > 1 else None
    interrupted = False
    try:
        best, stats = run_ea(inst, cfg, evaluator=evaluator, timing=not args.no_timing,
                             on_generation=keep)
    except KeyboardInterrupt:
        # any-time behaviour: keep what has been found so far
        if "best" not in latest:
            raise
        best, stats, interrupted = latest["best"], latest["stats"], True
    finally:
        if evaluator is not None:
            evaluator.close()
    _write(args.stats, stats_csv(stats))
    if args.perm_out:
        _write(args.perm_out, "".join(f"{c}\n" for c in best.genotype))
    if args.schedule_out:
        _write(args.schedule_out, decode(inst, best.genotype, cfg.decoder).schedule.dumps())
    print(f"best fitness {best.fitness} after {stats[-1].n} generations"
          + (" (interrupted)" if interrupted else ""))
    return 130 if interrupted else 0


def cmd_export_mip(args):
    inst = _load(args)
    try:
        model = mip.build_model(inst, args.connection_mode, max_rows=args.max_rows)
    except mip.MipTooLargeError as exc:
        raise DomainError(str(exc)) from exc
    _write(args.out, mip.render_lp(model))
    if args.warm_start:
        if not args.mst_out:
            raise DomainError("--warm-start needs --mst-out")
        sched = Schedule.loads(Path(args.warm_start).read_text())
        try:
            text = mip.export_warm_start(inst, sched, args.connection_mode, model=model)
        except mip.WarmStartError as exc:
            raise DomainError(str(exc)) from exc
        _write(args.mst_out, text)
    print(f"{len(model.rows)} rows, {len(model.variables)} variables")
    return 0


def cmd_oracle(args):
    inst = _load(args)
    try:
        perm, pfit = oracle.best_permutation_exhaustive(inst, _decoder_cfg(args))
        sched, tfit = oracle.true_optimum_exhaustive(inst, args.time_grid,
                                                     args.connection_mode)
    except (oracle.OracleSizeError, oracle.OracleInfeasibleError) as exc:
        raise DomainError(str(exc)) from exc
    print(f"best permutation {' '.join(map(str, perm))}: fitness {pfit}")
    print(f"true optimum: fitness {tfit}")
    print(f"gap {pfit - tfit}")
    if args.schedule_out:
        _write(args.schedule_out, sched.dumps())
    return 0


def cmd_diagram(args):
    inst = load_instance(args.instance)
    scheds = [Schedule.loads(Path(p).read_text()) for p in args.schedule]
    path = [int(x) for x in args.path.split(",")] if args.path else None
    trains = None
    if args.trains is not None:
        trains = [int(x) for x in args.trains.split(",") if x.strip()]
    try:
        svg = emit_spacetime_svg(inst, scheds, path=path, trains=trains)
    except (PathError, ValueError) as exc:
        raise DomainError(str(exc)) from exc
    _write(args.out, svg)
    return 0


# -- parser ------------------------------------------------------------------

def _decoder_flags(p):
    p.add_argument("--kick-limit", type=int, default=5)
    p.add_argument("--connection-mode", choices=CONNECTION_MODES, default="turnaround")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="retimetable",
                                 description="Train re-timetabling after a perturbation.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic instance")
    p.add_argument("--out", required=True)
    p.add_argument("--topology", choices=TOPOLOGIES, default="line")
    p.add_argument("--nodes", type=int, default=6)
    p.add_argument("--trains", type=int, default=10)
    p.add_argument("--tracks-per-edge", type=int, default=2)
    p.add_argument("--inside-tracks", type=int, default=2)
    p.add_argument("--max-stops", type=int, default=12)
    p.add_argument("--delay", type=int, default=600)
    p.add_argument("--edge-gamma", type=int, default=60)
    p.add_argument("--node-gamma", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("perturb", help="set the instance's perturbation")
    p.add_argument("--instance", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--delay", type=int, required=True)
    p.add_argument("--train", type=int, help="omit to pick a random train with --seed")
    loc = p.add_mutually_exclusive_group()
    loc.add_argument("--at-node", type=int)
    loc.add_argument("--on-leg", type=int)
    p.add_argument("--on-leg-random", action="store_true",
                   help="random mode: delay a leg instead of a departure")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("decode", help="decode a permutation into a schedule")
    p.add_argument("--instance", required=True)
    p.add_argument("--perm", required=True, help="one train id per line")
    p.add_argument("--out", required=True, help="decode result (JSON)")
    p.add_argument("--schedule-out")
    _decoder_flags(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("validate", help="list constraint violations of a schedule")
    p.add_argument("--instance", required=True)
    p.add_argument("--schedule", required=True)
    p.add_argument("--perturbed", action="store_true",
                   help="check against the perturbed time floors")
    p.add_argument("--json", help="also write the violations as JSON here")
    p.add_argument("--connection-mode", choices=CONNECTION_MODES, default="turnaround")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("evolve", help="run the evolutionary search")
    p.add_argument("--instance", required=True)
    p.add_argument("--stats", required=True, help="per-generation CSV")
    p.add_argument("--perm-out")
    p.add_argument("--schedule-out")
    d = EAConfig()
    p.add_argument("--mu", type=int, default=d.mu)
    p.add_argument("--lambda", dest="lam", type=int, default=d.lam)
    p.add_argument("--tournament-s", type=int, default=d.tournament_s)
    p.add_argument("--radius", type=int, default=d.radius)
    p.add_argument("--t0", type=float, default=d.t0)
    p.add_argument("--t-inf", type=float, default=d.t_inf)
    p.add_argument("--n0", type=int, default=d.n0)
    p.add_argument("--decay", type=float, default=d.decay)
    p.add_argument("--generations", type=int, default=d.generations)
    p.add_argument("--time-limit", type=float, help="seconds")
    p.add_argument("--stagnation", type=int, default=10,
                   help="stop after this many generations without improvement (0: never)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-timing", action="store_true",
                   help="write 0 for elapsed_ms so the CSV is reproducible")
    _decoder_flags(p)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("export-mip", help="write the LP model and an optional warm start")
    p.add_argument("--instance", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--warm-start", help="schedule JSON to turn into a warm start")
    p.add_argument("--mst-out")
    p.add_argument("--max-rows", type=int, default=5_000_000)
    p.add_argument("--connection-mode", choices=CONNECTION_MODES, default="turnaround")
    p.set_defaults(func=cmd_export_mip)

    p = sub.add_parser("oracle", help="exact optima of a tiny instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--time-grid", type=int, help="restrict times to multiples of this")
    p.add_argument("--schedule-out")
    _decoder_flags(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("diagram", help="space/time diagram as SVG")
    p.add_argument("--instance", required=True)
    p.add_argument("--schedule", action="append", required=True,
                   help="once for the base, twice to overlay a second schedule")
    p.add_argument("--out", required=True)
    p.add_argument("--path", help="comma-separated node ids")
    p.add_argument("--trains", help="comma-separated train ids")
    p.set_defaults(func=cmd_diagram)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DomainError, InstanceError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
