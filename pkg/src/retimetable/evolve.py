"""(mu + lambda) evolutionary search over train permutations.

Offspring are produced by a deterministic tournament followed by a swap
mutation. The number of swaps is drawn from a binomial law centred on an
annealed temperature, and each swap exchanges two entries no more than
``radius`` positions apart. Fitness is the decoder's penalised total delay.

Every offspring draws its randomness from its own stream, derived from
``(seed, generation, offspring index)``, so results do not depend on the
order or the process in which offspring are evaluated.
"""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .decoder import DecoderConfig, decode, penalized_fitness
from .model import Instance


@dataclass(frozen=True)
class EAConfig:
    """Defaults are the published settings; ``decay`` is a repository choice."""
    mu: int = 10
    lam: int = 70
    tournament_s: int = 2
    radius: int = 12
    t0: float = 50.0
    t_inf: float = 1.0
    n0: int = 0
    decay: float = 0.1
    generations: int = 100
    time_limit: float | None = None  # seconds
    stagnation: int | None = None  # stop after this many generations without improvement
    seed: int = 0
    decoder: DecoderConfig = field(default_factory=DecoderConfig)

    def __post_init__(self):
        if self.mu < 1 or self.lam < 1:
            raise ValueError("mu and lambda must be at least 1")
        if not 1 <= self.tournament_s <= self.mu:
            raise ValueError("tournament size must lie in [1, mu]")
        if self.radius < 1:
            raise ValueError("radius must be at least 1")
        if self.t_inf > self.t0 or self.t_inf < 0:
            raise ValueError("need 0 <= t_inf <= t0")
        if self.decay <= 0:
            raise ValueError("decay must be positive")
        if self.n0 < 0 or self.generations < 0:
            raise ValueError("n0 and generations must be non-negative")


@dataclass(frozen=True)
class Individual:
    genotype: tuple[int, ...]
    fitness: int
    complete: bool
    kicks: int


@dataclass(frozen=True)
class GenerationStats:
    n: int
    best: int
    median: float
    worst: int
    infeasible: int
    temperature: float
    elapsed_ms: int


STATS_HEADER = ("n", "best", "median", "worst", "infeasible_count", "T", "elapsed_ms")


def temperature(n: int, cfg: EAConfig) -> float:
    """Number of swaps per mutation at generation ``n``.

    Constant ``t0`` until ``n0``, then a sigmoid decay towards ``t_inf``.
    """
    if n < cfg.n0:
        return cfg.t0
    x = cfg.decay * (n - cfg.n0)
    # 1 - 1/(1+exp(-x)) == 1/(1+exp(x)), written to avoid overflow
    tail = math.exp(-x) / (1.0 + math.exp(-x)) if x >= 0 else 1.0 / (1.0 + math.exp(x))
    return cfg.t_inf + 2.0 * (cfg.t0 - cfg.t_inf) * tail


def sample_swap_count(T: float, rng: np.random.Generator) -> int:
    """Binomial(round(2T), 1/2): mean ``T``, support ``[0, 2T]``."""
    if T < 0:
        raise ValueError("temperature must be non-negative")
    return int(rng.binomial(int(round(2 * T)), 0.5))


def swap_mutation(perm: Sequence[int], radius: int, t: int,
                  rng: np.random.Generator) -> tuple[int, ...]:
    """Apply ``t`` swaps, each between positions at most ``radius`` apart."""
    out = list(perm)
    n = len(out)
    if n < 2:
        return tuple(out)
    for _ in range(t):
        p = int(rng.integers(n))
        lo, hi = max(0, p - radius), min(n - 1, p + radius)
        q = lo + int(rng.integers(hi - lo))
        if q >= p:
            q += 1
        out[p], out[q] = out[q], out[p]
    return tuple(out)


def tournament_select(pop: Sequence[Individual], s: int,
                      rng: np.random.Generator) -> Individual:
    """Best of ``s`` uniform draws with replacement (first drawn wins ties)."""
    idx = rng.integers(len(pop), size=s)
    best = pop[int(idx[0])]
    for j in idx[1:]:
        if pop[int(j)].fitness < best.fitness:
            best = pop[int(j)]
    return best


def evaluate(inst: Instance, perm, cfg: DecoderConfig) -> Individual:
    res = decode(inst, perm, cfg)
    return Individual(tuple(perm), penalized_fitness(res, inst), res.complete,
                      res.total_kicks)


def dispatch_order(inst: Instance) -> tuple[int, ...]:
    """Trains sorted by base departure from their origin."""
    return tuple(sorted(range(len(inst.trains)),
                        key=lambda c: (inst.trains[c].base_departures[0], c)))


def initial_population(inst: Instance, cfg: EAConfig) -> list[tuple[int, ...]]:
    """Dispatch order plus ``mu - 1`` uniform random permutations."""
    rng = np.random.default_rng([cfg.seed, 0xC0FFEE])
    n = len(inst.trains)
    perms = [dispatch_order(inst)]
    for _ in range(cfg.mu - 1):
        perms.append(tuple(int(x) for x in rng.permutation(n)))
    return perms


def _stats(n, parents, T, t_start, timing):
    fits = np.array([p.fitness for p in parents])
    elapsed = int(round((time.perf_counter() - t_start) * 1000)) if timing else 0
    return GenerationStats(n, int(fits.min()), float(np.median(fits)), int(fits.max()),
                           sum(not p.complete for p in parents), T, elapsed)


Evaluator = Callable[[list], list]


def run_ea(inst: Instance, cfg: EAConfig, initial: list | None = None,
           evaluator: Evaluator | None = None, timing: bool = True,
           on_generation: Callable[[GenerationStats, list], None] | None = None,
           target: int | None = None):
    """Evolve permutations of ``inst``'s trains.

    ``inst`` should carry the perturbation floors. ``initial`` overrides the
    starting parents (``mu`` permutations). ``evaluator`` maps a list of
    permutations to a list of :class:`Individual` (for parallel
    evaluation); by default offspring are decoded in this process.
    ``timing=False`` records ``elapsed_ms`` as 0 so the stats stream is
    reproducible byte for byte. ``target`` ends the run as soon as the best
    fitness is at or below it.

    Returns ``(best individual, list of GenerationStats)``. Stats row ``n``
    describes the parents after ``n`` generations; its temperature is the
    one used to breed generation ``n + 1``.
    """
    n_trains = len(inst.trains)
    radius = min(cfg.radius, max(1, n_trains - 1))
    if evaluator is None:
        def evaluator(perms):
            return [evaluate(inst, p, cfg.decoder) for p in perms]

    t_start = time.perf_counter()
    perms = initial if initial is not None else initial_population(inst, cfg)
    if len(perms) != cfg.mu:
        raise ValueError(f"initial population must hold mu={cfg.mu} permutations")
    parents = evaluator([tuple(p) for p in perms])
    parents = sorted(parents, key=lambda x: x.fitness)
    stats = [_stats(0, parents, temperature(0, cfg), t_start, timing)]
    if on_generation:
        on_generation(stats[-1], parents)
    best_fit, stale = parents[0].fitness, 0

    for n in range(cfg.generations):
        if target is not None and parents[0].fitness <= target:
            break
        if cfg.time_limit is not None and time.perf_counter() - t_start >= cfg.time_limit:
            break
        T = temperature(n, cfg)
        children = []
        for j in range(cfg.lam):
            rng = np.random.default_rng([cfg.seed, n + 1, j])
            parent = tournament_select(parents, cfg.tournament_s, rng)
            t = sample_swap_count(T, rng)
            children.append(swap_mutation(parent.genotype, radius, t, rng))
        offspring = evaluator(children)
        # stable sort: parents (older) win ties against offspring
        parents = sorted(parents + offspring, key=lambda x: x.fitness)[:cfg.mu]
        stats.append(_stats(n + 1, parents, temperature(n + 1, cfg), t_start, timing))
        if on_generation:
            on_generation(stats[-1], parents)
        if parents[0].fitness < best_fit:
            best_fit, stale = parents[0].fitness, 0
        else:
            stale += 1
            if cfg.stagnation is not None and stale >= cfg.stagnation:
                break
    return parents[0], stats


def stats_csv(stats: Sequence[GenerationStats]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STATS_HEADER)
    for s in stats:
        w.writerow([s.n, s.best, f"{s.median:.1f}", s.worst, s.infeasible,
                    f"{s.temperature:.9g}", s.elapsed_ms])
    return buf.getvalue()


# -- optional process-parallel evaluation ------------------------------------

_worker_state: dict = {}


def _worker_init(inst, dcfg):
    _worker_state["inst"] = inst
    _worker_state["cfg"] = dcfg


def _worker_eval(perm):
    return evaluate(_worker_state["inst"], perm, _worker_state["cfg"])


class ProcessEvaluator:
    """Evaluate offspring in a process pool; results keep submission order."""

    def __init__(self, inst: Instance, dcfg: DecoderConfig, workers: int):
        from concurrent.futures import ProcessPoolExecutor
        self.pool = ProcessPoolExecutor(workers, initializer=_worker_init,
                                        initargs=(inst, dcfg))

    def __call__(self, perms):
        return list(self.pool.map(_worker_eval, perms, chunksize=4))

    def close(self):
        self.pool.shutdown()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
