"""
Evolving a train order
======================

Generate a congested two-line network, delay one train and let the
evolutionary search reorder the trains. The per-generation table is the
same CSV the ``evolve`` command writes; best fitness only ever goes down.

Usage: python3 demos/evolve_curve.py [seed]
"""
import sys

import numpy as np

from retimetable import apply_perturbation, decode, penalized_fitness
from retimetable.evolve import EAConfig, dispatch_order, run_ea, stats_csv
from retimetable.generator import GeneratorParams, generate_instance

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 3
params = GeneratorParams(topology="cross", seed=seed, trains=40, nodes=12,
                         tracks_per_edge=1, span=1800, delay=900)
inst = apply_perturbation(generate_instance(params))
p = inst.perturbation
print(f"{len(inst.trains)} trains, {len(inst.nodes)} nodes; train {p.train} delayed {p.delay} s")

# reference points: the original dispatch order and some random orders
fifo = penalized_fitness(decode(inst, dispatch_order(inst)), inst)
rng = np.random.default_rng(seed)
rand = [penalized_fitness(decode(inst, rng.permutation(len(inst.trains))), inst)
        for _ in range(50)]
print("dispatch order:", fifo)
print("random orders: best %d, median %d" % (min(rand), np.median(rand)))

best, stats = run_ea(inst, EAConfig(generations=40, seed=seed, stagnation=15))
print(stats_csv(stats))
print("best after %d generations: %d (%.0f%% of dispatch order)"
      % (stats[-1].n, best.fitness, 100 * best.fitness / max(fifo, 1)))
