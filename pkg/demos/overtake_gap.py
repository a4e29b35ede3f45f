"""
Where the insertion decoder falls short
=======================================

A slow train runs ahead of a fast one on a single-track line with a passing
loop in the middle, and the slow train leaves late. The decoder inserts
whole trains one at a time, each as early as possible, so it never holds a
train back to let another one pass. Comparing the best decodable schedule
with the exact optimum shows the price of that.

Usage: python3 demos/overtake_gap.py [output directory]
"""
import sys
import tempfile
from pathlib import Path

from retimetable import apply_perturbation, decode, penalized_fitness
from retimetable.diagram import emit_spacetime_svg
from retimetable.motifs import overtake_motif
from retimetable.oracle import best_permutation_exhaustive, true_optimum_exhaustive

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())
out.mkdir(parents=True, exist_ok=True)

inst = apply_perturbation(overtake_motif())
slow, fast = inst.trains
print("slow train base departures:", slow.base_departures)
print("fast train base departures:", fast.base_departures)
print("delay: %d s on train %d" % (inst.perturbation.delay, inst.perturbation.train))

# both insertion orders
for perm in [(0, 1), (1, 0)]:
    res = decode(inst, perm)
    print("order", perm, "-> delay", penalized_fitness(res, inst),
          "kicks", res.kick_counts)

perm, best = best_permutation_exhaustive(inst)
sched, exact = true_optimum_exhaustive(inst)
print("best decodable:", best, "with order", perm)
print("exact optimum: ", exact)
print("slow train at the loop: arrives %d, leaves %d" % (sched[0].arrivals[1], sched[0].departures[1]))
print("fast train at the loop: arrives %d, leaves %d" % (sched[1].arrivals[1], sched[1].departures[1]))

# the decoder's schedule (solid) against the optimum (dashed)
svg = emit_spacetime_svg(inst, [decode(inst, perm).schedule, sched],
                         labels=("decoded", "optimal"))
(out / "overtake.svg").write_text(svg)
print("diagram written to", out / "overtake.svg")
