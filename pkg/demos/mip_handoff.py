"""
Handing the search result to a MIP solver
=========================================

The evolutionary search gives a good feasible schedule quickly; a MIP
solver can then try to close the gap left by the decoder. The model is
written as CPLEX LP text and the schedule as a warm start. If highspy is
installed the model is solved right here with the warm start loaded.

Usage: python3 demos/mip_handoff.py [output directory]
"""
import sys
import tempfile
from pathlib import Path

from retimetable import apply_perturbation
from retimetable.evolve import EAConfig, run_ea
from retimetable.decoder import decode
from retimetable.generator import GeneratorParams, generate_instance
from retimetable.mip import build_model, export_warm_start, read_warm_start, render_lp

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())
out.mkdir(parents=True, exist_ok=True)

inst = apply_perturbation(generate_instance(
    GeneratorParams(topology="line", seed=5, trains=8, nodes=6, tracks_per_edge=1)))
best, _ = run_ea(inst, EAConfig(generations=20, seed=0))
sched = decode(inst, best.genotype).schedule
print("search result:", best.fitness)

model = build_model(inst)
print("rows per family:", model.family_counts())
print("variables: %d integer, %d binary, big-M %d"
      % (len(model.integers), len(model.binaries), model.big_m))

(out / "model.lp").write_text(render_lp(model))
warm = export_warm_start(inst, sched, model=model)
(out / "model.mst").write_text(warm)
print("warm start header:", warm.splitlines()[0])
print("files in", out)

try:
    import highspy
except ImportError:
    sys.exit(0)

h = highspy.Highs()
h.setOptionValue("output_flag", False)
h.setOptionValue("time_limit", 60.0)
h.readModel(str(out / "model.lp"))
values = read_warm_start(warm)
lp = h.getLp()
sol = highspy.HighsSolution()
sol.col_value = [float(values[name]) for name in lp.col_names_]
sol.value_valid = True
h.setSolution(sol)
h.run()
print("HiGHS:", h.modelStatusToString(h.getModelStatus()),
      "objective", round(h.getInfo().objective_function_value))
