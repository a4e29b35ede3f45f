import pytest

from retimetable.decoder import decode, penalized_fitness
from retimetable.evolve import EAConfig, run_ea
from retimetable.generator import GeneratorParams, generate_instance
from retimetable.model import Perturbation, apply_perturbation
from retimetable.motifs import crossing_motif, lock_motif, overtake_motif, shuttle_motif
from retimetable.oracle import (OracleInfeasibleError, OracleSizeError,
                                best_permutation_exhaustive, true_optimum_exhaustive)
from retimetable.validate import validate_schedule

from builders import five_trains, one_train, pair_on_edge


def tiny(seed, trains=3):
    params = GeneratorParams(topology=("line", "cross", "star")[seed % 3], seed=seed,
                             trains=trains, nodes=4, tracks_per_edge=1, span=200)
    return apply_perturbation(generate_instance(params))


def test_one_train():
    inst = one_train()
    assert best_permutation_exhaustive(inst) == ((0,), 0)


def test_two_trains_min_over_orders():
    inst = apply_perturbation(pair_on_edge(perturbation=Perturbation(0, 80, node=0)))
    fits = [penalized_fitness(decode(inst, p), inst) for p in ((0, 1), (1, 0))]
    perm, fit = best_permutation_exhaustive(inst)
    assert fit == min(fits)
    assert perm == ((0, 1), (1, 0))[fits.index(min(fits))]


def test_unperturbed_is_base():
    params = GeneratorParams(topology="cross", seed=4, trains=3, nodes=4,
                             tracks_per_edge=1, span=200, delay=0)
    inst = generate_instance(params)
    sched, obj = true_optimum_exhaustive(inst)
    assert obj == 0
    assert sched.total_arrival() == inst.base_schedule().total_arrival()
    assert validate_schedule(inst, sched) == []


def test_overtake_gap():
    inst = apply_perturbation(overtake_motif())
    perm, fit = best_permutation_exhaustive(inst)
    sched, obj = true_optimum_exhaustive(inst)
    assert (perm, fit) == ((0, 1), 630)
    assert obj == 560 < fit
    assert validate_schedule(inst, sched) == []
    # the slow train waits at the middle node while the fast one passes
    assert sched[0].routes[1] != sched[1].routes[1]


@pytest.mark.parametrize("motif,value", [(crossing_motif, 180), (shuttle_motif, 100),
                                         (lock_motif, 275)])
def test_motifs_without_gap(motif, value):
    inst = apply_perturbation(motif())
    _, fit = best_permutation_exhaustive(inst)
    _, obj = true_optimum_exhaustive(inst)
    assert fit == obj == value


def test_size_guards():
    with pytest.raises(OracleSizeError):
        best_permutation_exhaustive(tiny(0, trains=9))
    with pytest.raises(OracleSizeError):
        true_optimum_exhaustive(five_trains(0))
    with pytest.raises(OracleSizeError, match="route combinations"):
        true_optimum_exhaustive(tiny(0), max_route_combos=1)
    with pytest.raises(ValueError):
        true_optimum_exhaustive(tiny(0), time_grid=0)


def test_infeasible_reported():
    inst = one_train(horizon=100, perturbation=Perturbation(0, 50, node=0))
    with pytest.raises(OracleInfeasibleError):
        true_optimum_exhaustive(apply_perturbation(inst))


@pytest.mark.parametrize("seed", range(8))
def test_unit_grid_equals_exact(seed):
    inst = tiny(seed)
    assert true_optimum_exhaustive(inst, time_grid=1)[1] == true_optimum_exhaustive(inst)[1]


def test_coarse_grid_never_beats_exact():
    inst = apply_perturbation(overtake_motif())
    sched, obj = true_optimum_exhaustive(inst, time_grid=10)
    assert obj >= 560
    assert all(t % 10 == 0 for tt in sched.entries.values() for t in tt.arrivals + tt.departures)


@pytest.mark.parametrize("seed", range(10))
def test_oracle_chain(seed):
    inst = tiny(seed)
    sched, exact = true_optimum_exhaustive(inst)
    assert validate_schedule(inst, sched) == []
    _, perm_best = best_permutation_exhaustive(inst)
    best, stats = run_ea(inst, EAConfig(mu=3, lam=6, generations=20, seed=seed), timing=False)
    assert exact <= perm_best <= stats[0].best
    assert best.fitness == perm_best
