import math
import random

import pytest

from satcost.features import FeatureVector
from satcost.portfolio import (PortfolioError, RaceEntry, SolverTrace, Strategy,
                               baseline_cost, portfolio_experiment, portfolio_report, race)
from synth import synthetic_examples


class Fixed:
    def __init__(self, v):
        self.v = v

    def predict(self, fv):
        return self.v


def models(pa, pb):
    return {"A": {"sat": Fixed(pa), "unsat": Fixed(pa)}, "B": {"sat": Fixed(pb), "unsat": Fixed(pb)}}


FV = FeatureVector((0.0,) * 64)


def test_best_picks_true_min():
    o = race("i", True, SolverTrace(1000), SolverTrace(4000), Strategy.BEST)
    assert (o.kept, o.kept_total_cost, o.charged_cost) == ("A", 1000, 1000)


def test_lmp_picks_lower_prediction():
    a = SolverTrace(5000, 300, FV)
    b = SolverTrace(6000, 300, FV)
    o = race("i", True, a, b, Strategy.LMP_ORACLE, models(math.log(2000), math.log(1500)))
    assert o.kept == "B"
    assert o.pred_b <= o.pred_a
    assert o.charged_cost == 300 + 300 + (6000 - 300)
    off = race("i", True, a, b, Strategy.LMP_ORACLE, models(math.log(2000), math.log(1500)),
               charge_probes=False)
    assert off.charged_cost == 6000


def test_ties_keep_a():
    a, b = SolverTrace(5000, 300, FV), SolverTrace(100000, 300, FV)
    o = race("i", False, a, b, Strategy.LMP_TWO_MODELS, models(1.0, 1.0))
    assert o.kept == "A"


def test_short_circuit():
    a = SolverTrace(250, None)  # finished before its window closed
    b = SolverTrace(9000, 400, FV)
    o = race("i", True, a, b, Strategy.LMP_ORACLE, None)
    assert o.short_circuit and o.kept == "A"
    assert (o.probe_cost_a, o.probe_cost_b) == (250, 250)
    assert o.charged_cost == 500
    assert o.probe_cost_a <= o.total_a and o.probe_cost_b <= o.total_b


def test_short_circuit_b_first():
    a = SolverTrace(800, None)
    b = SolverTrace(300, None)
    o = race("i", True, a, b, Strategy.LMP_TWO_MODELS, None)
    assert o.kept == "B" and o.kept_total_cost == 300 and o.charged_cost == 600


def test_lmp_needs_models():
    with pytest.raises(PortfolioError):
        race("i", True, SolverTrace(5000, 300, FV), SolverTrace(5000, 300, FV),
             Strategy.LMP_ORACLE, None)


def test_random_needs_rng_and_is_seeded():
    a, b = SolverTrace(1), SolverTrace(2)
    with pytest.raises(PortfolioError):
        race("i", True, a, b, Strategy.RANDOM_BASELINE)
    k1 = [race("i", True, a, b, Strategy.RANDOM_BASELINE, rng=random.Random(3)).kept for _ in range(5)]
    k2 = [race("i", True, a, b, Strategy.RANDOM_BASELINE, rng=random.Random(3)).kept for _ in range(5)]
    assert k1 == k2


def test_identical_solvers_best_is_one():
    outs = [race(f"i{k}", True, SolverTrace(100 + k), SolverTrace(100 + k), Strategy.BEST)
            for k in range(10)]
    table = portfolio_report({Strategy.BEST: outs})
    assert table["all"][Strategy.BEST] == 1.0
    assert baseline_cost(outs) == sum(100 + k for k in range(10))


def test_report_rejects_mismatched_sets():
    a = [race("x", True, SolverTrace(1), SolverTrace(2), Strategy.BEST)]
    b = [race("y", True, SolverTrace(1), SolverTrace(2), Strategy.BEST)]
    with pytest.raises(PortfolioError):
        portfolio_report({Strategy.BEST: a, Strategy.LMP_ORACLE: b})


def _entries():
    ea = synthetic_examples(40, 30, seed=1)
    eb = synthetic_examples(40, 30, seed=2)
    out = []
    for x, y in zip(ea, eb):
        out.append(RaceEntry(x.instance_id, x.satisfiable,
                             SolverTrace(x.total_conflicts, 200, x.features),
                             SolverTrace(y.total_conflicts, 200, y.features)))
    return out


def test_experiment_properties_and_determinism():
    r1 = portfolio_experiment(_entries(), folds=5, seed=0, random_seeds=20)
    r2 = portfolio_experiment(_entries(), folds=5, seed=0, random_seeds=20)
    assert r1.tables == r2.tables
    for charge in (True, False):
        for cls, row in r1.tables[charge].items():
            assert row[Strategy.BEST] <= 1.0
            if not charge:
                assert row[Strategy.BEST] <= row[Strategy.LMP_ORACLE]
                assert row[Strategy.BEST] <= row[Strategy.LMP_TWO_MODELS]
    assert len(r1.random_costs["all"]) == 20


def test_remaining_cost_target():
    r = portfolio_experiment(_entries(), folds=5, seed=0, random_seeds=5, target="remaining")
    assert r.tables[True]["all"][Strategy.BEST] <= 1.0
    with pytest.raises(PortfolioError):
        portfolio_experiment(_entries(), folds=5, target="bogus")
