"""Simulated two-solver race and normalized cost accounting.

Both solvers advance in lockstep, one conflict each per tick, until each
reaches the end of its first observation window. A solver that finishes
during this probe phase wins outright. Otherwise the LMP strategies keep
the solver with the lower predicted log-cost (ties keep A). All costs are
conflict counts.
"""

from __future__ import annotations

import enum
import math
import random
from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .evaluation import InstanceRun, PipelineConfig, _cap, assign_folds, examples_from_runs
from .features import FeatureVector, LabeledExample
from .model import TrainedModel, combine_two_models, train


class Strategy(enum.Enum):
    BEST = "best"
    LMP_ORACLE = "lmp_oracle"
    LMP_TWO_MODELS = "lmp_two_models"
    RANDOM_BASELINE = "random"


COLUMN_TITLES = {
    Strategy.BEST: "Best",
    Strategy.LMP_ORACLE: "LMP(oracle)",
    Strategy.LMP_TWO_MODELS: "LMP(two models)",
    Strategy.RANDOM_BASELINE: "Random",
}


class PortfolioError(ValueError):
    pass


@dataclass(frozen=True)
class SolverTrace:
    """What one solver did on one instance."""
    total_conflicts: int
    close_conflict: int | None = None  # first window close, None if never closed
    features: FeatureVector | None = None

    @property
    def probe_budget(self) -> int:
        if self.close_conflict is None:
            return self.total_conflicts
        return min(self.close_conflict, self.total_conflicts)

    @property
    def finishes_in_probe(self) -> bool:
        return self.close_conflict is None or self.total_conflicts <= self.close_conflict


@dataclass(frozen=True)
class RaceOutcome:
    instance_id: str
    satisfiable: bool
    strategy: Strategy
    probe_cost_a: int
    probe_cost_b: int
    kept: str  # "A" | "B"
    kept_total_cost: int
    charged_cost: int
    total_a: int
    total_b: int
    short_circuit: bool = False
    pred_a: float = math.nan
    pred_b: float = math.nan


def _predict(models: Mapping[str, TrainedModel], fv: FeatureVector, sat: bool,
             strategy: Strategy) -> float:
    if strategy is Strategy.LMP_ORACLE:
        return models["sat" if sat else "unsat"].predict(fv)
    return combine_two_models(models["sat"].predict(fv), models["unsat"].predict(fv))


def race(instance_id: str, satisfiable: bool, a: SolverTrace, b: SolverTrace,
         strategy: Strategy, models: Mapping[str, Mapping[str, TrainedModel]] | None = None,
         charge_probes: bool = True, rng: random.Random | None = None) -> RaceOutcome:
    common = dict(instance_id=instance_id, satisfiable=satisfiable, strategy=strategy,
                  total_a=a.total_conflicts, total_b=b.total_conflicts)
    if strategy is Strategy.BEST:
        kept = "A" if a.total_conflicts <= b.total_conflicts else "B"
        cost = min(a.total_conflicts, b.total_conflicts)
        return RaceOutcome(probe_cost_a=0, probe_cost_b=0, kept=kept, kept_total_cost=cost,
                           charged_cost=cost, **common)
    if strategy is Strategy.RANDOM_BASELINE:
        if rng is None:
            raise PortfolioError("random baseline needs a seeded rng")
        kept = "A" if rng.random() < 0.5 else "B"
        cost = a.total_conflicts if kept == "A" else b.total_conflicts
        return RaceOutcome(probe_cost_a=0, probe_cost_b=0, kept=kept, kept_total_cost=cost,
                           charged_cost=cost, **common)

    fin = [(t.total_conflicts, name) for name, t in (("A", a), ("B", b)) if t.finishes_in_probe]
    if fin:
        t_star, kept = min(fin)  # "A" < "B" breaks ties toward A
        pa = min(t_star, a.probe_budget)
        pb = min(t_star, b.probe_budget)
        charged = pa + pb if charge_probes else t_star
        return RaceOutcome(probe_cost_a=pa, probe_cost_b=pb, kept=kept, kept_total_cost=t_star,
                           charged_cost=charged, short_circuit=True, **common)

    if models is None:
        raise PortfolioError("LMP strategies need trained models for both solvers")
    pred_a = _predict(models["A"], a.features, satisfiable, strategy)
    pred_b = _predict(models["B"], b.features, satisfiable, strategy)
    kept = "A" if pred_a <= pred_b else "B"
    keeper = a if kept == "A" else b
    pa, pb = a.probe_budget, b.probe_budget
    if charge_probes:
        charged = pa + pb + (keeper.total_conflicts - keeper.probe_budget)
    else:
        charged = keeper.total_conflicts
    return RaceOutcome(probe_cost_a=pa, probe_cost_b=pb, kept=kept,
                       kept_total_cost=keeper.total_conflicts, charged_cost=charged,
                       pred_a=pred_a, pred_b=pred_b, **common)


def baseline_cost(outcomes: Sequence[RaceOutcome]) -> float:
    """Expected cost of picking a solver by a fair coin: sum of (A + B) / 2."""
    return sum((o.total_a + o.total_b) / 2 for o in outcomes)


def portfolio_report(outcomes: Mapping[Strategy, Sequence[RaceOutcome]]) -> dict[str, dict]:
    """Normalized cost per satisfiability class and strategy.

    Returns ``{cls: {"n": .., "baseline": .., Strategy: value, ...}}`` with
    cls in sat/unsat/all; classes absent from the data are omitted.
    """
    ids = None
    for strat, outs in outcomes.items():
        these = sorted(o.instance_id for o in outs)
        if ids is None:
            ids = these
        elif these != ids:
            raise PortfolioError(f"strategy {strat.value} covers a different instance set")
    table: dict[str, dict] = {}
    any_outs = next(iter(outcomes.values()), [])
    for cls, want in (("sat", True), ("unsat", False), ("all", None)):
        sel_ids = {o.instance_id for o in any_outs if want is None or o.satisfiable is want}
        if not sel_ids:
            continue
        ref = [o for o in any_outs if o.instance_id in sel_ids]
        base = baseline_cost(ref)
        row: dict = {"n": len(sel_ids), "baseline": base}
        for strat, outs in outcomes.items():
            sel = [o for o in outs if o.instance_id in sel_ids]
            row[strat] = sum(o.charged_cost for o in sel) / base
            row[f"short_circuits_{strat.value}"] = sum(o.short_circuit for o in sel)
        table[cls] = row
    return table


def trace_from_run(run: InstanceRun, key) -> SolverTrace:
    snaps = run.snapshots.get(key, [])
    if not snaps or run.total_conflicts <= snaps[0].close_conflict:
        return SolverTrace(run.total_conflicts)
    exs, _ = examples_from_runs([run], key, 1)
    return SolverTrace(run.total_conflicts, snaps[0].close_conflict, exs[0].features)


@dataclass(frozen=True)
class RaceEntry:
    instance_id: str
    satisfiable: bool
    a: SolverTrace
    b: SolverTrace


def entries_from_runs(runs_a: Sequence[InstanceRun], runs_b: Sequence[InstanceRun],
                      key="restarts") -> list[RaceEntry]:
    """Pair up instances solved by both solvers."""
    by_a = {r.instance_id: r for r in runs_a if r.solved}
    by_b = {r.instance_id: r for r in runs_b if r.solved}
    out = []
    for i in sorted(set(by_a) & set(by_b)):
        if by_a[i].satisfiable != by_b[i].satisfiable:
            raise PortfolioError(f"solvers disagree on satisfiability of {i}")
        out.append(RaceEntry(i, by_a[i].satisfiable, trace_from_run(by_a[i], key),
                             trace_from_run(by_b[i], key)))
    return out


TARGETS = ("full", "remaining")


def _training_examples(entries, solver: str, target: str = "full") -> list[LabeledExample]:
    """Labels are ln(full cost), or ln(cost after the window) for ``remaining``."""
    out = []
    for e in entries:
        t = e.a if solver == "A" else e.b
        if t.features is not None and not t.finishes_in_probe:
            cost = t.total_conflicts - (t.close_conflict if target == "remaining" else 0)
            out.append(LabeledExample(e.instance_id, e.satisfiable, t.features,
                                      math.log(cost), t.total_conflicts,
                                      close_conflict=t.close_conflict))
    return out


@dataclass
class PortfolioResult:
    outcomes: dict[bool, dict[Strategy, list[RaceOutcome]]]  # keyed by charge_probes
    random_costs: dict[str, list[float]]  # per class, one normalized cost per seed
    tables: dict[bool, dict[str, dict]]


def portfolio_experiment(entries: Sequence[RaceEntry], folds: int = 10, seed: int = 0,
                         config: PipelineConfig | None = None,
                         random_seeds: int = 100, target: str = "full") -> PortfolioResult:
    """Cross-validated race: per fold, sat and unsat models are trained for each
    solver on the training instances, then every test instance is raced.

    ``target`` picks what the models predict: the full-run cost or the cost
    remaining after the window closes.
    """
    config = config or PipelineConfig()
    if target not in TARGETS:
        raise PortfolioError(f"unknown prediction target {target!r}")
    entries = sorted(entries, key=lambda e: e.instance_id)
    ids = [e.instance_id for e in entries]
    if len(set(ids)) != len(ids):
        raise PortfolioError("duplicate instance ids")
    fold_of = assign_folds(ids, [e.satisfiable for e in entries], folds, seed)

    lmp = (Strategy.LMP_ORACLE, Strategy.LMP_TWO_MODELS)
    outcomes = {c: {s: [] for s in (Strategy.BEST, *lmp)} for c in (True, False)}
    for f in range(folds):
        tr = [e for e in entries if fold_of[e.instance_id] != f]
        models = {}
        for name in ("A", "B"):
            exs = _training_examples(tr, name, target)
            models[name] = {}
            for cls, want in (("sat", True), ("unsat", False)):
                sub = [x for x in exs if x.satisfiable is want]
                if len(sub) < 10:
                    raise PortfolioError(
                        f"fold {f}: too few {cls} training examples for solver {name}")
                models[name][cls] = train(_cap(sub, config.training_cap, seed + f),
                                          config.lam, config.collinear_threshold, label=cls)
        for e in entries:
            if fold_of[e.instance_id] != f:
                continue
            for charge in (True, False):
                for s in (Strategy.BEST, *lmp):
                    outcomes[charge][s].append(
                        race(e.instance_id, e.satisfiable, e.a, e.b, s, models, charge))

    for c in outcomes.values():
        for outs in c.values():
            outs.sort(key=lambda o: o.instance_id)

    random_costs: dict[str, list[float]] = defaultdict(list)
    for k in range(random_seeds):
        rng = random.Random(seed * 1_000_003 + k)
        outs = [race(e.instance_id, e.satisfiable, e.a, e.b, Strategy.RANDOM_BASELINE, rng=rng)
                for e in entries]
        for cls, row in portfolio_report({Strategy.RANDOM_BASELINE: outs}).items():
            random_costs[cls].append(row[Strategy.RANDOM_BASELINE])

    tables = {}
    for charge in (True, False):
        t = portfolio_report(outcomes[charge])
        for cls, row in t.items():
            row[Strategy.RANDOM_BASELINE] = float(np.mean(random_costs[cls]))
        tables[charge] = t
    return PortfolioResult(outcomes, dict(random_costs), tables)
