"""Experiment driver: probed runs, cross-validation, query-point sweeps and
the chained-restart comparison."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .cnf import CnfFormula
from .features import LabeledExample, build_features, make_example
from .model import (DEFAULT_COLLINEAR_THRESHOLD, DEFAULT_LAMBDA, MIN_TRAINING_EXAMPLES,
                    TrainedModel, combine_two_models, train)
from .probe import Probe, WindowMode, WindowPolicy, WindowSnapshot, init_stats
from .solver import SolverConfig, Verdict, solve

log = logging.getLogger(__name__)

DEFAULT_FACTORS = (1.0, 1.25, 1.5, 1.75, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0)
TRAINING_CAP = 500


class EvalError(ValueError):
    pass


# -- probed runs --------------------------------------------------------------

@dataclass
class InstanceRun:
    instance_id: str
    verdict: Verdict
    total_conflicts: int
    restarts_used: int
    init: dict[str, float]
    snapshots: dict[object, list[WindowSnapshot]] = field(default_factory=dict)

    @property
    def satisfiable(self) -> bool:
        return self.verdict is Verdict.SAT

    @property
    def solved(self) -> bool:
        return self.verdict is not Verdict.BUDGET_EXHAUSTED


def run_instance(instance_id: str, formula: CnfFormula, config: SolverConfig,
                 probes: Mapping[object, WindowPolicy]) -> InstanceRun:
    """Solve ``formula`` once with one probe per key of ``probes`` attached."""
    attached = {k: Probe(formula, p) for k, p in probes.items()}
    res = solve(formula, config, list(attached.values()))
    return InstanceRun(instance_id, res.verdict, res.total_conflicts, res.restarts_used,
                       init_stats(formula), {k: p.snapshots for k, p in attached.items()})


def _run_one(args):
    return run_instance(*args)


def run_instances(items: Iterable[tuple[str, CnfFormula]], config: SolverConfig,
                  probes: Mapping[object, WindowPolicy], jobs: int = 1) -> list[InstanceRun]:
    """Independent solver runs, optionally in worker processes; order preserved."""
    tasks = [(iid, f, config, dict(probes)) for iid, f in items]
    if jobs <= 1:
        return [_run_one(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_one, tasks, chunksize=1))


def query_point_policy(point: int, base: WindowPolicy | None = None) -> WindowPolicy:
    """No-restart window whose last conflict is ``point``."""
    base = base or WindowPolicy()
    if point < base.fixed_wait + base.fixed_size:
        raise EvalError(f"query point {point} precedes window wait+size "
                        f"({base.fixed_wait + base.fixed_size})")
    return WindowPolicy(WindowMode.NO_RESTARTS, fixed_wait=point - base.fixed_size,
                        fixed_size=base.fixed_size, wait_floor=base.wait_floor,
                        wait_frac=base.wait_frac, size_floor=base.size_floor,
                        size_frac=base.size_frac)


def examples_from_runs(runs: Sequence[InstanceRun], key, window: int = 1,
                       query_point: int = 0) -> tuple[list[LabeledExample], int]:
    """Labeled examples for window ordinal ``window`` under probe ``key``.

    Unsolved runs are skipped. Runs finished by the time the window closed
    (or that never opened it) are excluded and counted.
    """
    out, excluded = [], 0
    for run in runs:
        if not run.solved:
            continue
        snaps = run.snapshots.get(key, [])
        if len(snaps) < window or run.total_conflicts <= snaps[window - 1].close_conflict:
            excluded += 1
            continue
        snap = snaps[window - 1]
        fv = build_features(run.init, snap)
        out.append(make_example(run.instance_id, run.satisfiable, fv, run.total_conflicts,
                                snap, query_point))
    return out, excluded


# -- metrics ------------------------------------------------------------------

def error_factor(pred_log: float, actual_log: float, factor: float) -> bool:
    if factor < 1:
        raise EvalError("error factor must be >= 1")
    # tiny slack absorbs log rounding at the inclusive boundary
    return abs(pred_log - actual_log) <= math.log(factor) + 1e-12


def error_factor_curve(pred_log, actual_log, factors=DEFAULT_FACTORS) -> list[tuple[float, float]]:
    pred = np.asarray(pred_log, dtype=float)
    act = np.asarray(actual_log, dtype=float)
    if len(pred) == 0:
        return [(float(f), math.nan) for f in factors]
    err = np.abs(pred - act)
    return [(float(f), float(np.mean(err <= math.log(f) + 1e-12))) for f in factors]


def rmse(pred_log, actual_log) -> float:
    d = np.asarray(pred_log, float) - np.asarray(actual_log, float)
    return float(np.sqrt(np.mean(d * d))) if len(d) else math.nan


def within(pred_log, actual_log, factor: float = 2.0) -> float:
    d = np.abs(np.asarray(pred_log, float) - np.asarray(actual_log, float))
    return float(np.mean(d <= math.log(factor) + 1e-12)) if len(d) else math.nan


# -- folds ----------------------------------------------------------------------

def assign_folds(ids: Sequence[str], sat: Sequence[bool], folds: int = 10,
                 seed: int = 0) -> dict[str, int]:
    """Stratified, seeded fold assignment: shuffle each class, deal round robin."""
    rng = np.random.Generator(np.random.PCG64(seed))
    out: dict[str, int] = {}
    for cls in (True, False):
        members = sorted(i for i, s in zip(ids, sat) if bool(s) is cls)
        if not members:
            continue
        if len(members) < folds:
            raise EvalError(f"class {'sat' if cls else 'unsat'} has {len(members)} "
                            f"instances, too few for {folds} folds")
        for pos, k in enumerate(rng.permutation(len(members))):
            out[members[k]] = pos % folds
    return out


# -- cross-validation -----------------------------------------------------------

@dataclass(frozen=True)
class PipelineConfig:
    lam: float = DEFAULT_LAMBDA
    collinear_threshold: float = DEFAULT_COLLINEAR_THRESHOLD
    mode: str = "oracle"  # oracle | two_models | pooled
    training_cap: int = TRAINING_CAP

    def __post_init__(self):
        if self.mode not in ("oracle", "two_models", "pooled"):
            raise EvalError(f"unknown pipeline mode {self.mode!r}")


def _cap(examples: list[LabeledExample], cap: int, seed: int) -> list[LabeledExample]:
    if len(examples) <= cap:
        return examples
    rng = np.random.Generator(np.random.PCG64(seed))
    idx = sorted(rng.permutation(len(examples))[:cap])
    return [examples[i] for i in idx]


@dataclass
class FittedPipeline:
    """Models for one training set under a given mode, plus the mean baseline."""
    config: PipelineConfig
    models: dict[object, TrainedModel]
    means: dict[object, float]

    @classmethod
    def fit(cls, examples: Sequence[LabeledExample], config: PipelineConfig, seed: int = 0):
        groups: dict[object, list[LabeledExample]]
        if config.mode == "pooled":
            groups = {"all": list(examples)}
        else:
            groups = {True: [e for e in examples if e.satisfiable],
                      False: [e for e in examples if not e.satisfiable]}
            groups = {k: v for k, v in groups.items() if v}
        models, means = {}, {}
        for k, exs in groups.items():
            exs = _cap(exs, config.training_cap, seed)
            models[k] = train(exs, config.lam, config.collinear_threshold,
                              label={True: "sat", False: "unsat"}.get(k, "all"))
            means[k] = float(np.mean([e.label for e in exs]))
        return cls(config, models, means)

    def _pick(self, table, ex_sat: bool, fn):
        mode = self.config.mode
        if mode == "pooled":
            return fn(table["all"])
        if mode == "oracle":
            if ex_sat not in table:
                raise EvalError("no model for this satisfiability class")
            return fn(table[ex_sat])
        if True not in table or False not in table:
            raise EvalError("two-model mode needs both sat and unsat models")
        return combine_two_models(fn(table[True]), fn(table[False]))

    def predict(self, ex: LabeledExample) -> float:
        return self._pick(self.models, ex.satisfiable, lambda m: m.predict(ex.features))

    def baseline(self, ex: LabeledExample) -> float:
        return self._pick(self.means, ex.satisfiable, lambda m: m)


@dataclass
class Prediction:
    instance_id: str
    satisfiable: bool
    fold: int
    actual: float
    predicted: float
    baseline: float


@dataclass
class CVResult:
    predictions: list[Prediction]
    folds: list[dict]
    factors: tuple[float, ...] = DEFAULT_FACTORS

    def subset(self, cls: str) -> list[Prediction]:
        if cls == "all":
            return self.predictions
        want = cls == "sat"
        return [p for p in self.predictions if p.satisfiable is want]

    def classes(self) -> list[str]:
        present = {p.satisfiable for p in self.predictions}
        return [c for c, s in (("sat", True), ("unsat", False)) if s in present] + ["all"]

    def curve(self, cls: str = "all", baseline: bool = False):
        ps = self.subset(cls)
        pred = [p.baseline if baseline else p.predicted for p in ps]
        return error_factor_curve(pred, [p.actual for p in ps], self.factors)

    def rmse(self, cls: str = "all", baseline: bool = False) -> float:
        ps = self.subset(cls)
        return rmse([p.baseline if baseline else p.predicted for p in ps], [p.actual for p in ps])

    def within(self, factor: float = 2.0, cls: str = "all", baseline: bool = False) -> float:
        ps = self.subset(cls)
        return within([p.baseline if baseline else p.predicted for p in ps],
                      [p.actual for p in ps], factor)


def cross_validate(examples: Sequence[LabeledExample], folds: int = 10,
                   config: PipelineConfig | None = None, seed: int = 0,
                   factors=DEFAULT_FACTORS) -> CVResult:
    """k-fold CV stratified by satisfiability; no instance is both trained and tested on."""
    config = config or PipelineConfig()
    examples = list(examples)
    ids = [e.instance_id for e in examples]
    if len(set(ids)) != len(ids):
        raise EvalError("duplicate instance ids")
    fold_of = assign_folds(ids, [e.satisfiable for e in examples], folds, seed)
    preds: list[Prediction] = []
    per_fold = []
    for f in range(folds):
        tr = [e for e in examples if fold_of[e.instance_id] != f]
        te = [e for e in examples if fold_of[e.instance_id] == f]
        pipe = FittedPipeline.fit(tr, config, seed + f)
        fold_preds = [Prediction(e.instance_id, e.satisfiable, f, e.label,
                                 pipe.predict(e), pipe.baseline(e)) for e in te]
        preds.extend(fold_preds)
        per_fold.append({
            "fold": f, "n_train": len(tr), "n_test": len(te),
            "rmse": rmse([p.predicted for p in fold_preds], [p.actual for p in fold_preds]),
            "rmse_baseline": rmse([p.baseline for p in fold_preds], [p.actual for p in fold_preds]),
            "within2": within([p.predicted for p in fold_preds], [p.actual for p in fold_preds]),
            "within2_baseline": within([p.baseline for p in fold_preds],
                                       [p.actual for p in fold_preds]),
        })
    preds.sort(key=lambda p: (p.fold, p.instance_id))
    return CVResult(preds, per_fold, tuple(factors))


# -- query-point sweep ----------------------------------------------------------

@dataclass
class SweepPoint:
    point: int
    n_used: int
    n_excluded: int
    cv: CVResult | None


def query_point_sweep(runs: Sequence[InstanceRun], points: Sequence[int], folds: int = 10,
                      config: PipelineConfig | None = None, seed: int = 0,
                      base_policy: WindowPolicy | None = None) -> list[SweepPoint]:
    """One model per query point; runs must carry a probe keyed by each point."""
    per_point = {}
    for q in points:
        query_point_policy(q, base_policy)  # precondition check
        per_point[q] = examples_from_runs(runs, q, 1, q)
    return sweep_examples(per_point, folds, config, seed)


def sweep_examples(per_point: Mapping[int, tuple[list[LabeledExample], int]], folds: int = 10,
                   config: PipelineConfig | None = None, seed: int = 0) -> list[SweepPoint]:
    """``per_point`` maps query point -> (examples, number excluded)."""
    out = []
    for q, (exs, excluded) in per_point.items():
        try:
            cv = cross_validate(exs, folds, config, seed)
        except EvalError as exc:
            log.warning("query point %d skipped: %s", q, exc)
            cv = None
        out.append(SweepPoint(q, len(exs), excluded, cv))
    return out


# -- chained restarts -------------------------------------------------------------

@dataclass
class ChainedRow:
    cls: str
    restart: int  # window ordinal r
    n: int
    within2_plain: float
    within2_chained: float
    rmse_plain: float
    rmse_chained: float

    @property
    def difference(self) -> float:
        return self.within2_chained - self.within2_plain


def window_examples(runs: Sequence[InstanceRun], key) -> dict[str, list[LabeledExample]]:
    """Per instance, examples for each usable window in order."""
    out = {}
    for run in runs:
        if not run.solved:
            continue
        exs = []
        for snap in run.snapshots.get(key, []):
            if run.total_conflicts <= snap.close_conflict:
                break
            fv = build_features(run.init, snap)
            exs.append(make_example(run.instance_id, run.satisfiable, fv,
                                    run.total_conflicts, snap))
        if exs:
            out[run.instance_id] = exs
    return out


def chained_restart_experiment(runs: Sequence[InstanceRun], key="restarts", folds: int = 10,
                               config: PipelineConfig | None = None, seed: int = 0,
                               min_instances: int | None = None) -> list[ChainedRow]:
    """Plain x_r versus chained x̂_r models per window ordinal, on shared folds.

    Models are trained separately for sat and unsat instances. The chained
    vector at window r appends the predictions of the chained models of
    windows 1..r-1, which are frozen before window r trains.
    """
    return chained_from_examples(window_examples(runs, key), folds, config, seed, min_instances)


def chained_from_examples(per_inst: Mapping[str, Sequence[LabeledExample]], folds: int = 10,
                          config: PipelineConfig | None = None, seed: int = 0,
                          min_instances: int | None = None) -> list[ChainedRow]:
    """``per_inst`` maps instance id -> its window examples in ordinal order."""
    config = config or PipelineConfig()
    min_instances = min_instances or max(2 * folds, MIN_TRAINING_EXAMPLES + 2)
    rows: list[ChainedRow] = []
    for cls_name, want in (("sat", True), ("unsat", False)):
        data = {i: exs for i, exs in per_inst.items() if exs[0].satisfiable is want}
        if len(data) < max(folds, min_instances):
            continue
        ids = sorted(data)
        fold_of = assign_folds(ids, [want] * len(ids), folds, seed)
        r_max = 0
        for r in range(1, max(len(v) for v in data.values()) + 1):
            members = [i for i in ids if len(data[i]) >= r]
            if len(members) < min_instances or any(
                    sum(fold_of[i] != f for i in members) < MIN_TRAINING_EXAMPLES
                    for f in range(folds)):
                break
            r_max = r
        # per r: id -> [actual, plain prediction, chained prediction]
        results: dict[int, dict[str, list[float]]] = {r: {} for r in range(1, r_max + 1)}
        for f in range(folds):
            chain: dict[str, list[float]] = {i: [] for i in ids}
            for r in range(1, r_max + 1):
                members = [i for i in ids if len(data[i]) >= r]
                tr = [i for i in members if fold_of[i] != f]
                te = [i for i in members if fold_of[i] == f]
                plain_ex = {i: data[i][r - 1] for i in members}
                hat_ex = {i: _with_chain(plain_ex[i], chain[i]) for i in members}
                m_plain = train(_cap([plain_ex[i] for i in tr], config.training_cap, seed),
                                config.lam, config.collinear_threshold)
                m_hat = train(_cap([hat_ex[i] for i in tr], config.training_cap, seed),
                              config.lam, config.collinear_threshold)
                for i in te:
                    results[r][i] = [plain_ex[i].label, m_plain.predict(plain_ex[i].features),
                                     m_hat.predict(hat_ex[i].features)]
                for i in members:
                    chain[i].append(m_hat.predict(hat_ex[i].features))
        for r in sorted(results):
            b = results[r]
            order = sorted(b)
            act = [b[i][0] for i in order]
            pp = [b[i][1] for i in order]
            pc = [b[i][2] for i in order]
            rows.append(ChainedRow(cls_name, r, len(order), within(pp, act), within(pc, act),
                                   rmse(pp, act), rmse(pc, act)))
    return rows


def _with_chain(ex: LabeledExample, chain: Sequence[float]) -> LabeledExample:
    return LabeledExample(ex.instance_id, ex.satisfiable, ex.features.with_chain(chain),
                          ex.label, ex.total_conflicts, ex.window, ex.restart_index,
                          ex.close_conflict, ex.query_point)
