"""satcost command line: gen, solve, probe, train, predict, eval, portfolio.

Exit status: 0 success, 1 usage error, 2 data or fingerprint mismatch,
3 internal error. Failures print one ``error: <kind>: <reason>`` line to
stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys

from . import __version__
from .cnf import DimacsError, GeneratorSpec, generate_random_3sat, read_dimacs, write_dimacs
from .config import fingerprint, probe_fingerprint, probe_settings
from .evaluation import (EvalError, InstanceRun, PipelineConfig, chained_from_examples,
                         query_point_policy, run_instances, sweep_examples)
from .features import (DatasetError, FingerprintMismatch, build_features, dataset_read,
                       dataset_write, make_example)
from .model import ModelError, TrainedModel, combine_two_models, train
from .portfolio import PortfolioError, RaceEntry, SolverTrace, portfolio_experiment
from .probe import Probe, WindowMode, WindowPolicy
from .reports import write_chained_report, write_portfolio_report, write_sweep_report
from .solver import EventTraceWriter, SolverConfig, Verdict, solve

log = logging.getLogger("satcost")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
RESTART_KEY = "restarts"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- shared option groups ---------------------------------------------------------

def _add_solver_opts(p, factor_flag="--factor"):
    g = p.add_argument_group("solver")
    g.add_argument(factor_flag, dest="factor", type=float, default=1.5,
                   help="geometric restart factor (default: %(default)s)")
    g.add_argument("--restart-base", type=int, default=100,
                   help="conflicts in the first restart (default: %(default)s)")
    g.add_argument("--no-restarts", action="store_true", help="disable restarts")
    g.add_argument("--budget", type=int, default=1_000_000,
                   help="conflict budget per instance (default: %(default)s)")
    g.add_argument("--var-decay", type=float, default=0.95, help="(default: %(default)s)")
    g.add_argument("--clause-decay", type=float, default=0.999, help="(default: %(default)s)")
    g.add_argument("--solver-seed", type=int, default=0,
                   help="branching tie-break seed (default: %(default)s)")


def _add_window_opts(p):
    g = p.add_argument_group("observation window")
    g.add_argument("--query-points", default="2000",
                   help="no-restart mode: comma separated conflict counts at which the "
                        "window closes (default: %(default)s)")
    g.add_argument("--window-size", type=int, default=1000,
                   help="no-restart window size (default: %(default)s)")
    g.add_argument("--window-wait", type=int, default=500,
                   help="no-restart minimum wait (default: %(default)s)")
    g.add_argument("--wait-floor", type=int, default=500, help="(default: %(default)s)")
    g.add_argument("--wait-frac", type=float, default=0.02, help="(default: %(default)s)")
    g.add_argument("--size-floor", type=int, default=1000, help="(default: %(default)s)")
    g.add_argument("--size-frac", type=float, default=0.01, help="(default: %(default)s)")


def _add_model_opts(p):
    g = p.add_argument_group("model")
    g.add_argument("--lambda", dest="lam", type=float, default=1.0,
                   help="ridge penalty on standardized features (default: %(default)s)")
    g.add_argument("--collinear", type=float, default=0.98,
                   help="|r| threshold for collinearity pruning (default: %(default)s)")
    g.add_argument("--training-cap", type=int, default=500,
                   help="max training examples per model (default: %(default)s)")


def solver_config(a, factor=None) -> SolverConfig:
    return SolverConfig(restart_base=a.restart_base,
                        restart_factor=a.factor if factor is None else factor,
                        restarts_enabled=not a.no_restarts, conflict_budget=a.budget,
                        var_decay=a.var_decay, clause_decay=a.clause_decay,
                        seed=a.solver_seed)


def window_policy(a) -> WindowPolicy:
    mode = WindowMode.NO_RESTARTS if a.no_restarts else WindowMode.WITH_RESTARTS
    return WindowPolicy(mode, a.window_wait, a.window_size, a.wait_floor, a.wait_frac,
                        a.size_floor, a.size_frac)


def query_points(a) -> tuple[int, ...]:
    if not a.no_restarts:
        return ()
    try:
        pts = tuple(sorted({int(x) for x in a.query_points.split(",") if x.strip()}))
    except ValueError:
        raise UsageError(f"bad --query-points {a.query_points!r}") from None
    if not pts:
        raise UsageError("no query points given")
    return pts


def probes_for(a) -> dict:
    policy = window_policy(a)
    if a.no_restarts:
        try:
            return {q: query_point_policy(q, policy) for q in query_points(a)}
        except EvalError as exc:
            raise UsageError(str(exc)) from None
    return {RESTART_KEY: policy}


def expected_fingerprint(a, factor=None) -> str:
    return probe_fingerprint(solver_config(a, factor), window_policy(a), query_points(a))


# -- manifest ---------------------------------------------------------------------

MANIFEST_COLUMNS = ("instance_id", "file", "num_vars", "ratio", "seed", "num_clauses",
                    "verdict", "total_conflicts")


def read_manifest(path) -> list[dict]:
    base = os.path.dirname(os.path.abspath(path))
    with open(path, newline="") as fh:
        rows = [line for line in fh if not line.startswith("#")]
    out = []
    for r in csv.DictReader(rows):
        r["path"] = os.path.join(base, r["file"])
        out.append(r)
    return out


def _instances(a) -> list[tuple[str, object]]:
    if a.manifest:
        return [(r["instance_id"], read_dimacs(r["path"])) for r in read_manifest(a.manifest)]
    return [(os.path.splitext(os.path.basename(p))[0], read_dimacs(p)) for p in a.cnf]


def instance_seed(seed: int, index: int) -> int:
    return seed * 1_000_003 + index


# -- subcommands --------------------------------------------------------------------

def cmd_gen(a) -> int:
    os.makedirs(a.out, exist_ok=True)
    cfg = solver_config(a)
    want = {"any": None, "sat": Verdict.SAT, "unsat": Verdict.UNSAT}[a.filter]
    settings = {"vars": a.vars, "ratio": a.ratio, "seed": a.seed, "count": a.count,
                "filter": a.filter, "solver": cfg if want else None}
    fp = fingerprint(settings)
    rows = []
    index = 0
    max_tries = a.count * a.max_tries_factor
    while len(rows) < a.count:
        if index >= max_tries:
            raise DatasetError(f"only {len(rows)} {a.filter} instances in {index} tries")
        spec = GeneratorSpec(a.vars, a.ratio, instance_seed(a.seed, index))
        index += 1
        formula = generate_random_3sat(spec)
        verdict, conflicts = "unknown", ""
        if want is not None:
            res = solve(formula, cfg)
            if res.verdict is not want:
                continue
            verdict, conflicts = res.verdict.value, res.total_conflicts
        iid = f"r{a.vars}_{a.seed}_{index - 1:05d}"
        fname = f"{iid}.cnf"
        write_dimacs(os.path.join(a.out, fname), formula,
                     list(formula.comments) + [f"fingerprint {fp}"])
        rows.append([iid, fname, a.vars, repr(a.ratio), spec.seed, formula.num_clauses,
                     verdict, conflicts])
    with open(os.path.join(a.out, "manifest.csv"), "w", newline="") as fh:
        fh.write(f"# fingerprint {fp}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_COLUMNS)
        w.writerows(rows)
    print(f"c wrote {len(rows)} instances to {a.out}")
    return EXIT_OK


def cmd_solve(a) -> int:
    formula = read_dimacs(a.cnf)
    observers = []
    fh = None
    if a.trace:
        fh = open(a.trace, "w", newline="")
        observers.append(EventTraceWriter(fh))
    try:
        res = solve(formula, solver_config(a), observers)
    finally:
        if fh:
            fh.close()
    print(f"c conflicts {res.total_conflicts}")
    print(f"c restarts {res.restarts_used}")
    status = {Verdict.SAT: "SATISFIABLE", Verdict.UNSAT: "UNSATISFIABLE",
              Verdict.BUDGET_EXHAUSTED: "UNKNOWN"}[res.verdict]
    print(f"s {status}")
    if res.verdict is Verdict.SAT and not a.quiet:
        lits = [v if res.model[v] else -v for v in range(1, formula.num_vars + 1)]
        print("v " + " ".join(map(str, lits + [0])))
    return EXIT_OK


def _write_runs(path, runs: list[InstanceRun], fp: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# fingerprint {fp}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["instance_id", "verdict", "total_conflicts", "restarts_used"])
        for r in runs:
            w.writerow([r.instance_id, r.verdict.value, r.total_conflicts, r.restarts_used])


def _read_runs(path, expect_fp: str) -> dict[str, tuple[Verdict, int]]:
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        fp = first.partition("# fingerprint ")[2]
        if fp != expect_fp:
            raise FingerprintMismatch(f"runs fingerprint {fp or '?'} != expected {expect_fp}")
        return {r["instance_id"]: (Verdict(r["verdict"]), int(r["total_conflicts"]))
                for r in csv.DictReader(fh)}


def cmd_probe(a) -> int:
    cfg = solver_config(a)
    probes = probes_for(a)
    fp = expected_fingerprint(a)
    runs = run_instances(_instances(a), cfg, probes, a.jobs)
    examples = []
    for run in runs:
        if not run.solved:
            continue
        for key, snaps in run.snapshots.items():
            for snap in snaps:
                if run.total_conflicts <= snap.close_conflict:
                    break
                fv = build_features(run.init, snap)
                examples.append(make_example(run.instance_id, run.satisfiable, fv,
                                             run.total_conflicts, snap,
                                             key if key != RESTART_KEY else 0))
    os.makedirs(a.out, exist_ok=True)
    settings = probe_settings(cfg, window_policy(a), query_points(a))
    dataset_write(os.path.join(a.out, "dataset.csv"), examples, fp, settings)
    _write_runs(os.path.join(a.out, "runs.csv"), runs, fp)
    print(f"c {len(runs)} runs, {len(examples)} examples, fingerprint {fp}")
    return EXIT_OK


def _load_probe_dir(d, fp):
    ds = dataset_read(os.path.join(d, "dataset.csv"), fp)
    runs = _read_runs(os.path.join(d, "runs.csv"), fp)
    return ds, runs


def _select(examples, a):
    if a.no_restarts:
        q = a.query_point if a.query_point is not None else query_points(a)[0]
        exs = [e for e in examples if e.query_point == q]
    else:
        exs = [e for e in examples if e.window == a.window]
    if a.cls != "all":
        exs = [e for e in exs if e.satisfiable is (a.cls == "sat")]
    return exs


def cmd_train(a) -> int:
    fp = expected_fingerprint(a)
    ds = dataset_read(a.dataset, fp)
    exs = _select(ds.examples, a)
    model = train(exs[:a.training_cap], a.lam, a.collinear, fingerprint=fp, label=a.cls)
    model.save(a.out)
    print(f"c trained on {model.n_train} examples, {len(model.feature_names)} features kept")
    return EXIT_OK


def _check_model_fp(model: TrainedModel, fp: str, path: str) -> None:
    if model.fingerprint != fp:
        raise FingerprintMismatch(f"model {path} fingerprint {model.fingerprint} != {fp}")


def cmd_predict(a) -> int:
    fp = expected_fingerprint(a)
    model = TrainedModel.load(a.model)
    _check_model_fp(model, fp, a.model)
    other = None
    if a.model_unsat:
        other = TrainedModel.load(a.model_unsat)
        _check_model_fp(other, fp, a.model_unsat)

    def predict(fv):
        p = model.predict(fv)
        return combine_two_models(p, other.predict(fv)) if other else p

    if a.dataset:
        ds = dataset_read(a.dataset, fp)
        print("instance_id,predicted_log,actual_log")
        for e in _select(ds.examples, a):
            print(f"{e.instance_id},{predict(e.features)!r},{e.label!r}")
        return EXIT_OK

    formula = read_dimacs(a.cnf)
    probes = probes_for(a)
    key = a.query_point if a.no_restarts and a.query_point is not None else next(iter(probes))
    probe = Probe(formula, probes[key])
    res = solve(formula, solver_config(a), [probe])
    if not probe.snapshots:
        print(f"c solved before the window closed ({res.total_conflicts} conflicts)")
    else:
        snap = probe.snapshots[0]
        p = predict(build_features(formula, snap))
        print(f"c window closed at conflict {snap.close_conflict}")
        print(f"c predicted_log_conflicts {p!r}")
        print(f"c predicted_conflicts {math.exp(p):.1f}")
    print(f"c actual_conflicts {res.total_conflicts}")
    print(f"s {res.verdict.value}")
    return EXIT_OK


def _pipeline(a) -> PipelineConfig:
    return PipelineConfig(a.lam, a.collinear, a.mode, a.training_cap)


def cmd_eval(a) -> int:
    fp = expected_fingerprint(a)
    ds, runs = _load_probe_dir(a.probe_dir, fp)
    solved = {i for i, (v, _) in runs.items() if v is not Verdict.BUDGET_EXHAUSTED}
    exs = [e for e in ds.examples if e.instance_id in solved]
    cfg = _pipeline(a)
    if a.experiment == "sweep":
        if not a.no_restarts:
            raise UsageError("the query-point sweep runs in --no-restarts mode")
        per_point = {}
        for q in query_points(a):
            sel = [e for e in exs if e.query_point == q]
            per_point[q] = (sel, len(solved) - len(sel))
        sweep = sweep_examples(per_point, a.folds, cfg, a.seed)
        written = write_sweep_report(a.out, sweep, fp, a.gnuplot, not a.no_figures)
    else:
        if a.no_restarts:
            raise UsageError("the chained experiment needs restarts")
        per_inst: dict[str, list] = {}
        for e in sorted(exs, key=lambda e: (e.instance_id, e.window)):
            per_inst.setdefault(e.instance_id, []).append(e)
        rows = chained_from_examples(per_inst, a.folds, cfg, a.seed)
        written = write_chained_report(a.out, rows, fp, a.gnuplot, not a.no_figures)
    for p in written:
        print(f"c wrote {p}")
    return EXIT_OK


def _entries(ds_a, runs_a, ds_b, runs_b) -> list[RaceEntry]:
    def traces(ds, runs):
        first = {e.instance_id: e for e in ds.examples if e.window == 1}
        out = {}
        for i, (v, total) in runs.items():
            if v is Verdict.BUDGET_EXHAUSTED:
                continue
            e = first.get(i)
            out[i] = (v is Verdict.SAT,
                      SolverTrace(total, e.close_conflict, e.features) if e else SolverTrace(total))
        return out
    ta, tb = traces(ds_a, runs_a), traces(ds_b, runs_b)
    entries = []
    for i in sorted(set(ta) & set(tb)):
        if ta[i][0] != tb[i][0]:
            raise PortfolioError(f"solvers disagree on satisfiability of {i}")
        entries.append(RaceEntry(i, ta[i][0], ta[i][1], tb[i][1]))
    return entries


def cmd_portfolio(a) -> int:
    if a.no_restarts:
        raise UsageError("portfolio solvers differ by restart factor; restarts are required")
    fp_a = expected_fingerprint(a, a.factor_a)
    fp_b = expected_fingerprint(a, a.factor_b)
    ds_a, runs_a = _load_probe_dir(a.probe_dir_a, fp_a)
    ds_b, runs_b = _load_probe_dir(a.probe_dir_b, fp_b)
    entries = _entries(ds_a, runs_a, ds_b, runs_b)
    result = portfolio_experiment(entries, a.folds, a.seed, _pipeline(a), a.random_seeds,
                                  a.target)
    modes = {"on": (True,), "off": (False,), "both": (True, False)}[a.charge_probes]
    fp = fingerprint({"a": fp_a, "b": fp_b, "folds": a.folds, "seed": a.seed,
                      "pipeline": _pipeline(a), "random_seeds": a.random_seeds,
                      "target": a.target})
    for p in write_portfolio_report(a.out, result, fp, a.dataset_name, modes,
                                    not a.no_figures):
        print(f"c wrote {p}")
    return EXIT_OK


# -- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="satcost", description=__doc__.split("\n")[0],
                formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--version", action="version", version=f"satcost {__version__}")
    p.add_argument("--config", help="JSON file of option defaults (keys are option dests)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a random 3-SAT ensemble and manifest")
    g.add_argument("--vars", type=int, required=True)
    g.add_argument("--ratio", type=float, required=True)
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--seed", type=int, default=0, help="(default: %(default)s)")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--filter", choices=("any", "sat", "unsat"), default="any",
                   help="keep only instances with this verdict (solves each one)")
    g.add_argument("--max-tries-factor", type=int, default=20, help=argparse.SUPPRESS)
    _add_solver_opts(g)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="solve one DIMACS file")
    s.add_argument("--cnf", required=True)
    s.add_argument("--trace", help="write one CSV row per conflict")
    s.add_argument("--quiet", action="store_true", help="omit the model line")
    _add_solver_opts(s)
    s.set_defaults(func=cmd_solve)

    pr = sub.add_parser("probe", help="solve instances with observation windows, write dataset")
    src = pr.add_mutually_exclusive_group(required=True)
    src.add_argument("--manifest")
    src.add_argument("--cnf", nargs="+")
    pr.add_argument("--out", required=True, help="output directory")
    pr.add_argument("--jobs", type=int, default=1, help="(default: %(default)s)")
    _add_solver_opts(pr)
    _add_window_opts(pr)
    pr.set_defaults(func=cmd_probe)

    t = sub.add_parser("train", help="train a model on a probe dataset")
    t.add_argument("--dataset", required=True)
    t.add_argument("--out", required=True, help="model JSON path")
    t.add_argument("--class", dest="cls", choices=("sat", "unsat", "all"), default="all")
    t.add_argument("--query-point", type=int, help="no-restart mode: which query point")
    t.add_argument("--window", type=int, default=1, help="restart mode: window ordinal")
    _add_solver_opts(t)
    _add_window_opts(t)
    _add_model_opts(t)
    t.set_defaults(func=cmd_train)

    pd = sub.add_parser("predict", help="predict log-cost for a CNF file or dataset rows")
    src = pd.add_mutually_exclusive_group(required=True)
    src.add_argument("--cnf")
    src.add_argument("--dataset")
    pd.add_argument("--model", required=True)
    pd.add_argument("--model-unsat", help="second model; combined by geometric mean")
    pd.add_argument("--class", dest="cls", choices=("sat", "unsat", "all"), default="all")
    pd.add_argument("--query-point", type=int)
    pd.add_argument("--window", type=int, default=1)
    _add_solver_opts(pd)
    _add_window_opts(pd)
    pd.set_defaults(func=cmd_predict)

    e = sub.add_parser("eval", help="cross-validated query-point sweep or chained experiment")
    e.add_argument("--probe-dir", required=True)
    e.add_argument("--experiment", choices=("sweep", "chained"), default="sweep")
    e.add_argument("--folds", type=int, default=10)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--mode", choices=("oracle", "two_models", "pooled"), default="oracle")
    e.add_argument("--out", required=True)
    e.add_argument("--gnuplot", action="store_true", help="also write gnuplot .dat files")
    e.add_argument("--no-figures", action="store_true")
    _add_solver_opts(e)
    _add_window_opts(e)
    _add_model_opts(e)
    e.set_defaults(func=cmd_eval)

    po = sub.add_parser("portfolio", help="race solver A against solver B")
    po.add_argument("--probe-dir-a", required=True)
    po.add_argument("--probe-dir-b", required=True)
    po.add_argument("--factor-a", type=float, default=1.5)
    po.add_argument("--factor-b", type=float, default=1.2)
    po.add_argument("--folds", type=int, default=10)
    po.add_argument("--seed", type=int, default=0)
    po.add_argument("--random-seeds", type=int, default=100)
    po.add_argument("--charge-probes", choices=("on", "off", "both"), default="both")
    po.add_argument("--target", choices=("full", "remaining"), default="full",
                    help="what the racing models predict (default: %(default)s)")
    po.add_argument("--dataset-name", default="rand")
    po.add_argument("--mode", default="oracle", help=argparse.SUPPRESS)
    po.add_argument("--out", required=True)
    po.add_argument("--no-figures", action="store_true")
    _add_solver_opts(po)
    _add_window_opts(po)
    _add_model_opts(po)
    po.set_defaults(func=cmd_portfolio)
    return p


def _apply_config(parser, argv) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    with open(known.config) as fh:
        defaults = json.load(fh)
    if not isinstance(defaults, dict):
        raise UsageError("config file must hold a JSON object")
    for action in parser._subparsers._group_actions:  # noqa: SLF001
        for sp in action.choices.values():
            dests = {a.dest for a in sp._actions}  # noqa: SLF001
            sp.set_defaults(**{k: v for k, v in defaults.items() if k in dests})


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        a = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                            format="c %(levelname)s %(name)s: %(message)s")
        if not getattr(a, "func", None):
            raise UsageError("a subcommand is required")
        return a.func(a)
    except UsageError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FingerprintMismatch, DatasetError, DimacsError, ModelError, EvalError,
            PortfolioError, FileNotFoundError) as exc:
        kind = "fingerprint" if isinstance(exc, FingerprintMismatch) else "data"
        print(f"error: {kind}: {' '.join(str(exc).split())}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"error: internal: {type(exc).__name__}: {' '.join(str(exc).split())}",
              file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
