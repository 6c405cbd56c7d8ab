"""Report files: CSV tables with a '#' fingerprint line, a text summary,
PNG figures and optional gnuplot data files."""

from __future__ import annotations

import csv
import os
from typing import Sequence

from . import plotting
from .evaluation import ChainedRow, CVResult, SweepPoint
from .portfolio import COLUMN_TITLES, PortfolioResult, Strategy


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(round(x, 10))
    return str(x)


def write_table(path, header: Sequence[str], rows, fingerprint: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# fingerprint {fingerprint}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def write_gnuplot(path, header: Sequence[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write("# " + " ".join(header) + "\n")
        for r in rows:
            fh.write(" ".join(_fmt(v) for v in r) + "\n")


def _curve_rows(cv: CVResult, tag):
    rows = []
    for cls in cv.classes():
        lmp = cv.curve(cls)
        base = cv.curve(cls, baseline=True)
        for (f, v), (_, b) in zip(lmp, base):
            rows.append([tag, cls, f, v, b])
    return rows


def write_sweep_report(outdir, sweep: Sequence[SweepPoint], fingerprint: str,
                       gnuplot: bool = False, figures: bool = True) -> list[str]:
    os.makedirs(outdir, exist_ok=True)
    written = []
    curve_rows, fold_rows, pred_rows, summary = [], [], [], []
    summary.append(f"fingerprint {fingerprint}")
    for sp in sweep:
        summary.append(f"query point {sp.point}: used {sp.n_used}, excluded {sp.n_excluded}")
        if sp.cv is None:
            summary.append("  skipped (too few instances)")
            continue
        cv = sp.cv
        curve_rows.extend(_curve_rows(cv, sp.point))
        for fr in cv.folds:
            fold_rows.append([sp.point, fr["fold"], fr["n_train"], fr["n_test"], fr["rmse"],
                              fr["rmse_baseline"], fr["within2"], fr["within2_baseline"]])
        for p in cv.predictions:
            pred_rows.append([sp.point, p.instance_id, int(p.satisfiable), p.fold, p.actual,
                              p.predicted, p.baseline])
        for cls in cv.classes():
            summary.append(
                f"  {cls:5s} n={len(cv.subset(cls)):4d} rmse={cv.rmse(cls):.4f} "
                f"(mean baseline {cv.rmse(cls, True):.4f})  within2={cv.within(2, cls):.3f} "
                f"(baseline {cv.within(2, cls, True):.3f})")
        if figures:
            path = os.path.join(outdir, f"error_factor_q{sp.point}.png")
            curves = {f"{c} LMP": cv.curve(c) for c in cv.classes() if c != "all"}
            curves.update({f"{c} mean": cv.curve(c, True) for c in cv.classes() if c != "all"})
            plotting.plot_error_factor_curves(curves, path, f"after {sp.point} backtracks")
            written.append(path)
        if gnuplot:
            for cls in cv.classes():
                path = os.path.join(outdir, f"fig1_q{sp.point}_{cls}.dat")
                write_gnuplot(path, ["factor", "pct_lmp", "pct_baseline"],
                              [[f, 100 * v, 100 * b] for (f, v), (_, b)
                               in zip(cv.curve(cls), cv.curve(cls, True))])
                written.append(path)

    tables = {
        "curves.csv": (["query_point", "class", "factor", "fraction_lmp", "fraction_baseline"],
                       curve_rows),
        "folds.csv": (["query_point", "fold", "n_train", "n_test", "rmse", "rmse_baseline",
                       "within2", "within2_baseline"], fold_rows),
        "predictions.csv": (["query_point", "instance_id", "satisfiable", "fold",
                             "actual_log", "predicted_log", "baseline_log"], pred_rows),
    }
    for name, (header, rows) in tables.items():
        path = os.path.join(outdir, name)
        write_table(path, header, rows, fingerprint)
        written.append(path)
    path = os.path.join(outdir, "summary.txt")
    with open(path, "w") as fh:
        fh.write("\n".join(summary) + "\n")
    written.append(path)
    return written


def write_chained_report(outdir, rows: Sequence[ChainedRow], fingerprint: str,
                         gnuplot: bool = False, figures: bool = True) -> list[str]:
    os.makedirs(outdir, exist_ok=True)
    header = ["class", "window", "n", "within2_plain", "within2_chained", "difference",
              "rmse_plain", "rmse_chained"]
    data = [[r.cls, r.restart, r.n, r.within2_plain, r.within2_chained, r.difference,
             r.rmse_plain, r.rmse_chained] for r in rows]
    path = os.path.join(outdir, "chained.csv")
    write_table(path, header, data, fingerprint)
    written = [path]
    path = os.path.join(outdir, "chained_summary.txt")
    with open(path, "w") as fh:
        fh.write(f"fingerprint {fingerprint}\n")
        for r in rows:
            fh.write(f"{r.cls:5s} window {r.restart:2d} n={r.n:4d} within2 plain "
                     f"{r.within2_plain:.3f} chained {r.within2_chained:.3f} "
                     f"diff {r.difference:+.3f}\n")
    written.append(path)
    if figures and rows:
        path = os.path.join(outdir, "chained.png")
        plotting.plot_chained(rows, path)
        written.append(path)
    if gnuplot:
        for cls in sorted({r.cls for r in rows}):
            path = os.path.join(outdir, f"fig3_{cls}.dat")
            write_gnuplot(path, ["window", "pct_plain", "pct_chained"],
                          [[r.restart, 100 * r.within2_plain, 100 * r.within2_chained]
                           for r in rows if r.cls == cls])
            written.append(path)
    return written


PORTFOLIO_COLUMNS = [(Strategy.BEST, "Best"), (Strategy.LMP_ORACLE, "LMP(oracle)"),
                     (Strategy.LMP_TWO_MODELS, "LMP(two models)")]


def portfolio_rows(result: PortfolioResult, dataset: str):
    rows = []
    for charge in (True, False):
        for cls, row in result.tables[charge].items():
            rows.append([dataset, cls, "on" if charge else "off", row["n"]]
                        + [row[s] for s, _ in PORTFOLIO_COLUMNS]
                        + [row[Strategy.RANDOM_BASELINE], row["baseline"],
                           row[f"short_circuits_{Strategy.LMP_ORACLE.value}"]])
    return rows


def write_portfolio_report(outdir, result: PortfolioResult, fingerprint: str,
                           dataset: str = "rand", charge_modes=(True, False),
                           figures: bool = True) -> list[str]:
    os.makedirs(outdir, exist_ok=True)
    header = (["dataset", "class", "charge_probes", "n"]
              + [t for _, t in PORTFOLIO_COLUMNS] + ["Random", "baseline_conflicts",
                                                     "short_circuits"])
    rows = [r for r in portfolio_rows(result, dataset)
            if (r[2] == "on") in charge_modes]
    path = os.path.join(outdir, "portfolio.csv")
    write_table(path, header, rows, fingerprint)
    written = [path]

    out_rows = []
    for charge in charge_modes:
        for strat, outs in result.outcomes[charge].items():
            for o in outs:
                out_rows.append([o.instance_id, int(o.satisfiable), strat.value,
                                 "on" if charge else "off", o.probe_cost_a, o.probe_cost_b,
                                 o.kept, o.kept_total_cost, o.charged_cost, o.total_a,
                                 o.total_b, int(o.short_circuit), o.pred_a, o.pred_b])
    path = os.path.join(outdir, "races.csv")
    write_table(path, ["instance_id", "satisfiable", "strategy", "charge_probes",
                       "probe_cost_a", "probe_cost_b", "kept", "kept_total_cost",
                       "charged_cost", "total_a", "total_b", "short_circuit", "pred_a",
                       "pred_b"], out_rows, fingerprint)
    written.append(path)

    path = os.path.join(outdir, "portfolio_summary.txt")
    with open(path, "w") as fh:
        fh.write(f"fingerprint {fingerprint}\n")
        for r in rows:
            fh.write(f"{r[0]} {r[1]:5s} probes charged {r[2]:3s} n={r[3]:4d}  "
                     + "  ".join(f"{t}={v:.3f}" for (_, t), v in zip(PORTFOLIO_COLUMNS, r[4:7]))
                     + f"  Random={r[7]:.3f}\n")
    written.append(path)
    if figures:
        for charge in charge_modes:
            path = os.path.join(outdir, f"portfolio_charge_{'on' if charge else 'off'}.png")
            cols = PORTFOLIO_COLUMNS + [(Strategy.RANDOM_BASELINE, COLUMN_TITLES[Strategy.RANDOM_BASELINE])]
            plotting.plot_portfolio(result.tables[charge], cols, path)
            written.append(path)
    return written
