"""Feature vectors built from window snapshots, and the labeled dataset file.

Dataset CSV layout::

    # satcost-dataset v1
    # fingerprint <hex>
    # config <json>
    # features <comma separated feature names>
    instance_id,satisfiable,log_conflicts,total_conflicts,window,restart_index,
    close_conflict,query_point,flags,<features...>
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .cnf import CnfFormula
from .probe import WindowSnapshot, init_stats

DATASET_VERSION = "satcost-dataset v1"

INIT_FEATURES = ("var", "cls", "cls_per_var", "var_per_cls",
                 "frac_binary", "frac_ternary", "avg_clause_size")

# (series, statistics) per checked cell of the window columns
WINDOW_CELLS = (
    ("cls_per_var", ("min", "max", "mean", "sd", "last")),
    ("var_per_cls", ("min", "max", "mean", "sd", "last")),
    ("frac_binary", ("mean", "sd", "last")),
    ("frac_ternary", ("mean", "sd", "last")),
    ("avg_clause_size", ("mean", "sd", "last")),
    ("trail_depth", ("max", "mean", "sd")),
    ("decision_depth", ("max", "mean", "sd")),
    ("backjump_size", ("max", "mean", "sd")),
    ("learnt_size", ("min", "max", "mean", "sd")),
    ("conflict_size", ("min", "max", "mean", "sd")),
    ("abb", ("min", "max", "mean", "sd")),
    ("aab", ("min", "max", "mean", "sd")),
    ("aab_over_abb", ("min", "max", "mean", "sd")),
    ("abb_over_aab", ("min", "max", "mean", "sd")),
    ("log_wbe", ("min", "max", "mean", "sd", "last")),
)

BASE_FEATURE_NAMES: tuple[str, ...] = (
    tuple(f"init_{f}" for f in INIT_FEATURES)
    + tuple(f"win_{s}_{stat}" for s, stats in WINDOW_CELLS for stat in stats)
)

META_COLUMNS = ("instance_id", "satisfiable", "log_conflicts", "total_conflicts",
                "window", "restart_index", "close_conflict", "query_point", "flags")


def chained_names(n: int) -> tuple[str, ...]:
    return tuple(f"chain_{i}" for i in range(1, n + 1))


class FeatureError(ValueError):
    pass


class DatasetError(ValueError):
    pass


class FingerprintMismatch(DatasetError):
    pass


@dataclass(frozen=True)
class FeatureVector:
    base: tuple[float, ...]
    chained: tuple[float, ...] = ()
    flags: frozenset[str] = frozenset()

    @property
    def names(self) -> tuple[str, ...]:
        return BASE_FEATURE_NAMES + chained_names(len(self.chained))

    @property
    def values(self) -> tuple[float, ...]:
        return self.base + self.chained

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values))

    def with_chain(self, chained: Sequence[float]) -> "FeatureVector":
        return FeatureVector(self.base, tuple(float(x) for x in chained), self.flags)


@dataclass(frozen=True)
class LabeledExample:
    instance_id: str
    satisfiable: bool
    features: FeatureVector
    label: float  # ln(total_conflicts) of the full run
    total_conflicts: int = 0
    window: int = 1
    restart_index: int = 1
    close_conflict: int = 0
    query_point: int = 0


def make_example(instance_id: str, satisfiable: bool, fv: FeatureVector,
                 total_conflicts: int, snapshot: WindowSnapshot | None = None,
                 query_point: int = 0) -> LabeledExample:
    if total_conflicts < 1:
        raise FeatureError("cost must be at least one conflict")
    return LabeledExample(
        instance_id, bool(satisfiable), fv, math.log(total_conflicts), total_conflicts,
        window=snapshot.ordinal if snapshot else 1,
        restart_index=snapshot.restart_index if snapshot else 1,
        close_conflict=snapshot.close_conflict if snapshot else 0,
        query_point=query_point)


def build_features(formula: CnfFormula | Mapping[str, float], snapshot: WindowSnapshot,
                   chained: Sequence[float] = ()) -> FeatureVector:
    """Map the original formula and a closed window onto the 64 base features."""
    init = init_stats(formula) if isinstance(formula, CnfFormula) else formula
    values = [float(init[f]) for f in INIT_FEATURES]
    for series, stats in WINDOW_CELLS:
        summary = snapshot.stats[series]
        values.extend(float(summary[s]) for s in stats)
    values.extend(float(x) for x in chained)
    bad = [n for n, v in zip(BASE_FEATURE_NAMES + chained_names(len(chained)), values)
           if not math.isfinite(v)]
    if bad:
        raise FeatureError(f"non-finite features: {', '.join(bad)}")
    k = len(BASE_FEATURE_NAMES)
    return FeatureVector(tuple(values[:k]), tuple(values[k:]), frozenset(snapshot.flags))


def feature_matrix(examples: Sequence[LabeledExample]) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    if not examples:
        raise DatasetError("no examples")
    names = examples[0].features.names
    for ex in examples:
        if ex.features.names != names:
            raise DatasetError("dimension mismatch between examples")
    X = np.array([ex.features.values for ex in examples], dtype=float)
    y = np.array([ex.label for ex in examples], dtype=float)
    return X, y, names


def dataset_write(path, examples: Sequence[LabeledExample], fingerprint: str,
                  config: Mapping | None = None) -> None:
    names = examples[0].features.names if examples else BASE_FEATURE_NAMES
    for ex in examples:
        if ex.features.names != names:
            raise DatasetError("dimension mismatch: mixed chained lengths")
    with open(path, "w", newline="") as fh:
        fh.write(f"# {DATASET_VERSION}\n")
        fh.write(f"# fingerprint {fingerprint}\n")
        fh.write(f"# config {json.dumps(config or {}, sort_keys=True)}\n")
        fh.write(f"# features {','.join(names)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(META_COLUMNS + names)
        for ex in examples:
            w.writerow([ex.instance_id, int(ex.satisfiable), repr(ex.label), ex.total_conflicts,
                        ex.window, ex.restart_index, ex.close_conflict, ex.query_point,
                        ";".join(sorted(ex.features.flags))]
                       + [repr(v) for v in ex.features.values])


@dataclass
class Dataset:
    examples: list[LabeledExample]
    fingerprint: str
    config: dict = field(default_factory=dict)
    feature_names: tuple[str, ...] = BASE_FEATURE_NAMES


def dataset_read(path, expect_fingerprint: str | None = None) -> Dataset:
    with open(path, newline="") as fh:
        first = fh.readline().rstrip("\n")
        if first != f"# {DATASET_VERSION}":
            raise DatasetError(f"unknown dataset header version: {first!r}")
        header = {}
        for _ in range(3):
            line = fh.readline()
            if not line.startswith("# "):
                raise DatasetError("truncated dataset header")
            key, _, rest = line[2:].rstrip("\n").partition(" ")
            header[key] = rest
        if set(header) != {"fingerprint", "config", "features"}:
            raise DatasetError("malformed dataset header")
        names = tuple(header["features"].split(",")) if header["features"] else ()
        base_len = len(BASE_FEATURE_NAMES)
        if names[:base_len] != BASE_FEATURE_NAMES or \
                names[base_len:] != chained_names(len(names) - base_len):
            raise DatasetError("unexpected feature columns")
        fp = header["fingerprint"]
        if expect_fingerprint is not None and fp != expect_fingerprint:
            raise FingerprintMismatch(
                f"dataset fingerprint {fp} != expected {expect_fingerprint}")
        reader = csv.reader(fh)
        cols = next(reader)
        if tuple(cols) != META_COLUMNS + names:
            raise DatasetError("column header does not match feature list")
        nm = len(META_COLUMNS)
        examples = []
        for row in reader:
            if len(row) != len(cols):
                raise DatasetError("dimension mismatch in row")
            vals = tuple(float(v) for v in row[nm:])
            flags = frozenset(f for f in row[8].split(";") if f)
            fv = FeatureVector(vals[:base_len], vals[base_len:], flags)
            examples.append(LabeledExample(
                row[0], row[1] == "1", fv, float(row[2]), int(row[3]), int(row[4]),
                int(row[5]), int(row[6]), int(row[7])))
    return Dataset(examples, fp, json.loads(header["config"]), names)


def merge_datasets(datasets: Iterable[Dataset]) -> Dataset:
    datasets = list(datasets)
    if not datasets:
        raise DatasetError("nothing to merge")
    first = datasets[0]
    for d in datasets[1:]:
        if d.fingerprint != first.fingerprint:
            raise FingerprintMismatch("refusing to merge datasets with different fingerprints")
        if d.feature_names != first.feature_names:
            raise DatasetError("dimension mismatch between datasets")
    return Dataset([e for d in datasets for e in d.examples], first.fingerprint,
                   first.config, first.feature_names)
