import math

import pytest

from satcost.cnf import GeneratorSpec, generate_random_3sat
from satcost.features import (BASE_FEATURE_NAMES, DatasetError, FeatureError,
                              FingerprintMismatch, build_features, chained_names,
                              dataset_read, dataset_write, feature_matrix, make_example,
                              merge_datasets)
from satcost.probe import Probe, WindowMode, WindowPolicy
from satcost.solver import SolverConfig, solve


@pytest.fixture(scope="module")
def snapshot():
    f = generate_random_3sat(GeneratorSpec(100, 4.26, 5))
    p = Probe(f, WindowPolicy(WindowMode.NO_RESTARTS, 30, 50))
    res = solve(f, SolverConfig(restarts_enabled=False), [p])
    return f, p.snapshots[0], res


def test_feature_names():
    assert len(BASE_FEATURE_NAMES) == 64
    assert len(set(BASE_FEATURE_NAMES)) == 64
    assert chained_names(3) == ("chain_1", "chain_2", "chain_3")


def test_build_features(snapshot):
    f, snap, _ = snapshot
    fv = build_features(f, snap)
    assert len(fv.values) == 64
    assert all(math.isfinite(v) for v in fv.values)
    d = fv.as_dict()
    assert d["init_var"] == 100
    assert d["init_cls"] == f.num_clauses
    # init dict and formula give the same vector
    assert build_features(snap.init, snap) == fv


def test_chain_extends_vector(snapshot):
    f, snap, _ = snapshot
    fv = build_features(f, snap, chained=[1.0, 2.0])
    assert len(fv.values) == 66
    assert fv.names[-2:] == ("chain_1", "chain_2")
    assert fv.with_chain([]).values == fv.values[:64]


def test_non_finite_rejected(snapshot):
    f, snap, _ = snapshot
    with pytest.raises(FeatureError):
        build_features(f, snap, chained=[math.inf])


def _examples(snapshot, n=5, chain=()):
    f, snap, res = snapshot
    fv = build_features(f, snap, chain)
    return [make_example(f"i{i}", i % 2 == 0, fv, res.total_conflicts + i, snap) for i in range(n)]


def test_make_example(snapshot):
    ex = _examples(snapshot, 1)[0]
    assert ex.label == pytest.approx(math.log(ex.total_conflicts))
    assert ex.close_conflict == 80
    with pytest.raises(FeatureError):
        make_example("x", True, ex.features, 0)


def test_dataset_roundtrip(tmp_path, snapshot):
    exs = _examples(snapshot, chain=[0.5])
    path = tmp_path / "d.csv"
    dataset_write(path, exs, "abc123", {"k": 1})
    ds = dataset_read(path, "abc123")
    assert ds.examples == exs
    assert ds.config == {"k": 1}
    assert ds.feature_names[-1] == "chain_1"
    X, y, names = feature_matrix(ds.examples)
    assert X.shape == (5, 65) and len(names) == 65


def test_dataset_fingerprint_guard(tmp_path, snapshot):
    path = tmp_path / "d.csv"
    dataset_write(path, _examples(snapshot), "aaa")
    with pytest.raises(FingerprintMismatch):
        dataset_read(path, "bbb")


def test_dataset_rejects_bad_header(tmp_path, snapshot):
    path = tmp_path / "d.csv"
    dataset_write(path, _examples(snapshot), "aaa")
    text = path.read_text()
    path.write_text(text.replace("v1", "v9", 1))
    with pytest.raises(DatasetError):
        dataset_read(path)


def test_mixed_chain_lengths_rejected(tmp_path, snapshot):
    exs = _examples(snapshot, 2) + _examples(snapshot, 2, chain=[1.0])
    with pytest.raises(DatasetError):
        dataset_write(tmp_path / "d.csv", exs, "x")


def test_merge(tmp_path, snapshot):
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    dataset_write(a, _examples(snapshot, 2), "fp")
    dataset_write(b, _examples(snapshot, 3), "fp")
    dataset_write(c, _examples(snapshot, 3), "other")
    merged = merge_datasets([dataset_read(a), dataset_read(b)])
    assert len(merged.examples) == 5
    with pytest.raises(FingerprintMismatch):
        merge_datasets([dataset_read(a), dataset_read(c)])


def test_init_features_two_binary_clauses():
    from satcost.cnf import CnfFormula
    from satcost.probe import init_stats
    s = init_stats(CnfFormula(2, ((1, 2), (-1, 2))))
    assert s == dict(var=2.0, cls=2.0, cls_per_var=1.0, var_per_cls=1.0, frac_binary=1.0,
                     frac_ternary=0.0, avg_clause_size=2.0)


def _fed_probe(pairs, n=100):
    from satcost.cnf import CnfFormula
    from satcost.solver import ConflictEvent
    f = CnfFormula(n, tuple((v, v % n + 1, (v + 1) % n + 1) for v in range(1, 51)))
    p = Probe(f, WindowPolicy(WindowMode.NO_RESTARTS, 0, len(pairs)))
    p.on_restart(1, None)
    for i, (trail, after) in enumerate(pairs, 1):
        p.on_conflict(ConflictEvent(i, 3, trail, 1, after, 2, 3, 50, 1, 0, 50, 150))
    return p.snapshots[0]


def test_abb_and_running_ratio_series():
    snap = _fed_probe([(17, 10)])
    assert snap.stats["abb"]["last"] == 0.17
    snap = _fed_probe([(50, 25), (50, 25)])
    r = snap.stats["aab_over_abb"]
    assert r["min"] == r["max"] == r["mean"] == 0.5


def test_ratio_pair_reciprocal():
    snap = _fed_probe([(40, 10), (30, 20), (60, 5), (20, 19)])
    a, b = snap.stats["aab_over_abb"], snap.stats["abb_over_aab"]
    assert a["min"] == pytest.approx(1 / b["max"]) and a["max"] == pytest.approx(1 / b["min"])


def test_zero_denominator_flag():
    snap = _fed_probe([(10, 0), (10, 0)])
    assert "zero_aab_mean" in snap.flags
    assert snap.stats["abb_over_aab"]["max"] == 0.0


def test_real_run_feature_ranges_and_init_invariance():
    f = generate_random_3sat(GeneratorSpec(120, 4.26, 2))
    p = Probe(f, WindowPolicy(WindowMode.WITH_RESTARTS, wait_floor=5, size_floor=10))
    solve(f, SolverConfig(restart_base=10), [p])
    assert len(p.snapshots) >= 2
    vecs = [build_features(f, s).as_dict() for s in p.snapshots]
    init = [{k: v for k, v in d.items() if k.startswith("init_")} for d in vecs]
    assert all(i == init[0] for i in init)
    for s in p.snapshots:
        for series in ("abb", "aab"):
            assert 0 <= s.stats[series]["min"] <= s.stats[series]["max"] <= 1
        fb, ft = s.stats["frac_binary"], s.stats["frac_ternary"]
        assert fb["last"] + ft["last"] <= 1 + 1e-12


def test_dataset_roundtrip_1000_bit_exact(tmp_path):
    import random
    from satcost.features import FeatureVector, LabeledExample
    rng = random.Random(0)
    exs = [LabeledExample(f"i{i}", rng.random() < 0.5,
                          FeatureVector(tuple(rng.uniform(-1e6, 1e6) for _ in range(64))),
                          rng.uniform(0, 15), rng.randint(1, 10**6)) for i in range(1000)]
    dataset_write(tmp_path / "d.csv", exs, "fp")
    assert dataset_read(tmp_path / "d.csv").examples == exs


def test_wbe_variant_enters_fingerprint():
    from satcost.config import probe_settings
    from satcost.solver import SolverConfig as C
    settings = probe_settings(C(), WindowPolicy())
    assert settings["wbe"] == "wbe_plain"
    assert settings["window"]["wbe"] == "wbe_plain"
