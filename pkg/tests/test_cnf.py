import io
import logging

import pytest
from hypothesis import given, settings, strategies as st

from satcost.cnf import (CnfFormula, DimacsError, GeneratorSpec, generate_random_3sat,
                         generator_comments, parse_dimacs, read_dimacs, round_half_up,
                         serialize_dimacs, write_dimacs)


def test_parse_basic():
    f = parse_dimacs("c hello\np cnf 3 2\n1 -2 0\n2 3 0\n")
    assert f.num_vars == 3
    assert f.clauses == ((1, -2), (2, 3))
    assert f.num_clauses == 2
    assert not f.has_empty_clause


def test_parse_clause_spanning_lines_and_file_object():
    f = parse_dimacs(io.StringIO("p cnf 3 1\n1 2\n -3 0\n"))
    assert f.clauses == ((1, 2, -3),)


def test_duplicate_literals_collapse():
    f = parse_dimacs("p cnf 2 1\n1 1 2 0\n")
    assert f.clauses == ((1, 2),)


def test_tautology_dropped_with_warning(caplog):
    with caplog.at_level(logging.WARNING):
        f = parse_dimacs("p cnf 2 2\n1 -1 2 0\n2 0\n")
    assert f.clauses == ((2,),)
    assert "tautolog" in caplog.text


def test_empty_clause_flagged():
    f = parse_dimacs("p cnf 2 2\n0\n1 0\n")
    assert f.has_empty_clause


def test_count_mismatch_warns(caplog):
    with caplog.at_level(logging.WARNING):
        parse_dimacs("p cnf 2 3\n1 0\n")
    assert "declares 3" in caplog.text


@pytest.mark.parametrize("text", [
    "",
    "p cnf x 2\n1 0\n",
    "p dnf 2 1\n1 0\n",
    "1 2 0\n",
    "p cnf 2 1\n1 3 0\n",
    "p cnf 2 1\n1 2\n",
    "p cnf 2 1\n1 a 0\n",
])
def test_malformed_inputs_rejected(text):
    with pytest.raises(DimacsError):
        parse_dimacs(text)


def test_round_half_up():
    assert round_half_up(2.5) == 3
    assert round_half_up(639.0) == 639
    assert GeneratorSpec(150, 4.26, 0).num_clauses == 639
    assert GeneratorSpec(150, 4.5, 0).num_clauses == 675


def test_generator_shape_and_determinism():
    spec = GeneratorSpec(40, 4.26, 7)
    f = generate_random_3sat(spec)
    assert f.num_vars == 40 and f.num_clauses == spec.num_clauses
    for c in f.clauses:
        assert len(c) == 3
        assert len({abs(x) for x in c}) == 3
        assert all(1 <= abs(x) <= 40 for x in c)
    assert generate_random_3sat(spec) == f
    assert generate_random_3sat(GeneratorSpec(40, 4.26, 8)) != f


def test_generator_rejects_bad_specs():
    with pytest.raises(ValueError):
        GeneratorSpec(10, 0.0, 1)
    with pytest.raises(ValueError):
        generate_random_3sat(GeneratorSpec(2, 1.0, 1))


def test_comments_record_provenance():
    text = " ".join(generator_comments(GeneratorSpec(20, 3.0, 5)))
    assert "seed" in text and "PCG64" in text


@settings(max_examples=50, deadline=None)
@given(st.integers(3, 30), st.floats(0.5, 6.0), st.integers(0, 2**32))
def test_roundtrip(n, ratio, seed):
    f = generate_random_3sat(GeneratorSpec(n, ratio, seed))
    g = parse_dimacs(serialize_dimacs(f, ["x"]))
    assert (g.num_vars, g.clauses) == (f.num_vars, f.clauses)


def test_file_roundtrip(tmp_path):
    f = CnfFormula(3, ((1, -2), (3,)))
    path = tmp_path / "a.cnf"
    write_dimacs(path, f, ["made by a test"])
    g = read_dimacs(path)
    assert g.clauses == f.clauses
    assert path.read_text().startswith("c made by a test\np cnf 3 2\n")


def test_spec_parse_examples(caplog):
    f = parse_dimacs("p cnf 2 2\n1 -2 0\n2 0\n")
    assert (f.num_vars, f.clauses) == (2, ((1, -2), (2,)))
    with caplog.at_level(logging.WARNING):
        g = parse_dimacs("p cnf 1 1\n1 -1 0\n")
    assert g.clauses == () and "tautolog" in caplog.text


def test_spec_generator_examples():
    f = generate_random_3sat(GeneratorSpec(200, 4.5, 7))
    assert f.num_clauses == 900 and all(len(c) == 3 for c in f.clauses)
    g = generate_random_3sat(GeneratorSpec(3, 1.0, 1))
    assert g.num_clauses == 3
    assert all(sorted(abs(x) for x in c) == [1, 2, 3] for c in g.clauses)


def test_roundtrip_100_seeded():
    for seed in range(100):
        f = generate_random_3sat(GeneratorSpec(30, 4.26, seed))
        assert parse_dimacs(serialize_dimacs(f)).clauses == f.clauses
