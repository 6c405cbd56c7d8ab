"""DIMACS CNF reading/writing and a seeded uniform random 3-SAT generator."""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np

log = logging.getLogger(__name__)

RNG_NAME = "numpy.PCG64"


class DimacsError(ValueError):
    """Raised on malformed DIMACS input."""


@dataclass(frozen=True)
class CnfFormula:
    num_vars: int
    clauses: tuple[tuple[int, ...], ...]
    # set when the input contained an empty clause (trivially UNSAT)
    has_empty_clause: bool = False
    comments: tuple[str, ...] = field(default=(), compare=False)

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)


@dataclass(frozen=True)
class GeneratorSpec:
    num_vars: int
    ratio: float
    seed: int
    clause_width: int = 3

    def __post_init__(self):
        if self.ratio <= 0:
            raise ValueError("ratio must be positive")
        if self.clause_width != 3:
            raise ValueError("clause_width is fixed at 3")

    @property
    def num_clauses(self) -> int:
        return round_half_up(self.ratio * self.num_vars)


def round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def _canonical_clause(lits: Iterable[int]) -> tuple[int, ...] | None:
    """Drop duplicate literals keeping first occurrence; None for tautologies."""
    seen: dict[int, None] = {}
    for lit in lits:
        if -lit in seen:
            return None
        seen[lit] = None
    return tuple(seen)


def parse_dimacs(text: str | TextIO) -> CnfFormula:
    if isinstance(text, str):
        text = io.StringIO(text)
    num_vars = None
    declared = None
    clauses: list[tuple[int, ...]] = []
    comments: list[str] = []
    pending: list[int] = []
    has_empty = False
    tautologies = 0

    for lineno, raw in enumerate(text, 1):
        line = raw.strip()
        if not line:
            continue
        if line[0] == "c":
            comments.append(line[1:].strip())
            continue
        if line[0] == "%":
            # SATLIB trailer
            break
        if line[0] == "p":
            parts = line.split()
            if num_vars is not None:
                raise DimacsError(f"line {lineno}: duplicate header")
            if len(parts) != 4 or parts[1] != "cnf":
                raise DimacsError(f"line {lineno}: malformed header {line!r}")
            try:
                num_vars, declared = int(parts[2]), int(parts[3])
            except ValueError:
                raise DimacsError(f"line {lineno}: malformed header {line!r}") from None
            if num_vars < 0 or declared < 0:
                raise DimacsError(f"line {lineno}: negative counts in header")
            continue
        if num_vars is None:
            raise DimacsError(f"line {lineno}: clause before header")
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise DimacsError(f"line {lineno}: bad literal {tok!r}") from None
            if lit == 0:
                if not pending:
                    has_empty = True
                else:
                    clause = _canonical_clause(pending)
                    if clause is None:
                        tautologies += 1
                    else:
                        clauses.append(clause)
                pending = []
            else:
                if abs(lit) > num_vars:
                    raise DimacsError(
                        f"line {lineno}: literal {lit} out of range 1..{num_vars}")
                pending.append(lit)

    if num_vars is None:
        raise DimacsError("missing header")
    if pending:
        raise DimacsError("unterminated final clause")
    if tautologies:
        log.warning("dropped %d tautological clause(s)", tautologies)
    if has_empty:
        log.warning("formula contains an empty clause (trivially UNSAT)")
    n_read = len(clauses) + tautologies + int(has_empty)
    if n_read != declared:
        log.warning("header declares %d clauses, read %d", declared, n_read)
    return CnfFormula(num_vars, tuple(clauses), has_empty, tuple(comments))


def read_dimacs(path) -> CnfFormula:
    with open(path) as fh:
        return parse_dimacs(fh)


def serialize_dimacs(formula: CnfFormula, comments: Iterable[str] = ()) -> str:
    out = [f"c {c}" if c else "c" for c in comments]
    n = formula.num_clauses + int(formula.has_empty_clause)
    out.append(f"p cnf {formula.num_vars} {n}")
    out.extend(" ".join(map(str, c)) + " 0" for c in formula.clauses)
    if formula.has_empty_clause:
        out.append("0")
    return "\n".join(out) + "\n"


def write_dimacs(path, formula: CnfFormula, comments: Iterable[str] = ()) -> None:
    with open(path, "w") as fh:
        fh.write(serialize_dimacs(formula, comments))


def generate_random_3sat(spec: GeneratorSpec) -> CnfFormula:
    """Fixed-clause-length model: each clause draws 3 distinct variables
    uniformly, each negated with probability 1/2. Duplicate clauses allowed."""
    n = spec.num_vars
    if n < 3:
        raise ValueError("num_vars must be >= 3")
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    m = spec.num_clauses
    clauses = []
    for _ in range(m):
        vs = rng.choice(n, size=3, replace=False) + 1
        signs = rng.integers(0, 2, size=3)
        clauses.append(tuple(int(v) if s else -int(v) for v, s in zip(vs, signs)))
    return CnfFormula(n, tuple(clauses), comments=tuple(generator_comments(spec)))


def generator_comments(spec: GeneratorSpec) -> list[str]:
    return [
        f"generator random-3sat vars={spec.num_vars} ratio={spec.ratio!r} "
        f"seed={spec.seed} width={spec.clause_width}",
        f"rng {RNG_NAME} numpy={np.__version__}",
    ]
