"""Independent reference implementations used only by the tests."""

import itertools
import math

import numpy as np


def truth_table_sat(num_vars, clauses):
    """Exhaustive enumeration of all 2**n assignments (vectorized, n <= 22)."""
    assert num_vars <= 22
    idx = np.arange(2 ** num_vars, dtype=np.int64)
    ok = np.ones(idx.shape, dtype=bool)
    for clause in clauses:
        sat = np.zeros(idx.shape, dtype=bool)
        for lit in clause:
            bit = (idx >> (abs(lit) - 1)) & 1
            sat |= bit.astype(bool) if lit > 0 else ~bit.astype(bool)
        ok &= sat
        if not ok.any():
            return False
    return bool(ok.any())


def backtrack_sat(num_vars, clauses):
    """Complete chronological enumeration over a fixed variable order.

    Branches x1, x2, ... in order and prunes a subtree as soon as some clause
    has every literal falsified, with unit clauses forced. Exact for any n.
    """
    clauses = [list(c) for c in clauses]
    if any(len(c) == 0 for c in clauses):
        return False

    def simplify(cls, lit):
        out = []
        for c in cls:
            if lit in c:
                continue
            if -lit in c:
                c = [x for x in c if x != -lit]
                if not c:
                    return None
            out.append(c)
        return out

    def rec(cls):
        while True:
            unit = next((c[0] for c in cls if len(c) == 1), None)
            if unit is None:
                break
            cls = simplify(cls, unit)
            if cls is None:
                return False
        if not cls:
            return True
        v = min(abs(x) for c in cls for x in c)
        for lit in (v, -v):
            nxt = simplify(cls, lit)
            if nxt is not None and rec(nxt):
                return True
        return False

    return rec(clauses)


def wbe_batch(depths):
    """log of sum 2^-d (2^(d+1) - 1) / sum 2^-d, recomputed from scratch with mpmath."""
    import mpmath
    mpmath.mp.dps = 50
    num = mpmath.fsum(mpmath.mpf(2) ** (-d) * (mpmath.mpf(2) ** (d + 1) - 1) for d in depths)
    den = mpmath.fsum(mpmath.mpf(2) ** (-d) for d in depths)
    return float(mpmath.log(num / den))


def two_pass_mean_sd(xs):
    n = len(xs)
    m = sum(xs) / n
    return m, math.sqrt(sum((x - m) ** 2 for x in xs) / n)


def pearson_two_pass(a, b):
    n = len(a)
    ma, mb = sum(a) / n, sum(b) / n
    sab = sum((x - ma) * (y - mb) for x, y in zip(a, b))
    saa = sum((x - ma) ** 2 for x in a)
    sbb = sum((y - mb) ** 2 for y in b)
    return sab / math.sqrt(saa * sbb)


def ridge_closed_form(X, y, lam):
    """Intercept-unpenalized ridge via explicit inverse on centered data."""
    X = np.asarray(X, float)
    y = np.asarray(y, float)
    xm, ym = X.mean(0), y.mean()
    Xc, yc = X - xm, y - ym
    w = np.linalg.inv(Xc.T @ Xc + lam * np.eye(X.shape[1])) @ Xc.T @ yc
    return ym - xm @ w, w
