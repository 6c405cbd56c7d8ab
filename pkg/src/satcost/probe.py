"""Observation windows over the conflict stream, and the weighted backtrack estimator.

The estimator tracks, over the multiset D of branch lengths seen so far,

    sum_d 2^-d (2^(d+1) - 1) / sum_d 2^-d

with both sums kept as natural logs and updated by a max-shifted
log-sum-exp, so depths far beyond float range are fine. Branch length is
the decision level at the conflict ("wbe_plain").
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .cnf import CnfFormula
from .solver import ConflictEvent, Observer

WBE_VARIANT = "wbe_plain"

_LN2 = math.log(2.0)

NOT_THIS_RESTART = None


def _logaddexp(a: float, b: float) -> float:
    if a == -math.inf:
        return b
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


class WbeState:
    __slots__ = ("log_numerator", "log_denominator", "branch_count")

    def __init__(self):
        self.log_numerator = -math.inf
        self.log_denominator = -math.inf
        self.branch_count = 0

    def record(self, d: int) -> "WbeState":
        if d < 0:
            raise ValueError("branch length must be >= 0")
        log_prob = -d * _LN2
        # prob(d) * (2^(d+1) - 1) == 2 - 2^-d
        log_term = math.log(2.0 - math.exp(log_prob))
        self.log_numerator = _logaddexp(self.log_numerator, log_term)
        self.log_denominator = _logaddexp(self.log_denominator, log_prob)
        self.branch_count += 1
        return self

    def log_estimate(self) -> float:
        if self.branch_count == 0:
            raise ValueError("no branches recorded")
        # the ratio is >= 1 mathematically; clamp rounding noise
        return max(self.log_numerator - self.log_denominator, 0.0)

    def estimate(self) -> float:
        return math.exp(self.log_estimate())


def wbe_record_branch(state: WbeState, d: int) -> WbeState:
    return state.record(d)


def wbe_estimate(state: WbeState) -> tuple[float, float]:
    """(estimate, natural log of estimate)."""
    lg = state.log_estimate()
    return math.exp(lg), lg


class RunningStats:
    """Welford's one-pass mean/variance plus min, max and last value.

    SD is the population SD (divides by n).
    """

    __slots__ = ("n", "mean", "m2", "min", "max", "last")

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0
        self.min = math.inf
        self.max = -math.inf
        self.last = math.nan

    def push(self, x: float) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)
        if x < self.min:
            self.min = x
        if x > self.max:
            self.max = x
        self.last = x

    @property
    def sd(self) -> float:
        return math.sqrt(self.m2 / self.n) if self.n else 0.0

    def summary(self) -> dict[str, float]:
        # rounding can push the mean a hair outside [min, max] on constant series
        mean = min(max(self.mean, self.min), self.max)
        return {"min": self.min, "max": self.max, "mean": mean,
                "sd": self.sd, "last": self.last}


class WindowMode(enum.Enum):
    NO_RESTARTS = "no_restarts"
    WITH_RESTARTS = "with_restarts"


@dataclass(frozen=True)
class WindowPolicy:
    mode: WindowMode = WindowMode.NO_RESTARTS
    fixed_wait: int = 500
    fixed_size: int = 1000
    wait_floor: int = 500
    wait_frac: float = 0.02
    size_floor: int = 1000
    size_frac: float = 0.01

    def __post_init__(self):
        if min(self.fixed_wait, self.fixed_size, self.wait_floor, self.size_floor) < 0:
            raise ValueError("window counts must be non-negative")
        if self.fixed_size < 1 or self.size_floor < 1:
            raise ValueError("window size must be positive")

    def fingerprint_fields(self) -> dict:
        return {"mode": self.mode.value, "fixed_wait": self.fixed_wait,
                "fixed_size": self.fixed_size, "wait_floor": self.wait_floor,
                "wait_frac": self.wait_frac, "size_floor": self.size_floor,
                "size_frac": self.size_frac, "wbe": WBE_VARIANT}


def window_schedule(policy: WindowPolicy, restart_limit: int | None = None):
    """(wait, size) in conflicts, or NOT_THIS_RESTART when the window does
    not fit inside a restart of ``restart_limit`` conflicts.

    Fractional thresholds are rounded up.
    """
    if policy.mode is WindowMode.NO_RESTARTS:
        return policy.fixed_wait, policy.fixed_size
    if restart_limit is None or restart_limit < 1:
        raise ValueError("restart mode needs a positive restart limit")
    wait = max(policy.wait_floor, math.ceil(policy.wait_frac * restart_limit))
    size = max(policy.size_floor, math.ceil(policy.size_frac * restart_limit))
    if wait + size > restart_limit:
        return NOT_THIS_RESTART
    return wait, size


# series tracked inside a window
SERIES = (
    "cls_per_var", "var_per_cls", "frac_binary", "frac_ternary", "avg_clause_size",
    "trail_depth", "decision_depth", "backjump_size",
    "learnt_size", "conflict_size", "abb", "aab",
    "aab_over_abb", "abb_over_aab", "log_wbe",
)


def init_stats(formula: CnfFormula) -> dict[str, float]:
    n = formula.num_vars
    m = formula.num_clauses
    if m:
        binary = sum(1 for c in formula.clauses if len(c) == 2) / m
        ternary = sum(1 for c in formula.clauses if len(c) == 3) / m
        avg = sum(len(c) for c in formula.clauses) / m
    else:
        binary = ternary = avg = 0.0
    return {
        "var": float(n), "cls": float(m),
        "cls_per_var": m / n if n else 0.0,
        "var_per_cls": n / m if m else 0.0,
        "frac_binary": binary, "frac_ternary": ternary, "avg_clause_size": avg,
    }


@dataclass
class WindowSnapshot:
    stats: dict[str, dict[str, float]]
    event_count: int
    restart_index: int
    ordinal: int  # 1-based count of windows closed in this run
    close_conflict: int  # global conflict index at which the window closed
    init: dict[str, float]
    flags: frozenset[str] = field(default_factory=frozenset)


class _Window:
    def __init__(self, size: int, restart_index: int):
        self.size = size
        self.restart_index = restart_index
        self.series = {name: RunningStats() for name in SERIES}
        self.count = 0
        self.abb_sum = 0.0
        self.aab_sum = 0.0
        self.flags: set[str] = set()

    @property
    def closed(self) -> bool:
        return self.count >= self.size


def window_snapshot(window: _Window, ordinal: int, close_conflict: int,
                    init: dict[str, float]) -> WindowSnapshot:
    if not window.closed:
        raise ValueError("window not yet closed")
    return WindowSnapshot(
        stats={k: s.summary() for k, s in window.series.items()},
        event_count=window.count, restart_index=window.restart_index,
        ordinal=ordinal, close_conflict=close_conflict, init=dict(init),
        flags=frozenset(window.flags))


class Probe(Observer):
    """Observer that opens windows per ``policy`` and collects snapshots.

    No-restart mode opens one window after ``fixed_wait`` conflicts. Restart
    mode opens one window in every restart large enough to contain it. The
    estimator state restarts with every restart (each run is a new tree).
    """

    def __init__(self, formula: CnfFormula, policy: WindowPolicy, max_windows: int | None = None):
        self.policy = policy
        self.num_vars = formula.num_vars
        self.init = init_stats(formula)
        self.max_windows = max_windows
        self.snapshots: list[WindowSnapshot] = []
        self.wbe = WbeState()
        self.ops = 0  # primitive statistic updates, for cost accounting
        self._window: _Window | None = None
        self._open_at = None  # restart-relative conflict count opening the window
        self._size = 0
        self._restart = 0
        self._run_conflicts = 0

    @property
    def done(self) -> bool:
        return self.max_windows is not None and len(self.snapshots) >= self.max_windows

    def on_restart(self, restart_index, limit):
        # a still-open window is abandoned; cannot happen in restart mode
        self._window = None
        self._restart = restart_index
        self._run_conflicts = 0
        self.wbe = WbeState()
        self._open_at = None
        if self.done:
            return
        if self.policy.mode is WindowMode.NO_RESTARTS:
            if restart_index == 1:
                self._open_at, self._size = window_schedule(self.policy)
            return
        if limit is None:
            raise ValueError("restart-mode probe attached to a solver without restarts")
        sched = window_schedule(self.policy, limit)
        if sched is not NOT_THIS_RESTART:
            self._open_at, self._size = sched

    def on_conflict(self, ev: ConflictEvent) -> None:
        self._run_conflicts += 1
        self.wbe.record(ev.decision_level_at_conflict)
        w = self._window
        if w is None:
            if self._open_at is None or self._run_conflicts <= self._open_at:
                return
            w = self._window = _Window(self._size, self._restart)
            self._open_at = None
        self._push(w, ev)
        if w.closed:
            self.snapshots.append(window_snapshot(
                w, len(self.snapshots) + 1, ev.conflict_index, self.init))
            self._window = None

    def _push(self, w: _Window, ev: ConflictEvent) -> None:
        s = w.series
        n = self.num_vars
        m = ev.current_num_clauses
        s["cls_per_var"].push(m / n)
        if m:
            s["var_per_cls"].push(n / m)
            s["frac_binary"].push(ev.live_binary / m)
            s["frac_ternary"].push(ev.live_ternary / m)
            s["avg_clause_size"].push(ev.live_literals / m)
        else:
            w.flags.add("zero_clauses")
            for k in ("var_per_cls", "frac_binary", "frac_ternary", "avg_clause_size"):
                s[k].push(0.0)
        s["trail_depth"].push(ev.trail_size_at_conflict)
        s["decision_depth"].push(ev.decision_level_at_conflict)
        s["backjump_size"].push(ev.decision_level_at_conflict - ev.backjump_target_level)
        s["learnt_size"].push(ev.learnt_clause_size)
        s["conflict_size"].push(ev.conflict_clause_size)
        abb = ev.trail_size_at_conflict / n
        aab = ev.trail_size_after_backjump / n
        s["abb"].push(abb)
        s["aab"].push(aab)
        w.count += 1
        w.abb_sum += abb
        w.aab_sum += aab
        # running means share the count, so the ratio of sums is the ratio of means
        if w.abb_sum > 0:
            s["aab_over_abb"].push(w.aab_sum / w.abb_sum)
        else:
            w.flags.add("zero_abb_mean")
            s["aab_over_abb"].push(0.0)
        if w.aab_sum > 0:
            s["abb_over_aab"].push(w.abb_sum / w.aab_sum)
        else:
            w.flags.add("zero_aab_mean")
            s["abb_over_aab"].push(0.0)
        s["log_wbe"].push(self.wbe.log_estimate())
        self.ops += len(SERIES) + 1
