"""CDCL solver with a per-conflict event stream.

Two-watched-literal propagation, first-UIP learning with local
minimization, non-chronological backjumping, VSIDS with phase saving,
geometric restarts and activity-based learnt clause reduction.

Literals are encoded internally as ``2*v`` (positive) and ``2*v + 1``
(negative); ``lit ^ 1`` negates. Reason clauses keep their implied
literal at index 0.
"""

from __future__ import annotations

import csv
import enum
import heapq
import math
import random
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .cnf import CnfFormula


class Verdict(enum.Enum):
    SAT = "SAT"
    UNSAT = "UNSAT"
    BUDGET_EXHAUSTED = "BUDGET_EXHAUSTED"


@dataclass(frozen=True)
class SolverConfig:
    restart_base: int = 100
    restart_factor: float = 1.5
    restarts_enabled: bool = True
    conflict_budget: int = 1_000_000
    var_decay: float = 0.95
    clause_decay: float = 0.999
    seed: int = 0

    def __post_init__(self):
        if self.restart_factor <= 1:
            raise ValueError("restart_factor must be > 1")
        if self.restart_base < 1:
            raise ValueError("restart_base must be >= 1")
        if self.conflict_budget < 1:
            raise ValueError("conflict_budget must be >= 1")
        if not (0 < self.var_decay < 1 and 0 < self.clause_decay < 1):
            raise ValueError("decay factors must lie in (0, 1)")


class ConflictEvent(NamedTuple):
    conflict_index: int
    decision_level_at_conflict: int
    trail_size_at_conflict: int
    backjump_target_level: int
    trail_size_after_backjump: int
    learnt_clause_size: int
    conflict_clause_size: int
    current_num_clauses: int
    restart_index: int
    # live clause database composition, after this conflict's learnt clause
    live_binary: int
    live_ternary: int
    live_literals: int


# column order of the event-trace CSV
EVENT_COLUMNS = ConflictEvent._fields


@dataclass
class SolveResult:
    verdict: Verdict
    model: list[bool] | None
    total_conflicts: int
    restarts_used: int


class Observer:
    """Event sink. Methods are called synchronously on the solver thread."""

    def on_restart(self, restart_index: int, limit: int | None) -> None:
        pass

    def on_conflict(self, event: ConflictEvent) -> None:
        pass


def restart_schedule(config: SolverConfig, k: int) -> int:
    """Conflict limit of the k-th run (1-based): floor(base * factor**(k-1))."""
    if k < 1:
        raise ValueError("restart index is 1-based")
    return math.floor(config.restart_base * config.restart_factor ** (k - 1))


def decision_level_depth(event: ConflictEvent) -> int:
    return event.decision_level_at_conflict


def trail_depth(event: ConflictEvent) -> int:
    return event.trail_size_at_conflict


class EventTraceWriter(Observer):
    """Dumps one CSV row per conflict, columns in ``EVENT_COLUMNS`` order."""

    def __init__(self, fh):
        self._w = csv.writer(fh, lineterminator="\n")
        self._w.writerow(EVENT_COLUMNS)

    def on_conflict(self, event):
        self._w.writerow(event)


_RESCALE_LIMIT = 1e100


class _Solver:
    def __init__(self, formula: CnfFormula, config: SolverConfig, observers):
        self.formula = formula
        self.config = config
        self.observers = list(observers)
        n = formula.num_vars
        self.n = n
        self.val = [0] * (2 * n + 2)  # per literal: 1 true, -1 false, 0 unassigned
        self.level = [0] * (n + 1)
        self.reason: list[list[int] | None] = [None] * (n + 1)
        self.polarity = [1] * (n + 1)  # saved phase, 1 = negative
        self.seen = [False] * (n + 1)
        self.watches: list[list[list[int]]] = [[] for _ in range(2 * n + 2)]
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0

        rng = random.Random(config.seed)
        # tiny seeded noise breaks branching ties reproducibly
        self.activity = [0.0] + [rng.random() * 1e-5 for _ in range(n)]
        self.var_inc = 1.0
        self.heap = [(-self.activity[v], v) for v in range(1, n + 1)]
        heapq.heapify(self.heap)

        self.learnts: list[list[int]] = []
        self.cla_act: dict[int, float] = {}
        self.cla_inc = 1.0
        self.learnt_units = 0

        self.n_binary = sum(1 for c in formula.clauses if len(c) == 2)
        self.n_ternary = sum(1 for c in formula.clauses if len(c) == 3)
        self.n_literals = sum(len(c) for c in formula.clauses)

        self.max_learnts = max(formula.num_clauses / 3.0, 100.0)
        self.adjust_confl = 100.0
        self.adjust_cnt = 100

        self.conflicts = 0
        self.restart_index = 0
        self.ok = not formula.has_empty_clause

        for clause in formula.clauses:
            if not self.ok:
                break
            self._add_original(clause)

    @staticmethod
    def _enc(lit: int) -> int:
        return 2 * lit if lit > 0 else -2 * lit + 1

    def _add_original(self, clause: Sequence[int]) -> None:
        lits = [self._enc(x) for x in clause]
        if len(lits) == 1:
            p = lits[0]
            if self.val[p] == -1:
                self.ok = False
            elif self.val[p] == 0:
                self._assign(p, None)
            return
        self.watches[lits[0]].append(lits)
        self.watches[lits[1]].append(lits)

    def _assign(self, p: int, reason) -> None:
        v = p >> 1
        self.val[p] = 1
        self.val[p ^ 1] = -1
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail.append(p)

    def _propagate(self):
        """Unit propagation to fixpoint; returns a falsified clause or None."""
        val = self.val
        trail = self.trail
        watches = self.watches
        level = self.level
        reason = self.reason
        dl = len(self.trail_lim)
        qhead = self.qhead
        confl = None
        while qhead < len(trail):
            false_lit = trail[qhead] ^ 1
            qhead += 1
            ws = watches[false_lit]
            i = j = 0
            n_ws = len(ws)
            while i < n_ws:
                c = ws[i]
                i += 1
                if c[0] == false_lit:
                    c[0] = c[1]
                    c[1] = false_lit
                first = c[0]
                if val[first] == 1:
                    ws[j] = c
                    j += 1
                    continue
                for k in range(2, len(c)):
                    lk = c[k]
                    if val[lk] != -1:
                        c[1] = lk
                        c[k] = false_lit
                        watches[lk].append(c)
                        break
                else:
                    ws[j] = c
                    j += 1
                    if val[first] == -1:
                        confl = c
                        while i < n_ws:
                            ws[j] = ws[i]
                            j += 1
                            i += 1
                    else:
                        v = first >> 1
                        val[first] = 1
                        val[first ^ 1] = -1
                        level[v] = dl
                        reason[v] = c
                        trail.append(first)
            del ws[j:]
            if confl is not None:
                break
        self.qhead = qhead if confl is None else len(trail)
        return confl

    def _bump_var(self, v: int) -> None:
        act = self.activity
        act[v] += self.var_inc
        if act[v] > _RESCALE_LIMIT:
            for u in range(1, self.n + 1):
                act[u] *= 1e-100
            self.var_inc *= 1e-100
            self._rebuild_heap()
        elif self.val[2 * v] == 0:
            heapq.heappush(self.heap, (-act[v], v))

    def _rebuild_heap(self) -> None:
        act = self.activity
        val = self.val
        self.heap = [(-act[v], v) for v in range(1, self.n + 1) if val[2 * v] == 0]
        heapq.heapify(self.heap)

    def _bump_clause(self, c) -> None:
        key = id(c)
        a = self.cla_act.get(key)
        if a is None:
            return
        a += self.cla_inc
        self.cla_act[key] = a
        if a > 1e20:
            for k in self.cla_act:
                self.cla_act[k] *= 1e-20
            self.cla_inc *= 1e-20

    def _analyze(self, confl):
        """First-UIP learning. Returns (learnt clause, backjump level)."""
        seen = self.seen
        level = self.level
        reason = self.reason
        trail = self.trail
        dl = len(self.trail_lim)
        learnt = [0]
        path = 0
        p = -1
        idx = len(trail) - 1
        c = confl
        while True:
            self._bump_clause(c)
            for q in (c if p < 0 else c[1:]):
                v = q >> 1
                if not seen[v] and level[v] > 0:
                    self._bump_var(v)
                    seen[v] = True
                    if level[v] >= dl:
                        path += 1
                    else:
                        learnt.append(q)
            while not seen[trail[idx] >> 1]:
                idx -= 1
            p = trail[idx]
            idx -= 1
            v = p >> 1
            c = reason[v]
            seen[v] = False
            path -= 1
            if path == 0:
                break
        learnt[0] = p ^ 1

        # local minimization: drop literals implied by other learnt literals
        out = [learnt[0]]
        for q in learnt[1:]:
            r = reason[q >> 1]
            if r is None:
                out.append(q)
                continue
            for x in r[1:]:
                u = x >> 1
                if not seen[u] and level[u] > 0:
                    out.append(q)
                    break
        for q in learnt[1:]:
            seen[q >> 1] = False

        if len(out) == 1:
            return out, 0
        best = 1
        for k in range(2, len(out)):
            if level[out[k] >> 1] > level[out[best] >> 1]:
                best = k
        out[1], out[best] = out[best], out[1]
        return out, level[out[1] >> 1]

    def _cancel_until(self, lvl: int) -> None:
        if len(self.trail_lim) <= lvl:
            return
        trail = self.trail
        val = self.val
        act = self.activity
        heap = self.heap
        polarity = self.polarity
        reason = self.reason
        stop = self.trail_lim[lvl]
        for k in range(len(trail) - 1, stop - 1, -1):
            p = trail[k]
            v = p >> 1
            val[p] = 0
            val[p ^ 1] = 0
            reason[v] = None
            polarity[v] = p & 1
            heapq.heappush(heap, (-act[v], v))
        del trail[stop:]
        del self.trail_lim[lvl:]
        self.qhead = stop
        if len(heap) > 8 * self.n + 64:
            self._rebuild_heap()

    def _pick_branch(self) -> int:
        heap = self.heap
        val = self.val
        act = self.activity
        while heap:
            neg_a, v = heapq.heappop(heap)
            if val[2 * v] == 0 and -neg_a == act[v]:
                return 2 * v + self.polarity[v]
        return -1

    def _locked(self, c) -> bool:
        return self.reason[c[0] >> 1] is c and self.val[c[0]] == 1

    def _reduce_db(self) -> None:
        acts = self.cla_act
        extra = self.cla_inc / max(len(self.learnts), 1)
        order = sorted(self.learnts, key=lambda c: (len(c) > 2, acts[id(c)]))
        half = len(order) // 2
        keep, dead = [], set()
        for i, c in enumerate(order):
            if len(c) > 2 and not self._locked(c) and (i < half or acts[id(c)] < extra):
                dead.add(id(c))
                del acts[id(c)]
                self._count(c, -1)
            else:
                keep.append(c)
        if not dead:
            return
        for ws in self.watches:
            if ws:
                ws[:] = [c for c in ws if id(c) not in dead]
        # keep learnts in creation order for deterministic sorting ties
        self.learnts = [c for c in self.learnts if id(c) not in dead]

    def _count(self, c, sign: int) -> None:
        k = len(c)
        if k == 2:
            self.n_binary += sign
        elif k == 3:
            self.n_ternary += sign
        self.n_literals += sign * k

    def _emit_restart(self, limit) -> None:
        for ob in self.observers:
            ob.on_restart(self.restart_index, limit)

    def run(self) -> SolveResult:
        cfg = self.config
        if not self.ok:
            return SolveResult(Verdict.UNSAT, None, 0, 0)
        self.restart_index = 1
        limit = restart_schedule(cfg, 1) if cfg.restarts_enabled else None
        self._emit_restart(limit)
        run_conflicts = 0
        observers = self.observers
        while True:
            dl = len(self.trail_lim)
            trail_at = len(self.trail)
            confl = self._propagate()
            if confl is not None:
                self.conflicts += 1
                run_conflicts += 1
                trail_at = len(self.trail)
                if dl == 0:
                    ev = ConflictEvent(
                        self.conflicts, 0, trail_at, 0, trail_at, 0, len(confl),
                        self._num_clauses(), self.restart_index,
                        self.n_binary, self.n_ternary, self.n_literals)
                    for ob in observers:
                        ob.on_conflict(ev)
                    return SolveResult(Verdict.UNSAT, None, self.conflicts,
                                       self.restart_index - 1)
                learnt, bt = self._analyze(confl)
                self._cancel_until(bt)
                trail_after = len(self.trail)
                if len(learnt) == 1:
                    self._assign(learnt[0], None)
                    self.learnt_units += 1
                    self.n_literals += 1
                else:
                    self.watches[learnt[0]].append(learnt)
                    self.watches[learnt[1]].append(learnt)
                    self.learnts.append(learnt)
                    self.cla_act[id(learnt)] = self.cla_inc
                    self._count(learnt, 1)
                    self._assign(learnt[0], learnt)
                self.var_inc /= cfg.var_decay
                self.cla_inc /= cfg.clause_decay
                ev = ConflictEvent(
                    self.conflicts, dl, trail_at, bt, trail_after, len(learnt),
                    len(confl), self._num_clauses(), self.restart_index,
                    self.n_binary, self.n_ternary, self.n_literals)
                for ob in observers:
                    ob.on_conflict(ev)

                self.adjust_cnt -= 1
                if self.adjust_cnt == 0:
                    self.adjust_confl *= 1.5
                    self.adjust_cnt = int(self.adjust_confl)
                    self.max_learnts *= 1.1

                if self.conflicts >= cfg.conflict_budget:
                    return SolveResult(Verdict.BUDGET_EXHAUSTED, None,
                                       self.conflicts, self.restart_index - 1)
                if limit is not None and run_conflicts >= limit:
                    self._cancel_until(0)
                    self.restart_index += 1
                    run_conflicts = 0
                    limit = restart_schedule(cfg, self.restart_index)
                    self._emit_restart(limit)
            else:
                if len(self.learnts) - len(self.trail) >= self.max_learnts:
                    self._reduce_db()
                p = self._pick_branch()
                if p < 0:
                    model = [False] + [self.val[2 * v] == 1 for v in range(1, self.n + 1)]
                    if not check_model(self.formula, model):
                        raise RuntimeError("internal error: model fails verification")
                    return SolveResult(Verdict.SAT, model, self.conflicts,
                                       self.restart_index - 1)
                self.trail_lim.append(len(self.trail))
                self._assign(p, None)

    def _num_clauses(self) -> int:
        return self.formula.num_clauses + len(self.learnts) + self.learnt_units


def check_model(formula: CnfFormula, model: Sequence[bool]) -> bool:
    """``model[v]`` is the truth value of variable v (index 0 unused)."""
    for clause in formula.clauses:
        if not any(model[lit] if lit > 0 else not model[-lit] for lit in clause):
            return False
    return not formula.has_empty_clause


def solve(formula: CnfFormula, config: SolverConfig | None = None,
          observers: Sequence[Observer] = ()) -> SolveResult:
    return _Solver(formula, config or SolverConfig(), observers).run()
