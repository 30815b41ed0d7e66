"""Explicit-state breadth-first reachability with on-the-fly checks.

The visited table maps each packed state to the edge that first reached it,
so every failing check comes with a shortest trace; within a BFS layer the
frontier is kept in discovery order, which makes the reported trace the
lexicographically least one (rule order, then indices) among the shortest.
"""
from __future__ import annotations

import itertools
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from flowlock.model import GroundModel, UndefinedRead

DEFAULT_BUDGET = 4 * 1024 ** 3
# rough cost of one visited entry (dict slot, packed int key, parent edge)
BYTES_PER_STATE = 160
PARALLEL_MIN_LAYER = 2048
MAX_SYMMETRY_SIZE = 5


class OutOfBudget(Exception):
    def __init__(self, visited, transitions, budget):
        self.visited = visited
        self.transitions = transitions
        self.budget = budget
        super().__init__(f"memory budget of {budget} bytes exceeded after "
                         f"{visited} states / {transitions} transitions")


class ExplorationError(Exception):
    """A modeling error (e.g. an undefined read) hit during exploration."""

    def __init__(self, cause, trace):
        self.cause = cause
        self.trace = trace
        super().__init__(f"{cause} (after {len(trace.steps)} steps)")


# -- checks ----------------------------------------------------------------

class Check:
    """A per-state property; ``bind`` returns ``f(state) -> None | detail``.

    Checks are plain picklable objects so worker processes can rebuild them.
    """
    name = "check"
    kind = "check"

    def bind(self, model):
        raise NotImplementedError


@dataclass
class DeclaredInvariant(Check):
    decl: object
    kind: str = "invariant"

    @property
    def name(self):
        return self.decl.name

    def bind(self, model):
        f = model.compile_predicate(self.decl.expr)
        return lambda s: None if f(s) else False


@dataclass
class ExprCheck(Check):
    """A named boolean expression over globals and bound agents."""
    label: str
    expr: object
    kind: str = "expr"

    @property
    def name(self):
        return self.label

    def bind(self, model):
        f = model.compile_predicate(self.expr)
        return lambda s: None if f(s) else False


@dataclass
class SDeadlock(Check):
    kind: str = "sdeadlock"

    @property
    def name(self):
        return "s-deadlock"

    def bind(self, model):
        en = model.compiled.enabled_any
        return lambda s: None if en(s) else True


def declared_checks(protocol):
    return [DeclaredInvariant(d) for d in protocol.invariants]


# -- traces ----------------------------------------------------------------

@dataclass
class Trace:
    initial: tuple
    steps: list            # RuleInstance objects
    final: tuple
    check: str = ""

    def __len__(self):
        return len(self.steps)

    def states(self, model):
        """Replay; raises ValueError if a guard is false or the final state differs."""
        out = [self.initial]
        s = self.initial
        for ri in self.steps:
            if not model.enabled(s, ri):
                raise ValueError(f"guard of {ri.label()} false during replay")
            s = model.fire(s, ri)
            out.append(s)
        if s != self.final:
            raise ValueError("replay does not reproduce the final state")
        return out

    def labels(self):
        return [ri.label() for ri in self.steps]

    def format(self, model, footer=()):
        lines = [f"TRACE {self.check} len={len(self.steps)}"]
        for n, ri in enumerate(self.steps, 1):
            lines.append(f"  {n}: {ri.label()}")
        lines.append("  STATE:")
        lines.append(model.format_state(self.final, "    "))
        lines.extend(footer)
        return "\n".join(lines)

    def to_json(self, model):
        return {
            "check": self.check,
            "len": len(self.steps),
            "steps": [{"rule": ri.name, "params": list(ri.params)} for ri in self.steps],
            "state": model.state_dict(self.final),
        }


@dataclass
class CheckResult:
    name: str
    verdict: str = "pass"
    trace: Optional[Trace] = None
    detail: object = None
    witnesses: list = field(default_factory=list)

    @property
    def passed(self):
        return self.verdict == "pass"


@dataclass
class ReachReport:
    visited: int
    transitions: int
    results: dict
    wall_time: float
    layers: list
    complete: bool = True

    @property
    def passed(self):
        return all(r.passed for r in self.results.values())

    def __getitem__(self, name):
        return self.results[name]

    def to_json(self, model, timing=True):
        out = {
            "schema": 1,
            "visited": self.visited,
            "transitions": self.transitions,
            "complete": self.complete,
            "checks": {
                name: {
                    "verdict": r.verdict,
                    "detail": r.detail if isinstance(r.detail, (int, str, bool, type(None))) else str(r.detail),
                    "trace": r.trace.to_json(model) if r.trace else None,
                }
                for name, r in self.results.items()
            },
        }
        if timing:
            out["wall_time"] = round(self.wall_time, 3)
        return out

    def format(self, model, footers=None):
        lines = [f"visited {self.visited} states, {self.transitions} transitions, "
                 f"depth {len(self.layers) - 1}, {self.wall_time:.2f}s"]
        for name, r in self.results.items():
            lines.append(f"{name}: {r.verdict.upper()}")
        for name, r in self.results.items():
            if r.trace is not None:
                extra = (footers or {}).get(name, ())
                lines.append(r.trace.format(model, extra))
        return "\n".join(lines)


# -- symmetry ----------------------------------------------------------------

class Symmetry:
    """Brute-force canonicalization over all permutations of every scalarset."""

    def __init__(self, model):
        scalars = {}
        for name, t in model.tenv.named.items():
            if type(t).__name__ == "Scalar":
                scalars[name] = t
        for s in scalars.values():
            if s.size > MAX_SYMMETRY_SIZE:
                raise ValueError(f"symmetry reduction disabled for {s.name} of size {s.size} > {MAX_SYMMETRY_SIZE}")
        names = sorted(scalars)
        per = [list(itertools.permutations(range(1, scalars[n].size + 1))) for n in names]
        self.model = model
        funcs, self.perms = [], []
        for combo in itertools.product(*per):
            pmap = {n: {k + 1: v for k, v in enumerate(p)} for n, p in zip(names, combo)}
            self.perms.append(pmap)
            funcs.append(self._compile(model, pmap))
        self.funcs = funcs

    @staticmethod
    def _compile(model, pmap):
        where = {}
        for slot in model.slots:
            where[(slot.var, slot.path.split("[")[0], tuple(slot.coords), _fields(slot.path))] = slot.index
        terms = [None] * len(model.slots)
        tables = {}
        for slot in model.slots:
            coords = tuple((sc, pmap[sc][k]) for sc, k in slot.coords)
            target = where[(slot.var, slot.path.split("[")[0], coords, _fields(slot.path))]
            t = slot.type
            vmap = pmap.get(t.name) if type(t).__name__ == "Scalar" else None
            if vmap and any(a != b for a, b in vmap.items()):
                size = t.size + (1 if t.other else 0)
                table = tuple([0] + [vmap.get(v, v) for v in range(1, size + 1)])
                key = f"M{len(tables)}"
                tables[key] = table
                terms[target] = f"{key}[s[{slot.index}]]"
            else:
                terms[target] = f"s[{slot.index}]"
        src = "lambda s: (" + ", ".join(terms) + ("," if len(terms) == 1 else "") + ")"
        return eval(src, tables)

    def images(self, state):
        return [f(state) for f in self.funcs]

    def canonicalize(self, state):
        return min(f(state) for f in self.funcs)

    def apply(self, index, state):
        return self.funcs[index](state)


def _fields(path):
    # the non-index part of a slot path, e.g. Cache[].State
    out, depth = [], 0
    for ch in path:
        if ch == "[":
            depth += 1
            out.append("[")
        elif ch == "]":
            depth -= 1
            out.append("]")
        elif depth == 0:
            out.append(ch)
    return "".join(out)


def canonicalize(model, state):
    return _symmetry(model).canonicalize(state)


def _symmetry(model):
    sym = getattr(model, "_symmetry", None)
    if sym is None:
        sym = Symmetry(model)
        model._symmetry = sym
    return sym


# -- exploration -------------------------------------------------------------

def successors(model, state):
    """Enabled rule instances with their successor states, in rule order."""
    c = model.compiled
    return [(model.rule_instances[k], t) for k, t in c.successors(state)]


_WORKER = {}


def _worker_init(protocol, n, checks, symmetry):
    model = GroundModel(protocol, n)
    _WORKER["model"] = model
    _WORKER["fns"] = [c.bind(model) for c in checks]
    _WORKER["sym"] = _symmetry(model) if symmetry else None


def _expand_chunk(states, model=None, fns=None, sym=None):
    if model is None:
        model, fns, sym = _WORKER["model"], _WORKER["fns"], _WORKER["sym"]
    succ = model.compiled.successors
    out = []
    for s in states:
        fails = []
        error = None
        try:
            for k, f in enumerate(fns):
                d = f(s)
                if d is not None:
                    fails.append((k, d))
            nexts = succ(s)
        except UndefinedRead as exc:
            error = exc
            nexts = []
        if sym is not None:
            nexts = [(k, sym.canonicalize(t)) for k, t in nexts]
        out.append((fails, nexts, error))
    return out


def reach(model, checks=(), symmetry=False, fail_fast=False, budget=DEFAULT_BUDGET,
          workers=1, max_witnesses=1):
    """Breadth-first search from all initial states, evaluating ``checks`` on every state.

    Returns a ReachReport whose failing results carry shortest traces.
    ``max_witnesses`` > 1 also collects further failing states of the first
    failing layer (each with its own shortest trace).
    """
    t0 = time.perf_counter()
    checks = list(checks)
    names = [c.name for c in checks]
    if len(set(names)) != len(names):
        raise ValueError("duplicate check names")
    fns = [c.bind(model) for c in checks]
    sym = _symmetry(model) if symmetry else None
    pack = model.compiled.pack
    results = {c.name: CheckResult(c.name) for c in checks}
    fail_layer = {}
    visited = {}
    frontier = []
    for s in model.initial_states():
        if sym is not None:
            s = sym.canonicalize(s)
        p = pack(s)
        if p not in visited:
            visited[p] = None
            frontier.append(s)
    transitions = 0
    layers = []
    pool = None
    if workers is None:
        workers = os.cpu_count() or 1
    try:
        depth = 0
        while frontier:
            layers.append(len(frontier))
            if workers > 1 and len(frontier) >= PARALLEL_MIN_LAYER:
                if pool is None:
                    pool = ProcessPoolExecutor(workers, initializer=_worker_init,
                                               initargs=(model.protocol, model.n, checks, symmetry))
                size = -(-len(frontier) // (workers * 4))
                chunks = [frontier[k:k + size] for k in range(0, len(frontier), size)]
                expanded = [r for part in pool.map(_expand_chunk, chunks) for r in part]
            else:
                expanded = _expand_chunk(frontier, model, fns, sym)
            nxt = []
            stop = False
            for s, (fails, nexts, error) in zip(frontier, expanded):
                if error is not None:
                    raise ExplorationError(error, _trace(model, visited, s, sym, ""))
                for k, detail in fails:
                    r = results[names[k]]
                    if r.verdict == "pass":
                        r.verdict = "fail"
                        r.detail = detail
                        r.trace = _trace(model, visited, s, sym, r.name)
                        if sym is not None:
                            r.detail = fns[k](r.trace.final)
                        r.witnesses.append(r.trace)
                        fail_layer[r.name] = depth
                        if fail_fast:
                            stop = True
                    elif fail_layer[r.name] == depth and len(r.witnesses) < max_witnesses:
                        r.witnesses.append(_trace(model, visited, s, sym, r.name))
                if stop:
                    break
                p_s = pack(s)
                for k, t in nexts:
                    transitions += 1
                    p = pack(t)
                    if p not in visited:
                        visited[p] = (p_s, k)
                        nxt.append(t)
                if len(visited) * BYTES_PER_STATE > budget:
                    raise OutOfBudget(len(visited), transitions, budget)
            if stop:
                break
            if checks and all(r.verdict == "fail" for r in results.values()) and max_witnesses <= 1:
                break
            frontier = nxt
            depth += 1
    finally:
        if pool is not None:
            pool.shutdown()
    return ReachReport(len(visited), transitions, results, time.perf_counter() - t0, layers,
                       complete=not frontier)


def reachable_states(model, symmetry=False, budget=DEFAULT_BUDGET):
    """The full reachable set (canonical representatives under ``symmetry``)."""
    sym = _symmetry(model) if symmetry else None
    succ = model.compiled.successors
    seen = set()
    frontier = []
    for s in model.initial_states():
        if sym is not None:
            s = sym.canonicalize(s)
        if s not in seen:
            seen.add(s)
            frontier.append(s)
    while frontier:
        nxt = []
        for s in frontier:
            for _, t in succ(s):
                if sym is not None:
                    t = sym.canonicalize(t)
                if t not in seen:
                    seen.add(t)
                    nxt.append(t)
        if len(seen) * BYTES_PER_STATE > budget:
            raise OutOfBudget(len(seen), 0, budget)
        frontier = nxt
    return seen


def _trace(model, visited, state, sym, check):
    pack = model.compiled.pack
    edges = []
    p = pack(state)
    chain = [state]
    while visited[p] is not None:
        parent, k = visited[p]
        edges.append(k)
        p = parent
        chain.append(model.unpack(p))
    chain.reverse()
    edges.reverse()
    if sym is None:
        steps = [model.rule_instances[k] for k in edges]
        return Trace(chain[0], steps, state, check)
    # canonical chain: re-derive a concrete run that follows it
    s = chain[0]
    steps = []
    for target in chain[1:]:
        for ri, t in successors(model, s):
            if sym.canonicalize(t) == target:
                steps.append(ri)
                s = t
                break
        else:
            raise RuntimeError("symmetry replay failed")
    return Trace(chain[0], steps, s, check)


def check_sdeadlock(model, **opts):
    """Search for a reachable state with no enabled rule instance."""
    report = reach(model, [SDeadlock()], **opts)
    return report.results["s-deadlock"]


def report_json(report, model, timing=True):
    return json.dumps(report.to_json(model, timing=timing), indent=2, sort_keys=True)
