"""Flow-derived invariants ``pred => forall i in I: g(RS(i))`` and their assertions."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional

from flowlock import flows as fl
from flowlock.explorer import Check, SDeadlock, reach
from flowlock.model import Array, Bool, Checker, Scalar, StaticTypeError, TypeEnv
from flowlock.parser import (AssertDecl, InvDecl, parse_expr, parse_invset, print_expr,
                             print_invset)
from flowlock.syntax import (And, BoolLit, Eq, Name, Not, designator_root, disj,
                             iter_designators)

INDEX_VAR = "i"


class InvSetError(ValueError):
    pass


@dataclass(frozen=True)
class Invariant:
    name: str
    pred: object
    index: object = BoolLit(True)
    target: Optional[tuple] = None   # explicit rule names; None = all flow rules of i


@dataclass(frozen=True)
class Assertion:
    name: str
    invariant: str
    pred: object
    index: object


@dataclass
class InvSet:
    invariants: list = field(default_factory=list)
    assertions: list = field(default_factory=list)

    def __getitem__(self, name):
        for inv in self.invariants:
            if inv.name == name:
                return inv
        raise KeyError(name)

    def names(self):
        return [i.name for i in self.invariants]

    def text(self):
        decls = [InvDecl(i.name, i.pred, i.index, i.target) for i in self.invariants]
        return print_invset(decls, [AssertDecl(a.name, a.invariant) for a in self.assertions])

    def without(self, name):
        return InvSet([i for i in self.invariants if i.name != name],
                      [a for a in self.assertions if a.invariant != name])


def make_assertion(inv):
    return Assertion(f"{inv.name}_nonempty", inv.name, inv.pred, inv.index)


def load_invset(text, protocol=None):
    """Parse an invariant file; with ``protocol`` the expressions are also scope-checked."""
    decls, adecls = parse_invset(text)
    invs = [Invariant(d.name, d.pred, d.index, d.target) for d in decls]
    by_name = {i.name: i for i in invs}
    asserts = [make_assertion(by_name[a.invariant]) for a in adecls]
    out = InvSet(invs, asserts)
    if protocol is not None:
        validate_invset(out, protocol)
    return out


def validate_invset(invset, protocol, tenv=None):
    from flowlock.model import classify_locality
    tenv = tenv or TypeEnv(protocol)
    ck = Checker(tenv)
    locality = classify_locality(protocol, tenv)
    rules = {r.name for r in protocol.rules}
    for inv in invset.invariants:
        try:
            ck.boolean(inv.pred, {})
            ck.boolean(inv.index, {INDEX_VAR: tenv.agent})
        except StaticTypeError as exc:
            raise InvSetError(f"{inv.name}: {exc.message}") from None
        for d in iter_designators(inv.pred):
            if locality.get(designator_root(d)) == "local":
                raise InvSetError(f"{inv.name}: pred reads agent-local {designator_root(d)}; "
                                  "use the index set for per-agent conditions")
        for r in inv.target or ():
            if r not in rules:
                raise InvSetError(f"{inv.name}: unknown target rule {r}")
    return invset


# -- checking ----------------------------------------------------------------

def _agent_param(model):
    return ((INDEX_VAR, model.agent.name),)


def _pred(model, expr, params=()):
    cache = model.__dict__.setdefault("_pred_cache", {})
    key = (expr, params)
    if key not in cache:
        cache[key] = model.compile_predicate(expr, params)
    return cache[key]


def check_invariant(model, state, inv, flows=None, agents=None):
    """(holds, i_f): i_f is the least agent in I with g(RS(i_f)) false."""
    if not _pred(model, inv.pred)(state):
        return True, None
    idx = _pred(model, inv.index, _agent_param(model))
    for a in agents or model.agent_ids():
        if idx(state, (a,)) and not fl.g_enabled(model, state, fl.rule_set(model, a, flows, inv.target)):
            return False, a
    return True, None


def check_assertion(model, state, a, agents=None):
    if not _pred(model, a.pred)(state):
        return True
    idx = _pred(model, a.index, _agent_param(model))
    return any(idx(state, (v,)) for v in agents or model.agent_ids())


@dataclass
class InvariantCheck(Check):
    inv: Invariant
    flows: list = None
    agents: tuple = None
    kind: str = "invariant"

    @property
    def name(self):
        return self.inv.name

    def bind(self, model):
        pred = _pred(model, self.inv.pred)
        idx = _pred(model, self.inv.index, _agent_param(model))
        guards = model.compiled.guards
        table = []
        for a in self.agents or model.agent_ids():
            rs = fl.rule_set(model, a, self.flows, self.inv.target)
            table.append((a, (a,), [guards[ri.index] for ri in rs.instances]))

        def f(s):
            if not pred(s):
                return None
            for a, key, gs in table:
                if idx(s, key) and not any(g(s) for g in gs):
                    return a
            return None
        return f


@dataclass
class AssertionCheck(Check):
    assertion: Assertion
    agents: tuple = None
    kind: str = "assertion"

    @property
    def name(self):
        return self.assertion.name

    def bind(self, model):
        pred = _pred(model, self.assertion.pred)
        idx = _pred(model, self.assertion.index, _agent_param(model))
        keys = [(a,) for a in self.agents or model.agent_ids()]

        def f(s):
            if pred(s) and not any(idx(s, k) for k in keys):
                return True
            return None
        return f


@dataclass
class CoverageCheck(Check):
    """Some invariant's pred holds (the partition covers the state)."""
    preds: tuple
    kind: str = "coverage"

    @property
    def name(self):
        return "partition-coverage"

    def bind(self, model):
        f = _pred(model, disj(self.preds))
        return lambda s: None if f(s) else True


def suite(invset, flows=None, assertions=True):
    out = [InvariantCheck(i, flows) for i in invset.invariants]
    if assertions:
        out += [AssertionCheck(a) for a in invset.assertions]
    return out


def check_partition_coverage(model, invset, **opts):
    report = reach(model, [CoverageCheck(tuple(i.pred for i in invset.invariants))], **opts)
    return report.results["partition-coverage"]


@dataclass
class OracleReport:
    verdict: str
    invariants_pass: bool
    sdeadlock_free: bool
    results: dict

    def to_json(self):
        return {"verdict": self.verdict, "invariants_pass": self.invariants_pass,
                "sdeadlock_free": self.sdeadlock_free,
                "checks": {k: v.verdict for k, v in self.results.items()}}


def theorem_oracle(model, invset, flows=None, **opts):
    """Invariants and assertions passing must imply s-deadlock freedom."""
    checks = suite(invset, flows) + [SDeadlock()]
    report = reach(model, checks, **opts)
    res = report.results
    inv_ok = all(res[c.name].passed for c in checks[:-1])
    sd_ok = res["s-deadlock"].passed
    verdict = "INCONSISTENT" if inv_ok and not sd_ok else "CONSISTENT"
    return OracleReport(verdict, inv_ok, sd_ok, res)


# -- split -----------------------------------------------------------------

def _simplify_and(a, b):
    if a == BoolLit(True):
        return b
    if b == BoolLit(True):
        return a
    return And(a, b)


def _negate(e):
    return e.operand if isinstance(e, Not) else Not(e)


@dataclass(frozen=True)
class SplitRequest:
    target: str
    conf: object
    ptr: Optional[str] = None       # pointer variable name
    member: Optional[object] = None  # membership predicate over i


def split_invariant(inv, req, names=None):
    """(inv1, inv2, assert1, assert2) per the conf/ptr case split."""
    if (req.ptr is None) == (req.member is None):
        raise ValueError("give exactly one of ptr or member")
    n1, n2 = names or (f"{inv.name}.1", f"{inv.name}.2")
    inv1 = Invariant(n1, _simplify_and(inv.pred, _negate(req.conf)), inv.index, inv.target)
    index2 = Eq(Name(INDEX_VAR), Name(req.ptr)) if req.ptr is not None else req.member
    inv2 = Invariant(n2, _simplify_and(inv.pred, req.conf), index2, inv.target)
    return inv1, inv2, make_assertion(inv1), make_assertion(inv2)


def split_in_set(invset, req, protocol=None, names=None):
    """Replace ``req.target`` by its two halves (in place of the original)."""
    inv = invset[req.target]
    if protocol is not None:
        tenv = TypeEnv(protocol)
        ck = Checker(tenv)
        try:
            ck.boolean(req.conf, {})
            if req.member is not None:
                ck.boolean(req.member, {INDEX_VAR: tenv.agent})
            if req.ptr is not None:
                t = tenv.vars.get(req.ptr)
                if not (isinstance(t, Scalar) and t == tenv.agent):
                    raise StaticTypeError(f"{req.ptr} is not a pointer to an agent")
        except StaticTypeError as exc:
            raise InvSetError(f"split of {inv.name}: {exc.message}") from None
    inv1, inv2, a1, a2 = split_invariant(inv, req, names)
    invs = []
    for i in invset.invariants:
        invs.extend([inv1, inv2] if i.name == inv.name else [i])
    asserts = [a for a in invset.assertions if a.invariant != inv.name] + [a1, a2]
    out = InvSet(invs, asserts)
    if protocol is not None:
        validate_invset(out, protocol)
    return out


# -- diagnostics ---------------------------------------------------------------

@dataclass
class DiagnosisReport:
    invariant: str
    failing_agent: Optional[int]
    blocked: list
    false_atoms: list
    enabled_agents: list
    witness_candidates: list
    case1_mismatch: list = field(default_factory=list)

    def to_json(self):
        return {
            "invariant": self.invariant,
            "failing_agent": self.failing_agent,
            "blocked": self.blocked,
            "false_atoms": self.false_atoms,
            "enabled_agents": self.enabled_agents,
            "witness_candidates": self.witness_candidates,
            "case1_mismatch": self.case1_mismatch,
        }

    def dumps(self):
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    def format(self):
        lines = [f"DIAGNOSIS {self.invariant}: failing agent i_f = {self.failing_agent}"]
        for b in self.blocked:
            lines.append(f"  blocked {b['flow']}({b['agent']}) at {b['rule']}: "
                         f"false atoms [{', '.join(b['false_atoms'])}]")
        lines.append(f"  enabled agents: {self.enabled_agents}")
        for w in self.witness_candidates:
            lines.append(f"  witness candidate: {w['kind']} {w['name']}"
                         + (f" = {w['value']}" if "value" in w else f" at {w.get('agents')}"))
        for m in self.case1_mismatch:
            lines.append(f"  flow/protocol mismatch: {m}")
        return "\n".join(lines)


def derive_diagnostics(model, trace, flows, inv):
    """Advisory report for a counterexample to ``inv`` (see DiagnosisReport)."""
    state = trace.final
    holds, i_f = check_invariant(model, state, inv, flows)
    rep = fl.replay_flows(trace, flows)
    blocked, atoms = [], []
    for inst, rule in fl.blocked_flows(model, state, rep.instances):
        if inst.agent != i_f:
            continue
        ri = model.instances_of(rule, inst.agent)[0]
        fa = fl.false_atoms(model, state, ri)
        blocked.append({"flow": inst.name, "agent": inst.agent, "instance": inst.serial,
                        "rule": rule, "fired": sorted(r for r, v in inst.fired.items() if v),
                        "false_atoms": fa})
        atoms.extend(a for a in fa if a not in atoms)
    enabled = [a for a in model.agent_ids()
               if fl.g_enabled(model, state, fl.rule_set(model, a, flows, inv.target))]
    witnesses = []
    for name, t in model.tenv.vars.items():
        if model.locality.get(name) == "local":
            continue
        if isinstance(t, Scalar) and model.agent is not None and t.name == model.agent.name:
            v = state[model.slot_by_path[name]]
            if v in enabled:
                witnesses.append({"kind": "pointer", "name": name, "value": v})
        elif isinstance(t, Array) and isinstance(t.elem, Bool) and model.agent is not None \
                and t.index.name == model.agent.name:
            hit = [a for a in enabled if model.lookup(state, f"{name}[{a}]") == "true"]
            if hit:
                witnesses.append({"kind": "member", "name": name, "agents": hit})
    mismatch = []
    if i_f is not None:
        covered = set(fl.flow_rule_names(flows))
        for ri in model.rule_instances:
            if ri.agent == i_f and ri.name not in covered and model.enabled(state, ri):
                mismatch.append(f"{ri.label()} enabled but in no flow")
    for ri, flag in zip(trace.steps, rep.flags):
        if flag == "uncovered":
            mismatch.append(f"{ri.label()} fired but in no flow")
    return DiagnosisReport(inv.name, i_f, blocked, atoms, enabled, witnesses, mismatch)


def parse_split_expr(text):
    return parse_expr(text)
