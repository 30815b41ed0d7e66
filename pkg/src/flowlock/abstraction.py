"""Data-type reduction to c concrete agents plus a state-less ``Other`` agent.

The reduction is syntactic.  For every agent ruleset ``rl(i)`` the abstract
protocol keeps the ruleset itself (now ranging over the c concrete ids) and
adds a 0-parameter rule ``rl_o`` for the environment agent: ``i`` becomes
``Other``, literals that read a dropped slot (a local of Other, or an entry
of a global agent-indexed array at Other) are replaced by a constant chosen
by their polarity so the guard can only get weaker, and writes to dropped
slots are discarded.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

from flowlock import flows as fl
from flowlock.explorer import DeclaredInvariant, ExprCheck, reach, reachable_states
from flowlock.invariants import INDEX_VAR, InvariantCheck
from flowlock.model import (Array, Checker, GroundModel, Scalar, TypeEnv, UNDEF,
                            _own_agent_param, classify_locality)
from flowlock.parser import print_expr
from flowlock.syntax import (And, Assign, BoolLit, Eq, Exists, Field, For, Forall, If,
                             Implies, Index, Name, Neq, Not, NullLit, Or, OtherLit,
                             ProtocolDef, Rule, ScalarsetType, SetAssign, SetEmpty,
                             Undefine, conj, designator_root, disj, substitute)


class AbstractionError(ValueError):
    pass


class _Ctx:
    def __init__(self, protocol, flip=False):
        self.tenv = TypeEnv(protocol)
        if self.tenv.agent is None:
            raise AbstractionError("protocol has no agent scalarset")
        self.agent = self.tenv.agent.name
        self.locality = classify_locality(protocol, self.tenv)
        self.checker = Checker(self.tenv)
        self.flip = flip
        # agent-indexed arrays: entries at Other do not exist in the abstraction
        self.agent_arrays = {n for n, t in self.tenv.vars.items()
                             if isinstance(t, Array) and t.index.name == self.agent}

    @property
    def unknown(self):
        # the constant standing for a literal over a dropped slot (positive polarity)
        return BoolLit(not self.flip)

    def dropped(self, e):
        """Does ``e`` read or designate a slot indexed by Other?"""
        if isinstance(e, Index):
            if isinstance(e.index, OtherLit) and designator_root(e.base) in self.agent_arrays:
                return True
            return self.dropped(e.base) or self.dropped(e.index)
        if isinstance(e, Field):
            return self.dropped(e.base)
        if isinstance(e, (Eq, Neq, And, Or, Implies)):
            return self.dropped(e.left) or self.dropped(e.right)
        if isinstance(e, Not):
            return self.dropped(e.operand)
        if isinstance(e, SetEmpty):
            return self.dropped(e.target)
        if isinstance(e, (Forall, Exists)):
            return self.dropped(e.body)
        return False

    def is_agent_set(self, target):
        return isinstance(target, Name) and target.id in self.agent_arrays


# -- expressions -----------------------------------------------------------------

def nnf(e, neg=False):
    """Negation normal form; negated equalities become disequalities."""
    if isinstance(e, Not):
        return nnf(e.operand, not neg)
    if isinstance(e, Implies):
        return nnf(Or(Not(e.left), e.right), neg)
    if isinstance(e, And):
        a, b = nnf(e.left, neg), nnf(e.right, neg)
        return Or(a, b) if neg else And(a, b)
    if isinstance(e, Or):
        a, b = nnf(e.left, neg), nnf(e.right, neg)
        return And(a, b) if neg else Or(a, b)
    if isinstance(e, Forall):
        body = nnf(e.body, neg)
        return Exists(e.var, e.type, body) if neg else Forall(e.var, e.type, body)
    if isinstance(e, Exists):
        body = nnf(e.body, neg)
        return Forall(e.var, e.type, body) if neg else Exists(e.var, e.type, body)
    if isinstance(e, BoolLit):
        return BoolLit(e.value != neg)
    if isinstance(e, Eq):
        return Neq(e.left, e.right) if neg else e
    if isinstance(e, Neq):
        return Eq(e.left, e.right) if neg else e
    return Not(e) if neg else e


def simplify(e):
    """Constant folding (and Other/Other, NULL/Other comparisons)."""
    if isinstance(e, (And, Or)):
        a, b = simplify(e.left), simplify(e.right)
        unit, zero = (True, False) if isinstance(e, And) else (False, True)
        if a == BoolLit(zero) or b == BoolLit(zero):
            return BoolLit(zero)
        if a == BoolLit(unit):
            return b
        if b == BoolLit(unit):
            return a
        return type(e)(a, b)
    if isinstance(e, Implies):
        a, b = simplify(e.left), simplify(e.right)
        if a == BoolLit(False) or b == BoolLit(True):
            return BoolLit(True)
        if a == BoolLit(True):
            return b
        if b == BoolLit(False):
            return simplify(Not(a))
        return Implies(a, b)
    if isinstance(e, Not):
        a = simplify(e.operand)
        if isinstance(a, BoolLit):
            return BoolLit(not a.value)
        if isinstance(a, Not):
            return a.operand
        return Not(a)
    if isinstance(e, (Eq, Neq)):
        kinds = {type(e.left), type(e.right)}
        if kinds <= {OtherLit, NullLit}:
            same = type(e.left) is type(e.right)
            return BoolLit(same == isinstance(e, Eq))
        return e
    if isinstance(e, (Forall, Exists)):
        body = simplify(e.body)
        if isinstance(body, BoolLit):
            return body
        return type(e)(e.var, e.type, body)
    return e


def _rewrite(e, ctx, pol=True):
    """Replace literals over dropped slots by constants and expand agent quantifiers.

    ``pol`` is the negation parity (True = even).  Agent quantifiers keep
    their concrete range and get the Other instance as an extra
    conjunct/disjunct, rewritten by the same rule.
    """
    if isinstance(e, Not):
        return Not(_rewrite(e.operand, ctx, not pol))
    if isinstance(e, Implies):
        return Implies(_rewrite(e.left, ctx, not pol), _rewrite(e.right, ctx, pol))
    if isinstance(e, (And, Or)):
        return type(e)(_rewrite(e.left, ctx, pol), _rewrite(e.right, ctx, pol))
    if isinstance(e, (Forall, Exists)):
        body = _rewrite(e.body, ctx, pol)
        q = type(e)(e.var, e.type, body)
        if e.type != ctx.agent:
            return q
        o = _rewrite(substitute(e.body, {e.var: OtherLit()}), ctx, pol)
        return And(q, o) if isinstance(e, Forall) else Or(q, o)
    if isinstance(e, SetEmpty) and ctx.is_agent_set(e.target):
        # S = {} is forall j. S[j] = false; the Other entry is unknown
        const = ctx.unknown if pol else BoolLit(not ctx.unknown.value)
        return And(e, const)
    if ctx.dropped(e):
        return ctx.unknown if pol else BoolLit(not ctx.unknown.value)
    return e


def abstract_guard(e, ctx, to_nnf=True):
    if to_nnf:
        e = nnf(e)
    return simplify(_rewrite(e, ctx))


# -- statements -------------------------------------------------------------

def _fresh(taken, tname):
    base = tname[0].lower()
    name, k = base, 1
    while name in taken:
        name = f"{base}{k}"
        k += 1
    taken.add(name)
    return name


def _abstract_stmts(body, ctx, scope, fresh, other_copy):
    """Rewrite an action; ``fresh`` collects new data parameters (var, type)."""
    out = []
    for s in body:
        if isinstance(s, Assign):
            if ctx.dropped(s.target):
                continue
            value = s.value
            if ctx.dropped(value):
                t = ctx.checker.type_of(_orig(value), dict(scope, **{_OTHER_VAR: ctx.tenv.agent}))
                if not isinstance(t, Scalar) or t.name == ctx.agent:
                    raise AbstractionError(f"assignment {print_expr(s.target)} := {print_expr(s.value)} "
                                           "reads a dropped slot of non-data type")
                var = _fresh(fresh["taken"], t.name)
                fresh["params"].append((var, t.name))
                value = Name(var)
            out.append(Assign(s.target, value))
        elif isinstance(s, SetAssign):
            if ctx.dropped(s.target):
                continue
            elem = s.elem
            if isinstance(elem, OtherLit):
                elem = None   # the Other entry is not represented
            out.append(SetAssign(s.target, elem))
        elif isinstance(s, Undefine):
            if ctx.dropped(s.target):
                continue
            t = ctx.checker.type_of(s.target, scope)
            if other_copy and isinstance(t, Scalar) and t.name == ctx.agent:
                out.append(Assign(s.target, NullLit()))
            else:
                out.append(s)
        elif isinstance(s, For):
            inner = dict(scope)
            inner[s.var] = ctx.tenv.scalar(s.type)
            loop = _abstract_stmts(s.body, ctx, inner, fresh, other_copy)
            if loop:
                out.append(For(s.var, s.type, tuple(loop)))
            if s.type == ctx.agent:
                extra = _abstract_stmts(tuple(substitute(x, {s.var: OtherLit()}) for x in s.body),
                                        ctx, scope, fresh, other_copy)
                out.extend(extra)
        elif isinstance(s, If):
            then = _abstract_stmts(s.then, ctx, scope, fresh, other_copy)
            orelse = _abstract_stmts(s.orelse, ctx, scope, fresh, other_copy)
            if ctx.dropped(s.cond):
                if then != orelse:
                    raise AbstractionError(f"branch condition {print_expr(s.cond)} reads a dropped slot "
                                           "and its branches differ")
                out.extend(then)
            else:
                cond = simplify(s.cond)
                if cond == BoolLit(True):
                    out.extend(then)
                elif cond == BoolLit(False):
                    out.extend(orelse)
                elif then or orelse:
                    out.append(If(cond, tuple(then), tuple(orelse)))
        else:
            raise AbstractionError(f"unsupported statement {s!r}")
    return out


_OTHER_VAR = "__other__"


def _orig(e):
    """Undo the Other substitution for typing (Other stands at an agent index)."""
    if isinstance(e, OtherLit):
        return Name(_OTHER_VAR)
    if isinstance(e, Index):
        return Index(_orig(e.base), _orig(e.index))
    if isinstance(e, Field):
        return Field(_orig(e.base), e.name)
    return e


# -- protocol reduction ------------------------------------------------------------

def data_type_reduce(protocol, c, flip_polarity=False, elide=True):
    """The abstract protocol with agents 1..c and the environment agent Other."""
    if c is None or c < 1:
        raise AbstractionError(f"need at least one concrete agent, got c={c}")
    ctx = _Ctx(protocol, flip_polarity)
    types = []
    for name, t in protocol.types:
        if name == ctx.agent:
            t = ScalarsetType(c, other=True)
        types.append((name, t))
    rules = []
    others = []
    for r in protocol.rules:
        own = _own_agent_param(r, ctx.tenv)
        scope = {v: ctx.tenv.scalar(t) for v, t in r.params}
        guard = abstract_guard(r.guard, ctx, to_nnf=False)
        body = tuple(_abstract_stmts(r.body, ctx, scope, {"taken": set(), "params": []}, False))
        rules.append(replace(r, guard=guard if guard != simplify(r.guard) else r.guard,
                             body=body if body != tuple(r.body) else r.body))
        if own is None:
            continue
        sub = {own: OtherLit()}
        params = [(v, t) for v, t in r.params if v != own]
        fresh = {"taken": {v for v, _ in r.params} | _bound_names(r), "params": []}
        oguard = abstract_guard(substitute(r.guard, sub), ctx)
        obody = _abstract_stmts(tuple(substitute(s, sub) for s in r.body), ctx, scope, fresh, True)
        params += fresh["params"]
        if oguard == BoolLit(False):
            continue
        if elide and oguard == BoolLit(True) and not obody:
            continue
        others.append(Rule(f"{r.name}_o", tuple(params), oguard, tuple(obody)))
    # each Other copy follows its concrete ruleset
    merged = []
    for r in rules:
        merged.append(r)
        merged.extend(o for o in others if o.name == f"{r.name}_o")
    out = ProtocolDef(protocol.consts, tuple(types), protocol.vars, tuple(merged),
                      protocol.startstates, protocol.invariants)
    return out


def _bound_names(rule):
    names = set()

    def walk(e):
        if isinstance(e, (Forall, Exists)):
            names.add(e.var)
            walk(e.body)
        elif isinstance(e, (And, Or, Implies, Eq, Neq)):
            walk(e.left)
            walk(e.right)
        elif isinstance(e, Not):
            walk(e.operand)

    def walk_s(body):
        for s in body:
            if isinstance(s, For):
                names.add(s.var)
                walk_s(s.body)
            elif isinstance(s, If):
                walk(s.cond)
                walk_s(s.then)
                walk_s(s.orelse)

    walk(rule.guard)
    walk_s(rule.body)
    return names


# -- invariants -----------------------------------------------------------------

@dataclass
class AbstractCheck:
    name: str
    text: str
    check: object


def abstract_invariants(invset, c, flows=None, protocol=None):
    """Checks for the abstract model: invariants at agent 1, assertions over 1..c and Other."""
    out = []
    for inv in invset.invariants:
        free = _free_names(inv.index) - {INDEX_VAR}
        if protocol is not None:
            tenv = TypeEnv(protocol)
            free -= set(tenv.vars) | set(tenv.members)
        if free:
            raise AbstractionError(f"{inv.name}: index set mentions {sorted(free)}; only single-index "
                                   "invariants reduce by symmetry, add per-index reductions by hand")
        idx1 = substitute(inv.index, {INDEX_VAR: Name("1")})
        text = f"{print_expr(inv.pred)} -> (({print_expr(idx1)}) -> g(RS(1)))"
        out.append(AbstractCheck(inv.name, text, InvariantCheck(inv, flows, agents=(1,))))
    for a in invset.assertions:
        out.append(abstract_assertion(a, c, protocol))
    return out


def abstract_assertion(a, c, protocol):
    ctx = _Ctx(protocol) if protocol is not None else None
    agent = ctx.agent if ctx else "NODE"
    concrete = Exists(INDEX_VAR, agent, a.index)
    o_part = substitute(a.index, {INDEX_VAR: OtherLit()})
    if ctx is not None:
        o_part = abstract_guard(o_part, ctx)
    expr = Implies(a.pred, simplify(Or(concrete, o_part)))
    shown = disj([substitute(a.index, {INDEX_VAR: Name(str(k))}) for k in range(1, c + 1)] + [o_part])
    text = f"{print_expr(a.pred)} -> ({print_expr(simplify(shown))})"
    return AbstractCheck(a.name, text, ExprCheck(a.name, expr))


def _free_names(e, bound=frozenset()):
    if isinstance(e, Name):
        return set() if e.id in bound else {e.id}
    if isinstance(e, Index):
        return _free_names(e.base, bound) | _free_names(e.index, bound)
    if isinstance(e, Field):
        return _free_names(e.base, bound)
    if isinstance(e, (Eq, Neq, And, Or, Implies)):
        return _free_names(e.left, bound) | _free_names(e.right, bound)
    if isinstance(e, Not):
        return _free_names(e.operand, bound)
    if isinstance(e, SetEmpty):
        return _free_names(e.target, bound)
    if isinstance(e, (Forall, Exists)):
        return _free_names(e.body, bound | {e.var})
    return set()


def lemma_checks(lemmas, agent):
    return [ExprCheck(l.name, Forall(l.var, agent, l.body)) for l in lemmas]


# -- strengthening and the CMP step ----------------------------------------------

def strengthen(protocol, lemmas):
    """Conjoin every lemma, instantiated at the rule's agent, into each agent rule's guard."""
    if not lemmas:
        return protocol
    tenv = TypeEnv(protocol)
    rules = []
    for r in protocol.rules:
        own = _own_agent_param(r, tenv)
        if own is None:
            rules.append(r)
            continue
        guard = r.guard
        for lem in lemmas:
            guard = And(guard, substitute(lem.body, {lem.var: Name(own)}))
        rules.append(replace(r, guard=guard))
    return replace(protocol, rules=tuple(rules))


@dataclass
class CmpResult:
    verdict: str              # "pass" | "fail"
    report: object
    abstract: ProtocolDef
    model: object
    checks: list
    failed: list

    @property
    def passed(self):
        return self.verdict == "pass"

    def trace(self):
        for name in self.failed:
            t = self.report.results[name].trace
            if t is not None:
                return t
        return None

    def other_steps(self):
        """Step numbers (1-based) fired by the environment agent in the first failing trace."""
        t = self.trace()
        return [] if t is None else [k for k, ri in enumerate(t.steps, 1) if ri.name.endswith("_o")]


def cmp_iterate(protocol, invset, lemmas=(), c=2, flows=None, declared=None, **opts):
    """One pass of the CMP loop: strengthen, reduce, check on the abstract model.

    ``declared`` selects declared invariants of the protocol to include (None = none).
    """
    lemmas = list(lemmas)
    abstract = data_type_reduce(strengthen(protocol, lemmas), c)
    model = GroundModel(abstract)
    checks = [a.check for a in abstract_invariants(invset, c, flows, protocol)]
    names = set(declared or ())
    unknown = names - {d.name for d in protocol.invariants}
    if unknown:
        raise KeyError(f"no declared invariant {sorted(unknown)}")
    checks += [DeclaredInvariant(d) for d in abstract.invariants if d.name in names]
    checks += lemma_checks(lemmas, model.agent.name)
    report = reach(model, checks, **opts)
    failed = [n for n, r in report.results.items() if not r.passed]
    return CmpResult("fail" if failed else "pass", report, abstract, model, checks, failed)


# -- containment --------------------------------------------------------------------

def projection(concrete, abstract_model):
    """Map concrete states onto abstract slots (agent pointers beyond c become Other)."""
    c = abstract_model.n
    other = c + 1
    index = []
    for slot in abstract_model.slots:
        if slot.path not in concrete.slot_by_path:
            raise AbstractionError(f"abstract slot {slot.path} has no concrete counterpart")
        pointer = abstract_model.nullable[slot.index]
        index.append((concrete.slot_by_path[slot.path], pointer))

    def project(state):
        return tuple(other if ptr and state[k] > c else state[k] for k, ptr in index)
    return project


@dataclass
class ContainmentResult:
    holds: bool
    concrete_states: int
    projected_states: int
    abstract_states: int
    missing: list

    def __bool__(self):
        return self.holds


def containment_check(protocol, n, c, flip_polarity=False, budget=None, limit=5, method="full"):
    """Is the projection of the size-n reachable set inside the abstract reachable set?

    ``method="full"`` computes both reachable sets and compares them.
    ``method="step"`` avoids enumerating the abstract model: it checks that
    projected initial states are abstract initial states and that every
    concrete transition projects to an abstract transition or a stutter,
    which implies containment by induction on path length (the converse
    need not hold, so a step failure is only a candidate violation).
    """
    if n < c:
        raise ValueError("containment needs n >= c")
    opts = {} if budget is None else {"budget": budget}
    concrete = GroundModel(protocol, n)
    abstract = GroundModel(data_type_reduce(protocol, c, flip_polarity=flip_polarity))
    reach_c = reachable_states(concrete, **opts)
    proj = projection(concrete, abstract)
    projected = {proj(s) for s in reach_c}
    if method == "full":
        reach_a = reachable_states(abstract, **opts)
        missing = sorted(projected - reach_a)
        return ContainmentResult(not missing, len(reach_c), len(projected), len(reach_a),
                                 [abstract.state_dict(s) for s in missing[:limit]])
    if method != "step":
        raise ValueError(f"unknown containment method {method!r}")
    init_a = set(abstract.initial_states())
    missing = sorted({proj(s) for s in concrete.initial_states()} - init_a)
    succ_c, succ_a = concrete.compiled.successors, abstract.compiled.successors
    cache = {}
    for s in reach_c:
        ps = proj(s)
        for _, t in succ_c(s):
            pt = proj(t)
            if pt == ps:
                continue
            nxt = cache.get(ps)
            if nxt is None:
                nxt = cache[ps] = {u for _, u in succ_a(ps)}
            if pt not in nxt:
                missing.append(pt)
    missing = sorted(set(missing))
    return ContainmentResult(not missing, len(reach_c), len(projected), -1,
                             [abstract.state_dict(s) for s in missing[:limit]])
