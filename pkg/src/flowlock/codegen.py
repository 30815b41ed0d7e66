"""Compile a GroundModel's guards and actions into Python source.

Quantifiers and for-loops are unrolled at the instance size, so guards become
flat boolean expressions over the state tuple ``s`` and actions become
straight-line updates of a list copy ``t``.  Reads of slots that can hold
Undefined go through ``_u`` so that demanded undefined values still raise
:class:`~flowlock.model.UndefinedRead`, as in the interpreter.
"""
from __future__ import annotations

import itertools

from flowlock.model import (
    FALSE, TRUE, UNDEF, Array, Bool, EvalError, LEAF, UndefinedRead, width,
)
from flowlock.syntax import (
    And, Assign, BoolLit, Eq, Exists, Field, For, Forall, If, Implies, Index,
    Name, Neq, Not, NullLit, Or, OtherLit, SetAssign, SetEmpty, Undefine,
)


class _Dynamic(str):
    """A slot index only known at run time (a Python expression)."""


class Gen:
    def __init__(self, model, maybe_undef):
        self.m = model
        self.maybe_undef = maybe_undef

    # designators ----------------------------------------------------------
    def slot(self, d, env, src):
        m = self.m
        if isinstance(d, Name):
            return m.var_offset[d.id], m.tenv.vars[d.id]
        if isinstance(d, Field):
            base, bt = self.slot(d.base, env, src)
            off = 0
            for fname, ft in bt.fields:
                if fname == d.name:
                    break
                off += width(ft)
            else:
                raise EvalError(f"no field {d.name}")
            if isinstance(base, _Dynamic):
                return _Dynamic(f"({base} + {off})"), ft
            return base + off, ft
        if isinstance(d, Index):
            base, bt = self.slot(d.base, env, src)
            stride = width(bt.elem)
            k = self.const(d.index, env)
            if k is not None:
                if not 1 <= k <= bt.index.size:
                    raise EvalError(f"index {k} out of range in {d}")
                if isinstance(base, _Dynamic):
                    return _Dynamic(f"({base} + {(k - 1) * stride})"), bt.elem
                return base + (k - 1) * stride, bt.elem
            val = self.value(d.index, env, src)
            return _Dynamic(f"({base} + {stride} * (_ix({val}, {bt.index.size}) - 1))"), bt.elem
        raise EvalError(f"not a designator: {d!r}")

    def const(self, e, env):
        """Statically known value code of ``e``, or None."""
        if isinstance(e, BoolLit):
            return TRUE if e.value else FALSE
        if isinstance(e, NullLit):
            return UNDEF
        if isinstance(e, OtherLit):
            return self.m.agent.size + 1
        if isinstance(e, Name):
            if e.id in env:
                return env[e.id]
            if e.id in self.m.tenv.members and e.id not in self.m.tenv.vars:
                return self.m.tenv.members[e.id][1]
        return None

    def read(self, d, env, src):
        slot, t = self.slot(d, env, src)
        if not isinstance(t, LEAF):
            raise EvalError(f"{d} is not a scalar value")
        if isinstance(slot, _Dynamic):
            return f"_r({src}, {slot})"
        if slot in self.maybe_undef:
            return f"_u({src}[{slot}], {slot})"
        return f"{src}[{slot}]"

    def value(self, e, env, src):
        k = self.const(e, env)
        if k is not None:
            return str(k)
        if isinstance(e, (Name, Index, Field)):
            return self.read(e, env, src)
        b = self.cond(e, env, src)
        if b in ("True", "False"):
            return str(TRUE if b == "True" else FALSE)
        return f"({TRUE} if {b} else {FALSE})"

    # boolean expressions --------------------------------------------------
    def cond(self, e, env, src):
        if isinstance(e, BoolLit):
            return "True" if e.value else "False"
        if isinstance(e, (Eq, Neq)):
            lk, rk = self.const(e.left, env), self.const(e.right, env)
            eq = isinstance(e, Eq)
            if lk is not None and rk is not None:
                return str((lk == rk) == eq)
            op = "==" if eq else "!="
            return f"({self.value(e.left, env, src)} {op} {self.value(e.right, env, src)})"
        if isinstance(e, Not):
            inner = self.cond(e.operand, env, src)
            if inner in ("True", "False"):
                return "False" if inner == "True" else "True"
            return f"(not {inner})"
        if isinstance(e, And):
            return self._join("and", [self.cond(e.left, env, src), self.cond(e.right, env, src)])
        if isinstance(e, Or):
            return self._join("or", [self.cond(e.left, env, src), self.cond(e.right, env, src)])
        if isinstance(e, Implies):
            left = self.cond(Not(e.left), env, src)
            return self._join("or", [left, self.cond(e.right, env, src)])
        if isinstance(e, (Forall, Exists)):
            size = self.m.tenv.scalar(e.type).size
            parts = []
            for k in range(1, size + 1):
                inner = dict(env)
                inner[e.var] = k
                parts.append(self.cond(e.body, inner, src))
            return self._join("and" if isinstance(e, Forall) else "or", parts)
        if isinstance(e, SetEmpty):
            base, t = self.slot(e.target, env, src)
            parts = []
            for k in range(t.index.size):
                if isinstance(base, _Dynamic):
                    parts.append(f"(_r({src}, {base} + {k}) == {FALSE})")
                else:
                    slot = base + k
                    rd = f"_u({src}[{slot}], {slot})" if slot in self.maybe_undef else f"{src}[{slot}]"
                    parts.append(f"({rd} == {FALSE})")
            return self._join("and", parts)
        if isinstance(e, (Name, Index, Field)):
            return f"({self.value(e, env, src)} == {TRUE})"
        raise EvalError(f"cannot compile {e!r}")

    @staticmethod
    def _join(op, parts):
        neutral, absorbing = ("True", "False") if op == "and" else ("False", "True")
        kept = []
        for p in parts:
            if p == absorbing:
                # keep earlier operands: their evaluation may raise
                if not kept:
                    return absorbing
                kept.append(p)
                break
            if p != neutral:
                kept.append(p)
        if not kept:
            return neutral
        if len(kept) == 1:
            return kept[0]
        return "(" + f" {op} ".join(kept) + ")"

    # statements -----------------------------------------------------------
    def is_copy(self, e, env):
        if isinstance(e, (Index, Field)):
            return True
        return isinstance(e, Name) and e.id not in env and e.id in self.m.tenv.vars

    def stmts(self, body, env, indent, out):
        for s in body:
            if isinstance(s, Assign):
                slot, _ = self.slot(s.target, env, "t")
                if self.is_copy(s.value, env):
                    # a plain copy moves the value as is, Undefined included
                    src, _ = self.slot(s.value, env, "t")
                    rhs = f"t[{src}]"
                else:
                    rhs = self.value(s.value, env, "t")
                out.append(f"{indent}t[{slot}] = {rhs}")
            elif isinstance(s, SetAssign):
                base, at = self.slot(s.target, env, "t")
                if s.elem is None:
                    elem = None
                else:
                    elem = self.const(s.elem, env)
                    if elem is None:
                        out.append(f"{indent}_e = {self.value(s.elem, env, 't')}")
                for k in range(at.index.size):
                    idx = f"{base} + {k}" if isinstance(base, _Dynamic) else base + k
                    if s.elem is None:
                        rhs = FALSE
                    elif elem is not None:
                        rhs = TRUE if elem == k + 1 else FALSE
                    else:
                        rhs = f"({TRUE} if _e == {k + 1} else {FALSE})"
                    out.append(f"{indent}t[{idx}] = {rhs}")
            elif isinstance(s, Undefine):
                slot, t = self.slot(s.target, env, "t")
                for k in range(width(t)):
                    idx = f"{slot} + {k}" if isinstance(slot, _Dynamic) else slot + k
                    out.append(f"{indent}t[{idx}] = {UNDEF}")
            elif isinstance(s, For):
                for k in range(1, self.m.tenv.scalar(s.type).size + 1):
                    inner = dict(env)
                    inner[s.var] = k
                    self.stmts(s.body, inner, indent, out)
            elif isinstance(s, If):
                c = self.cond(s.cond, env, "t")
                out.append(f"{indent}if {c}:")
                n = len(out)
                self.stmts(s.then, env, indent + "    ", out)
                if len(out) == n:
                    out.append(f"{indent}    pass")
                if s.orelse:
                    out.append(f"{indent}else:")
                    n = len(out)
                    self.stmts(s.orelse, env, indent + "    ", out)
                    if len(out) == n:
                        out.append(f"{indent}    pass")
            else:
                raise EvalError(f"cannot compile statement {s!r}")


def _undefine_targets(model):
    """Slots an ``undefine`` may clear in some rule instance."""
    out = set()
    gen = Gen(model, set())

    def walk(body, env):
        for s in body:
            if isinstance(s, Undefine):
                try:
                    slot, t = gen.slot(s.target, env, "t")
                except EvalError:
                    slot = None
                if isinstance(slot, int):
                    out.update(range(slot, slot + width(t)))
                else:
                    root = s.target
                    while isinstance(root, (Index, Field)):
                        root = root.base
                    out.update(k for k, sl in enumerate(model.slots) if sl.var == root.id)
            elif isinstance(s, For):
                for k in range(1, model.tenv.scalar(s.type).size + 1):
                    inner = dict(env)
                    inner[s.var] = k
                    walk(s.body, inner)
            elif isinstance(s, If):
                walk(s.then, env)
                walk(s.orelse, env)

    for ri in model.rule_instances:
        walk(ri.rule.body, ri.env)
    return out


def _copy_pairs(model):
    """(target slots, source slots) of plain copies; dynamic ends cover the whole variable."""
    gen = Gen(model, set())
    pairs = []

    def slots(d, env):
        try:
            slot, t = gen.slot(d, env, "t")
        except EvalError:
            slot = None
        if isinstance(slot, int):
            return set(range(slot, slot + width(t)))
        root = d
        while isinstance(root, (Index, Field)):
            root = root.base
        return {k for k, sl in enumerate(model.slots) if sl.var == root.id}

    def walk(body, env):
        for s in body:
            if isinstance(s, Assign) and gen.is_copy(s.value, env):
                pairs.append((slots(s.target, env), slots(s.value, env)))
            elif isinstance(s, For):
                for k in range(1, model.tenv.scalar(s.type).size + 1):
                    walk(s.body, dict(env, **{s.var: k}))
            elif isinstance(s, If):
                walk(s.then, env)
                walk(s.orelse, env)

    for ri in model.rule_instances:
        walk(ri.rule.body, ri.env)
    return pairs


def maybe_undefined(model):
    undef = set(_undefine_targets(model))
    for s in model.initial_states():
        undef.update(k for k, v in enumerate(s) if v == UNDEF)
    # Undefined spreads through plain copies
    pairs = _copy_pairs(model)
    changed = True
    while changed:
        changed = False
        for dst, src in pairs:
            if src & undef and not dst <= undef:
                undef |= dst
                changed = True
    return {k for k in undef if not model.nullable[k]}


class Compiled:
    pass


def _runtime(model):
    paths = model.paths
    nullable = model.nullable

    def _u(v, slot):
        if v == UNDEF:
            raise UndefinedRead(paths[slot])
        return v

    def _r(src, slot):
        v = src[slot]
        if v == UNDEF and not nullable[slot]:
            raise UndefinedRead(paths[slot])
        return v

    def _ix(v, size):
        if not 1 <= v <= size:
            raise EvalError(f"array index {'null' if v == UNDEF else v} out of range")
        return v

    return {"_u": _u, "_r": _r, "_ix": _ix}


def compile_model(model):
    mu = maybe_undefined(model)
    gen = Gen(model, mu)
    lines = []
    guards = []
    for ri in model.rule_instances:
        g = gen.cond(ri.rule.guard, ri.env, "s")
        guards.append(g)
        lines.append(f"def g_{ri.index}(s):\n    return {g}\n")
        body = []
        gen.stmts(ri.rule.body, ri.env, "    ", body)
        if body:
            lines.append(f"def a_{ri.index}(s):\n    t = list(s)\n" + "\n".join(body) + "\n    return tuple(t)\n")
        else:
            lines.append(f"def a_{ri.index}(s):\n    return s\n")
    succ = ["def successors(s):", "    out = []"]
    for ri, g in zip(model.rule_instances, guards):
        if g == "False":
            continue
        succ.append(f"    if {g}:\n        out.append(({ri.index}, a_{ri.index}(s)))")
    succ.append("    return out\n")
    lines.append("\n".join(succ))
    en = ["def enabled_any(s):"]
    for ri, g in zip(model.rule_instances, guards):
        if g != "False":
            en.append(f"    if {g}:\n        return True")
    en.append("    return False\n")
    lines.append("\n".join(en))
    pack_terms = " | ".join(f"(s[{k}] << {off})" if off else f"s[{k}]"
                            for k, off in enumerate(model.offsets)) or "0"
    lines.append(f"def pack(s):\n    return {pack_terms}\n")
    src = "\n".join(lines)
    ns = _runtime(model)
    exec(compile(src, "<flowlock-model>", "exec"), ns)
    c = Compiled()
    c.source = src
    c.maybe_undef = mu
    c.successors = ns["successors"]
    c.enabled_any = ns["enabled_any"]
    c.pack = ns["pack"]
    c.guards = [ns[f"g_{ri.index}"] for ri in model.rule_instances]
    c.actions = [ns[f"a_{ri.index}"] for ri in model.rule_instances]
    c.gen = gen
    return c


def compile_predicate(model, expr, params=()):
    """Return ``f(state, values)``; ``params`` are (name, scalarset) pairs.

    One straight-line function is generated per binding of the parameters.
    """
    gen = model.compiled.gen
    names = [p for p, _ in params]
    domains = [range(1, model.tenv.scalar(t).size + 1 + (1 if model.tenv.scalar(t).other else 0))
               for _, t in params]
    ns = _runtime(model)
    table = {}
    lines = []
    for k, vals in enumerate(itertools.product(*domains)):
        env = dict(zip(names, vals))
        try:
            body = gen.cond(expr, env, "s")
        except EvalError:
            # e.g. indexing an array by Other: only reachable through a bad binding
            body = f"_fail({k})"
        lines.append(f"def p_{k}(s):\n    return {body}\n")
        table[vals] = k

    def _fail(k):
        raise EvalError("predicate not defined for this binding")

    ns["_fail"] = _fail
    exec(compile("\n".join(lines) or "pass", "<flowlock-pred>", "exec"), ns)
    funcs = {vals: ns[f"p_{k}"] for vals, k in table.items()}
    if not params:
        f0 = funcs[()]
        return lambda s, vals=(): f0(s)
    return lambda s, vals: funcs[tuple(vals)](s)
