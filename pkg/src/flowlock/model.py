"""Protocol semantics for a fixed instantiation size.

A :class:`GroundModel` lays every variable out as a flat tuple of small
integer codes (a *state*), enumerates rule instances, and evaluates guards
and actions two ways: a direct tree interpreter (:meth:`GroundModel.eval_expr`,
:meth:`GroundModel.exec_action`) and generated Python code used by the
explorer.  Value codes per slot::

    0            Undefined (null for agent pointers)
    1, 2         false, true
    1 + k        k-th member of an enum
    1 .. n       scalarset ids;  n + 1 is the environment agent Other
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

from flowlock.syntax import (
    And, ArrayType, Assign, BoolLit, BoolType, EnumType, Eq, Exists, Field, For,
    Forall, If, Implies, Index, Name, Neq, Not, NullLit, Or, OtherLit,
    RecordType, ScalarsetType, SetAssign, SetEmpty, TypeRef, Undefine,
    designator_root,
)

UNDEF = 0
FALSE, TRUE = 1, 2


class StaticTypeError(Exception):
    def __init__(self, message, span=None):
        self.message = message
        self.span = span
        loc = f"{span.line}:{span.col}: " if span else ""
        super().__init__(loc + message)


class UndefinedRead(Exception):
    def __init__(self, slot):
        self.slot = slot
        super().__init__(f"read of undefined value {slot}")


class EvalError(Exception):
    pass


# -- resolved types --------------------------------------------------------

@dataclass(frozen=True)
class Bool:
    def __str__(self):
        return "boolean"


@dataclass(frozen=True)
class Enum:
    name: Optional[str]
    members: tuple


@dataclass(frozen=True)
class Scalar:
    name: str
    size: int
    other: bool = False


@dataclass(frozen=True)
class Record:
    fields: tuple  # ((name, type), ...)

    def field(self, name):
        for n, t in self.fields:
            if n == name:
                return t
        return None


@dataclass(frozen=True)
class Array:
    index: Scalar
    elem: object


NULLT = "null"
OTHERT = "other"
LEAF = (Bool, Enum, Scalar)


def width(t):
    """Number of slots occupied by a value of type ``t``."""
    if isinstance(t, LEAF):
        return 1
    if isinstance(t, Record):
        return sum(width(ft) for _, ft in t.fields)
    if isinstance(t, Array):
        return t.index.size * width(t.elem)
    raise TypeError(t)


class TypeEnv:
    """Resolved declarations of a protocol, optionally with the agent size overridden."""

    def __init__(self, proto, agent_size=None):
        self.proto = proto
        self.consts = dict(proto.consts)
        self.named = {}
        self.members = {}  # enum member -> (Enum, code)
        self._raw = dict(proto.types)
        for name, _ in proto.types:
            self.named[name] = self._resolve(TypeRef(name), set())
        self.vars = {}
        for name, t in proto.vars:
            if name in self.vars:
                raise StaticTypeError(f"duplicate variable {name}")
            self.vars[name] = self._resolve(t, set(), name)
        self.agent = self._find_agent()
        if agent_size is not None and self.agent is not None:
            old = self.agent
            new = Scalar(old.name, agent_size, old.other)
            self.named = {k: _replace_scalar(v, old, new) for k, v in self.named.items()}
            self.vars = {k: _replace_scalar(v, old, new) for k, v in self.vars.items()}
            self.agent = new

    def _resolve(self, t, seen, owner=None):
        if isinstance(t, BoolType):
            return Bool()
        if isinstance(t, EnumType):
            if len(set(t.members)) != len(t.members):
                raise StaticTypeError(f"duplicate enum member in {owner or 'enum'}")
            e = Enum(owner, t.members)
            for k, m in enumerate(t.members):
                prev = self.members.get(m)
                if prev is not None and prev[0] != e:
                    raise StaticTypeError(f"enum member {m} declared twice")
                self.members[m] = (e, k + 1)
            return e
        if isinstance(t, ScalarsetType):
            size = t.size
            if isinstance(size, str):
                if size not in self.consts:
                    raise StaticTypeError(f"unknown constant {size}")
                size = self.consts[size]
            if size < 1:
                raise StaticTypeError(f"scalarset {owner} must have positive size")
            return Scalar(owner or "?", size, t.other)
        if isinstance(t, RecordType):
            names = [n for n, _ in t.fields]
            if len(set(names)) != len(names):
                raise StaticTypeError("duplicate record field")
            return Record(tuple((n, self._resolve(ft, seen)) for n, ft in t.fields))
        if isinstance(t, ArrayType):
            idx = self.named.get(t.index)
            if idx is None and t.index in self._raw and t.index not in seen:
                idx = self._resolve(TypeRef(t.index), seen)
            if not isinstance(idx, Scalar):
                raise StaticTypeError(f"array index type {t.index} is not a declared scalarset")
            return Array(idx, self._resolve(t.elem, seen))
        if isinstance(t, TypeRef):
            if t.name in self.named:
                return self.named[t.name]
            if t.name not in self._raw or t.name in seen:
                raise StaticTypeError(f"unknown type {t.name}")
            return self._resolve(self._raw[t.name], seen | {t.name}, t.name)
        raise StaticTypeError(f"bad type {t!r}")

    def _find_agent(self):
        scalars = [t for t in self.named.values() if isinstance(t, Scalar)]
        for s in scalars:
            if s.other:
                return s
        counts = {}
        for r in self.proto.rules:
            if r.params:
                t = self.named.get(r.params[0][1])
                if isinstance(t, Scalar):
                    counts[t] = counts.get(t, 0) + 1
        if counts:
            best = max(counts.values())
            for s in scalars:
                if counts.get(s) == best:
                    return s
        return None

    def scalar(self, name):
        t = self.named.get(name)
        if not isinstance(t, Scalar):
            raise StaticTypeError(f"{name} is not a scalarset type")
        return t


def _replace_scalar(t, old, new):
    if t == old:
        return new
    if isinstance(t, Record):
        return Record(tuple((n, _replace_scalar(ft, old, new)) for n, ft in t.fields))
    if isinstance(t, Array):
        return Array(_replace_scalar(t.index, old, new), _replace_scalar(t.elem, old, new))
    return t


# -- static checking -------------------------------------------------------

class Checker:
    """Types expressions against a TypeEnv; ``scope`` maps bound names to scalarsets."""

    def __init__(self, tenv):
        self.tenv = tenv

    def type_of(self, e, scope):
        te = self.tenv
        if isinstance(e, BoolLit):
            return Bool()
        if isinstance(e, NullLit):
            return NULLT
        if isinstance(e, OtherLit):
            if te.agent is None or not te.agent.other:
                raise StaticTypeError("Other used outside an abstract model")
            return OTHERT
        if isinstance(e, Name):
            if e.id in scope:
                return scope[e.id]
            if e.id in te.vars:
                return te.vars[e.id]
            if e.id in te.members:
                return te.members[e.id][0]
            if e.id in te.consts:
                raise StaticTypeError(f"integer constant {e.id} not in subset of expressions")
            raise StaticTypeError(f"unbound name {e.id}")
        if isinstance(e, Index):
            bt = self.type_of(e.base, scope)
            if not isinstance(bt, Array):
                raise StaticTypeError("indexing a non-array")
            it = self.type_of(e.index, scope)
            if it != bt.index:
                raise StaticTypeError(f"array index must be of type {bt.index.name}")
            return bt.elem
        if isinstance(e, Field):
            bt = self.type_of(e.base, scope)
            ft = bt.field(e.name) if isinstance(bt, Record) else None
            if ft is None:
                raise StaticTypeError(f"no field {e.name}")
            return ft
        if isinstance(e, (Eq, Neq)):
            lt = self.type_of(e.left, scope)
            rt = self.type_of(e.right, scope)
            if not self.comparable(lt, rt):
                raise StaticTypeError(f"comparison of incompatible types in {e}")
            return Bool()
        if isinstance(e, Not):
            self.boolean(e.operand, scope)
            return Bool()
        if isinstance(e, (And, Or, Implies)):
            self.boolean(e.left, scope)
            self.boolean(e.right, scope)
            return Bool()
        if isinstance(e, (Forall, Exists)):
            inner = dict(scope)
            inner[e.var] = te.scalar(e.type)
            self.boolean(e.body, inner)
            return Bool()
        if isinstance(e, SetEmpty):
            t = self.type_of(e.target, scope)
            if not (isinstance(t, Array) and isinstance(t.elem, Bool)):
                raise StaticTypeError("set sugar needs a boolean array")
            return Bool()
        raise StaticTypeError(f"unknown expression {e!r}")

    @staticmethod
    def comparable(a, b):
        if a == b and isinstance(a, LEAF):
            return True
        for x, y in ((a, b), (b, a)):
            if x == NULLT and isinstance(y, Scalar):
                return True
            if x == OTHERT and isinstance(y, Scalar) and y.other:
                return True
        return a == b == OTHERT

    def boolean(self, e, scope):
        if not isinstance(self.type_of(e, scope), Bool):
            raise StaticTypeError(f"expected a boolean expression: {e}")

    def assignable(self, target, value, scope):
        tt = self.type_of(target, scope)
        if not isinstance(tt, LEAF):
            raise StaticTypeError("assignment target must be a scalar slot")
        vt = self.type_of(value, scope)
        if not self.comparable(tt, vt):
            raise StaticTypeError(f"type mismatch in assignment to {target}")

    def stmts(self, body, scope):
        for s in body:
            if isinstance(s, Assign):
                self._designator(s.target)
                self.assignable(s.target, s.value, scope)
            elif isinstance(s, SetAssign):
                self._designator(s.target)
                t = self.type_of(s.target, scope)
                if not (isinstance(t, Array) and isinstance(t.elem, Bool)):
                    raise StaticTypeError("set sugar needs a boolean array")
                if s.elem is not None and not self.comparable(t.index, self.type_of(s.elem, scope)):
                    raise StaticTypeError("set element has the wrong type")
            elif isinstance(s, Undefine):
                self._designator(s.target)
                self.type_of(s.target, scope)
            elif isinstance(s, For):
                inner = dict(scope)
                inner[s.var] = self.tenv.scalar(s.type)
                self.stmts(s.body, inner)
            elif isinstance(s, If):
                self.boolean(s.cond, scope)
                self.stmts(s.then, scope)
                self.stmts(s.orelse, scope)
            else:
                raise StaticTypeError(f"unknown statement {s!r}")

    def _designator(self, d):
        if designator_root(d) is None or designator_root(d) not in self.tenv.vars:
            raise StaticTypeError(f"assignment target {d} is not a variable")


def _param_scope(tenv, params):
    scope = {}
    for var, tname in params:
        if var in scope:
            raise StaticTypeError(f"duplicate parameter {var}")
        scope[var] = tenv.scalar(tname)
    return scope


def check_protocol(proto):
    """Static checks; raises StaticTypeError (with the rule's span) on failure."""
    tenv = TypeEnv(proto)
    ck = Checker(tenv)
    seen = set()
    for r in proto.rules:
        try:
            if r.name in seen:
                raise StaticTypeError(f"duplicate rule name {r.name}")
            seen.add(r.name)
            scope = _param_scope(tenv, r.params)
            ck.boolean(r.guard, scope)
            ck.stmts(r.body, scope)
        except StaticTypeError as exc:
            raise StaticTypeError(f"rule {r.name}: {exc.message}", r.span) from None
    for st in proto.startstates:
        try:
            ck.stmts(st.body, _param_scope(tenv, st.params))
        except StaticTypeError as exc:
            raise StaticTypeError(f"startstate {st.name}: {exc.message}", st.span) from None
    for inv in proto.invariants:
        try:
            ck.boolean(inv.expr, {})
        except StaticTypeError as exc:
            raise StaticTypeError(f"invariant {inv.name}: {exc.message}", inv.span) from None
    locality = classify_locality(proto, tenv)
    for r in proto.rules:
        own = _own_agent_param(r, tenv)
        for target in _assigned_designators(r.body):
            root = designator_root(target)
            if locality.get(root) == "local" and not _indexed_by(target, own):
                raise StaticTypeError(f"rule {r.name} writes another agent's local {root}", r.span)
    return tenv


def _own_agent_param(rule, tenv):
    for var, tname in rule.params:
        if tenv.agent is not None and tenv.named.get(tname) == tenv.agent:
            return var
    return None


def _indexed_by(d, var):
    node = d
    while isinstance(node, (Index, Field)):
        if isinstance(node, Index):
            if var is not None and node.index == Name(var) and isinstance(node.base, Name):
                return True
        node = node.base
    return False


def _assigned_designators(body):
    for s in body:
        if isinstance(s, (Assign, SetAssign, Undefine)):
            yield s.target
        elif isinstance(s, For):
            yield from _assigned_designators(s.body)
        elif isinstance(s, If):
            yield from _assigned_designators(s.then)
            yield from _assigned_designators(s.orelse)


def _all_designators_in_rule(rule):
    from flowlock.syntax import iter_designators

    def walk_stmts(body):
        for s in body:
            if isinstance(s, (Assign,)):
                yield from iter_designators(s.target)
                yield from iter_designators(s.value)
            elif isinstance(s, SetAssign):
                yield from iter_designators(s.target)
                if s.elem is not None:
                    yield from iter_designators(s.elem)
            elif isinstance(s, Undefine):
                yield from iter_designators(s.target)
            elif isinstance(s, For):
                yield from walk_stmts(s.body)
            elif isinstance(s, If):
                yield from iter_designators(s.cond)
                yield from walk_stmts(s.then)
                yield from walk_stmts(s.orelse)

    yield from iter_designators(rule.guard)
    yield from walk_stmts(rule.body)


def classify_locality(proto, tenv=None):
    """Map each variable to 'local' or 'global'.

    An array over the agent scalarset is local iff every access in every rule
    indexes it directly by that rule's own agent parameter.
    """
    tenv = tenv or TypeEnv(proto)
    out = {}
    candidates = set()
    for name, t in tenv.vars.items():
        if isinstance(t, Array) and tenv.agent is not None and t.index.name == tenv.agent.name:
            candidates.add(name)
            out[name] = "local"
        else:
            out[name] = "global"
    for r in proto.rules:
        own = _own_agent_param(r, tenv)
        for d in _all_designators_in_rule(r):
            root = designator_root(d)
            if root not in candidates or out[root] == "global":
                continue
            # the outermost Index applied directly to the root variable
            node = d
            while isinstance(node, (Index, Field)) and not (isinstance(node, Index) and isinstance(node.base, Name)):
                node = node.base
            if not (isinstance(node, Index) and own is not None and node.index == Name(own)):
                out[root] = "global"
    return out


# -- ground model ----------------------------------------------------------

@dataclass(frozen=True)
class Slot:
    index: int
    path: str
    type: object      # leaf type
    var: str
    agent: Optional[int]  # agent id for entries of an agent-indexed array
    local: bool
    coords: tuple = ()    # ((scalarset name, index), ...) along the path


@dataclass(frozen=True)
class RuleInstance:
    index: int
    rule: object
    params: tuple      # parameter values in declaration order
    agent: Optional[int]

    @property
    def name(self):
        return self.rule.name

    @property
    def env(self):
        return {v: val for (v, _), val in zip(self.rule.params, self.params)}

    def label(self):
        return f"{self.rule.name}({','.join(str(p) for p in self.params)})"

    def __str__(self):
        return self.label()


def value_code_other(agent):
    return agent.size + 1


class GroundModel:
    """A protocol instantiated at a fixed agent count."""

    def __init__(self, proto, n=None):
        self.protocol = proto
        check_protocol(proto)
        self.tenv = TypeEnv(proto, agent_size=n)
        self.agent = self.tenv.agent
        self.n = self.agent.size if self.agent is not None else (n or 0)
        self.checker = Checker(self.tenv)
        self.locality = classify_locality(proto, TypeEnv(proto))
        self._layout()
        self.rule_instances = self._instances(proto.rules)
        self.start_instances = [(st, env) for st in proto.startstates
                                for env in self._bindings(st.params)]
        self._compiled = None
        self._initial = None

    # layout ---------------------------------------------------------------
    def _layout(self):
        slots = []
        self.var_offset = {}

        def expand(path, t, var, agent, local, coords):
            if isinstance(t, LEAF):
                slots.append(Slot(len(slots), path, t, var, agent, local, coords))
            elif isinstance(t, Record):
                for fname, ft in t.fields:
                    expand(f"{path}.{fname}", ft, var, agent, local, coords)
            elif isinstance(t, Array):
                is_agent = self.agent is not None and t.index.name == self.agent.name
                for k in range(1, t.index.size + 1):
                    expand(f"{path}[{k}]", t.elem, var,
                           k if is_agent and agent is None else agent, local,
                           coords + ((t.index.name, k),))

        for name, _ in self.protocol.vars:
            self.var_offset[name] = len(slots)
            expand(name, self.tenv.vars[name], name, None, self.locality[name] == "local", ())
        self.slots = slots
        self.paths = [s.path for s in slots]
        self.slot_by_path = {s.path: s.index for s in slots}
        self.nullable = [isinstance(s.type, Scalar) and self.agent is not None
                         and s.type.name == self.agent.name for s in slots]
        self.max_code = [self._max_code(s.type) for s in slots]
        self.bits = [max(1, m.bit_length()) for m in self.max_code]
        self.offsets = list(itertools.accumulate([0] + self.bits[:-1]))

    def _max_code(self, t):
        if isinstance(t, Bool):
            return TRUE
        if isinstance(t, Enum):
            return len(t.members)
        return t.size + (1 if t.other else 0)

    def is_pointer(self, slot):
        return self.nullable[slot]

    def _bindings(self, params):
        domains = [range(1, self.tenv.scalar(t).size + 1) for _, t in params]
        return [dict(zip([v for v, _ in params], vals)) for vals in itertools.product(*domains)]

    def _instances(self, rules):
        out = []
        for r in rules:
            own = _own_agent_param(r, self.tenv)
            for env in self._bindings(r.params):
                vals = tuple(env[v] for v, _ in r.params)
                out.append(RuleInstance(len(out), r, vals, env.get(own) if own else None))
        return out

    def instances_of(self, rule_name, agent=None):
        return [ri for ri in self.rule_instances
                if ri.name == rule_name and (agent is None or ri.agent == agent)]

    def agent_ids(self):
        return list(range(1, self.n + 1)) if self.agent is not None else []

    # value codes ----------------------------------------------------------
    def decode(self, slot, code):
        t = self.slots[slot].type
        if code == UNDEF:
            return "null" if self.nullable[slot] else "Undefined"
        if isinstance(t, Bool):
            return "true" if code == TRUE else "false"
        if isinstance(t, Enum):
            return t.members[code - 1]
        if t.other and code == t.size + 1:
            return "Other"
        return str(code)

    def state_dict(self, state):
        return {p: self.decode(k, v) for k, (p, v) in enumerate(zip(self.paths, state))}

    def format_state(self, state, indent="    "):
        return "\n".join(f"{indent}{p} = {v}" for p, v in self.state_dict(state).items())

    def lookup(self, state, path):
        return self.decode(self.slot_by_path[path], state[self.slot_by_path[path]])

    # packing --------------------------------------------------------------
    def pack(self, state):
        out = 0
        for v, off in zip(state, self.offsets):
            out |= v << off
        return out

    def unpack(self, packed):
        return tuple((packed >> off) & ((1 << b) - 1) for off, b in zip(self.offsets, self.bits))

    # interpreter ----------------------------------------------------------
    def _slot_of(self, d, state, env):
        """Return (first slot, type) of designator ``d``."""
        if isinstance(d, Name):
            if d.id not in self.tenv.vars:
                raise EvalError(f"{d.id} is not a variable")
            return self.var_offset[d.id], self.tenv.vars[d.id]
        if isinstance(d, Field):
            base, bt = self._slot_of(d.base, state, env)
            off = 0
            for fname, ft in bt.fields:
                if fname == d.name:
                    return base + off, ft
                off += width(ft)
            raise EvalError(f"no field {d.name}")
        if isinstance(d, Index):
            base, bt = self._slot_of(d.base, state, env)
            k = self._code(d.index, state, env)
            if not 1 <= k <= bt.index.size:
                raise EvalError(f"index {self._fmt_code(k)} out of range in {d}")
            return base + (k - 1) * width(bt.elem), bt.elem
        raise EvalError(f"not a designator: {d!r}")

    @staticmethod
    def _fmt_code(k):
        return "null" if k == UNDEF else str(k)

    def _read(self, slot, state):
        v = state[slot]
        if v == UNDEF and not self.nullable[slot]:
            raise UndefinedRead(self.paths[slot])
        return v

    def _code(self, e, state, env):
        """Evaluate ``e`` to a value code (booleans as 1/2)."""
        if isinstance(e, BoolLit):
            return TRUE if e.value else FALSE
        if isinstance(e, NullLit):
            return UNDEF
        if isinstance(e, OtherLit):
            return self.agent.size + 1
        if isinstance(e, Name):
            if e.id in env:
                return env[e.id]
            if e.id in self.tenv.members:
                return self.tenv.members[e.id][1]
        if isinstance(e, (Name, Index, Field)):
            slot, t = self._slot_of(e, state, env)
            if not isinstance(t, LEAF):
                raise EvalError(f"{e} is not a scalar value")
            return self._read(slot, state)
        return TRUE if self._truth(e, state, env) else FALSE

    def _truth(self, e, state, env):
        if isinstance(e, Eq):
            return self._code(e.left, state, env) == self._code(e.right, state, env)
        if isinstance(e, Neq):
            return self._code(e.left, state, env) != self._code(e.right, state, env)
        if isinstance(e, Not):
            return not self._truth(e.operand, state, env)
        if isinstance(e, And):
            return self._truth(e.left, state, env) and self._truth(e.right, state, env)
        if isinstance(e, Or):
            return self._truth(e.left, state, env) or self._truth(e.right, state, env)
        if isinstance(e, Implies):
            return (not self._truth(e.left, state, env)) or self._truth(e.right, state, env)
        if isinstance(e, (Forall, Exists)):
            size = self.tenv.scalar(e.type).size
            want_all = isinstance(e, Forall)
            for k in range(1, size + 1):
                inner = dict(env)
                inner[e.var] = k
                if self._truth(e.body, state, inner) != want_all:
                    return not want_all
            return want_all
        if isinstance(e, SetEmpty):
            base, t = self._slot_of(e.target, state, env)
            return all(self._read(base + k, state) == FALSE for k in range(t.index.size))
        if isinstance(e, BoolLit):
            return e.value
        return self._code(e, state, env) == TRUE

    def eval_expr(self, state, env, e):
        """Evaluate ``e`` at ``state``.

        Boolean expressions give Python bools; designators give the decoded
        slot value (enum member name, scalarset id, None for null, "Other");
        bound index names give their id.
        """
        if isinstance(e, Name) and e.id in env:
            return env[e.id]
        if isinstance(e, Name) and e.id in self.tenv.members and e.id not in self.tenv.vars:
            return e.id
        if isinstance(e, (Name, Index, Field)):
            slot, t = self._slot_of(e, state, env)
            if not isinstance(t, LEAF):
                raise EvalError(f"{e} is not a scalar value")
            code = self._read(slot, state)
            if isinstance(t, Bool):
                return code == TRUE
            if isinstance(t, Enum):
                return t.members[code - 1]
            if code == UNDEF:
                return None
            return "Other" if t.other and code == t.size + 1 else code
        if isinstance(e, NullLit):
            return None
        if isinstance(e, OtherLit):
            return "Other"
        return self._truth(e, state, env)

    def exec_action(self, state, env, body):
        t = list(state)
        self._exec(body, t, env)
        return tuple(t)

    def _exec(self, body, t, env):
        for s in body:
            if isinstance(s, Assign):
                slot, _ = self._slot_of(s.target, t, env)
                v = s.value
                if isinstance(v, (Index, Field)) or (isinstance(v, Name) and v.id not in env
                                                      and v.id in self.tenv.vars):
                    # plain copy: Undefined moves along instead of raising
                    src, _ = self._slot_of(v, t, env)
                    t[slot] = t[src]
                else:
                    t[slot] = self._code(v, t, env)
            elif isinstance(s, SetAssign):
                base, at = self._slot_of(s.target, t, env)
                elem = None if s.elem is None else self._code(s.elem, t, env)
                for k in range(at.index.size):
                    t[base + k] = TRUE if elem == k + 1 else FALSE
            elif isinstance(s, Undefine):
                slot, tt = self._slot_of(s.target, t, env)
                for k in range(width(tt)):
                    t[slot + k] = UNDEF
            elif isinstance(s, For):
                for k in range(1, self.tenv.scalar(s.type).size + 1):
                    inner = dict(env)
                    inner[s.var] = k
                    self._exec(s.body, t, inner)
            elif isinstance(s, If):
                if self._truth(s.cond, t, env):
                    self._exec(s.then, t, env)
                else:
                    self._exec(s.orelse, t, env)
            else:
                raise EvalError(f"unknown statement {s!r}")

    def enabled(self, state, ri):
        return self._truth(ri.rule.guard, state, ri.env)

    def fire(self, state, ri):
        return self.exec_action(state, ri.env, ri.rule.body)

    def initial_states(self):
        if self._initial is None:
            if not self.start_instances:
                raise EvalError("model has no startstate")
            seen, out = set(), []
            blank = tuple([UNDEF] * len(self.slots))
            for st, env in self.start_instances:
                s = self.exec_action(blank, env, st.body)
                if s not in seen:
                    seen.add(s)
                    out.append(s)
            self._initial = out
        return list(self._initial)

    # compiled route -------------------------------------------------------
    @property
    def compiled(self):
        if self._compiled is None:
            from flowlock.codegen import compile_model
            self._compiled = compile_model(self)
        return self._compiled

    def compile_predicate(self, expr, params=()):
        """Compile a boolean expression with free index names ``params`` to ``f(state, *vals)``."""
        from flowlock.codegen import compile_predicate
        return compile_predicate(self, expr, params)


def instantiate(proto, n):
    """Instantiate ``proto`` at ``n`` agents (raises ValueError for n < 1)."""
    if n is None or n < 1:
        raise ValueError(f"instance size must be >= 1, got {n}")
    return GroundModel(proto, n)


def initial_states(model):
    return model.initial_states()


def eval_expr(model, state, env, e):
    return model.eval_expr(state, env, e)


def exec_action(model, state, env, body):
    return model.exec_action(state, env, body)


def enabled(model, state, ri):
    return model.enabled(state, ri)
