"""Abstract syntax for the guarded-rule protocol language.

Identifiers are kept as ``Name`` nodes; whether a name denotes a variable,
an enum member, a constant or a bound index is decided against a protocol
by :mod:`flowlock.model`.  Keeping the tree purely syntactic makes the
parse/print round trip an identity on the tree.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union


@dataclass(frozen=True)
class Span:
    line: int
    col: int
    end_line: int
    end_col: int

    def __str__(self):
        return f"{self.line}:{self.col}"


# -- types -----------------------------------------------------------------

@dataclass(frozen=True)
class BoolType:
    pass


@dataclass(frozen=True)
class EnumType:
    members: tuple


@dataclass(frozen=True)
class ScalarsetType:
    # size is an int literal or the name of a constant
    size: Union[int, str]
    # abstract agent domains carry the environment value Other
    other: bool = False


@dataclass(frozen=True)
class RecordType:
    fields: tuple  # ((name, type), ...)


@dataclass(frozen=True)
class ArrayType:
    index: str  # name of a scalarset type
    elem: "TypeExpr"


@dataclass(frozen=True)
class TypeRef:
    name: str


TypeExpr = Union[BoolType, EnumType, ScalarsetType, RecordType, ArrayType, TypeRef]


# -- expressions -----------------------------------------------------------

@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class NullLit:
    pass


@dataclass(frozen=True)
class OtherLit:
    pass


@dataclass(frozen=True)
class Name:
    id: str


@dataclass(frozen=True)
class Index:
    base: "Expr"
    index: "Expr"


@dataclass(frozen=True)
class Field:
    base: "Expr"
    name: str


@dataclass(frozen=True)
class Eq:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Neq:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True)
class And:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Or:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Implies:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Forall:
    var: str
    type: str
    body: "Expr"


@dataclass(frozen=True)
class Exists:
    var: str
    type: str
    body: "Expr"


@dataclass(frozen=True)
class SetEmpty:
    """``S = {}`` over a boolean array indexed by a scalarset."""
    target: "Expr"


Expr = Union[BoolLit, NullLit, OtherLit, Name, Index, Field, Eq, Neq, Not, And,
             Or, Implies, Forall, Exists, SetEmpty]
DESIGNATORS = (Name, Index, Field)


# -- statements ------------------------------------------------------------

@dataclass(frozen=True)
class Assign:
    target: Expr
    value: Expr


@dataclass(frozen=True)
class SetAssign:
    """``S := {e}`` (elem given) or ``S := {}`` (elem None)."""
    target: Expr
    elem: Optional[Expr]


@dataclass(frozen=True)
class Undefine:
    target: Expr


@dataclass(frozen=True)
class For:
    var: str
    type: str
    body: tuple


@dataclass(frozen=True)
class If:
    cond: Expr
    then: tuple
    orelse: tuple = ()


Stmt = Union[Assign, SetAssign, Undefine, For, If]


# -- declarations ----------------------------------------------------------

@dataclass(frozen=True)
class Rule:
    name: str
    params: tuple  # ((var, scalarset name), ...)
    guard: Expr
    body: tuple
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class StartState:
    name: str
    params: tuple
    body: tuple
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class InvariantDecl:
    name: str
    expr: Expr
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class ProtocolDef:
    consts: tuple = ()     # ((name, int), ...)
    types: tuple = ()      # ((name, TypeExpr), ...)
    vars: tuple = ()       # ((name, TypeExpr), ...)
    rules: tuple = ()
    startstates: tuple = ()
    invariants: tuple = ()

    def rule(self, name):
        for r in self.rules:
            if r.name == name:
                return r
        raise KeyError(name)


# -- tree utilities --------------------------------------------------------

def conj(parts):
    """Left-nested conjunction; empty -> true."""
    out = None
    for p in parts:
        out = p if out is None else And(out, p)
    return BoolLit(True) if out is None else out


def disj(parts):
    out = None
    for p in parts:
        out = p if out is None else Or(out, p)
    return BoolLit(False) if out is None else out


def substitute(node, mapping):
    """Replace free ``Name`` occurrences per ``mapping`` (name -> Expr).

    Binders (quantifiers, for loops) shadow their variable.
    """
    if not mapping:
        return node
    if isinstance(node, Name):
        return mapping.get(node.id, node)
    if isinstance(node, (BoolLit, NullLit, OtherLit)):
        return node
    if isinstance(node, Index):
        return Index(substitute(node.base, mapping), substitute(node.index, mapping))
    if isinstance(node, Field):
        return Field(substitute(node.base, mapping), node.name)
    if isinstance(node, (Eq, Neq, And, Or, Implies)):
        return type(node)(substitute(node.left, mapping), substitute(node.right, mapping))
    if isinstance(node, Not):
        return Not(substitute(node.operand, mapping))
    if isinstance(node, SetEmpty):
        return SetEmpty(substitute(node.target, mapping))
    if isinstance(node, (Forall, Exists)):
        inner = {k: v for k, v in mapping.items() if k != node.var}
        return type(node)(node.var, node.type, substitute(node.body, inner))
    if isinstance(node, Assign):
        return Assign(substitute(node.target, mapping), substitute(node.value, mapping))
    if isinstance(node, SetAssign):
        elem = None if node.elem is None else substitute(node.elem, mapping)
        return SetAssign(substitute(node.target, mapping), elem)
    if isinstance(node, Undefine):
        return Undefine(substitute(node.target, mapping))
    if isinstance(node, For):
        inner = {k: v for k, v in mapping.items() if k != node.var}
        return For(node.var, node.type, tuple(substitute(s, inner) for s in node.body))
    if isinstance(node, If):
        return If(substitute(node.cond, mapping),
                  tuple(substitute(s, mapping) for s in node.then),
                  tuple(substitute(s, mapping) for s in node.orelse))
    raise TypeError(f"cannot substitute into {node!r}")


def designator_root(d):
    while isinstance(d, (Index, Field)):
        d = d.base
    return d.id if isinstance(d, Name) else None


def iter_designators(e):
    """Yield every maximal designator occurring in ``e`` (and its indices)."""
    if isinstance(e, (Name, Index, Field)):
        yield e
        node = e
        while isinstance(node, (Index, Field)):
            if isinstance(node, Index):
                yield from iter_designators(node.index)
            node = node.base
    elif isinstance(e, (Eq, Neq, And, Or, Implies)):
        yield from iter_designators(e.left)
        yield from iter_designators(e.right)
    elif isinstance(e, Not):
        yield from iter_designators(e.operand)
    elif isinstance(e, SetEmpty):
        yield from iter_designators(e.target)
    elif isinstance(e, (Forall, Exists)):
        yield from iter_designators(e.body)
