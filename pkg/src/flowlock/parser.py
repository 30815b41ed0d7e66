"""Parsers for protocol, flow, invariant and lemma files, plus the protocol printer.

The protocol grammar is the Murphi subset needed by the German protocol of
Chou et al.: constants, boolean/enum/scalarset/record/array types, rulesets,
start states, invariants, assignments, ``for``, ``if``, ``undefine`` and
quantified boolean expressions.  Anything else is rejected with a
"not in subset" diagnostic.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from flowlock.syntax import (
    And, ArrayType, Assign, BoolLit, BoolType, EnumType, Eq, Exists, Field, For,
    Forall, If, Implies, Index, InvariantDecl, Name, Neq, Not, NullLit, Or,
    OtherLit, ProtocolDef, RecordType, Rule, ScalarsetType, SetAssign, SetEmpty,
    Span, StartState, TypeRef, Undefine,
)

KEYWORDS = {
    "const", "type", "var", "ruleset", "rule", "startstate", "invariant", "do",
    "end", "for", "if", "then", "else", "undefine", "forall", "exists", "true",
    "false", "boolean", "enum", "scalarset", "record", "array", "of", "NULL",
    "Other", "with", "begin",
}
# Murphi constructs outside the accepted subset; named in diagnostics.
UNSUPPORTED_WORDS = {
    "alias", "procedure", "function", "switch", "case", "while", "repeat",
    "return", "clear", "put", "error", "assert", "isundefined", "ismember",
    "elsif", "union", "multiset", "choose", "liveness", "cover", "put",
}


@dataclass(frozen=True)
class SourceDiagnostic:
    severity: str
    message: str
    span: Span

    def __str__(self):
        return f"{self.span.line}:{self.span.col}: {self.severity}: {self.message}"


class ParseError(Exception):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


@dataclass(frozen=True)
class Token:
    kind: str   # 'id', 'kw', 'num', 'str', 'sym', 'eof'
    text: str
    span: Span


_SYMBOLS = [":=", "==>", "->", "!=", "=", "&", "|", "!", "(", ")", "[", "]",
            "{", "}", ";", ":", ",", ".", "<"]
_ARITH = ["+", "-", "*", "/", "%", ">", "<=", ">=", "?"]
_WS = re.compile(r"[ \t\r\n]+")
_ID = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_RAW_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_.\-]*[A-Za-z0-9_]|[A-Za-z_]")
_NUM = re.compile(r"[0-9]+")


class Lexer:
    """On-demand tokenizer; lets the parser read raw names between tokens."""

    def __init__(self, text, allow_lt=False):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1
        self.buffer = []
        self.allow_lt = allow_lt

    def _advance(self, n):
        chunk = self.text[self.pos:self.pos + n]
        for ch in chunk:
            if ch == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
        self.pos += n

    def _skip(self):
        while self.pos < len(self.text):
            m = _WS.match(self.text, self.pos)
            if m:
                self._advance(m.end() - self.pos)
                continue
            if self.text.startswith("--", self.pos):
                end = self.text.find("\n", self.pos)
                end = len(self.text) if end < 0 else end
                self._advance(end - self.pos)
                continue
            break

    def _span(self, line, col):
        return Span(line, col, self.line, max(self.col, col + 1) if self.line == line else self.col)

    def _lex(self):
        self._skip()
        line, col = self.line, self.col
        if self.pos >= len(self.text):
            return Token("eof", "", Span(line, col, line, col + 1))
        text = self.text
        m = _ID.match(text, self.pos)
        if m:
            word = m.group()
            self._advance(len(word))
            return Token("kw" if word in KEYWORDS else "id", word, self._span(line, col))
        m = _NUM.match(text, self.pos)
        if m:
            self._advance(len(m.group()))
            return Token("num", m.group(), self._span(line, col))
        if text[self.pos] == '"':
            end = text.find('"', self.pos + 1)
            if end < 0 or "\n" in text[self.pos:end]:
                raise ParseError([SourceDiagnostic("error", "unterminated string", Span(line, col, line, col + 1))])
            s = text[self.pos + 1:end]
            self._advance(end + 1 - self.pos)
            return Token("str", s, self._span(line, col))
        for sym in _SYMBOLS:
            if text.startswith(sym, self.pos):
                if sym == "<" and not self.allow_lt:
                    break
                self._advance(len(sym))
                return Token("sym", sym, self._span(line, col))
        for sym in _ARITH:
            if text.startswith(sym, self.pos):
                raise ParseError([SourceDiagnostic(
                    "error", f"operator '{sym}' not in subset (no integer arithmetic)",
                    Span(line, col, line, col + len(sym)))])
        raise ParseError([SourceDiagnostic("error", f"unexpected character {text[self.pos]!r}",
                                           Span(line, col, line, col + 1))])

    def peek(self, k=0):
        while len(self.buffer) <= k:
            self.buffer.append(self._lex())
        return self.buffer[k]

    def next(self):
        tok = self.peek()
        self.buffer.pop(0)
        return tok

    def raw_name(self):
        """Read a dotted/dashed name such as ``inv-1.2.1``."""
        assert not self.buffer
        self._skip()
        line, col = self.line, self.col
        m = _RAW_NAME.match(self.text, self.pos)
        if not m:
            raise ParseError([SourceDiagnostic("error", "expected a name", Span(line, col, line, col + 1))])
        self._advance(len(m.group()))
        return m.group(), self._span(line, col)


class _Parser:
    def __init__(self, text, allow_lt=False):
        self.lx = Lexer(text, allow_lt=allow_lt)

    # -- helpers --
    def error(self, msg, tok=None):
        tok = tok or self.lx.peek()
        raise ParseError([SourceDiagnostic("error", msg, tok.span)])

    def at(self, text, kind=None):
        tok = self.lx.peek()
        return tok.text == text and tok.kind in ((kind,) if kind else ("kw", "sym"))

    def accept(self, text):
        if self.at(text):
            return self.lx.next()
        return None

    def expect(self, text):
        tok = self.lx.peek()
        if not self.at(text):
            found = "end of input" if tok.kind == "eof" else repr(tok.text)
            self.error(f"expected '{text}', found {found}")
        return self.lx.next()

    def ident(self):
        tok = self.lx.peek()
        if tok.kind != "id":
            found = "end of input" if tok.kind == "eof" else repr(tok.text)
            self.error(f"expected identifier, found {found}")
        return self.lx.next().text

    def _reject_unsupported(self):
        tok = self.lx.peek()
        if tok.kind == "id" and tok.text in UNSUPPORTED_WORDS:
            self.error(f"'{tok.text}' not in subset")
        if tok.kind == "num":
            self.error("integer literal not in subset (only constant declarations take numbers)")

    # -- protocol --
    def protocol(self):
        consts, types, vars_ = [], [], []
        rules, starts, invs = [], [], []
        if self.lx.peek().kind == "eof":
            self.error("expected declaration")
        while self.lx.peek().kind != "eof":
            tok = self.lx.peek()
            if self.accept("const"):
                while self.lx.peek().kind == "id":
                    name = self.ident()
                    self.expect(":")
                    num = self.lx.next()
                    if num.kind != "num":
                        self.error("constant value must be a decimal integer", num)
                    consts.append((name, int(num.text)))
                    self.expect(";")
            elif self.accept("type"):
                while self.lx.peek().kind == "id":
                    name = self.ident()
                    self.expect(":")
                    types.append((name, self.type_expr()))
                    self.expect(";")
            elif self.accept("var"):
                while self.lx.peek().kind == "id":
                    name = self.ident()
                    self.expect(":")
                    vars_.append((name, self.type_expr()))
                    self.expect(";")
            elif self.at("ruleset") or self.at("rule") or self.at("startstate"):
                for item in self.rule_items(()):
                    (starts if isinstance(item, StartState) else rules).append(item)
                self.accept(";")
            elif self.at("invariant"):
                start = self.lx.next().span
                name = self.lx.next()
                if name.kind != "str":
                    self.error("expected invariant name string", name)
                expr = self.expr()
                invs.append(InvariantDecl(name.text, expr, start))
                self.accept(";")
            else:
                self._reject_unsupported()
                self.error("expected declaration", tok)
        return ProtocolDef(tuple(consts), tuple(types), tuple(vars_), tuple(rules),
                           tuple(starts), tuple(invs))

    def type_expr(self):
        if self.accept("boolean"):
            return BoolType()
        if self.accept("enum"):
            self.expect("{")
            members = [self.ident()]
            while self.accept(","):
                members.append(self.ident())
            self.expect("}")
            return EnumType(tuple(members))
        if self.accept("scalarset"):
            self.expect("(")
            tok = self.lx.next()
            if tok.kind == "num":
                size = int(tok.text)
            elif tok.kind == "id":
                size = tok.text
            else:
                self.error("expected scalarset size", tok)
            self.expect(")")
            other = False
            if self.accept("with"):
                self.expect("Other")
                other = True
            return ScalarsetType(size, other)
        if self.accept("record"):
            fields = []
            while self.lx.peek().kind == "id":
                fname = self.ident()
                self.expect(":")
                fields.append((fname, self.type_expr()))
                self.expect(";")
            self.expect("end")
            return RecordType(tuple(fields))
        if self.accept("array"):
            self.expect("[")
            idx = self.ident()
            self.expect("]")
            self.expect("of")
            return ArrayType(idx, self.type_expr())
        tok = self.lx.peek()
        if tok.kind == "num":
            self.error("integer subrange types not in subset")
        return TypeRef(self.ident())

    def rule_items(self, params):
        tok = self.lx.peek()
        if self.accept("ruleset"):
            ps = list(params)
            while True:
                var = self.ident()
                self.expect(":")
                ps.append((var, self.ident()))
                if not self.accept(";"):
                    break
            self.expect("do")
            items = []
            while not self.at("end"):
                items.extend(self.rule_items(tuple(ps)))
                self.accept(";")
            self.expect("end")
            if not items:
                self.error("empty ruleset", tok)
            return items
        if self.accept("rule"):
            name = self.lx.next()
            if name.kind != "str":
                self.error("expected rule name string", name)
            guard = BoolLit(True) if self.at("==>") else self.expr()
            self.expect("==>")
            self.accept("begin")
            body = self.stmts()
            self.expect("end")
            return [Rule(name.text, params, guard, body, tok.span)]
        if self.accept("startstate"):
            name = ""
            if self.lx.peek().kind == "str":
                name = self.lx.next().text
            self.accept("begin")
            body = self.stmts()
            self.expect("end")
            return [StartState(name, params, body, tok.span)]
        self._reject_unsupported()
        self.error("expected 'rule', 'ruleset' or 'startstate'")

    def stmts(self):
        out = []
        while not (self.at("end") or self.at("else")):
            if self.accept(";"):
                continue
            out.append(self.stmt())
            if not (self.at("end") or self.at("else")):
                self.expect(";")
        return tuple(out)

    def stmt(self):
        if self.accept("for"):
            var = self.ident()
            self.expect(":")
            typ = self.ident()
            self.expect("do")
            body = self.stmts()
            self.expect("end")
            return For(var, typ, body)
        if self.accept("if"):
            cond = self.expr()
            self.expect("then")
            then = self.stmts()
            orelse = ()
            if self.accept("else"):
                orelse = self.stmts()
            self.expect("end")
            return If(cond, then, orelse)
        if self.accept("undefine"):
            return Undefine(self.designator())
        self._reject_unsupported()
        target = self.designator()
        self.expect(":=")
        if self.accept("{"):
            elem = None if self.at("}") else self.expr()
            self.expect("}")
            return SetAssign(target, elem)
        return Assign(target, self.expr())

    # -- expressions --
    def expr(self):
        left = self.or_expr()
        if self.accept("->"):
            return Implies(left, self.expr())
        return left

    def or_expr(self):
        left = self.and_expr()
        while self.accept("|"):
            left = Or(left, self.and_expr())
        return left

    def and_expr(self):
        left = self.not_expr()
        while self.accept("&"):
            left = And(left, self.not_expr())
        return left

    def not_expr(self):
        if self.accept("!"):
            return Not(self.not_expr())
        return self.cmp_expr()

    def cmp_expr(self):
        left = self.primary()
        for op, cls in (("=", Eq), ("!=", Neq)):
            if self.accept(op):
                if self.accept("{"):
                    self.expect("}")
                    return SetEmpty(left) if cls is Eq else Not(SetEmpty(left))
                return cls(left, self.primary())
        return left

    def primary(self):
        tok = self.lx.peek()
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if self.accept("true"):
            return BoolLit(True)
        if self.accept("false"):
            return BoolLit(False)
        if self.accept("NULL"):
            return NullLit()
        if self.accept("Other"):
            return OtherLit()
        for kw, cls in (("forall", Forall), ("exists", Exists)):
            if self.accept(kw):
                var = self.ident()
                self.expect(":")
                typ = self.ident()
                self.expect("do")
                body = self.expr()
                self.expect("end")
                return cls(var, typ, body)
        if tok.kind == "id":
            return self.designator()
        self._reject_unsupported()
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        self.error(f"expected expression, found {found}")

    def designator(self):
        node = Name(self.ident())
        while True:
            if self.accept("["):
                node = Index(node, self.expr())
                self.expect("]")
            elif self.accept("."):
                node = Field(node, self.ident())
            else:
                return node


def parse_protocol(text, check=True):
    """Parse protocol source; with ``check`` also run static checks."""
    proto = _Parser(text).protocol()
    if check:
        from flowlock.model import check_protocol
        check_protocol(proto)
    return proto


def parse_expr(text):
    p = _Parser(text)
    e = p.expr()
    if p.lx.peek().kind != "eof":
        p.error("unexpected trailing input")
    return e


# -- printing --------------------------------------------------------------

_PREC = {Implies: 1, Or: 2, And: 3, Not: 4, Eq: 5, Neq: 5, SetEmpty: 5}


def _prec(e):
    if isinstance(e, Not) and isinstance(e.operand, SetEmpty):
        return 5
    return _PREC.get(type(e), 6)


def print_expr(e):
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, NullLit):
        return "NULL"
    if isinstance(e, OtherLit):
        return "Other"
    if isinstance(e, Name):
        return e.id
    if isinstance(e, Index):
        return f"{print_expr(e.base)}[{print_expr(e.index)}]"
    if isinstance(e, Field):
        return f"{print_expr(e.base)}.{e.name}"
    if isinstance(e, SetEmpty):
        return f"{print_expr(e.target)} = {{}}"
    if isinstance(e, Not):
        if isinstance(e.operand, SetEmpty):
            return f"{print_expr(e.operand.target)} != {{}}"
        inner = print_expr(e.operand)
        return "!" + (f"({inner})" if _prec(e.operand) < 4 or _prec(e.operand) == 5 else inner)
    if isinstance(e, (Eq, Neq)):
        op = "=" if isinstance(e, Eq) else "!="
        return f"{_wrap(e.left, 6)} {op} {_wrap(e.right, 6)}"
    if isinstance(e, (And, Or)):
        op = " & " if isinstance(e, And) else " | "
        p = _prec(e)
        return _wrap(e.left, p) + op + _wrap(e.right, p + 1)
    if isinstance(e, Implies):
        return _wrap(e.left, 2) + " -> " + _wrap(e.right, 1)
    if isinstance(e, (Forall, Exists)):
        kw = "forall" if isinstance(e, Forall) else "exists"
        return f"{kw} {e.var} : {e.type} do {print_expr(e.body)} end"
    raise TypeError(f"cannot print {e!r}")


def _wrap(e, min_prec):
    s = print_expr(e)
    return f"({s})" if _prec(e) < min_prec else s


def print_type(t, indent=""):
    if isinstance(t, BoolType):
        return "boolean"
    if isinstance(t, EnumType):
        return "enum {" + ", ".join(t.members) + "}"
    if isinstance(t, ScalarsetType):
        return f"scalarset({t.size})" + (" with Other" if t.other else "")
    if isinstance(t, RecordType):
        fields = " ".join(f"{n} : {print_type(ft)};" for n, ft in t.fields)
        return f"record {fields} end"
    if isinstance(t, ArrayType):
        return f"array [{t.index}] of {print_type(t.elem)}"
    if isinstance(t, TypeRef):
        return t.name
    raise TypeError(f"cannot print type {t!r}")


def print_stmts(stmts, indent):
    lines = []
    for s in stmts:
        if isinstance(s, Assign):
            lines.append(f"{indent}{print_expr(s.target)} := {print_expr(s.value)};")
        elif isinstance(s, SetAssign):
            elem = "" if s.elem is None else print_expr(s.elem)
            lines.append(f"{indent}{print_expr(s.target)} := {{{elem}}};")
        elif isinstance(s, Undefine):
            lines.append(f"{indent}undefine {print_expr(s.target)};")
        elif isinstance(s, For):
            lines.append(f"{indent}for {s.var} : {s.type} do")
            lines.extend(print_stmts(s.body, indent + "  "))
            lines.append(f"{indent}end;")
        elif isinstance(s, If):
            lines.append(f"{indent}if {print_expr(s.cond)} then")
            lines.extend(print_stmts(s.then, indent + "  "))
            if s.orelse:
                lines.append(f"{indent}else")
                lines.extend(print_stmts(s.orelse, indent + "  "))
            lines.append(f"{indent}end;")
        else:
            raise TypeError(f"cannot print statement {s!r}")
    return lines


def _ruleset_head(params):
    return "ruleset " + "; ".join(f"{v} : {t}" for v, t in params) + " do "


def pretty_print(proto):
    """Render a ProtocolDef as source text that parses back to an equal tree."""
    out = []
    if proto.consts:
        out.append("const")
        out.extend(f"  {n} : {v};" for n, v in proto.consts)
        out.append("")
    if proto.types:
        out.append("type")
        out.extend(f"  {n} : {print_type(t)};" for n, t in proto.types)
        out.append("")
    if proto.vars:
        out.append("var")
        out.extend(f"  {n} : {print_type(t)};" for n, t in proto.vars)
        out.append("")
    for st in proto.startstates:
        head = _ruleset_head(st.params) if st.params else ""
        name = f' "{st.name}"' if st.name else ""
        out.append(f"{head}startstate{name}")
        out.extend(print_stmts(st.body, "  "))
        out.append("end" + (" end;" if st.params else ";"))
        out.append("")
    for r in proto.rules:
        head = _ruleset_head(r.params) if r.params else ""
        out.append(f'{head}rule "{r.name}"')
        out.append("  " + print_expr(r.guard))
        out.append("==>")
        out.extend(print_stmts(r.body, "  "))
        out.append("end" + (" end;" if r.params else ";"))
        out.append("")
    for inv in proto.invariants:
        out.append(f'invariant "{inv.name}"')
        out.append("  " + print_expr(inv.expr) + ";")
        out.append("")
    return "\n".join(out)


# -- flow / invariant / lemma files ---------------------------------------

@dataclass(frozen=True)
class FlowSpec:
    name: str
    params: tuple        # agent index variable names
    members: tuple       # required member rule names, first-mention order
    edges: frozenset     # (before, after) pairs
    optional: tuple = ()  # members outside instance tracking

    @property
    def all_members(self):
        return self.members + tuple(r for r in self.optional if r not in self.members)

    def predecessors(self, rule):
        """All rules transitively ordered before ``rule``."""
        preds, stack = set(), [rule]
        while stack:
            r = stack.pop()
            for a, b in self.edges:
                if b == r and a not in preds:
                    preds.add(a)
                    stack.append(a)
        return preds

    def minimal(self):
        after = {b for _, b in self.edges}
        return [m for m in self.members if m not in after]


class FlowError(ValueError):
    pass


def _check_acyclic(name, members, edges):
    succ = {m: [] for m in members}
    for a, b in edges:
        succ.setdefault(a, []).append(b)
    state = {}

    def visit(n, path):
        state[n] = 1
        for m in succ.get(n, ()):
            if state.get(m) == 1:
                raise FlowError(f"flow {name}: cyclic order through {m}")
            if not state.get(m):
                visit(m, path + [m])
        state[n] = 2

    for m in list(succ):
        if not state.get(m):
            visit(m, [m])


def parse_flows(text, protocol=None):
    """Parse a flow file into FlowSpec objects.

    ``protocol``, when given, is used to resolve rule names.
    """
    p = _Parser(text, allow_lt=True)
    flows = []
    while p.lx.peek().kind != "eof":
        tok = p.lx.next()
        if tok.text != "flow":
            p.error("expected 'flow'", tok)
        name = p.ident()
        p.expect("(")
        params = [p.ident()]
        while p.accept(","):
            params.append(p.ident())
        p.expect(")")
        p.expect("{")
        members, edges, optional = [], set(), []
        while not p.accept("}"):
            key = p.lx.next()
            p.expect(":")
            if key.text in ("order", "edges"):
                while True:
                    chain = [p.ident()]
                    while p.accept("<"):
                        chain.append(p.ident())
                    for r in chain:
                        if r not in members:
                            members.append(r)
                    edges.update(zip(chain, chain[1:]))
                    if not p.accept(","):
                        break
            elif key.text == "optional":
                optional.append(p.ident())
                while p.accept(","):
                    optional.append(p.ident())
            else:
                p.error(f"unknown flow clause '{key.text}'", key)
            p.expect(";")
        _check_acyclic(name, members, edges)
        flows.append(FlowSpec(name, tuple(params), tuple(members), frozenset(edges), tuple(optional)))
    if protocol is not None:
        bind_flows(flows, protocol)
    return flows


def print_flows(flows):
    """Render flows in the flow-file syntax (parse_flows reads it back unchanged)."""
    out = []
    for fl in flows:
        out.append(f"flow {fl.name}({', '.join(fl.params)}) {{")
        chain = set(zip(fl.members, fl.members[1:]))
        if fl.edges == chain and fl.members:
            out.append(f"  order: {' < '.join(fl.members)};")
        elif fl.members:
            pos = {m: k for k, m in enumerate(fl.members)}
            parts = list(fl.members)
            parts += [f"{a} < {b}" for a, b in sorted(fl.edges, key=lambda e: (pos[e[0]], pos[e[1]]))]
            out.append(f"  order: {', '.join(parts)};")
        if fl.optional:
            out.append(f"  optional: {', '.join(fl.optional)};")
        out.append("}")
        out.append("")
    return "\n".join(out)


def bind_flows(flows, protocol):
    names = {r.name for r in protocol.rules}
    for fl in flows:
        for r in fl.all_members:
            if r not in names:
                raise FlowError(f"flow {fl.name}: unknown rule name '{r}'")
    return flows


@dataclass(frozen=True)
class InvDecl:
    """Parsed form of an ``inv`` block; ``target`` None means all flow rules."""
    name: str
    pred: object
    index: object
    target: tuple = None


@dataclass(frozen=True)
class AssertDecl:
    name: str
    invariant: str


@dataclass(frozen=True)
class LemmaDecl:
    name: str
    var: str
    body: object


def parse_invset(text):
    """Parse an invariant file into (invariants, assertions)."""
    p = _Parser(text)
    invs, asserts = [], []
    while p.lx.peek().kind != "eof":
        tok = p.lx.peek()
        if tok.kind == "id" and tok.text == "inv":
            p.lx.next()
            name, _ = p.lx.raw_name()
            p.expect("{")
            pred, index, target = BoolLit(True), BoolLit(True), None
            while not p.accept("}"):
                key = p.lx.next()
                p.expect(":")
                if key.text == "pred":
                    pred = p.expr()
                elif key.text == "index":
                    index = p.expr()
                elif key.text == "target":
                    if p.accept("["):
                        names = [] if p.at("]") else [p.ident()]
                        while p.accept(","):
                            names.append(p.ident())
                        p.expect("]")
                        target = tuple(names)
                    else:
                        word = p.lx.next()
                        if word.text != "all":
                            p.error("target must be 'all' or a rule list", word)
                else:
                    p.error(f"unknown invariant clause '{key.text}'", key)
                p.expect(";")
            invs.append(InvDecl(name, pred, index, target))
        elif tok.kind == "id" and tok.text == "assert":
            p.lx.next()
            name, span = p.lx.raw_name()
            if not name.endswith("_nonempty"):
                raise ParseError([SourceDiagnostic("error", "assertion names must be <inv>_nonempty", span)])
            p.expect(";")
            asserts.append(AssertDecl(name, name[: -len("_nonempty")]))
        else:
            p.error("expected 'inv' or 'assert'", tok)
    known = {i.name for i in invs}
    for a in asserts:
        if a.invariant not in known:
            raise ParseError([SourceDiagnostic(
                "error", f"assertion {a.name} names unknown invariant {a.invariant}", Span(1, 1, 1, 2))])
    return invs, asserts


def print_invset(invs, asserts):
    out = []
    for inv in invs:
        target = "all" if inv.target is None else "[" + ", ".join(inv.target) + "]"
        out.append(f"inv {inv.name} {{")
        out.append(f"  pred: {print_expr(inv.pred)};")
        out.append(f"  index: {print_expr(inv.index)};")
        out.append(f"  target: {target};")
        out.append("}")
    for a in asserts:
        out.append(f"assert {a.name};")
    return "\n".join(out) + "\n"


def parse_lemmas(text):
    p = _Parser(text)
    out = []
    while p.lx.peek().kind != "eof":
        tok = p.lx.next()
        if tok.text != "lemma":
            p.error("expected 'lemma'", tok)
        name, _ = p.lx.raw_name()
        p.expect("{")
        p.expect("forall")
        var = p.ident()
        p.expect(":")
        body = p.expr()
        p.expect(";")
        p.expect("}")
        out.append(LemmaDecl(name, var, body))
    return out


def print_lemmas(lemmas):
    return "".join(f"lemma {l.name} {{ forall {l.var}: {print_expr(l.body)}; }}\n" for l in lemmas)
