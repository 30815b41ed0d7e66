import pytest

from flowlock import corpus
from flowlock.parser import (FlowError, ParseError, parse_expr, parse_flows, parse_invset,
                             parse_lemmas, parse_protocol, pretty_print, print_expr, print_flows,
                             print_invset, print_lemmas)
from flowlock.syntax import BoolLit, ProtocolDef


def test_published_german_parses():
    p = parse_protocol(corpus.read("german", "published.proto.m"))
    assert len(p.rules) == 12
    assert [d.name for d in p.invariants] == ["CtrlProp", "DataProp"]


def test_empty_input_is_diagnosed():
    with pytest.raises(ParseError) as exc:
        parse_protocol("")
    d = exc.value.diagnostics[0]
    assert "expected declaration" in d.message
    assert d.span.line >= 1 and d.span.col >= 1


def test_top_level_rule_has_no_params():
    p = parse_protocol('rule "X" true ==> end;')
    assert len(p.rules) == 1
    assert p.rules[0].params == () and p.rules[0].guard == BoolLit(True)


def test_integer_arithmetic_is_outside_the_subset():
    src = "var x : boolean;\nrule \"X\" 1 + 1 = 2 ==> end;"
    with pytest.raises(ParseError) as exc:
        parse_protocol(src)
    assert any("not in subset" in d.message for d in exc.value.diagnostics)


def test_unsupported_keyword_named():
    with pytest.raises(ParseError) as exc:
        parse_protocol('procedure P(); begin end;')
    assert "procedure" in str(exc.value)


def test_type_error_reports_location():
    src = "type E : enum {A, B};\nvar x : E; y : boolean;\nrule \"R\" x = true ==> end;"
    with pytest.raises(Exception) as exc:
        parse_protocol(src)
    assert "3" in str(exc.value)


@pytest.mark.parametrize("entry,name", [(e, f) for e, f in corpus.corpus_files()])
def test_corpus_roundtrip(entry, name):
    assert corpus.roundtrip(name, corpus.read(entry, name))


def test_pretty_print_fixpoint_text():
    p = parse_protocol(corpus.read("german", "model.proto.m"))
    once = pretty_print(p)
    assert pretty_print(parse_protocol(once)) == once


def test_empty_protocol_prints_empty_and_is_rejected():
    # the empty text is not a valid protocol, so this is the one non-round-trip
    assert pretty_print(ProtocolDef()) == ""
    with pytest.raises(ParseError):
        parse_protocol("")


def test_german_flows():
    fl = parse_flows(corpus.read("german", "flows.flw"))
    assert [f.name for f in fl] == ["Exclusive", "Shared", "Invalidate"]
    ex = fl[0]
    assert ex.members == ("SendReqE", "RecvReqE", "SendGntE", "RecvGntE")
    assert ex.edges == {("SendReqE", "RecvReqE"), ("RecvReqE", "SendGntE"), ("SendGntE", "RecvGntE")}
    assert ex.minimal() == ["SendReqE"]
    assert ex.optional == ("Store",)


def test_flow_cycle_rejected():
    with pytest.raises(FlowError, match="cycl"):
        parse_flows("flow F(i) { order: A < B; edges: B < A; }")


def test_flow_unknown_rule_rejected(german):
    with pytest.raises(FlowError, match="unknown rule"):
        parse_flows("flow F(i) { order: SendReqE < Nope; }", german)


def test_flow_edges_union_and_print():
    fl = parse_flows("flow F(i) { order: A < B; edges: A < C, C < D; }")
    assert fl[0].edges == {("A", "B"), ("A", "C"), ("C", "D")}
    assert fl[0].predecessors("D") == {"A", "C"}
    assert parse_flows(print_flows(fl)) == fl


def test_final_invset_file():
    invs, asserts = parse_invset(corpus.read("german", "final.invs"))
    assert [i.name for i in invs] == ["inv-1.1", "inv-1.2.1", "inv-1.2.2"]
    assert [a.invariant for a in asserts] == ["inv-1.2.1", "inv-1.2.2"]
    assert parse_invset(print_invset(invs, asserts)) == (invs, asserts)


def test_identity_lemma():
    (lem,) = parse_lemmas("lemma id { forall i: true; }")
    assert lem.name == "id" and lem.var == "i" and lem.body == BoolLit(True)
    assert parse_lemmas(print_lemmas([lem])) == [lem]


def test_expression_printing_keeps_precedence():
    for text in ["a & (b | c)", "!(a = b) -> c", "(a -> b) -> c", "forall j : NODE do S[j] = false end"]:
        e = parse_expr(text)
        assert parse_expr(print_expr(e)) == e
