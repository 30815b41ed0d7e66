import random

import pytest

import oracle_german as og
from conftest import decode, instance, run_labels
from flowlock.model import GroundModel, StaticTypeError, UndefinedRead, instantiate
from flowlock.parser import parse_expr, parse_protocol


def test_instance_count(g2):
    # 11 agent rules over NODE, Store over NODE x DATA
    assert len(g2.rule_instances) == 11 * 2 + 2 * 2
    assert [ri.label() for ri in g2.instances_of("Store")] == ["Store(1,1)", "Store(1,2)", "Store(2,1)", "Store(2,2)"]


def test_initial_states(g2):
    inits = g2.initial_states()
    assert len(inits) == 2
    s = inits[0]
    assert g2.lookup(s, "ExGntd") == "false"
    assert g2.lookup(s, "CurCmd") == "Empty"
    assert g2.lookup(s, "CurPtr") == "null"
    assert g2.lookup(s, "Cache[1].State") == "I"
    assert g2.lookup(s, "Cache[1].Data") == "Undefined"
    assert {g2.lookup(t, "MemData") for t in inits} == {"1", "2"}


def test_initially_enabled(g2):
    s = g2.initial_states()[0]
    on = [ri.label() for ri in g2.rule_instances if g2.enabled(s, ri)]
    assert on == ["SendReqS(1)", "SendReqS(2)", "SendReqE(1)", "SendReqE(2)"]


def test_send_and_recv_req_e(g2):
    t = run_labels(g2, ["SendReqE(1)"])
    assert g2.lookup(t.final, "Chan1[1].Cmd") == "ReqE"
    t = run_labels(g2, ["SendReqE(1)", "RecvReqE(1)"])
    s = t.final
    assert g2.lookup(s, "CurCmd") == "ReqE"
    assert g2.lookup(s, "CurPtr") == "1"
    assert g2.lookup(s, "Chan1[1].Cmd") == "Empty"
    assert g2.lookup(s, "InvSet[2]") == "false"


def test_short_circuit_and_undefined_read(g2):
    s = g2.initial_states()[0]
    env = {"i": 1, "d": 1}
    ok = parse_expr("Cache[i].State = E & Cache[i].Data = d")
    assert g2.eval_expr(s, env, ok) is False
    bad = parse_expr("Cache[i].Data = d")
    with pytest.raises(UndefinedRead):
        g2.eval_expr(s, env, bad)


def test_eval_values(g2):
    s = g2.initial_states()[1]
    assert g2.eval_expr(s, {}, parse_expr("CurCmd")) == "Empty"
    assert g2.eval_expr(s, {}, parse_expr("MemData")) == 2
    assert g2.eval_expr(s, {}, parse_expr("CurPtr")) is None
    assert g2.eval_expr(s, {"i": 2}, parse_expr("forall j : NODE do ShrSet[j] = false end"))


def test_instantiate_bounds(german):
    with pytest.raises(ValueError):
        instantiate(german, 0)
    assert instantiate(german, 1).n == 1


def test_static_type_error():
    src = "type E : enum {A, B};\nvar x : E;\nrule \"R\" x = true ==> end;"
    with pytest.raises(StaticTypeError):
        GroundModel(parse_protocol(src, check=False), 1)


def test_pack_roundtrip(g3):
    s = run_labels(g3, ["SendReqE(2)", "RecvReqE(2)", "SendGntE(2)", "RecvGntE(2)", "Store(2,1)"]).final
    assert g3.unpack(g3.pack(s)) == s


@pytest.mark.parametrize("n", [2, 3])
def test_random_walks_agree_with_oracle(german, n):
    model = GroundModel(german, n)
    rng = random.Random(n)
    for start in range(2):
        for _ in range(30):
            s = model.initial_states()[start]
            for _ in range(25):
                o = decode(model, s, n)
                want = og.successors(o, n)
                got = [(ri.label(), model.fire(s, ri)) for ri in model.rule_instances if model.enabled(s, ri)]
                assert [lbl for lbl, _ in got] == [lbl for lbl, _ in want]
                for (_, t), (_, u) in zip(got, want):
                    assert decode(model, t, n) == u
                # compiled route agrees with the interpreter
                assert [t for _, t in model.compiled.successors(s)] == [t for _, t in got]
                if not got:
                    break
                s = rng.choice(got)[1]


def test_guard_compiled_matches_interpreter(g2):
    ri = instance(g2, "SendGntE(1)")
    for labels in ([], ["SendReqE(1)", "RecvReqE(1)"], ["SendReqS(2)", "RecvReqS(2)", "SendGntS(2)",
                                                          "SendReqE(1)"]):
        s = run_labels(g2, labels).final
        assert g2.enabled(s, ri) == (ri.index in {k for k, _ in g2.compiled.successors(s)})


def test_sharer_is_write_only(german):
    """Dropping the Sharer auxiliary (and the set sugar) leaves reachability unchanged."""
    from flowlock import corpus
    from flowlock.explorer import reachable_states
    plain = GroundModel(parse_protocol(corpus.read("german", "published.proto.m")), 3)
    aux = GroundModel(german, 3)
    keep = [aux.slot_by_path[p] for p in plain.paths]
    projected = {tuple(s[k] for k in keep) for s in reachable_states(aux)}
    assert projected == reachable_states(plain)
    for r in german.rules:
        assert "Sharer" not in repr(r.guard)
