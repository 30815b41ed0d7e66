"""Randomized properties (hypothesis) over the German vocabulary."""
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from flowlock.abstraction import nnf, simplify
from flowlock.explorer import reachable_states
from flowlock.parser import parse_expr, print_expr
from flowlock.selftest import prop_frame_locality, prop_pack_canon, prop_symmetry
from flowlock.syntax import And, Eq, Exists, Forall, Implies, Neq, Not, Or

ATOMS = [
    "ExGntd = true", "CurCmd = Empty", "CurCmd = ReqS", "CurCmd = ReqE",
    "Chan1[i].Cmd = Empty", "Chan2[j].Cmd = GntE", "Cache[i].State = I", "Cache[j].State = E",
    "ShrSet[i] = true", "InvSet[j] = false", "ShrSet = {}", "ShrSet != {}", "i = j",
    "forall k : NODE do ShrSet[k] = false end", "exists k : NODE do Chan3[k].Cmd = InvAck end",
]

atoms = st.sampled_from(ATOMS).map(parse_expr)
exprs = st.recursive(
    atoms,
    lambda sub: st.one_of(
        sub.map(Not),
        st.tuples(sub, sub).map(lambda p: And(*p)),
        st.tuples(sub, sub).map(lambda p: Or(*p)),
        st.tuples(sub, sub).map(lambda p: Implies(*p)),
    ),
    max_leaves=8,
)


@pytest.fixture(scope="module")
def states2(g2):
    return sorted(reachable_states(g2))


@given(exprs)
def test_print_parse_roundtrip(e):
    assert parse_expr(print_expr(e)) == e


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(e=exprs, k=st.integers(0, 3677), i=st.integers(1, 2), j=st.integers(1, 2))
def test_compiled_predicate_matches_interpreter(g2, states2, e, k, i, j):
    s = states2[k]
    f = g2.compile_predicate(e, (("i", "NODE"), ("j", "NODE")))
    assert f(s, (i, j)) == g2.eval_expr(s, {"i": i, "j": j}, e)


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(e=exprs, k=st.integers(0, 3677), i=st.integers(1, 2), j=st.integers(1, 2))
def test_nnf_and_simplify_preserve_meaning(g2, states2, e, k, i, j):
    s = states2[k]
    env = {"i": i, "j": j}
    want = g2.eval_expr(s, env, e)
    n = nnf(e)
    assert g2.eval_expr(s, env, n) == want
    assert g2.eval_expr(s, env, simplify(e)) == want
    assert not _has_nested_not(n)


def _has_nested_not(e):
    """A negation applied to anything but a plain atom."""
    if isinstance(e, Not):
        return isinstance(e.operand, (Not, And, Or, Implies, Eq, Neq, Forall, Exists))
    if isinstance(e, (And, Or, Implies)):
        return _has_nested_not(e.left) or _has_nested_not(e.right)
    if isinstance(e, (Forall, Exists)):
        return _has_nested_not(e.body)
    return False


@pytest.fixture(scope="module")
def states3(g3):
    return sorted(reachable_states(g3))


@settings(max_examples=20, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(ks=st.lists(st.integers(0, 76787), min_size=1, max_size=25), seed=st.integers(0, 10 ** 6))
def test_selftest_properties_on_random_samples(g3, states3, ks, seed):
    states = [states3[k] for k in ks]
    assert prop_frame_locality(g3, states).ok
    assert prop_symmetry(g3, states, seed).ok
    assert prop_pack_canon(g3, states, seed).ok
