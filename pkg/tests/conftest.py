import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

import oracle_german as og  # noqa: E402
from flowlock import corpus
from flowlock.explorer import Trace
from flowlock.invariants import load_invset
from flowlock.model import GroundModel
from flowlock.parser import parse_flows, parse_protocol


@pytest.fixture(scope="session")
def german():
    return parse_protocol(corpus.read("german", "model.proto.m"))


@pytest.fixture(scope="session")
def buggy():
    return parse_protocol(corpus.read("german_buggy", "model.proto.m"))


@pytest.fixture(scope="session")
def mutant():
    return parse_protocol(corpus.read("german_mutant", "model.proto.m"))


@pytest.fixture(scope="session")
def flows(german):
    return parse_flows(corpus.read("german", "flows.flw"), german)


@pytest.fixture(scope="session")
def g2(german):
    return GroundModel(german, 2)


@pytest.fixture(scope="session")
def g3(german):
    return GroundModel(german, 3)


@pytest.fixture(scope="session")
def invsets(german):
    return {name: load_invset(corpus.read("german", f"{name}.invs"), german)
            for name in ("inv1", "split1", "final", "final_no_1_1")}


def instance(model, label):
    """RuleInstance from a label like 'SendReqE(1)' or 'Store(1,2)'."""
    for ri in model.rule_instances:
        if ri.label() == label:
            return ri
    raise KeyError(label)


def run_labels(model, labels, start=0):
    """Fire the labelled instances from an initial state; returns a Trace."""
    init = model.initial_states()[start]
    s, steps = init, []
    for lbl in labels:
        ri = instance(model, lbl)
        assert model.enabled(s, ri), f"{lbl} not enabled"
        s = model.fire(s, ri)
        steps.append(ri)
    return Trace(init, steps, s, "")


def decode(model, s, n):
    """Read a package state back as an oracle tuple (by slot path)."""
    def v(p):
        x = model.lookup(s, p)
        return None if x in ("Undefined", "null") else x

    def d(p):
        x = v(p)
        return None if x is None else int(x)

    def b(p):
        return v(p) == "true"
    r = range(1, n + 1)
    return og.freeze(dict(
        cache=tuple((v(f"Cache[{i}].State"), d(f"Cache[{i}].Data")) for i in r),
        ch1=tuple((v(f"Chan1[{i}].Cmd"), d(f"Chan1[{i}].Data")) for i in r),
        ch2=tuple((v(f"Chan2[{i}].Cmd"), d(f"Chan2[{i}].Data")) for i in r),
        ch3=tuple((v(f"Chan3[{i}].Cmd"), d(f"Chan3[{i}].Data")) for i in r),
        inv=tuple(b(f"InvSet[{i}]") for i in r), shr=tuple(b(f"ShrSet[{i}]") for i in r),
        exg=b("ExGntd"), cmd=v("CurCmd"), ptr=d("CurPtr"), mem=d("MemData"), aux=d("AuxData"),
        sharer=d("Sharer")))


# -- acceptance summary --------------------------------------------------------

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, text = mark.args
    ok = rep.passed and not hasattr(rep, "wasxfail")
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        prev = _ACCEPTANCE.get(n, (True, text))
        _ACCEPTANCE[n] = (prev[0] and ok, text)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, text = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {text}")
