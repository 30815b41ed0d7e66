"""Property suites behind ``flowlock selftest``.

Each property returns a PropertyResult; ``run_selftest`` prints one line per
property and returns True iff all hold.
"""
from __future__ import annotations

import os
import random
import re
import sys
from dataclasses import dataclass

from flowlock import corpus
from flowlock.explorer import _symmetry, reach, reachable_states
from flowlock.flows import replay_flows
from flowlock.invariants import load_invset, suite
from flowlock.model import GroundModel
from flowlock.parser import parse_flows, parse_protocol
from flowlock.syntax import Assign, Field, For, If, Index, Name, SetAssign, Undefine


@dataclass
class PropertyResult:
    name: str
    ok: bool
    checked: int
    detail: str = ""

    def line(self):
        tail = f" ({self.detail})" if self.detail else ""
        return f"{'PASS' if self.ok else 'FAIL'} {self.name}: {self.checked} checked{tail}"


def german(n, entry="german"):
    return GroundModel(parse_protocol(corpus.read(entry, "model.proto.m")), n)


def sample_states(model, k, seed=0):
    states = sorted(reachable_states(model))
    rng = random.Random(seed)
    return states if k >= len(states) else rng.sample(states, k)


# -- exec_action ---------------------------------------------------------------

def _target_pattern(e, env):
    """(var, [index value or None], [field names]) written by an assignment target."""
    fields, idx = [], []
    while not isinstance(e, Name):
        if isinstance(e, Field):
            fields.insert(0, e.name)
            e = e.base
        elif isinstance(e, Index):
            i = e.index
            idx.insert(0, env[i.id] if isinstance(i, Name) and isinstance(env.get(i.id), int) else None)
            e = e.base
        else:
            return None
    return e.id, idx, fields


def write_patterns(body, env):
    out = []
    for st in body:
        if isinstance(st, (Assign, Undefine, SetAssign)):
            out.append(_target_pattern(st.target, env))
        elif isinstance(st, For):
            inner = dict(env)
            inner[st.var] = None
            out += write_patterns(st.body, inner)
        elif isinstance(st, If):
            out += write_patterns(st.then, env) + write_patterns(st.orelse, env)
    return out


_BRACKETS = re.compile(r"\[[^\]]*\]")


def writable_slots(model, ri):
    """Slots the action of ``ri`` may write, from its syntax alone."""
    pats = write_patterns(ri.rule.body, ri.env)
    out = set()
    for slot in model.slots:
        fields = _BRACKETS.sub("", slot.path).split(".")[1:]
        for pat in pats:
            if pat is None:
                return set(range(len(model.slots)))
            var, idx, pf = pat
            if slot.var != var or fields[:len(pf)] != pf:
                continue
            if all(v is None or v == c[1] for v, c in zip(idx, slot.coords)):
                out.add(slot.index)
                break
    return out


def prop_frame_locality(model, states):
    """Firing r(i) writes only its syntactic write set and no other agent's locals."""
    succ = model.compiled.successors
    cache = {}
    bad = []
    for s in states:
        for k, t in succ(s):
            ri = model.rule_instances[k]
            w = cache.get(k)
            if w is None:
                w = cache[k] = writable_slots(model, ri)
            for j, (a, b) in enumerate(zip(s, t)):
                if a == b:
                    continue
                slot = model.slots[j]
                if j not in w:
                    bad.append(f"{ri.label()} wrote {slot.path} outside its frame")
                elif slot.local and ri.agent is not None and slot.agent != ri.agent:
                    bad.append(f"{ri.label()} wrote local {slot.path} of agent {slot.agent}")
    return PropertyResult("exec_action frame and locality", not bad, len(states), "; ".join(bad[:3]))


def prop_symmetry(model, states, seed=0):
    """Successor sets commute with scalarset permutations."""
    sym = _symmetry(model)
    succ = model.compiled.successors
    rng = random.Random(seed)
    bad = 0
    for s in states:
        k = rng.randrange(len(sym.funcs))
        perm = sym.funcs[k]
        lhs = {t for _, t in succ(perm(s))}
        rhs = {perm(t) for _, t in succ(s)}
        bad += lhs != rhs
    return PropertyResult("exec_action symmetry", bad == 0, len(states), f"{bad} mismatches" if bad else "")


def prop_pack_canon(model, states, seed=0):
    sym = _symmetry(model)
    rng = random.Random(seed)
    bad = []
    for s in states:
        if model.unpack(model.pack(s)) != s:
            bad.append("pack/unpack")
        c = sym.canonicalize(s)
        if sym.canonicalize(c) != c:
            bad.append("canonicalize not idempotent")
        img = sym.funcs[rng.randrange(len(sym.funcs))](s)
        if sym.canonicalize(img) != c:
            bad.append("canonical form differs on a symmetric image")
    return PropertyResult("pack/unpack and canonicalization idempotence", not bad, len(states),
                          "; ".join(sorted(set(bad))))


# -- flow replay ---------------------------------------------------------------

def corpus_traces(max_n=3):
    """Failing traces of the corpus checks (with several witnesses each)."""
    flows_text = corpus.read("german", "flows.flw")
    jobs = [("german", "inv1.invs"), ("german", "split1.invs"), ("german_buggy", "final.invs")]
    out = []
    for entry, invs in jobs:
        for n in range(2, max_n + 1):
            proto = parse_protocol(corpus.read(entry, "model.proto.m"))
            flows = parse_flows(flows_text, proto)
            inv = load_invset(corpus.read("german", invs), proto)
            model = GroundModel(proto, n)
            rep = reach(model, suite(inv, flows), max_witnesses=10)
            for r in rep.results.values():
                out += [(model, flows, t) for t in r.witnesses]
    return out


def prop_replay(traces):
    """Replay never un-fires a rule, and every attributed rule had its predecessors fired."""
    bad = []
    for model, flows, trace in traces:
        rep = replay_flows(trace, flows, infer_prefix=True)
        before = {}
        for step, (ri, inst, snap) in enumerate(zip(trace.steps, rep.attribution, rep.history), 1):
            now = {x.serial: dict(x.fired) for x in snap}
            for serial, fired in before.items():
                cur = now.get(serial)
                if cur is None or any(v and not cur[r] for r, v in fired.items()):
                    bad.append(f"step {step}: instance {serial} lost fired rules")
            if inst is not None:
                prev = before.get(inst.serial)
                if inst.agent != ri.agent or ri.name not in inst.flow.members:
                    bad.append(f"step {step}: {ri.label()} attributed to {inst.label()}")
                if prev is not None:
                    if prev[ri.name]:
                        bad.append(f"step {step}: {ri.name} fired twice in one instance")
                    if not all(prev[p] for p in inst.flow.predecessors(ri.name)):
                        bad.append(f"step {step}: {ri.name} fired before its predecessors")
                elif not inst.inferred and ri.name not in inst.flow.minimal():
                    bad.append(f"step {step}: {inst.label()} opened at non-minimal {ri.name}")
            before = now
    return PropertyResult("replay monotonicity and precondition soundness", not bad, len(traces),
                          "; ".join(bad[:3]))


# -- verdict equalities --------------------------------------------------------

def _check_runs(max_n):
    def select(run):
        a = run["args"]
        return a[0] == "check" and int(a[a.index("--n") + 1]) <= max_n
    return select


def _verdicts(extra, max_n):
    out = {}
    for name in corpus.entries():
        for r in corpus.run_entry(name, extra_args=extra, select=_check_runs(max_n)):
            out[(name, r.run)] = (r.exit_code, r.observed)
    return out


def _strip(args):
    return [a for a in args if a != "--sym"]


def prop_sym_equality(max_n=3):
    plain, sym = {}, {}
    for name in corpus.entries():
        for run in corpus.manifest(name).get("runs", []):
            if not _check_runs(max_n)(run):
                continue
            args = _strip(run["args"])
            plain[(name, run["id"])] = _run_args(name, args)
            sym[(name, run["id"])] = _run_args(name, args + ["--sym"])
    bad = [f"{k[0]}/{k[1]}" for k in plain if plain[k] != sym[k]]
    return PropertyResult("verdicts equal with symmetry on/off", not bad, len(plain), ", ".join(bad))


def _run_args(name, args):
    import contextlib
    import io
    import json
    import tempfile
    from flowlock.cli import main
    base = corpus.entry_dir(name)
    fd, tmp = tempfile.mkstemp(suffix=".json")
    os.close(fd)
    try:
        with contextlib.redirect_stdout(io.StringIO()), contextlib.redirect_stderr(io.StringIO()):
            code = main(corpus._resolve(args, base) + ["--json", tmp])
        with open(tmp, encoding="utf-8") as fh:
            payload = json.load(fh)
    finally:
        os.unlink(tmp)
    return code, corpus._observed(payload)


def prop_worker_equality(max_n=3, workers=None):
    # at least two workers so the process pool path really runs
    workers = max(2, workers or os.cpu_count() or 1)
    one = _verdicts(["--workers", "1"], max_n)
    many = _verdicts(["--workers", str(workers)], max_n)
    bad = [f"{k[0]}/{k[1]}" for k in one if one[k] != many.get(k)]
    return PropertyResult(f"verdicts equal with --workers 1 and {workers}", not bad, len(one), ", ".join(bad))


def run_selftest(samples=1000, quick=False, workers=None, out=None, seed=0):
    out = out or sys.stdout
    max_n = 2 if quick else 3
    model = german(3)
    states = sample_states(model, min(samples, 200) if quick else samples, seed)
    props = [
        lambda: prop_frame_locality(model, states),
        lambda: prop_symmetry(model, states, seed),
        lambda: prop_pack_canon(model, states, seed),
        lambda: prop_replay(corpus_traces(max_n)),
        lambda: prop_sym_equality(max_n),
        lambda: prop_worker_equality(max_n, workers),
    ]
    ok = True
    for p in props:
        res = p()
        print(res.line(), file=out, flush=True)
        ok &= res.ok
    print("selftest: " + ("OK" if ok else "FAILED"), file=out)
    return ok
