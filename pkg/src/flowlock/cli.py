"""Command-line front end: ``flowlock <command> ...``.

Exit codes: 0 all checks pass, 1 some check fails, 2 usage or model error,
3 memory budget exceeded.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from flowlock import abstraction as ab
from flowlock import invariants as iv
from flowlock.explorer import (DEFAULT_BUDGET, DeclaredInvariant, ExplorationError, OutOfBudget,
                               SDeadlock, reach)
from flowlock.flows import UnattributableRule, blocked_footer
from flowlock.model import EvalError, GroundModel, StaticTypeError, UndefinedRead
from flowlock.parser import (FlowError, ParseError, parse_expr, parse_flows, parse_lemmas, parse_protocol,
                             pretty_print)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _read(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def load_model(path):
    return parse_protocol(_read(path))


def load_flows(path, protocol):
    return parse_flows(_read(path), protocol) if path else None


def load_invs(path, protocol):
    return iv.load_invset(_read(path), protocol) if path else None


def load_lemmas(path):
    return parse_lemmas(_read(path)) if path else []


def _workers(args):
    w = getattr(args, "workers", None)
    if w is None:
        env = os.environ.get("FLOWLOCK_WORKERS")
        if env:
            w = env
    if w is None or str(w) == "max":
        return os.cpu_count() or 1
    try:
        w = int(w)
    except ValueError:
        raise UsageError(f"bad worker count {w!r}") from None
    if w < 1:
        raise UsageError("--workers must be >= 1")
    return w


def _instance(protocol, n):
    if n is None or n < 1:
        raise UsageError(f"--n must be a positive integer, got {n}")
    return GroundModel(protocol, n)


def _emit_json(args, payload):
    if getattr(args, "json", None):
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
        if args.json == "-":
            sys.stdout.write(text)
        else:
            with open(args.json, "w", encoding="utf-8") as fh:
                fh.write(text)


def _select_declared(protocol, props):
    if props is None:
        return list(protocol.invariants)
    names = [p for p in props.split(",") if p]
    known = {d.name: d for d in protocol.invariants}
    missing = [n for n in names if n not in known]
    if missing:
        raise UsageError(f"no declared invariant {', '.join(missing)}")
    return [known[n] for n in names]


def _footers(model, report, flows, invset):
    out = {}
    if not flows:
        return out
    for name, r in report.results.items():
        if r.trace is None:
            continue
        agent = None
        if invset is not None and name in invset.names():
            agent = r.detail if isinstance(r.detail, int) and not isinstance(r.detail, bool) else None
        elif name != "s-deadlock":
            continue
        try:
            out[name] = blocked_footer(model, r.trace.final, r.trace, flows, agent)
        except UnattributableRule as exc:
            out[name] = [f"UNATTRIBUTABLE {exc}"]
    return out


# -- commands ----------------------------------------------------------------

def cmd_check(args):
    protocol = load_model(args.model)
    model = _instance(protocol, args.n)
    flows = load_flows(args.flows, protocol)
    invset = load_invs(args.invs, protocol)
    checks = [DeclaredInvariant(d) for d in _select_declared(protocol, args.props)]
    if invset is not None:
        checks += iv.suite(invset, flows)
        if args.coverage:
            checks.append(iv.CoverageCheck(tuple(i.pred for i in invset.invariants)))
    if args.sdeadlock:
        checks.append(SDeadlock())
    report = reach(model, checks, symmetry=args.sym, fail_fast=args.fail_fast,
                   budget=args.budget, workers=_workers(args))
    print(report.format(model, _footers(model, report, flows, invset)))
    payload = report.to_json(model, timing=False)
    if args.sdeadlock and invset is not None:
        inv_ok = all(report.results[c.name].passed for c in checks if c.kind in ("invariant", "assertion")
                     and not isinstance(c, DeclaredInvariant))
        sd_ok = report.results["s-deadlock"].passed
        payload["oracle"] = "INCONSISTENT" if inv_ok and not sd_ok else "CONSISTENT"
        print(f"theorem oracle: {payload['oracle']}")
    _emit_json(args, payload)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_derive(args):
    protocol = load_model(args.model)
    model = _instance(protocol, args.n)
    flows = load_flows(args.flows, protocol)
    invset = load_invs(args.invs, protocol)
    report = reach(model, iv.suite(invset, flows), symmetry=args.sym,
                   budget=args.budget, workers=_workers(args))
    for inv in invset.invariants:
        r = report.results[inv.name]
        if not r.passed:
            print(r.trace.format(model))
            diag = iv.derive_diagnostics(model, r.trace, flows, inv)
            print(diag.format())
            _emit_json(args, {"schema": 1, "verdict": "fail", "diagnosis": diag.to_json(),
                              "trace": r.trace.to_json(model)})
            return EXIT_FAIL
    failed = [a.name for a in invset.assertions if not report.results[a.name].passed]
    if failed:
        for name in failed:
            print(report.results[name].trace.format(model))
        _emit_json(args, {"schema": 1, "verdict": "fail", "assertions": failed})
        return EXIT_FAIL
    print(f"all invariants hold (N={model.n}, {report.visited} states)")
    _emit_json(args, {"schema": 1, "verdict": "pass", "visited": report.visited})
    return EXIT_OK


def cmd_split(args):
    if (args.ptr is None) == (args.member is None):
        raise UsageError("give exactly one of --ptr or --member")
    protocol = load_model(args.model) if args.model else None
    invset = iv.load_invset(_read(args.invs), protocol)
    if args.inv not in invset.names():
        raise UsageError(f"no invariant {args.inv} in {args.invs}")
    member = parse_expr(args.member) if args.member else None
    req = iv.SplitRequest(args.inv, parse_expr(args.conf), args.ptr, member)
    names = tuple(args.names.split(",")) if args.names else None
    if names is not None and len(names) != 2:
        raise UsageError("--names takes two comma-separated names")
    out = iv.split_in_set(invset, req, protocol, names)
    new = [i for i in out.invariants if i.name not in invset.names()]
    for inv in new:
        print(iv.InvSet([inv]).text().rstrip())
    text = out.text()
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_abstract(args):
    protocol = load_model(args.model)
    lemmas = load_lemmas(args.lemmas)
    abstract = ab.data_type_reduce(ab.strengthen(protocol, lemmas), args.c, elide=not args.no_elide)
    text = pretty_print(abstract)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_cmp(args):
    protocol = load_model(args.model)
    flows = load_flows(args.flows, protocol)
    invset = load_invs(args.invs, protocol) or iv.InvSet()
    lemmas = load_lemmas(args.lemmas)
    declared = [d.name for d in _select_declared(protocol, args.props)] if args.props else []
    res = ab.cmp_iterate(protocol, invset, lemmas, args.c, flows, declared=declared,
                         symmetry=args.sym, fail_fast=not args.all, budget=args.budget,
                         workers=_workers(args))
    for a in ab.abstract_invariants(invset, args.c, flows, protocol):
        print(f"  {a.name}: {a.text}")
    stopped = "" if res.report.complete else " (stopped at the first failing layer)"
    print(f"abstract model: c={args.c} + Other, {res.report.visited} states, "
          f"{res.report.transitions} transitions{stopped}")
    for name, r in res.report.results.items():
        print(f"{name}: {r.verdict.upper()}")
    t = res.trace()
    if t is not None:
        print(t.format(res.model))
        steps = res.other_steps()
        print(f"Other fired at steps {steps}" if steps else "Other did not fire")
    print(f"CMP: {res.verdict.upper()}")
    payload = res.report.to_json(res.model, timing=False)
    payload["verdict"] = res.verdict
    payload["c"] = args.c
    _emit_json(args, payload)
    return EXIT_OK if res.passed else EXIT_FAIL


def cmd_selftest(args):
    from flowlock.selftest import run_selftest
    ok = run_selftest(samples=args.samples, quick=args.quick, workers=_workers(args), out=sys.stdout)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_corpus(args):
    from flowlock.corpus import corpus_verify
    report = corpus_verify(names=args.names or None, out=sys.stdout)
    _emit_json(args, report.to_json())
    return EXIT_OK if report.ok else EXIT_FAIL


# -- argument parsing --------------------------------------------------------------

def _budget(text):
    units = {"k": 1024, "m": 1024 ** 2, "g": 1024 ** 3}
    t = text.strip().lower().rstrip("ib")
    mult = 1
    if t and t[-1] in units:
        mult, t = units[t[-1]], t[:-1]
    try:
        return int(float(t) * mult)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad budget {text!r}") from None


def build_parser():
    p = argparse.ArgumentParser(prog="flowlock", description="s-deadlock checking with flow-derived invariants")
    sub = p.add_subparsers(dest="command", required=True)

    def explore_opts(sp):
        sp.add_argument("--sym", action="store_true", help="scalarset symmetry reduction")
        sp.add_argument("--budget", type=_budget, default=DEFAULT_BUDGET, help="memory budget (e.g. 4G)")
        sp.add_argument("--workers", default=None, help="worker processes (integer or 'max')")
        sp.add_argument("--json", help="write the JSON report here ('-' for stdout)")

    sp = sub.add_parser("check", help="explore an instance and check properties")
    sp.add_argument("model")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--flows")
    sp.add_argument("--invs")
    sp.add_argument("--props", help="comma-separated declared invariants (default: all)")
    sp.add_argument("--sdeadlock", action="store_true")
    sp.add_argument("--coverage", action="store_true", help="check that the invariant preds cover every state")
    sp.add_argument("--fail-fast", action="store_true")
    explore_opts(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("derive", help="diagnose the first failing invariant")
    sp.add_argument("model")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--flows", required=True)
    sp.add_argument("--invs", required=True)
    explore_opts(sp)
    sp.set_defaults(func=cmd_derive)

    sp = sub.add_parser("split", help="split an invariant on a conflict condition")
    sp.add_argument("--invs", required=True)
    sp.add_argument("--inv", required=True)
    sp.add_argument("--conf", required=True)
    sp.add_argument("--ptr")
    sp.add_argument("--member")
    sp.add_argument("--names", help="names of the two halves, comma-separated")
    sp.add_argument("--model", help="protocol for type checking")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_split)

    sp = sub.add_parser("abstract", help="emit the data-type-reduced model")
    sp.add_argument("model")
    sp.add_argument("--c", type=int, required=True)
    sp.add_argument("--lemmas")
    sp.add_argument("--no-elide", action="store_true")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_abstract)

    sp = sub.add_parser("cmp", help="one CMP iteration on the abstract model")
    sp.add_argument("model")
    sp.add_argument("--c", type=int, default=2)
    sp.add_argument("--invs")
    sp.add_argument("--flows")
    sp.add_argument("--lemmas")
    sp.add_argument("--props", help="declared invariants to include, comma-separated")
    sp.add_argument("--all", action="store_true", help="keep exploring after the first failure")
    explore_opts(sp)
    sp.set_defaults(func=cmd_cmp)

    sp = sub.add_parser("selftest", help="run the property suites")
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--quick", action="store_true")
    sp.add_argument("--workers", default=None)
    sp.set_defaults(func=cmd_selftest)

    sp = sub.add_parser("corpus", help="verify the shipped corpus against its manifests")
    sp.add_argument("names", nargs="*")
    sp.add_argument("--json")
    sp.set_defaults(func=cmd_corpus)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except OutOfBudget as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ParseError as exc:
        for d in exc.diagnostics:
            print(f"{d.severity}: {d.span}: {d.message}", file=sys.stderr)
        return EXIT_USAGE
    except ExplorationError as exc:
        print(f"modeling error: {exc.cause}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, StaticTypeError, FlowError, iv.InvSetError, ab.AbstractionError,
            UndefinedRead, EvalError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
