"""The shipped corpus and its manifest-driven verification.

Each entry is a directory holding its model and companion files plus a
``manifest.json`` listing CLI runs and the verdicts they must produce.
Only verdicts are compared, never state counts or timings.
"""
from __future__ import annotations

import contextlib
import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

ROOT = Path(__file__).resolve().parent


def entries():
    return sorted(p.name for p in ROOT.iterdir() if (p / "manifest.json").is_file())


def entry_dir(name):
    d = ROOT / name
    if not (d / "manifest.json").is_file():
        raise KeyError(f"no corpus entry {name!r}")
    return d


def manifest(name):
    with open(entry_dir(name) / "manifest.json", encoding="utf-8") as fh:
        return json.load(fh)


def path(name, filename):
    return entry_dir(name) / filename


def read(name, filename):
    return path(name, filename).read_text(encoding="utf-8")


def corpus_files():
    """(entry, filename) for every file named in a manifest."""
    return [(n, f) for n in entries() for f in manifest(n).get("files", [])]


def roundtrip(filename, text):
    """Parse, print and re-parse ``text``; True iff the two parses agree."""
    from flowlock import parser as ps
    if filename.endswith(".proto.m"):
        a = ps.parse_protocol(text)
        return ps.parse_protocol(ps.pretty_print(a)) == a
    if filename.endswith(".flw"):
        a = ps.parse_flows(text)
        return ps.parse_flows(ps.print_flows(a)) == a
    if filename.endswith(".invs"):
        a = ps.parse_invset(text)
        return ps.parse_invset(ps.print_invset(*a)) == a
    if filename.endswith(".lem"):
        a = ps.parse_lemmas(text)
        return ps.parse_lemmas(ps.print_lemmas(a)) == a
    raise ValueError(f"unknown corpus file kind: {filename}")


@dataclass
class RunResult:
    entry: str
    run: str
    exit_code: int
    observed: dict
    mismatches: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.mismatches


@dataclass
class CorpusReport:
    runs: list
    parse_failures: list

    @property
    def ok(self):
        return not self.parse_failures and all(r.ok for r in self.runs)

    def to_json(self):
        return {
            "schema": 1,
            "ok": self.ok,
            "parse_failures": self.parse_failures,
            "runs": [{"entry": r.entry, "run": r.run, "exit": r.exit_code, "observed": r.observed,
                      "mismatches": r.mismatches} for r in self.runs],
        }


def _resolve(args, base):
    out = []
    for a in args:
        p = base / a
        out.append(str(p) if a and not a.startswith("-") and p.is_file() else a)
    return out


def _observed(payload):
    seen = {name: c["verdict"] for name, c in payload.get("checks", {}).items()}
    for key in ("verdict", "oracle"):
        if key in payload:
            seen[key] = payload[key]
    return seen


def run_entry(name, run_ids=None, extra_args=(), select=None):
    """Replay an entry's runs; ``select(run)`` filters, ``extra_args`` are appended."""
    from flowlock.cli import main
    base = entry_dir(name)
    results = []
    for run in manifest(name).get("runs", []):
        if run_ids is not None and run["id"] not in run_ids:
            continue
        if select is not None and not select(run):
            continue
        fd, tmp = tempfile.mkstemp(suffix=".json")
        os.close(fd)
        try:
            with contextlib.redirect_stdout(io.StringIO()), contextlib.redirect_stderr(io.StringIO()):
                code = main(_resolve(run["args"], base) + list(extra_args) + ["--json", tmp])
            try:
                with open(tmp, encoding="utf-8") as fh:
                    payload = json.load(fh)
            except (OSError, ValueError):
                payload = {}
        finally:
            os.unlink(tmp)
        seen = _observed(payload)
        res = RunResult(name, run["id"], code, seen)
        if code not in (0, 1):
            res.mismatches.append(f"exit code {code}")
        for key, want in run["expect"].items():
            got = seen.get(key)
            if got != want:
                res.mismatches.append(f"{key}: expected {want}, got {got}")
        results.append(res)
    return results


def corpus_verify(names=None, out=None):
    """Parse every corpus file and replay every manifest run."""
    names = list(names) if names else entries()
    parse_failures, runs = [], []
    for n in names:
        for f in manifest(n).get("files", []):
            try:
                if not roundtrip(f, read(n, f)):
                    parse_failures.append(f"{n}/{f}: print/parse is not a fixpoint")
            except Exception as exc:   # report, keep going
                parse_failures.append(f"{n}/{f}: {exc}")
        for r in run_entry(n):
            runs.append(r)
            if out is not None:
                status = "ok" if r.ok else "MISMATCH " + "; ".join(r.mismatches)
                print(f"{n}/{r.run}: {status}", file=out)
    if out is not None:
        for msg in parse_failures:
            print(f"parse: {msg}", file=out)
        print("corpus: " + ("OK" if not parse_failures and all(r.ok for r in runs) else "FAILED"), file=out)
    return CorpusReport(runs, parse_failures)
