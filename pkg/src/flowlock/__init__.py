"""flowlock: s-deadlock checking of parameterized protocols with flow-derived invariants.

The pieces, bottom-up:

* ``parser``       protocol / flow / invariant / lemma file grammars
* ``model``        ground instances, typing, the rule interpreter
* ``explorer``     BFS reachability, symmetry, traces
* ``flows``        flow replay, the g operator, blocked flows
* ``invariants``   invariant sets, checks, split, diagnostics
* ``abstraction``  data-type reduction, strengthening, the CMP step
* ``corpus``       shipped models and their expected verdicts
"""
from flowlock.abstraction import (cmp_iterate, containment_check, data_type_reduce,
                                  strengthen)
from flowlock.explorer import (OutOfBudget, SDeadlock, check_sdeadlock, reach,
                               reachable_states)
from flowlock.flows import blocked_flows, replay_flows, rule_set
from flowlock.invariants import (SplitRequest, derive_diagnostics, load_invset,
                                 split_invariant, theorem_oracle)
from flowlock.model import GroundModel
from flowlock.parser import parse_flows, parse_protocol, pretty_print

__version__ = "0.1.0"

__all__ = [
    "GroundModel", "OutOfBudget", "SDeadlock", "SplitRequest", "blocked_flows",
    "check_sdeadlock", "cmp_iterate", "containment_check", "data_type_reduce",
    "derive_diagnostics", "load_invset", "parse_flows", "parse_protocol", "pretty_print",
    "reach", "reachable_states", "replay_flows", "rule_set", "split_invariant", "strengthen",
    "theorem_oracle",
]
