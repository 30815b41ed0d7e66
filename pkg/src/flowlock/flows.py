"""Flows: replay of traces into flow instances, the g operator, blocked flows."""
from __future__ import annotations

from dataclasses import dataclass, field

from flowlock.model import UndefinedRead
from flowlock.parser import FlowSpec, print_expr
from flowlock.syntax import And

MAX_OPEN = 4


class UnattributableRule(Exception):
    def __init__(self, step, ri, reason):
        self.step = step
        self.rule = ri
        super().__init__(f"step {step}: cannot attribute {ri.label()} ({reason})")


@dataclass
class FlowInstance:
    flow: FlowSpec
    agent: int
    serial: int = 0
    fired: dict = field(default_factory=dict)
    inferred: bool = False

    def __post_init__(self):
        for r in self.flow.members:
            self.fired.setdefault(r, False)

    @property
    def name(self):
        return self.flow.name

    @property
    def closed(self):
        return all(self.fired.values())

    def precondition(self, rule):
        return all(self.fired[r] for r in self.flow.predecessors(rule))

    def next_rules(self):
        """Unfired members whose precondition holds."""
        return [r for r in self.flow.members if not self.fired[r] and self.precondition(r)]

    def label(self):
        return f"{self.flow.name}({self.agent})"

    def copy(self):
        return FlowInstance(self.flow, self.agent, self.serial, dict(self.fired), self.inferred)


def precondition(inst, rule):
    """True iff every rule ordered before ``rule`` in the flow has fired."""
    return inst.precondition(rule)


@dataclass
class Replay:
    instances: list          # all instances in creation order (open and closed)
    attribution: list        # per step: FlowInstance, or None
    flags: list              # per step: None, "optional", "uncovered", "non-agent"
    history: list            # per step: snapshot of the instances after the step

    def open_instances(self, agent=None):
        return [x for x in self.instances if not x.closed and (agent is None or x.agent == agent)]


def replay_flows(trace, flows, infer_prefix=False):
    """Attribute each fired rule to a flow instance of its agent.

    A rule goes to the oldest open instance that can take it (precondition
    true, rule not yet fired); otherwise a new instance is opened, which
    requires the rule to be minimal in the flow unless ``infer_prefix`` is
    set (then its predecessors are marked fired).
    """
    instances, attribution, flags, history = [], [], [], []
    serial = 0
    steps = trace.steps if hasattr(trace, "steps") else trace
    for n, ri in enumerate(steps, 1):
        name, agent = ri.name, ri.agent
        owning = [f for f in flows if name in f.members]
        flag, target = None, None
        if agent is None:
            flag = "non-agent"
        elif not owning:
            flag = "optional" if any(name in f.optional for f in flows) else "uncovered"
        else:
            for inst in instances:
                if inst.agent == agent and not inst.closed and inst.flow in owning \
                        and not inst.fired[name] and inst.precondition(name):
                    target = inst
                    break
            if target is None:
                starters = [f for f in owning if name in f.minimal()]
                if starters:
                    flow, inferred = starters[0], False
                elif infer_prefix:
                    flow, inferred = owning[0], True
                else:
                    raise UnattributableRule(n, ri, "no open instance accepts it and it does not start a flow")
                live = [x for x in instances if x.flow is flow and x.agent == agent and not x.closed]
                if len(live) >= MAX_OPEN:
                    raise UnattributableRule(n, ri, f"more than {MAX_OPEN} open {flow.name} instances")
                serial += 1
                target = FlowInstance(flow, agent, serial, inferred=inferred)
                if inferred:
                    for r in flow.predecessors(name):
                        target.fired[r] = True
                instances.append(target)
            assert target.precondition(name)
            target.fired[name] = True
        attribution.append(target)
        flags.append(flag)
        history.append([x.copy() for x in instances])
    return Replay(instances, attribution, flags, history)


# -- rule sets and g ----------------------------------------------------------

@dataclass(frozen=True)
class AgentRuleSet:
    agent: int
    instances: tuple    # RuleInstance objects

    def names(self):
        return sorted({ri.name for ri in self.instances})


def flow_rule_names(flows):
    out = []
    for f in flows:
        for r in f.all_members:
            if r not in out:
                out.append(r)
    return out


def rule_set(model, agent, flows=None, target=None):
    """RS(agent): the agent's instances of the flow rules (or of ``target``).

    Without flows or target every rule of the agent counts.
    """
    if target is not None:
        names = set(target)
    elif flows:
        names = set(flow_rule_names(flows))
    else:
        names = None
    return AgentRuleSet(agent, tuple(ri for ri in model.rule_instances
                                     if ri.agent == agent and (names is None or ri.name in names)))


def g_enabled(model, state, rs):
    """At least one rule instance of ``rs`` is enabled (empty set -> False)."""
    guards = model.compiled.guards
    return any(guards[ri.index](state) for ri in rs.instances)


def _rule_enabled(model, state, agent, rule):
    guards = model.compiled.guards
    return any(guards[ri.index](state) for ri in model.instances_of(rule, agent))


def blocked_flows(model, state, instances):
    """Every (instance, rule) with precondition true, rule unfired and its guard false."""
    out = []
    for inst in instances:
        if inst.closed:
            continue
        for r in inst.next_rules():
            if not _rule_enabled(model, state, inst.agent, r):
                out.append((inst, r))
    return out


def is_blocked(model, state, inst):
    """No unfired rule of the instance is enabled (and it has a next rule)."""
    if inst.closed or not inst.next_rules():
        return False
    return not any(_rule_enabled(model, state, inst.agent, r)
                   for r in inst.flow.members if not inst.fired[r])


def false_atoms(model, state, ri):
    """Top-level conjuncts of ``ri``'s guard that are false at ``state`` (printed)."""
    out = []
    for atom in conjuncts(ri.rule.guard):
        try:
            v = model.eval_expr(state, ri.env, atom)
        except UndefinedRead:
            out.append(print_expr(atom) + " <undefined>")
            continue
        if v is False:
            out.append(print_expr(atom))
    return out


def conjuncts(e):
    if isinstance(e, And):
        return conjuncts(e.left) + conjuncts(e.right)
    return [e]


def validate_flow_coverage(protocol, flows, tenv=None):
    """Agent-parameterized rules that belong to no flow."""
    from flowlock.model import TypeEnv, _own_agent_param
    tenv = tenv or TypeEnv(protocol)
    covered = set(flow_rule_names(flows))
    return [r.name for r in protocol.rules
            if _own_agent_param(r, tenv) is not None and r.name not in covered]


def blocked_footer(model, state, trace, flows, agent=None):
    """``BLOCKED`` lines for the trace footer."""
    rep = replay_flows(trace, flows, infer_prefix=True)
    lines = []
    for inst, rule in blocked_flows(model, state, rep.instances):
        if agent is not None and inst.agent != agent:
            continue
        ri = model.instances_of(rule, inst.agent)[0]
        atoms = ", ".join(false_atoms(model, state, ri))
        lines.append(f"BLOCKED {inst.label()} at {rule} guard_atoms_false=[{atoms}]")
    return lines
