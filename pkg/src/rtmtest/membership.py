"""Checking observed traces against the simulation automaton, and regression branches.

An observed trace is a member when some run of the automaton explains it:
each monitored snapshot must satisfy the guard of a transition leaving a
state the automaton may be in. Guards see the snapshot, the ground truth the
automaton predicts before the step (the previous monitored model with the
previous planned model executed on it) and every model the transition's
action can produce from that prediction. Planned snapshots are not consumed
by transitions; they feed the prediction. Every state accepts, so any
prefix of a member is a member.
"""

from __future__ import annotations

import warnings
from collections.abc import Iterable
from dataclasses import dataclass

from .automaton import FaultAction, FaultKind, SimAutomaton, SimState, SimTransition, outcomes, step_execute
from .compare import critical_ids, equal
from .mape import Phase, Trace
from .properties import PredicateContext, check_predicates, evaluate_state

__all__ = ["DEFAULT_PHASES", "MembershipResult", "membership", "add_regression"]

DEFAULT_PHASES = (Phase.MONITORED, Phase.PLANNED)


@dataclass(frozen=True)
class MembershipResult:
    """``witness_run`` (member) or ``longest_matched_prefix`` (not member), never both.

    The prefix is the index, in the original trace, of the first snapshot no
    run can consume; all snapshots before it are explained.
    """

    member: bool
    witness_run: tuple[str, ...] | None = None
    longest_matched_prefix: int | None = None

    def __post_init__(self):
        if self.member != (self.witness_run is not None) or self.member == (self.longest_matched_prefix is not None):
            raise ValueError("exactly one of witness_run and longest_matched_prefix must be set")

    def to_dict(self):
        return {"member": self.member,
                "witness_run": list(self.witness_run) if self.witness_run is not None else None,
                "longest_matched_prefix": self.longest_matched_prefix}


def membership(trace: Trace, automaton: SimAutomaton, phases: Iterable[Phase] = DEFAULT_PHASES) -> MembershipResult:
    phases = {Phase(p) for p in phases}
    for t in automaton.transitions:
        check_predicates(t.guard_formula)
    critical = critical_ids(automaton.template)
    rule = automaton.metric_rule
    frontier = {(automaton.initial, None): (automaton.initial,)}
    base = automaton.initial_ground_truth
    monitored = None
    for index, snap in enumerate(trace.snapshots):
        if snap.phase not in phases:
            continue
        if snap.phase is Phase.PLANNED:
            if monitored is not None:
                base = step_execute(monitored, snap.model, rule)[0]
            continue
        if snap.phase is not Phase.MONITORED:
            continue
        nxt: dict = {}
        for (sid, last), run in frontier.items():
            if automaton.state(sid).terminal:
                continue
            for t in automaton.outgoing(sid):
                options = outcomes(base, t.action, last)
                ctx = PredicateContext(snap.model, snap.phase, critical, base, tuple(m for m, _ in options))
                if not evaluate_state(t.guard_formula, ctx):
                    continue
                lasts = [f for m, f in options if equal(m, snap.model)] or [last]
                for f in lasts:
                    nxt.setdefault((t.target, f), run + (t.target,))
        if not nxt:
            return MembershipResult(False, longest_matched_prefix=index)
        frontier = nxt
        monitored = base = snap.model
    return MembershipResult(True, witness_run=next(iter(frontier.values())))


def add_regression(automaton: SimAutomaton, trace: Trace,
                   phases: Iterable[Phase] = DEFAULT_PHASES) -> SimAutomaton:
    """Extend the automaton with a linear branch that replays ``trace`` exactly.

    The branch leaves the initial state and ends in a terminal state; its
    transitions impose each recorded monitored model. Existing states and
    transitions are untouched, so every earlier member stays a member.
    """
    phases = tuple(phases)
    if membership(trace, automaton, phases).member:
        warnings.warn("trace is already a member; automaton unchanged", stacklevel=2)
        return automaton
    models = [s.model for s in trace.snapshots if s.phase is Phase.MONITORED and s.phase in phases]
    taken = {s.id for s in automaton.states}
    n = 1
    while any(sid.startswith(f"regression{n}.") for sid in taken):
        n += 1
    names = [f"regression{n}.{j}" for j in range(1, len(models) + 1)]
    states = [SimState(sid, terminal=(j == len(names) - 1)) for j, sid in enumerate(names)]
    sources = [automaton.initial, *names[:-1]]
    transitions = [SimTransition(src, dst, FaultAction(FaultKind.REPLAY, model=m))
                   for src, dst, m in zip(sources, names, models)]
    return SimAutomaton((*automaton.states, *states), automaton.initial, (*automaton.transitions, *transitions),
                        automaton.template, automaton.metric_rule, automaton.name)
