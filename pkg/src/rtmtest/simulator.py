"""Seeded in-the-loop campaigns: the automaton drives faults, the engine analyzes and plans."""

from __future__ import annotations

from collections.abc import Callable, Iterable
from dataclasses import dataclass
from typing import Any

from .automaton import (
    RNG_ALGORITHM,
    Fault,
    SimAutomaton,
    SimRandom,
    SimTransition,
    apply_action,
    automaton_from_dict,
    automaton_to_dict,
    step_execute,
)
from .compare import ConstraintViolation, check_constraints, critical_ids, equal
from .errors import CampaignComplete, InvalidArgumentError, NotReplayableError
from .mape import Phase, StepFunctions, Trace, record, serialize_trace
from .model import RTM
from .properties import PropertyVerdict, TraceProperty, evaluate_on_campaign

__all__ = [
    "SimulatorState",
    "EnvironmentStep",
    "IterationReport",
    "CampaignResult",
    "step_environment",
    "run_campaign",
    "replay",
]


@dataclass(frozen=True)
class SimulatorState:
    state: str
    last: Fault | None = None


@dataclass(frozen=True)
class EnvironmentStep:
    state: SimulatorState
    monitored: RTM
    transition: SimTransition


def step_environment(automaton: SimAutomaton, sim: SimulatorState, ground_truth: RTM,
                     rng: SimRandom) -> EnvironmentStep:
    """Pick a transition by weight and inflict its fault; the result is also the monitored model."""
    if automaton.state(sim.state).terminal:
        raise CampaignComplete(f"state {sim.state!r} is terminal")
    t = automaton.choose(sim.state, rng)
    model, last = apply_action(ground_truth, t.action, sim.last, rng)
    return EnvironmentStep(SimulatorState(t.target, last), model, t)


@dataclass(frozen=True)
class IterationReport:
    iteration: int
    validity: tuple[ConstraintViolation, ...] = ()
    well_definedness: tuple[ConstraintViolation, ...] = ()

    @property
    def violations(self) -> tuple[ConstraintViolation, ...]:
        return self.validity + self.well_definedness

    def to_dict(self) -> dict[str, Any]:
        return {"iteration": self.iteration,
                "validity": [v.to_dict() for v in self.validity],
                "well_definedness": [v.to_dict() for v in self.well_definedness]}


@dataclass(frozen=True)
class CampaignResult:
    trace: Trace
    report: tuple[IterationReport, ...] = ()
    verdicts: tuple[tuple[str, PropertyVerdict], ...] = ()
    status: str = "ok"
    error: str | None = None
    # set by replay: first snapshot index where the rerun differs
    divergence: int | None = None

    @property
    def passed(self) -> bool:
        return (self.status != "aborted" and self.divergence is None
                and all(v.holds for _, v in self.verdicts)
                and not any(r.violations for r in self.report))

    def to_dict(self) -> dict[str, Any]:
        return {
            "trace": self.trace.id,
            "seed": self.trace.seed,
            "engine": self.trace.meta.get("engine"),
            "status": self.status,
            "error": self.error,
            "passed": self.passed,
            "divergence": self.divergence,
            "iterations": [r.to_dict() for r in self.report],
            "properties": [{"name": name, **v.to_dict()} for name, v in self.verdicts],
        }

    def to_text(self) -> str:
        lines = [f"campaign {self.trace.id} seed={self.trace.seed} engine={self.trace.meta.get('engine')} "
                 f"status={self.status}"]
        if self.error:
            lines.append(f"  error: {self.error.strip().splitlines()[-1]}")
        for r in self.report:
            for v in r.violations:
                lines.append(f"  iteration {r.iteration}: {v.constraint} on {v.target}: {v.message}")
        bad = sum(bool(r.violations) for r in self.report)
        lines.append(f"  {len(self.report)} iterations, {bad} with violations")
        for name, v in self.verdicts:
            state = "holds" if v.holds else f"FAILS, witness {v.witness[0]}..{v.witness[1]}"
            lines.append(f"  property {name}: {state}")
        if self.divergence is not None:
            lines.append(f"  replay diverges at snapshot {self.divergence}")
        lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines) + "\n"


def run_campaign(
    automaton: SimAutomaton,
    engine: StepFunctions,
    iterations: int,
    seed: int,
    properties: Iterable[tuple[str, TraceProperty]] | None = None,
    *,
    trace_id: str | None = None,
) -> CampaignResult:
    """Run up to ``iterations`` feedback-loop iterations against the automaton.

    Per iteration: environment step (recorded as MONITORED), analyze,
    plan, execute emulation and a validity check of the new ground truth.
    A terminal automaton state ends the campaign early; an exception in a
    step aborts it, keeping the partial trace.
    """
    if not isinstance(iterations, int) or iterations < 1:
        raise InvalidArgumentError("iterations must be a positive integer")
    rng = SimRandom(seed)
    meta = {
        "engine": engine.name,
        "iterations": iterations,
        "rng": RNG_ALGORITHM,
        "automaton": automaton_to_dict(automaton),
    }
    trace = Trace(trace_id or f"{automaton.name}-seed{seed}", seed, (), meta)
    critical = critical_ids(automaton.template)
    ground_truth = automaton.initial_ground_truth
    sim = SimulatorState(automaton.initial)
    reports: list[IterationReport] = []
    status, error = "ok", None
    for i in range(iterations):
        try:
            env = step_environment(automaton, sim, ground_truth, rng)
        except CampaignComplete:
            status = "complete"
            break
        trace = record(trace, Phase.MONITORED, env.monitored, iteration=i)
        step = "analyze"
        try:
            analyzed = _checked(engine.analyze(env.monitored))
            trace = record(trace, Phase.ANALYZED, analyzed)
            step = "plan"
            planned = _checked(engine.plan(analyzed))
            trace = record(trace, Phase.PLANNED, planned)
        except Exception as exc:
            # no traceback: file paths would make trace files machine-dependent
            status, error = "aborted", f"{step} step failed: {type(exc).__name__}: {exc}"
            break
        ground_truth, wd = step_execute(env.monitored, planned, automaton.metric_rule)
        validity = check_constraints(ground_truth, expected_critical=critical)
        reports.append(IterationReport(i, tuple(validity), tuple(wd)))
        sim = env.state
    trace = trace.with_meta(status=status, **({"error": error} if error else {}))
    verdicts = tuple((name, evaluate_on_campaign(prop, trace, critical=critical))
                     for name, prop in (properties or ()))
    return CampaignResult(trace, tuple(reports), verdicts, status, error)


def _checked(model: Any) -> RTM:
    if not isinstance(model, RTM):
        raise TypeError(f"step returned {type(model).__name__}, not an RTM")
    return model


def first_divergence(expected: Trace, actual: Trace) -> int | None:
    for i, (a, b) in enumerate(zip(expected.snapshots, actual.snapshots)):
        if a.phase is not b.phase or a.iteration != b.iteration or not equal(a.model, b.model):
            return i
    if len(expected) != len(actual):
        return min(len(expected), len(actual))
    return None


def replay(
    trace: Trace,
    engine: StepFunctions | None = None,
    properties: Iterable[tuple[str, TraceProperty]] | None = None,
    lookup: Callable[[str], StepFunctions] | None = None,
) -> CampaignResult:
    """Rerun the campaign a trace header describes and report the first divergence.

    The engine defaults to the one named in the header. A divergence with
    the recorded engine means that engine is not deterministic.
    """
    if trace.seed is None:
        raise NotReplayableError("trace records no seed")
    for key in ("automaton", "engine", "iterations"):
        if key not in trace.meta:
            raise NotReplayableError(f"trace header lacks {key!r}")
    automaton = automaton_from_dict(trace.meta["automaton"])
    if engine is None:
        if lookup is None:
            from .engines import get_engine as lookup
        engine = lookup(trace.meta["engine"])
    result = run_campaign(automaton, engine, int(trace.meta["iterations"]), trace.seed, properties,
                          trace_id=trace.id)
    div = first_divergence(trace, result.trace)
    if div is None and serialize_trace(result.trace) != serialize_trace(trace) \
            and result.trace.meta.get("engine") == trace.meta.get("engine"):
        div = len(trace)
    return CampaignResult(result.trace, result.report, result.verdicts, result.status, result.error, div)


__all__ += ["first_divergence"]
