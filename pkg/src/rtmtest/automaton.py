"""The simulation automaton standing in for adaptable software, environment, monitor and execute.

States are abstract; each transition carries a fault action that is applied
to the ground-truth model, a relative weight for the seeded choice, and a
guard used when checking observed traces against the automaton.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from types import MappingProxyType
from typing import Any

import numpy as np

from .compare import ConstraintViolation, check_adaptation_well_defined
from .errors import InvalidArgumentError, NotFoundError, ParseError
from .model import (
    RTM,
    AnnotationKind,
    Component,
    Lifecycle,
    RemoveComponent,
    SetLifecycle,
    SetMetric,
    base_id,
    dumps,
    from_dict,
    load,
    loads,
    mutate,
    to_dict,
)

__all__ = [
    "RNG_ALGORITHM",
    "SimRandom",
    "FaultKind",
    "FaultAction",
    "Fault",
    "NO_OP",
    "candidates",
    "outcomes",
    "apply_action",
    "MetricRule",
    "initialize",
    "step_execute",
    "SimState",
    "SimTransition",
    "SimAutomaton",
    "automaton_to_dict",
    "automaton_from_dict",
    "load_automaton",
    "save_automaton",
]

RNG_ALGORITHM = "pcg64"
FORMAT = "rtmtest-automaton"


class SimRandom:
    """Seeded uniform draws from numpy's PCG64 bit generator.

    Every choice consumes exactly one ``random()`` double, so a replay only
    needs the seed and the order of choices.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self._gen = np.random.Generator(np.random.PCG64(seed))

    def uniform(self) -> float:
        return float(self._gen.random())

    def index(self, n: int) -> int:
        """Uniform index in ``range(n)``; no draw is consumed when ``n == 1``."""
        if n < 1:
            raise InvalidArgumentError("cannot choose from nothing")
        if n == 1:
            return 0
        return min(int(math.floor(self.uniform() * n)), n - 1)

    def weighted(self, weights: Sequence[Fraction]) -> int:
        """Index ``i`` with probability ``weights[i] / sum(weights)``."""
        if not weights:
            raise InvalidArgumentError("cannot choose from nothing")
        total = sum(weights, Fraction(0))
        u = self.uniform() * float(total)
        acc = Fraction(0)
        for i, w in enumerate(weights):
            acc += w
            if u < float(acc):
                return i
        return len(weights) - 1


# -- fault actions ---------------------------------------------------------------

class FaultKind(str, Enum):
    CRASH_REMOVE = "CRASH_REMOVE"
    EXCEPTION_BURST = "EXCEPTION_BURST"
    LIFECYCLE_FLIP = "LIFECYCLE_FLIP"
    REPEAT_LAST = "REPEAT_LAST"
    NO_OP = "NO_OP"
    # imposes a recorded model; used by regression branches
    REPLAY = "REPLAY"


_CONCRETE = (FaultKind.CRASH_REMOVE, FaultKind.EXCEPTION_BURST, FaultKind.LIFECYCLE_FLIP)
EXCEPTIONS_METRIC = "exceptions"
DEFAULT_BURST = 6


def _check_target(target: str) -> None:
    if target == "RANDOM":
        return
    prefix, _, rest = target.partition(":")
    if prefix not in ("type", "id") or not rest:
        raise InvalidArgumentError(f"target must be RANDOM, type:<name> or id:<id>, got {target!r}")


@dataclass(frozen=True)
class FaultAction:
    """What a transition does to the ground truth.

    ``target`` selects among live components: ``RANDOM``, ``type:<type>`` or
    ``id:<id>`` (matched against base ids, so replacements stay targetable).
    Parameters: ``count`` for EXCEPTION_BURST (default 6), ``to`` for
    LIFECYCLE_FLIP (default STOPPED).
    """

    kind: FaultKind
    target: str = "RANDOM"
    params: tuple[tuple[str, Any], ...] = ()
    model: RTM | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", FaultKind(self.kind))
        params = self.params
        if isinstance(params, Mapping):
            params = params.items()
        object.__setattr__(self, "params", tuple(sorted(params)))
        _check_target(self.target)
        if (self.kind is FaultKind.REPLAY) != (self.model is not None):
            raise InvalidArgumentError("REPLAY actions, and only they, carry a model")
        if self.kind is FaultKind.EXCEPTION_BURST and int(self.param("count", DEFAULT_BURST)) < 1:
            raise InvalidArgumentError("exception burst count must be positive")
        if self.kind is FaultKind.LIFECYCLE_FLIP:
            Lifecycle(self.param("to", Lifecycle.STOPPED.value))

    def param(self, name: str, default: Any = None) -> Any:
        return dict(self.params).get(name, default)

    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {"kind": self.kind.value}
        if self.kind is FaultKind.REPLAY:
            doc["model"] = to_dict(self.model)
            return doc
        if self.kind is not FaultKind.NO_OP:
            doc["target"] = self.target
        if self.params:
            doc["params"] = dict(self.params)
        return doc

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> FaultAction:
        model = from_dict(obj["model"]) if "model" in obj else None
        return cls(FaultKind(obj["kind"]), obj.get("target", "RANDOM"), obj.get("params", {}), model)

    def __str__(self):
        if self.kind in (FaultKind.NO_OP, FaultKind.REPEAT_LAST, FaultKind.REPLAY):
            return self.kind.value
        return f"{self.kind.value}({self.target})"


NO_OP = FaultAction(FaultKind.NO_OP)


@dataclass(frozen=True)
class Fault:
    """A fault that actually happened, remembered for REPEAT_LAST."""

    kind: FaultKind
    component: str
    params: tuple[tuple[str, Any], ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "component": self.component, "params": dict(self.params)}


def candidates(model: RTM, target: str) -> list[Component]:
    """Live components matching a target selector, in id order."""
    live = [c for c in model.components.values() if c.lifecycle is not Lifecycle.UNDEPLOYED]
    if target == "RANDOM":
        return live
    prefix, _, rest = target.partition(":")
    if prefix == "type":
        return [c for c in live if c.type_name == rest]
    return [c for c in live if c.id == rest or base_id(c.id) == rest]


def _inflict(model: RTM, kind: FaultKind, comp: Component, params) -> RTM:
    p = dict(params)
    if kind is FaultKind.CRASH_REMOVE:
        return mutate(model, RemoveComponent(comp.id))
    if kind is FaultKind.EXCEPTION_BURST:
        current = model.metric(comp.id, EXCEPTIONS_METRIC, 0.0)
        return mutate(model, SetMetric(comp.id, EXCEPTIONS_METRIC, current + int(p.get("count", DEFAULT_BURST))))
    return mutate(model, SetLifecycle(comp.id, Lifecycle(p.get("to", Lifecycle.STOPPED.value))))


def _resolve(action: FaultAction, last: Fault | None) -> tuple[FaultKind, str, tuple] | None:
    if action.kind is FaultKind.REPEAT_LAST:
        if last is None:
            return None
        return last.kind, f"id:{last.component}", last.params
    if action.kind in _CONCRETE:
        return action.kind, action.target, action.params
    return None


def outcomes(model: RTM, action: FaultAction, last: Fault | None = None) -> list[tuple[RTM, Fault | None]]:
    """Every (ground truth, remembered fault) the action can produce, in choice order."""
    if action.kind is FaultKind.REPLAY:
        return [(action.model, last)]
    resolved = _resolve(action, last)
    if resolved is None:
        return [(model, last)]
    kind, target, params = resolved
    found = candidates(model, target)
    if not found:
        return [(model, last)]
    return [(_inflict(model, kind, c, params), Fault(kind, base_id(c.id), params)) for c in found]


def apply_action(model: RTM, action: FaultAction, last: Fault | None, rng: SimRandom) -> tuple[RTM, Fault | None]:
    options = outcomes(model, action, last)
    return options[rng.index(len(options))]


# -- execute emulation -------------------------------------------------------------

@dataclass(frozen=True)
class MetricRule:
    """Derived metric: ``base[type] + per_connector * incident connectors``."""

    name: str = "response-time"
    base: Mapping[str, float] = field(default_factory=dict)
    default: float = 10.0
    per_connector: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "base", MappingProxyType({k: float(v) for k, v in sorted(dict(self.base).items())}))

    def value(self, model: RTM, comp: Component) -> float:
        return self.base.get(comp.type_name, self.default) + self.per_connector * len(model.incident(comp.id))

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "base": dict(self.base), "default": self.default,
                "per_connector": self.per_connector}

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> MetricRule:
        return cls(obj.get("name", "response-time"), obj.get("base", {}),
                   float(obj.get("default", 10.0)), float(obj.get("per_connector", 2.0)))


def _with_metric(model: RTM, rule: MetricRule, ids: Iterable[str]) -> RTM:
    return mutate(model, *(SetMetric(cid, rule.name, rule.value(model, model.components[cid])) for cid in sorted(ids)))


def initialize(template: RTM, rule: MetricRule) -> RTM:
    """The initial ground truth: the template with derived metrics filled in."""
    return _with_metric(template, rule, template.components)


def _wiring(model: RTM, cid: str) -> frozenset:
    return frozenset((c.id, c.from_component, c.required_interface, c.to_component, c.provided_interface)
                     for c in model.incident(cid))


def step_execute(ground_truth: RTM, planned: RTM, rule: MetricRule | None = None
                 ) -> tuple[RTM, list[ConstraintViolation]]:
    """Adopt the planned architecture as the new ground truth.

    Planner annotations are dropped except the failure history, which the
    software keeps as its knowledge. The derived metric keeps its old value
    for components whose type and wiring did not change and is recomputed
    for the others. Lifecycle problems are returned, not raised.
    """
    rule = rule or MetricRule()
    violations = check_adaptation_well_defined(ground_truth, planned)
    metrics = {k: dict(v) for k, v in planned.metrics.items()}
    changed = []
    for cid, comp in planned.components.items():
        old = ground_truth.components.get(cid)
        metrics.setdefault(cid, {}).pop(rule.name, None)
        if old is None or old.type_name != comp.type_name or _wiring(ground_truth, cid) != _wiring(planned, cid):
            changed.append(cid)
        else:
            kept = ground_truth.metric(cid, rule.name)
            if kept is not None:
                metrics[cid][rule.name] = kept
    anns = [a for a in planned.annotations if a.kind is AnnotationKind.FAILURE_HISTORY]
    adopted = RTM(planned.id, planned.components.values(), planned.connectors.values(), anns,
                  {k: v for k, v in metrics.items() if v})
    return _with_metric(adopted, rule, changed), violations


# -- automaton ---------------------------------------------------------------------

def _weight(value: Any) -> Fraction:
    try:
        w = Fraction(str(value)) if isinstance(value, float) else Fraction(value)
    except (ValueError, TypeError, ZeroDivisionError):
        raise InvalidArgumentError(f"bad transition weight {value!r}") from None
    if w <= 0:
        raise InvalidArgumentError(f"transition weight must be positive, got {value!r}")
    return w


@dataclass(frozen=True)
class SimState:
    id: str
    terminal: bool = False


@dataclass(frozen=True)
class SimTransition:
    source: str
    target: str
    action: FaultAction = NO_OP
    guard: str = "effect()"
    weight: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "weight", _weight(self.weight))

    @cached_property
    def guard_formula(self):
        from .properties import parse_property, temporal_free

        formula = parse_property(self.guard)
        if not temporal_free(formula):
            raise ParseError(f"guard {self.guard!r} uses a temporal operator")
        return formula

    def to_dict(self) -> dict[str, Any]:
        return {"from": self.source, "to": self.target, "action": self.action.to_dict(),
                "guard": self.guard, "weight": str(self.weight)}

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> SimTransition:
        return cls(obj["from"], obj["to"], FaultAction.from_dict(obj.get("action", {"kind": "NO_OP"})),
                   obj.get("guard", "effect()"), obj.get("weight", 1))


@dataclass(frozen=True)
class SimAutomaton:
    """States, weighted transitions and the ground-truth template they act on.

    Transitions leaving a state are tried in declaration order, which fixes
    the meaning of every seeded draw.
    """

    states: tuple[SimState, ...]
    initial: str
    transitions: tuple[SimTransition, ...]
    template: RTM
    metric_rule: MetricRule = field(default_factory=MetricRule)
    name: str = "automaton"

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "transitions", tuple(self.transitions))
        ids = [s.id for s in self.states]
        if len(set(ids)) != len(ids):
            raise InvalidArgumentError("duplicate state id")
        if self.initial not in ids:
            raise NotFoundError(f"initial state {self.initial!r} is not a state")
        for t in self.transitions:
            for end in (t.source, t.target):
                if end not in ids:
                    raise NotFoundError(f"transition endpoint {end!r} is not a state")
            t.guard_formula  # parse now, fail early
        for sid in self.reachable():
            if not self.state(sid).terminal and not self.outgoing(sid):
                raise InvalidArgumentError(f"state {sid!r} has no outgoing transition and is not terminal")

    def state(self, sid: str) -> SimState:
        for s in self.states:
            if s.id == sid:
                return s
        raise NotFoundError(f"no state {sid!r}")

    def outgoing(self, sid: str) -> list[SimTransition]:
        return [t for t in self.transitions if t.source == sid]

    def reachable(self) -> set[str]:
        seen, todo = {self.initial}, [self.initial]
        while todo:
            for t in self.outgoing(todo.pop()):
                if t.target not in seen:
                    seen.add(t.target)
                    todo.append(t.target)
        return seen

    @cached_property
    def initial_ground_truth(self) -> RTM:
        return initialize(self.template, self.metric_rule)

    def choose(self, sid: str, rng: SimRandom) -> SimTransition:
        out = self.outgoing(sid)
        return out[rng.weighted([t.weight for t in out])]


def automaton_to_dict(automaton: SimAutomaton, template_ref: str | None = None) -> dict[str, Any]:
    """File form; the template is inlined unless a relative path is given."""
    return {
        "format": FORMAT,
        "version": 1,
        "rng": RNG_ALGORITHM,
        "name": automaton.name,
        "initial": automaton.initial,
        "states": [{"id": s.id, "terminal": s.terminal} for s in automaton.states],
        "transitions": [t.to_dict() for t in automaton.transitions],
        "metric_rule": automaton.metric_rule.to_dict(),
        "template": template_ref if template_ref is not None else to_dict(automaton.template),
    }


def automaton_from_dict(obj: Any, base: str | Path = ".") -> SimAutomaton:
    if not isinstance(obj, Mapping):
        raise ParseError("automaton document must be a JSON object")
    if obj.get("rng", RNG_ALGORITHM) != RNG_ALGORITHM:
        raise ParseError(f"unsupported generator {obj['rng']!r}; only {RNG_ALGORITHM} is known")
    try:
        ref = obj["template"]
        template = load(Path(base) / ref) if isinstance(ref, str) else from_dict(ref)
        return SimAutomaton(
            tuple(SimState(s["id"], bool(s.get("terminal", False))) for s in obj["states"]),
            obj["initial"],
            tuple(SimTransition.from_dict(t) for t in obj["transitions"]),
            template,
            MetricRule.from_dict(obj.get("metric_rule", {})),
            obj.get("name", "automaton"),
        )
    except KeyError as exc:
        raise ParseError(f"automaton document lacks field {exc.args[0]!r}") from None


def load_automaton(path: str | Path) -> SimAutomaton:
    path = Path(path)
    return automaton_from_dict(loads(path.read_bytes()), path.parent)


def save_automaton(automaton: SimAutomaton, path: str | Path, template_ref: str | None = None) -> None:
    Path(path).write_bytes(dumps(automaton_to_dict(automaton, template_ref)))

