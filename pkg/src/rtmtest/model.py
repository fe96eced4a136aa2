"""Architectural runtime model (RTM): components, connectors, annotations, metrics.

RTM values are immutable. Every edit goes through :func:`mutate`, which
returns a new value and re-checks the model invariants, so an invalid
architecture can only be *described* (through annotations or constraint
violations), never constructed.
"""

from __future__ import annotations

import dataclasses
import json
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import Any, Union

from .errors import (
    DanglingEndpointError,
    DuplicateIdError,
    InvalidArgumentError,
    NotFoundError,
    ParseError,
)

__all__ = [
    "Lifecycle",
    "LEGAL_TRANSITIONS",
    "lifecycle_reachable",
    "AnnotationKind",
    "Component",
    "Connector",
    "Annotation",
    "RTM",
    "create_rtm",
    "AddComponent",
    "RemoveComponent",
    "SetLifecycle",
    "AddConnector",
    "RemoveConnector",
    "Annotate",
    "RemoveAnnotation",
    "SetMetric",
    "Edit",
    "mutate",
    "base_id",
    "to_dict",
    "from_dict",
    "serialize",
    "deserialize",
    "save",
    "load",
]


class Lifecycle(str, Enum):
    DEPLOYED = "DEPLOYED"
    STARTED = "STARTED"
    STOPPED = "STOPPED"
    UNDEPLOYED = "UNDEPLOYED"


# DEPLOYED -> STARTED -> STOPPED -> {STARTED, UNDEPLOYED}
LEGAL_TRANSITIONS: Mapping[Lifecycle, frozenset[Lifecycle]] = MappingProxyType({
    Lifecycle.DEPLOYED: frozenset({Lifecycle.STARTED}),
    Lifecycle.STARTED: frozenset({Lifecycle.STOPPED}),
    Lifecycle.STOPPED: frozenset({Lifecycle.STARTED, Lifecycle.UNDEPLOYED}),
    Lifecycle.UNDEPLOYED: frozenset(),
})


def lifecycle_reachable(source: Lifecycle, target: Lifecycle) -> bool:
    """True if ``target`` can be reached from ``source`` by one or more legal transitions."""
    seen: set[Lifecycle] = set()
    frontier = set(LEGAL_TRANSITIONS[source])
    while frontier:
        state = frontier.pop()
        if state == target:
            return True
        seen.add(state)
        frontier |= LEGAL_TRANSITIONS[state] - seen
    return False


class AnnotationKind(str, Enum):
    MISSING_COMPONENT = "MISSING_COMPONENT"
    EXCEPTION_FAILURE = "EXCEPTION_FAILURE"
    LIFECYCLE_FAILURE = "LIFECYCLE_FAILURE"
    REPEATED_FAILURE = "REPEATED_FAILURE"
    PLANNED_ACTION = "PLANNED_ACTION"
    # bookkeeping kinds: per-component failure counts kept by the planner, and
    # test-adapter markers for components that must be deleted from the software
    FAILURE_HISTORY = "FAILURE_HISTORY"
    TOMBSTONE = "TOMBSTONE"


FAILURE_KINDS = frozenset({
    AnnotationKind.MISSING_COMPONENT,
    AnnotationKind.EXCEPTION_FAILURE,
    AnnotationKind.LIFECYCLE_FAILURE,
    AnnotationKind.REPEATED_FAILURE,
})


def _interface_set(names: Iterable[str], owner: str, direction: str) -> frozenset[str]:
    if isinstance(names, str):
        names = [names]
    names = list(names)
    result = frozenset(names)
    if len(result) != len(names):
        raise DuplicateIdError(f"component {owner!r} lists a {direction} interface twice")
    return result


@dataclass(frozen=True)
class Component:
    id: str
    type_name: str
    lifecycle: Lifecycle = Lifecycle.DEPLOYED
    provided: frozenset[str] = frozenset()
    required: frozenset[str] = frozenset()
    critical: bool = False
    injected: bool = False

    def __post_init__(self):
        if not self.id:
            raise InvalidArgumentError("component id must be non-empty")
        object.__setattr__(self, "lifecycle", Lifecycle(self.lifecycle))
        object.__setattr__(self, "provided", _interface_set(self.provided, self.id, "provided"))
        object.__setattr__(self, "required", _interface_set(self.required, self.id, "required"))

    def replace(self, **changes: Any) -> Component:
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class Connector:
    """Binds ``from_component``'s required interface to ``to_component``'s provided one."""

    id: str
    from_component: str
    required_interface: str
    to_component: str
    provided_interface: str
    injected: bool = False

    def __post_init__(self):
        if not self.id:
            raise InvalidArgumentError("connector id must be non-empty")

    def replace(self, **changes: Any) -> Connector:
        return dataclasses.replace(self, **changes)

    def touches(self, component_id: str) -> bool:
        return component_id in (self.from_component, self.to_component)


@dataclass(frozen=True)
class Annotation:
    kind: AnnotationKind
    target: str
    payload: tuple[tuple[str, str], ...] = ()
    injected: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", AnnotationKind(self.kind))
        items = self.payload.items() if isinstance(self.payload, Mapping) else self.payload
        payload = tuple(sorted((str(k), str(v)) for k, v in items))
        if len({k for k, _ in payload}) != len(payload):
            raise InvalidArgumentError("annotation payload keys must be unique")
        object.__setattr__(self, "payload", payload)
        if self.kind is AnnotationKind.PLANNED_ACTION and "action" not in self.data:
            raise InvalidArgumentError("PLANNED_ACTION annotation needs an 'action' payload entry")

    @property
    def data(self) -> dict[str, str]:
        return dict(self.payload)

    def get(self, key: str, default: str | None = None) -> str | None:
        return self.data.get(key, default)

    def sort_key(self) -> tuple:
        return (self.target, self.kind.value, self.payload, self.injected)

    def key(self) -> str:
        """Stable textual identity used in diff reports."""
        body = ",".join(f"{k}={v}" for k, v in self.payload)
        mark = "!" if self.injected else ""
        return f"{self.kind.value}{mark}@{self.target}[{body}]"


def _freeze_metrics(metrics: Mapping[str, Mapping[str, float]] | None) -> Mapping[str, Mapping[str, float]]:
    frozen = {}
    for element in sorted(metrics or {}):
        values = metrics[element]
        if values:
            frozen[element] = MappingProxyType({name: float(values[name]) for name in sorted(values)})
    return MappingProxyType(frozen)


@dataclass(frozen=True)
class RTM:
    """An architectural runtime model.

    ``components`` and ``connectors`` may be given as iterables of elements;
    they are stored as read-only mappings keyed (and ordered) by id. Metric
    keys are element ids, or the model id for architecture-level values.
    """

    id: str
    components: Mapping[str, Component] = field(default_factory=dict)
    connectors: Mapping[str, Connector] = field(default_factory=dict)
    annotations: frozenset[Annotation] = frozenset()
    metrics: Mapping[str, Mapping[str, float]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.id:
            raise InvalidArgumentError("model id must be non-empty")
        components = _index(self.components, "component")
        connectors = _index(self.connectors, "connector")
        object.__setattr__(self, "components", components)
        object.__setattr__(self, "connectors", connectors)
        object.__setattr__(self, "annotations", frozenset(self.annotations))
        object.__setattr__(self, "metrics", _freeze_metrics(self.metrics))
        self._validate()

    def _validate(self) -> None:
        clash = set(self.components) & set(self.connectors)
        if clash or self.id in self.components or self.id in self.connectors:
            raise DuplicateIdError(f"element ids must be unique, clash on {sorted(clash) or [self.id]}")
        for conn in self.connectors.values():
            source = self.components.get(conn.from_component)
            target = self.components.get(conn.to_component)
            if source is None or conn.required_interface not in source.required:
                raise DanglingEndpointError(
                    f"connector {conn.id!r}: no required interface {conn.required_interface!r} "
                    f"on component {conn.from_component!r}")
            if target is None or conn.provided_interface not in target.provided:
                raise DanglingEndpointError(
                    f"connector {conn.id!r}: no provided interface {conn.provided_interface!r} "
                    f"on component {conn.to_component!r}")
        for ann in self.annotations:
            if not self.has_element(ann.target):
                raise DanglingEndpointError(f"annotation {ann.key()} targets unknown element {ann.target!r}")
        for element in self.metrics:
            if not self.has_element(element):
                raise DanglingEndpointError(f"metrics recorded for unknown element {element!r}")

    def has_element(self, element_id: str) -> bool:
        return element_id == self.id or element_id in self.components or element_id in self.connectors

    def incident(self, component_id: str) -> list[Connector]:
        return [c for c in self.connectors.values() if c.touches(component_id)]

    def metric(self, element_id: str, name: str, default: float | None = None) -> float | None:
        return self.metrics.get(element_id, {}).get(name, default)

    def annotations_of(self, kind: AnnotationKind) -> list[Annotation]:
        return sorted((a for a in self.annotations if a.kind is kind), key=Annotation.sort_key)

    def _rebuild(self, **changes: Any) -> RTM:
        fields = {
            "id": self.id,
            "components": self.components.values(),
            "connectors": self.connectors.values(),
            "annotations": self.annotations,
            "metrics": _thaw_metrics(self.metrics),
        }
        fields.update(changes)
        return RTM(**fields)


def _index(elements, kind: str) -> Mapping:
    if isinstance(elements, Mapping):
        elements = elements.values()
    index: dict[str, Any] = {}
    for element in elements:
        if element.id in index:
            raise DuplicateIdError(f"duplicate {kind} id {element.id!r}")
        index[element.id] = element
    return MappingProxyType({k: index[k] for k in sorted(index)})


def _thaw_metrics(metrics: Mapping[str, Mapping[str, float]]) -> dict[str, dict[str, float]]:
    return {element: dict(values) for element, values in metrics.items()}


def base_id(component_id: str) -> str:
    """Strip a replacement suffix: ``shop1.Auth~2`` -> ``shop1.Auth``."""
    return component_id.split("~", 1)[0]


def create_rtm(id: str) -> RTM:
    if not id:
        raise InvalidArgumentError("model id must be non-empty")
    return RTM(id)


# -- edits ------------------------------------------------------------------

@dataclass(frozen=True)
class AddComponent:
    component: Component

    def apply(self, model: RTM) -> RTM:
        c = self.component
        if c.id in model.components or c.id in model.connectors or c.id == model.id:
            raise DuplicateIdError(f"element id {c.id!r} already present")
        return model._rebuild(components=[*model.components.values(), c])


@dataclass(frozen=True)
class RemoveComponent:
    """Remove a component together with its connectors, annotations and metrics."""

    id: str

    def apply(self, model: RTM) -> RTM:
        if self.id not in model.components:
            raise NotFoundError(f"no component {self.id!r}")
        gone = {self.id} | {c.id for c in model.incident(self.id)}
        return model._rebuild(
            components=[c for c in model.components.values() if c.id != self.id],
            connectors=[c for c in model.connectors.values() if c.id not in gone],
            annotations=[a for a in model.annotations if a.target not in gone],
            metrics={k: v for k, v in _thaw_metrics(model.metrics).items() if k not in gone},
        )


@dataclass(frozen=True)
class SetLifecycle:
    id: str
    lifecycle: Lifecycle

    def apply(self, model: RTM) -> RTM:
        if self.id not in model.components:
            raise NotFoundError(f"no component {self.id!r}")
        updated = model.components[self.id].replace(lifecycle=Lifecycle(self.lifecycle))
        return model._rebuild(components={**model.components, self.id: updated}.values())


@dataclass(frozen=True)
class AddConnector:
    connector: Connector

    def apply(self, model: RTM) -> RTM:
        c = self.connector
        if c.id in model.connectors or c.id in model.components or c.id == model.id:
            raise DuplicateIdError(f"element id {c.id!r} already present")
        return model._rebuild(connectors=[*model.connectors.values(), c])


@dataclass(frozen=True)
class RemoveConnector:
    id: str

    def apply(self, model: RTM) -> RTM:
        if self.id not in model.connectors:
            raise NotFoundError(f"no connector {self.id!r}")
        return model._rebuild(
            connectors=[c for c in model.connectors.values() if c.id != self.id],
            annotations=[a for a in model.annotations if a.target != self.id],
            metrics={k: v for k, v in _thaw_metrics(model.metrics).items() if k != self.id},
        )


@dataclass(frozen=True)
class Annotate:
    annotation: Annotation

    def apply(self, model: RTM) -> RTM:
        return model._rebuild(annotations=model.annotations | {self.annotation})


@dataclass(frozen=True)
class RemoveAnnotation:
    annotation: Annotation

    def apply(self, model: RTM) -> RTM:
        if self.annotation not in model.annotations:
            raise NotFoundError(f"no annotation {self.annotation.key()}")
        return model._rebuild(annotations=model.annotations - {self.annotation})


@dataclass(frozen=True)
class SetMetric:
    """Set a named metric on an element; a ``None`` value deletes it."""

    element: str
    name: str
    value: float | None

    def apply(self, model: RTM) -> RTM:
        if not model.has_element(self.element):
            raise NotFoundError(f"no element {self.element!r}")
        metrics = _thaw_metrics(model.metrics)
        values = metrics.setdefault(self.element, {})
        if self.value is None:
            values.pop(self.name, None)
        else:
            values[self.name] = float(self.value)
        return model._rebuild(metrics=metrics)


Edit = Union[AddComponent, RemoveComponent, SetLifecycle, AddConnector, RemoveConnector,
             Annotate, RemoveAnnotation, SetMetric]


def mutate(model: RTM, *edits: Edit) -> RTM:
    """Apply ``edits`` in order and return the resulting model; ``model`` is untouched."""
    for edit in edits:
        model = edit.apply(model)
    return model


# -- serialization ----------------------------------------------------------

def component_to_dict(c: Component) -> dict[str, Any]:
    return {
        "id": c.id,
        "type": c.type_name,
        "lifecycle": c.lifecycle.value,
        "provided": sorted(c.provided),
        "required": sorted(c.required),
        "critical": c.critical,
        "injected": c.injected,
    }


def connector_to_dict(c: Connector) -> dict[str, Any]:
    return {
        "id": c.id,
        "from": c.from_component,
        "required": c.required_interface,
        "to": c.to_component,
        "provided": c.provided_interface,
        "injected": c.injected,
    }


def annotation_to_dict(a: Annotation) -> dict[str, Any]:
    return {"kind": a.kind.value, "target": a.target, "payload": dict(a.payload), "injected": a.injected}


def to_dict(model: RTM) -> dict[str, Any]:
    return {
        "id": model.id,
        "components": [component_to_dict(c) for c in model.components.values()],
        "connectors": [connector_to_dict(c) for c in model.connectors.values()],
        "annotations": [annotation_to_dict(a) for a in sorted(model.annotations, key=Annotation.sort_key)],
        "metrics": {k: dict(v) for k, v in model.metrics.items()},
    }


def component_from_dict(obj: Mapping[str, Any]) -> Component:
    return Component(
        id=obj["id"],
        type_name=obj["type"],
        lifecycle=Lifecycle(obj["lifecycle"]),
        provided=obj.get("provided", ()),
        required=obj.get("required", ()),
        critical=bool(obj.get("critical", False)),
        injected=bool(obj.get("injected", False)),
    )


def connector_from_dict(obj: Mapping[str, Any]) -> Connector:
    return Connector(obj["id"], obj["from"], obj["required"], obj["to"], obj["provided"],
                     injected=bool(obj.get("injected", False)))


def annotation_from_dict(obj: Mapping[str, Any]) -> Annotation:
    return Annotation(AnnotationKind(obj["kind"]), obj["target"], obj.get("payload", {}),
                      injected=bool(obj.get("injected", False)))


def from_dict(obj: Any) -> RTM:
    """Build a model from its JSON document form; schema problems raise ParseError."""
    if not isinstance(obj, Mapping):
        raise ParseError("model document must be a JSON object")
    try:
        return RTM(
            id=obj["id"],
            components=[component_from_dict(c) for c in obj.get("components", [])],
            connectors=[connector_from_dict(c) for c in obj.get("connectors", [])],
            annotations=[annotation_from_dict(a) for a in obj.get("annotations", [])],
            metrics=obj.get("metrics", {}),
        )
    except KeyError as exc:
        raise ParseError(f"model document lacks field {exc.args[0]!r}") from None
    except (TypeError, AttributeError) as exc:
        raise ParseError(f"malformed model document: {exc}") from None
    except ValueError as exc:
        if isinstance(exc, (DuplicateIdError, DanglingEndpointError, InvalidArgumentError)):
            raise
        raise ParseError(f"malformed model document: {exc}") from None


def dumps(obj: Any) -> bytes:
    """Canonical JSON encoding used by every rtmtest file format."""
    return (json.dumps(obj, indent=2, ensure_ascii=False, allow_nan=False) + "\n").encode("utf-8")


def loads(data: bytes | str) -> Any:
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            prefix = data[: exc.start]
            line = prefix.count(b"\n") + 1
            column = exc.start - (prefix.rfind(b"\n") + 1) + 1
            raise ParseError("invalid UTF-8", line, column) from None
    try:
        return json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None


def serialize(model: RTM) -> bytes:
    return dumps(to_dict(model))


def deserialize(data: bytes | str) -> RTM:
    return from_dict(loads(data))


def save(model: RTM, path: str | Path) -> None:
    Path(path).write_bytes(serialize(model))


def load(path: str | Path) -> RTM:
    return deserialize(Path(path).read_bytes())
