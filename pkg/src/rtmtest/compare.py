"""Id-based matching, diffing and constraint checking over runtime models."""

from __future__ import annotations

from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass, field
from typing import Any

from .errors import (
    InconsistentDiffError,
    InvalidArgumentError,
    RTMError,
    UnknownConstraintError,
)
from .model import (
    RTM,
    Annotation,
    AnnotationKind,
    Component,
    Connector,
    Lifecycle,
    annotation_from_dict,
    annotation_to_dict,
    base_id,
    component_from_dict,
    component_to_dict,
    connector_from_dict,
    connector_to_dict,
    lifecycle_reachable,
)

__all__ = [
    "MODEL_ELEMENT",
    "IGNORE_CATEGORIES",
    "Element",
    "Change",
    "Diff",
    "diff",
    "equal",
    "apply_diff",
    "ConstraintViolation",
    "ConstraintContext",
    "register_constraint",
    "registered_constraints",
    "check_constraints",
    "check_adaptation_well_defined",
    "critical_ids",
    "WELL_DEFINED",
]

#: element id under which changes to the architecture itself are reported
MODEL_ELEMENT = "@model"

IGNORE_CATEGORIES = frozenset({"annotations", "metrics", "planned-actions"})
_PLANNER_BOOKKEEPING = frozenset({AnnotationKind.PLANNED_ACTION, AnnotationKind.FAILURE_HISTORY})

_KIND_ORDER = {"component": 0, "connector": 1, "annotation": 2}


@dataclass(frozen=True)
class Element:
    """An element that exists on only one side of a diff, with its metrics."""

    kind: str
    id: str
    value: Component | Connector | Annotation
    metrics: tuple[tuple[str, float], ...] = ()

    def sort_key(self):
        return (_KIND_ORDER[self.kind], self.id)

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "component":
            value = component_to_dict(self.value)
        elif self.kind == "connector":
            value = connector_to_dict(self.value)
        else:
            value = annotation_to_dict(self.value)
        out = {"kind": self.kind, "id": self.id, "value": value}
        if self.kind != "annotation":
            out["metrics"] = dict(self.metrics)
        return out

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> Element:
        kind = obj["kind"]
        if kind == "component":
            value = component_from_dict(obj["value"])
        elif kind == "connector":
            value = connector_from_dict(obj["value"])
        elif kind == "annotation":
            value = annotation_from_dict(obj["value"])
        else:
            raise InvalidArgumentError(f"unknown element kind {kind!r}")
        metrics = tuple(sorted((k, float(v)) for k, v in obj.get("metrics", {}).items()))
        return cls(kind, obj["id"], value, metrics)


def _json_value(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(value)
    return value


@dataclass(frozen=True)
class Change:
    element: str
    field: str
    old: Any
    new: Any

    def __post_init__(self):
        object.__setattr__(self, "old", _json_value(self.old))
        object.__setattr__(self, "new", _json_value(self.new))

    def to_dict(self) -> dict[str, Any]:
        def enc(v):
            return list(v) if isinstance(v, tuple) else v
        return {"element": self.element, "field": self.field, "old": enc(self.old), "new": enc(self.new)}


@dataclass(frozen=True)
class Diff:
    added: tuple[Element, ...] = ()
    removed: tuple[Element, ...] = ()
    changed: tuple[Change, ...] = ()

    @property
    def empty(self) -> bool:
        return not (self.added or self.removed or self.changed)

    def __bool__(self) -> bool:
        return not self.empty

    def __len__(self) -> int:
        return len(self.added) + len(self.removed) + len(self.changed)

    def element_ids(self) -> set[str]:
        """Ids of every element the diff touches; annotations map to their target."""
        ids = set()
        for el in (*self.added, *self.removed):
            ids.add(el.value.target if el.kind == "annotation" else el.id)
        ids.update(ch.element for ch in self.changed)
        return ids

    def to_dict(self) -> dict[str, Any]:
        return {
            "added": [e.to_dict() for e in self.added],
            "removed": [e.to_dict() for e in self.removed],
            "changed": [c.to_dict() for c in self.changed],
        }

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> Diff:
        return cls(
            added=tuple(Element.from_dict(e) for e in obj.get("added", [])),
            removed=tuple(Element.from_dict(e) for e in obj.get("removed", [])),
            changed=tuple(Change(c["element"], c["field"], c["old"], c["new"]) for c in obj.get("changed", [])),
        )

    def summary(self) -> str:
        if self.empty:
            return "no differences"
        lines = []
        for el in self.removed:
            lines.append(f"- {el.kind} {el.id}")
        for el in self.added:
            lines.append(f"+ {el.kind} {el.id}")
        for ch in self.changed:
            lines.append(f"~ {ch.element}.{ch.field}: {ch.old!r} -> {ch.new!r}")
        return "\n".join(lines)


def _component_fields(c: Component) -> dict[str, Any]:
    return {
        "type": c.type_name,
        "lifecycle": c.lifecycle.value,
        "provided": tuple(sorted(c.provided)),
        "required": tuple(sorted(c.required)),
        "critical": c.critical,
        "injected": c.injected,
    }


def _connector_fields(c: Connector) -> dict[str, Any]:
    return {
        "from": c.from_component,
        "required": c.required_interface,
        "to": c.to_component,
        "provided": c.provided_interface,
        "injected": c.injected,
    }


def _with_fields(element, values: Mapping[str, Any]):
    if isinstance(element, Component):
        return element.replace(
            type_name=values["type"], lifecycle=Lifecycle(values["lifecycle"]),
            provided=frozenset(values["provided"]), required=frozenset(values["required"]),
            critical=values["critical"], injected=values["injected"],
        )
    return element.replace(
        from_component=values["from"], required_interface=values["required"],
        to_component=values["to"], provided_interface=values["provided"], injected=values["injected"],
    )


def _check_ignore(ignore: Iterable[str]) -> frozenset[str]:
    ignore = frozenset(ignore)
    unknown = ignore - IGNORE_CATEGORIES
    if unknown:
        raise InvalidArgumentError(f"unknown ignore categories {sorted(unknown)}")
    return ignore


def _visible_annotations(model: RTM, ignore: frozenset[str]) -> frozenset[Annotation]:
    if "annotations" in ignore:
        return frozenset()
    if "planned-actions" in ignore:
        return frozenset(a for a in model.annotations if a.kind not in _PLANNER_BOOKKEEPING)
    return model.annotations


def _metrics_of(model: RTM, element: str, ignore: frozenset[str]) -> dict[str, float]:
    if "metrics" in ignore:
        return {}
    return dict(model.metrics.get(element, {}))


def _metric_changes(element: str, old: dict[str, float], new: dict[str, float]) -> list[Change]:
    return [
        Change(element, f"metric:{name}", old.get(name), new.get(name))
        for name in sorted(set(old) | set(new))
        if old.get(name) != new.get(name)
    ]


def diff(left: RTM, right: RTM, ignore: Iterable[str] = ()) -> Diff:
    """Match elements by id, then compare field by field.

    ``ignore`` drops whole categories from the comparison: ``annotations``,
    ``metrics``, or ``planned-actions`` (planner output: PLANNED_ACTION and
    FAILURE_HISTORY annotations).
    """
    ignore = _check_ignore(ignore)
    added: list[Element] = []
    removed: list[Element] = []
    changed: list[Change] = []

    for kind, lmap, rmap, fields in (
        ("component", left.components, right.components, _component_fields),
        ("connector", left.connectors, right.connectors, _connector_fields),
    ):
        for eid in sorted(set(lmap) | set(rmap)):
            if eid not in rmap:
                removed.append(Element(kind, eid, lmap[eid], tuple(_metrics_of(left, eid, ignore).items())))
            elif eid not in lmap:
                added.append(Element(kind, eid, rmap[eid], tuple(_metrics_of(right, eid, ignore).items())))
            else:
                old, new = fields(lmap[eid]), fields(rmap[eid])
                changed.extend(Change(eid, f, old[f], new[f]) for f in old if old[f] != new[f])
                changed.extend(_metric_changes(eid, _metrics_of(left, eid, ignore), _metrics_of(right, eid, ignore)))

    lann, rann = _visible_annotations(left, ignore), _visible_annotations(right, ignore)
    removed.extend(Element("annotation", a.key(), a) for a in lann - rann)
    added.extend(Element("annotation", a.key(), a) for a in rann - lann)

    if left.id != right.id:
        changed.append(Change(MODEL_ELEMENT, "id", left.id, right.id))
    changed.extend(_metric_changes(MODEL_ELEMENT, _metrics_of(left, left.id, ignore),
                                   _metrics_of(right, right.id, ignore)))

    return Diff(
        added=tuple(sorted(added, key=Element.sort_key)),
        removed=tuple(sorted(removed, key=Element.sort_key)),
        changed=tuple(sorted(changed, key=lambda c: (c.element, c.field))),
    )


def equal(left: RTM, right: RTM, ignore: Iterable[str] = ()) -> bool:
    return diff(left, right, ignore).empty


def apply_diff(base: RTM, d: Diff) -> RTM:
    """Rebuild the target of ``d`` from ``base``; ``d`` must have been computed against ``base``."""
    components = dict(base.components)
    connectors = dict(base.connectors)
    annotations = set(base.annotations)
    metrics = {k: dict(v) for k, v in base.metrics.items()}
    model_id = base.id
    pools = {"component": components, "connector": connectors}

    for el in d.removed:
        if el.kind == "annotation":
            if el.value not in annotations:
                raise InconsistentDiffError(f"annotation {el.id} not in base")
            annotations.discard(el.value)
            continue
        pool = pools[el.kind]
        if pool.get(el.id) != el.value or metrics.get(el.id, {}) != dict(el.metrics):
            raise InconsistentDiffError(f"{el.kind} {el.id!r} does not match base")
        del pool[el.id]
        metrics.pop(el.id, None)

    for ch in d.changed:
        if ch.element == MODEL_ELEMENT:
            if ch.field == "id":
                if model_id != ch.old:
                    raise InconsistentDiffError(f"model id is {model_id!r}, diff expects {ch.old!r}")
                model_id = ch.new
                continue
            key = base.id
        else:
            key = ch.element
        if ch.field.startswith("metric:"):
            if key != base.id and key not in components and key not in connectors:
                raise InconsistentDiffError(f"metric change on unknown element {key!r}")
            name = ch.field[len("metric:"):]
            values = metrics.setdefault(key, {})
            if values.get(name) != ch.old:
                raise InconsistentDiffError(f"metric {key}.{name} is {values.get(name)!r}, diff expects {ch.old!r}")
            if ch.new is None:
                values.pop(name)
            else:
                values[name] = float(ch.new)
            continue
        pool = components if key in components else connectors if key in connectors else None
        if pool is None:
            raise InconsistentDiffError(f"change on unknown element {key!r}")
        element = pool[key]
        values = (_component_fields if isinstance(element, Component) else _connector_fields)(element)
        if ch.field not in values or values[ch.field] != ch.old:
            raise InconsistentDiffError(f"{key}.{ch.field} does not match base")
        values[ch.field] = ch.new
        pool[key] = _with_fields(element, values)

    for el in d.added:
        if el.kind == "annotation":
            if el.value in annotations:
                raise InconsistentDiffError(f"annotation {el.id} already in base")
            annotations.add(el.value)
            continue
        if el.id in components or el.id in connectors:
            raise InconsistentDiffError(f"{el.kind} {el.id!r} already in base")
        pools[el.kind][el.id] = el.value
        if el.metrics:
            metrics[el.id] = dict(el.metrics)

    if model_id != base.id and base.id in metrics:
        metrics[model_id] = metrics.pop(base.id)
    try:
        return RTM(model_id, components.values(), connectors.values(), annotations, metrics)
    except RTMError as exc:
        raise InconsistentDiffError(f"diff does not apply to base: {exc}") from exc


# -- constraints ------------------------------------------------------------

@dataclass(frozen=True, order=True)
class ConstraintViolation:
    constraint: str
    target: str
    message: str = field(compare=True)

    def to_dict(self) -> dict[str, str]:
        return {"constraint": self.constraint, "target": self.target, "message": self.message}


@dataclass(frozen=True)
class ConstraintContext:
    """Application knowledge a single model cannot carry.

    ``expected_critical`` lists base ids of components that must be present;
    a component whose id carries a replacement suffix (``id~n``) counts for
    its base id.
    """

    expected_critical: frozenset[str] = frozenset()


ConstraintFn = Callable[[RTM, ConstraintContext], Iterable[ConstraintViolation]]
_CONSTRAINTS: dict[str, ConstraintFn] = {}

WELL_DEFINED = "well-defined-lifecycle"


def register_constraint(name: str, fn: ConstraintFn | None = None):
    """Register a model predicate under ``name``; usable as a decorator."""
    def deco(f: ConstraintFn) -> ConstraintFn:
        _CONSTRAINTS[name] = f
        return f
    return deco(fn) if fn is not None else deco


def registered_constraints() -> tuple[str, ...]:
    return tuple(sorted(_CONSTRAINTS))


def critical_ids(model: RTM) -> frozenset[str]:
    return frozenset(base_id(c.id) for c in model.components.values() if c.critical)


def check_constraints(
    model: RTM,
    constraints: Iterable[str] | None = None,
    *,
    expected_critical: Iterable[str] = (),
) -> list[ConstraintViolation]:
    """Run the named constraints (all registered ones by default).

    Violations are returned sorted by (constraint, target); an empty list
    means the architecture is valid.
    """
    names = registered_constraints() if constraints is None else tuple(constraints)
    unknown = [n for n in names if n not in _CONSTRAINTS]
    if unknown:
        raise UnknownConstraintError(f"unknown constraints {sorted(unknown)}")
    ctx = ConstraintContext(frozenset(expected_critical))
    found: set[ConstraintViolation] = set()
    for name in names:
        found.update(_CONSTRAINTS[name](model, ctx))
    return sorted(found)


def _live(c: Component) -> bool:
    return c.lifecycle is not Lifecycle.UNDEPLOYED


@register_constraint("critical-components-present")
def _critical_present(model: RTM, ctx: ConstraintContext):
    live = {base_id(c.id) for c in model.components.values() if _live(c)}
    expected = set(ctx.expected_critical) | critical_ids(model)
    for cid in sorted(expected - live):
        yield ConstraintViolation("critical-components-present", cid,
                                  f"critical component {cid} is missing")


@register_constraint("no-dangling-required")
def _no_dangling(model: RTM, ctx: ConstraintContext):
    bound = {(c.from_component, c.required_interface) for c in model.connectors.values()}
    for comp in model.components.values():
        if comp.lifecycle is not Lifecycle.STARTED:
            continue
        for iface in sorted(comp.required):
            if (comp.id, iface) not in bound:
                yield ConstraintViolation("no-dangling-required", comp.id,
                                          f"required interface {iface} of {comp.id} is unbound")


@register_constraint("lifecycle-states-legal")
def _lifecycle_legal(model: RTM, ctx: ConstraintContext):
    for comp in model.components.values():
        if not isinstance(comp.lifecycle, Lifecycle):
            yield ConstraintViolation("lifecycle-states-legal", comp.id, f"unknown lifecycle {comp.lifecycle!r}")
        elif comp.lifecycle is Lifecycle.UNDEPLOYED and model.incident(comp.id):
            yield ConstraintViolation("lifecycle-states-legal", comp.id,
                                      f"undeployed component {comp.id} is still wired")


@register_constraint("connector-endpoints-exist")
def _endpoints(model: RTM, ctx: ConstraintContext):
    for conn in model.connectors.values():
        src = model.components.get(conn.from_component)
        dst = model.components.get(conn.to_component)
        if src is None or conn.required_interface not in src.required \
                or dst is None or conn.provided_interface not in dst.provided:
            yield ConstraintViolation("connector-endpoints-exist", conn.id, f"connector {conn.id} dangles")


def check_adaptation_well_defined(before: RTM, after: RTM) -> list[ConstraintViolation]:
    """Lifecycle sanity of the adaptation that turned ``before`` into ``after``.

    A component kept across the step may only move along the legal
    transition relation (several steps allowed). New components must enter
    DEPLOYED, optionally started right away. Removed components must already
    be UNDEPLOYED unless they were injected by a test adapter.
    """
    out = []
    for cid, old in before.components.items():
        new = after.components.get(cid)
        if new is None:
            if old.lifecycle is not Lifecycle.UNDEPLOYED and not old.injected:
                out.append(ConstraintViolation(WELL_DEFINED, cid,
                                               f"{cid} removed while {old.lifecycle.value}"))
        elif new.lifecycle != old.lifecycle and not lifecycle_reachable(old.lifecycle, new.lifecycle):
            out.append(ConstraintViolation(WELL_DEFINED, cid,
                                           f"{cid}: illegal change {old.lifecycle.value} -> {new.lifecycle.value}"))
    for cid, new in after.components.items():
        if cid not in before.components and new.lifecycle not in (Lifecycle.DEPLOYED, Lifecycle.STARTED):
            out.append(ConstraintViolation(WELL_DEFINED, cid,
                                           f"{cid} added in state {new.lifecycle.value}"))
    return sorted(out)
