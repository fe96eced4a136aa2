"""Reference analyze and plan steps for the shop architecture, plus seeded mutants.

Analyze rules, per catalog component of every shop:

- no live incarnation: MISSING_COMPONENT (targets the model, payload names it)
- not STARTED: LIFECYCLE_FAILURE
- ``exceptions`` metric above the threshold: EXCEPTION_FAILURE
- a current failure and at least ``k`` earlier repairs in the failure
  history: REPEATED_FAILURE

Plan consumes those annotations and repairs the model: REDEPLOY for missing
components, RESTART for exceptions and lifecycle anomalies, REPLACE (retire
the old component, add one with a fresh ``~n`` suffix) for repeated
failures and for undeployed components. Repairs rewire the shop and record
a PLANNED_ACTION; the FAILURE_HISTORY annotation on the model keeps the
per-component repair counts.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from ..automaton import EXCEPTIONS_METRIC
from ..model import (
    FAILURE_KINDS,
    RTM,
    AddComponent,
    Annotate,
    Annotation,
    AnnotationKind,
    Lifecycle,
    RemoveComponent,
    RemoveConnector,
    SetLifecycle,
    SetMetric,
    base_id,
    mutate,
)
from .catalog import (
    ShopCatalog,
    component_id,
    current_component,
    default_catalog,
    is_retired,
    shops_of,
    split_id,
    wire,
)

__all__ = [
    "EXCEPTION_THRESHOLD",
    "REPEAT_THRESHOLD",
    "SelfHealingEngine",
    "read_history",
    "reference_analyze",
    "reference_plan",
    "analyze_ignoring_missing",
    "plan_wrong_type",
]

log = logging.getLogger(__name__)

EXCEPTION_THRESHOLD = 5
REPEAT_THRESHOLD = 3
_HANDLED = FAILURE_KINDS | {AnnotationKind.PLANNED_ACTION, AnnotationKind.FAILURE_HISTORY}


def read_history(model: RTM) -> dict[str, int]:
    counts: dict[str, int] = {}
    for ann in model.annotations_of(AnnotationKind.FAILURE_HISTORY):
        for key, value in ann.payload:
            counts[key] = counts.get(key, 0) + int(value)
    return counts


def _write_history(model: RTM, counts: dict[str, int]) -> RTM:
    model = model._rebuild(annotations=[a for a in model.annotations
                                        if a.kind is not AnnotationKind.FAILURE_HISTORY])
    if not counts:
        return model
    return mutate(model, Annotate(Annotation(AnnotationKind.FAILURE_HISTORY, model.id,
                                             {k: str(v) for k, v in counts.items()})))


def _fresh_id(model: RTM, base: str) -> str:
    n = 1
    while f"{base}~{n}" in model.components:
        n += 1
    return f"{base}~{n}"


def _failure_base(ann: Annotation) -> str:
    return ann.get("component") or base_id(ann.target)


@dataclass(frozen=True)
class SelfHealingEngine:
    catalog: ShopCatalog = field(default_factory=default_catalog)
    exception_threshold: float = EXCEPTION_THRESHOLD
    repeat_threshold: int = REPEAT_THRESHOLD

    def analyze(self, model: RTM) -> RTM:
        history = read_history(model)
        found = []
        for shop in shops_of(model):
            for name in self.catalog.names:
                base = component_id(shop, name)
                comp = current_component(model, base)
                failures = []
                if comp is None:
                    failures.append(Annotation(AnnotationKind.MISSING_COMPONENT, model.id,
                                               {"component": base, "type": name, "shop": shop}))
                else:
                    if comp.lifecycle is not Lifecycle.STARTED:
                        failures.append(Annotation(AnnotationKind.LIFECYCLE_FAILURE, comp.id,
                                                   {"lifecycle": comp.lifecycle.value}))
                    exceptions = model.metric(comp.id, EXCEPTIONS_METRIC, 0.0)
                    if exceptions > self.exception_threshold:
                        failures.append(Annotation(AnnotationKind.EXCEPTION_FAILURE, comp.id,
                                                   {"count": f"{exceptions:g}"}))
                if failures and history.get(base, 0) >= self.repeat_threshold:
                    failures.append(Annotation(AnnotationKind.REPEATED_FAILURE,
                                               comp.id if comp else model.id,
                                               {"component": base, "count": str(history[base])}))
                found.extend(failures)
        return mutate(model, *(Annotate(a) for a in found))

    def plan(self, model: RTM) -> RTM:
        history = read_history(model)
        kinds: dict[str, set[AnnotationKind]] = {}
        for ann in model.annotations:
            if ann.kind in FAILURE_KINDS:
                kinds.setdefault(_failure_base(ann), set()).add(ann.kind)
            elif ann.kind not in _HANDLED:
                log.warning("unhandled annotation %s passed through", ann.key())
        out = model._rebuild(annotations=[a for a in model.annotations
                                          if a.kind not in FAILURE_KINDS and a.kind is not AnnotationKind.PLANNED_ACTION])
        out = mutate(out, *(RemoveComponent(c.id) for c in out.components.values() if is_retired(out, c)))
        actions: list[Annotation] = []
        touched: set[str] = set()
        for base in sorted(kinds):
            shop, name = split_id(base)
            if self.catalog.entry(name) is None:
                log.warning("failure on %s, which is not a catalog component", base)
                continue
            found = kinds[base]
            comp = current_component(out, base)
            if AnnotationKind.REPEATED_FAILURE in found or (comp and comp.lifecycle is Lifecycle.UNDEPLOYED):
                if comp is None:
                    target = _fresh_id(out, base)
                    out = mutate(out, AddComponent(self.catalog.component(shop, name, id=target)))
                else:
                    out, target = self._replace(out, comp.id, shop, name)
                action = "REPLACE"
                history.pop(base, None)
            elif comp is None:
                new_id = base if base not in out.components else _fresh_id(out, base)
                out = mutate(out, AddComponent(self.catalog.component(shop, name, id=new_id)))
                action, target = "REDEPLOY", new_id
                history[base] = history.get(base, 0) + 1
            elif found & {AnnotationKind.LIFECYCLE_FAILURE, AnnotationKind.EXCEPTION_FAILURE}:
                edits = []
                if comp.lifecycle is not Lifecycle.STARTED:
                    edits.append(SetLifecycle(comp.id, Lifecycle.STARTED))
                if out.metric(comp.id, EXCEPTIONS_METRIC) is not None:
                    edits.append(SetMetric(comp.id, EXCEPTIONS_METRIC, 0.0))
                out = mutate(out, *edits)
                action, target = "RESTART", comp.id
                history[base] = history.get(base, 0) + 1
            else:
                continue
            touched.add(shop)
            actions.append(Annotation(AnnotationKind.PLANNED_ACTION, target, {"action": action, "component": base}))
        out = wire(out, sorted(touched), self.catalog)
        out = mutate(out, *(Annotate(a) for a in actions))
        return _write_history(out, history)

    def _replace(self, model: RTM, old_id: str, shop: str, name: str) -> tuple[RTM, str]:
        edits = [RemoveConnector(c.id) for c in model.incident(old_id)]
        if model.components[old_id].lifecycle is not Lifecycle.UNDEPLOYED:
            edits.append(SetLifecycle(old_id, Lifecycle.UNDEPLOYED))
        model = mutate(model, *edits)
        model = model._rebuild(metrics={k: dict(v) for k, v in model.metrics.items() if k != old_id})
        new_id = _fresh_id(model, base_id(old_id))
        return mutate(model, AddComponent(self.catalog.component(shop, name, id=new_id))), new_id


def reference_analyze(model: RTM) -> RTM:
    return SelfHealingEngine().analyze(model)


def reference_plan(model: RTM) -> RTM:
    return SelfHealingEngine().plan(model)


# -- mutants --------------------------------------------------------------------

def analyze_ignoring_missing(model: RTM) -> RTM:
    """Mutant: does not report missing components."""
    out = reference_analyze(model)
    fresh = [a for a in out.annotations - model.annotations
             if a.kind is AnnotationKind.MISSING_COMPONENT
             or (a.kind is AnnotationKind.REPEATED_FAILURE and a.target == model.id)]
    return out._rebuild(annotations=out.annotations - set(fresh))


def plan_wrong_type(model: RTM) -> RTM:
    """Mutant: redeploys missing components under the right id but a wrong type name."""
    out = reference_plan(model)
    redeployed = {a.target for a in out.annotations_of(AnnotationKind.PLANNED_ACTION) if a.get("action") == "REDEPLOY"}
    comps = [c.replace(type_name=c.type_name + "Stub") if c.id in redeployed else c for c in out.components.values()]
    return out._rebuild(components=comps)
