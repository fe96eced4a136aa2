"""A simulated adaptable software with effector/sensor access, and execute/monitor steps over it."""

from __future__ import annotations

from collections.abc import Mapping
from pathlib import Path
from typing import Any

import numpy as np

from ..compare import diff
from ..errors import InvalidArgumentError
from ..harness import Overlay
from ..model import (
    RTM,
    AddComponent,
    AddConnector,
    Lifecycle,
    RemoveComponent,
    RemoveConnector,
    SetLifecycle,
    SetMetric,
    load,
    mutate,
)
from .catalog import ShopCatalog, component_id, current_component, default_catalog, shops_of

__all__ = [
    "SimulatedAdaptableSoftware",
    "NoisySoftware",
    "reference_execute",
    "reference_monitor",
    "execute_skipping_connectors",
    "execute_never_starting",
    "monitor_filling_missing",
    "monitor_reporting_started",
    "software_from_spec",
]


class SimulatedAdaptableSoftware:
    """Holds the running architecture; execute edits it, monitor reads it.

    ``reset`` restores the reset image exactly and clears the overlay log.
    """

    resettable = True

    def __init__(self, reset_image: RTM):
        self.reset_image = reset_image
        self.state = reset_image
        self.overlay_log: list[Overlay] = []

    def reset(self) -> None:
        self.state = self.reset_image
        self.overlay_log = []

    def apply(self, *edits) -> None:
        self.state = mutate(self.state, *edits)

    def read(self) -> RTM:
        return self.state

    def inject(self, overlay: Overlay) -> None:
        """Impose the test adapter's overlay: delete tombstoned parts, add injected ones."""
        edits: list = [RemoveComponent(cid) for cid in overlay.deletions if cid in self.state.components]
        edits += [AddComponent(c.replace(injected=False)) for c in overlay.components]
        edits += [AddConnector(c.replace(injected=False)) for c in overlay.connectors]
        edits += [SetMetric(element, name, value)
                  for element, values in sorted(overlay.metrics.items()) for name, value in sorted(values.items())]
        self.apply(*edits)
        self.overlay_log.append(overlay)


class NoisySoftware(SimulatedAdaptableSoftware):
    """With probability ``noise`` per run, the environment drops a random connector after injection."""

    def __init__(self, reset_image: RTM, noise: float, seed: int = 0):
        super().__init__(reset_image)
        if not 0.0 <= noise <= 1.0:
            raise InvalidArgumentError("noise must be a probability")
        self.noise = noise
        self._rng = np.random.default_rng(seed)

    def inject(self, overlay: Overlay) -> None:
        super().inject(overlay)
        if self._rng.random() < self.noise and self.state.connectors:
            ids = list(self.state.connectors)
            self.apply(RemoveConnector(ids[int(self._rng.integers(len(ids)))]))


# -- execute / monitor ------------------------------------------------------------

def _execute(planned: RTM, software: SimulatedAdaptableSoftware, *, connectors: bool = True,
             start: bool = True) -> None:
    current = software.read()
    d = diff(current, planned, ignore={"annotations", "metrics"})
    gone_conns = [e.id for e in d.removed if e.kind == "connector"]
    gone_comps = [e.id for e in d.removed if e.kind == "component"]
    rebuilt_conns, rebuilt_comps, relife = set(), set(), {}
    for ch in d.changed:
        if ch.element in planned.connectors:
            rebuilt_conns.add(ch.element)
        elif ch.element in planned.components:
            if ch.field == "lifecycle":
                relife[ch.element] = planned.components[ch.element].lifecycle
            else:
                rebuilt_comps.add(ch.element)
    edits: list = [RemoveConnector(c) for c in sorted(set(gone_conns) | rebuilt_conns)
                   if c in current.connectors]
    edits += [RemoveComponent(c) for c in sorted(set(gone_comps) | rebuilt_comps)]
    software.apply(*edits)
    adds = sorted({e.id for e in d.added if e.kind == "component"} | rebuilt_comps)
    edits = []
    for cid in adds:
        comp = planned.components[cid].replace(injected=False)
        if not start and comp.lifecycle is Lifecycle.STARTED:
            comp = comp.replace(lifecycle=Lifecycle.DEPLOYED)
        edits.append(AddComponent(comp))
    for cid, state in sorted(relife.items()):
        if cid not in rebuilt_comps and (start or state is not Lifecycle.STARTED):
            edits.append(SetLifecycle(cid, state))
    software.apply(*edits)
    if connectors:
        have = software.read().connectors
        software.apply(*(AddConnector(c.replace(injected=False)) for cid, c in planned.connectors.items()
                         if cid not in have))
    state = software.read()
    metric_edits = []
    for element in sorted(set(state.metrics) | set(planned.metrics)):
        if not state.has_element(element):
            continue
        old, new = state.metrics.get(element, {}), planned.metrics.get(element, {})
        metric_edits += [SetMetric(element, n, new.get(n)) for n in sorted(set(old) | set(new))
                         if old.get(n) != new.get(n)]
    software.apply(*metric_edits)


def reference_execute(planned: RTM, software: SimulatedAdaptableSoftware) -> None:
    """Issue effector edits until the software's architecture matches ``planned``."""
    _execute(planned, software)


def reference_monitor(software: SimulatedAdaptableSoftware) -> RTM:
    return software.read()


def execute_skipping_connectors(planned: RTM, software: SimulatedAdaptableSoftware) -> None:
    """Mutant: never creates connectors."""
    _execute(planned, software, connectors=False)


def execute_never_starting(planned: RTM, software: SimulatedAdaptableSoftware) -> None:
    """Mutant: deploys components but never starts them."""
    _execute(planned, software, start=False)


def monitor_filling_missing(software: SimulatedAdaptableSoftware, catalog: ShopCatalog | None = None) -> RTM:
    """Mutant: reports catalog components that are gone as if they were still running."""
    from .catalog import wire

    catalog = catalog or default_catalog()
    state = software.read()
    shops = shops_of(state)
    missing = [catalog.component(shop, name) for shop in shops for name in catalog.names
               if current_component(state, component_id(shop, name)) is None]
    if not missing:
        return state
    return wire(mutate(state, *(AddComponent(c) for c in missing)), shops, catalog)


def monitor_reporting_started(software: SimulatedAdaptableSoftware) -> RTM:
    """Mutant: reports DEPLOYED components as STARTED."""
    state = software.read()
    return mutate(state, *(SetLifecycle(c.id, Lifecycle.STARTED) for c in state.components.values()
                           if c.lifecycle is Lifecycle.DEPLOYED))


def software_from_spec(spec: Mapping[str, Any], model: RTM, base: str | Path = ".") -> SimulatedAdaptableSoftware:
    """Build a handle from a suite record: ``reset`` model path, ``noise`` and ``seed``."""
    reset = load(Path(base) / spec["reset"]) if spec.get("reset") else RTM(model.id)
    noise = float(spec.get("noise", 0.0))
    if noise > 0:
        return NoisySoftware(reset, noise, int(spec.get("seed", 0)))
    return SimulatedAdaptableSoftware(reset)
