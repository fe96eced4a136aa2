"""The shop catalog and the marketplace architecture built from it."""

from __future__ import annotations

import os
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from types import MappingProxyType
from typing import Any

from ..automaton import MetricRule
from ..errors import InvalidArgumentError, ParseError
from ..model import RTM, AddConnector, Component, Connector, Lifecycle, base_id, loads, mutate

__all__ = [
    "CATALOG_ENV",
    "SHOP_SIZE",
    "MODEL_ID",
    "CatalogEntry",
    "ShopCatalog",
    "load_catalog",
    "default_catalog",
    "component_id",
    "connector_id",
    "split_id",
    "shops_of",
    "build_marketplace",
    "is_retired",
    "current_component",
    "wire",
]

CATALOG_ENV = "RTMTEST_CATALOG"
SHOP_SIZE = 18
MODEL_ID = "marketplace"
_PACKAGED = Path(__file__).with_name("catalog.json")


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    provides: frozenset[str]
    requires: frozenset[str]
    critical: bool = False
    response_time: float = 10.0


@dataclass(frozen=True)
class ShopCatalog:
    """The component types of one shop; every required interface has exactly one provider."""

    entries: tuple[CatalogEntry, ...]
    version: int = 1
    metric: str = "response-time"
    per_connector: float = 2.0

    def __post_init__(self):
        names = [e.name for e in self.entries]
        if len(names) != SHOP_SIZE or len(set(names)) != SHOP_SIZE:
            raise InvalidArgumentError(f"a shop catalog needs exactly {SHOP_SIZE} distinct component types")
        providers: dict[str, str] = {}
        for e in self.entries:
            for iface in e.provides:
                if iface in providers:
                    raise InvalidArgumentError(f"interface {iface} provided by {providers[iface]} and {e.name}")
                providers[iface] = e.name
        for e in self.entries:
            for iface in e.requires:
                if iface not in providers:
                    raise InvalidArgumentError(f"{e.name} requires {iface}, which no type provides")
        object.__setattr__(self, "_providers", MappingProxyType(providers))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.entries)

    def entry(self, name: str) -> CatalogEntry | None:
        return next((e for e in self.entries if e.name == name), None)

    def provider_of(self, iface: str) -> str:
        return self._providers[iface]

    def component(self, shop: str, name: str, *, id: str | None = None,
                  lifecycle: Lifecycle = Lifecycle.STARTED) -> Component:
        e = self.entry(name)
        if e is None:
            raise InvalidArgumentError(f"no catalog type {name!r}")
        return Component(id or component_id(shop, name), e.name, lifecycle, e.provides, e.requires, e.critical)

    def metric_rule(self) -> MetricRule:
        return MetricRule(self.metric, {e.name: e.response_time for e in self.entries},
                          per_connector=self.per_connector)

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> ShopCatalog:
        try:
            entries = tuple(
                CatalogEntry(e["name"], frozenset(e.get("provides", ())), frozenset(e.get("requires", ())),
                             bool(e.get("critical", False)), float(e.get("response_time", 10.0)))
                for e in obj["components"])
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed catalog: {exc}") from None
        return cls(entries, int(obj.get("version", 1)), obj.get("metric", "response-time"),
                   float(obj.get("per_connector", 2.0)))


def load_catalog(path: str | Path | None = None) -> ShopCatalog:
    """Read a catalog; without a path, ``$RTMTEST_CATALOG`` or the packaged one."""
    if path is None:
        path = os.environ.get(CATALOG_ENV) or _PACKAGED
    return ShopCatalog.from_dict(loads(Path(path).read_bytes()))


@lru_cache(maxsize=None)
def _cached(path: str) -> ShopCatalog:
    return load_catalog(path)


def default_catalog() -> ShopCatalog:
    return _cached(str(os.environ.get(CATALOG_ENV) or _PACKAGED))


def component_id(shop: str, name: str) -> str:
    return f"{shop}.{name}"


def connector_id(from_id: str, iface: str) -> str:
    return f"{from_id}:{iface}"


def split_id(cid: str) -> tuple[str, str]:
    """``shop2.Search~1`` -> (``shop2``, ``Search``)."""
    shop, _, name = base_id(cid).partition(".")
    return shop, name


def shops_of(model: RTM) -> list[str]:
    return sorted({split_id(c)[0] for c in model.components if "." in c})


def is_retired(model: RTM, comp: Component) -> bool:
    """Undeployed and detached: left behind by a replacement."""
    return comp.lifecycle is Lifecycle.UNDEPLOYED and not model.incident(comp.id)


def current_component(model: RTM, base: str) -> Component | None:
    """The live incarnation of a base id: not retired, preferring the newest replacement."""
    found = [c for c in model.components.values() if base_id(c.id) == base and not is_retired(model, c)]
    if not found:
        return None
    found.sort(key=lambda c: (c.lifecycle is not Lifecycle.UNDEPLOYED, len(c.id), c.id))
    return found[-1]


def wire(model: RTM, shops: Iterable[str], catalog: ShopCatalog) -> RTM:
    """Bind every unbound required interface of live components to the live provider in the same shop."""
    edits = []
    for shop in shops:
        live = {}
        for name in catalog.names:
            comp = current_component(model, component_id(shop, name))
            if comp is not None and comp.lifecycle is not Lifecycle.UNDEPLOYED:
                live[name] = comp
        bound = {(c.from_component, c.required_interface) for c in model.connectors.values()}
        for comp in live.values():
            for iface in sorted(comp.required):
                if (comp.id, iface) in bound:
                    continue
                provider = live.get(catalog.provider_of(iface)) if iface in catalog._providers else None
                if provider is None or iface not in provider.provided:
                    continue
                edits.append(AddConnector(Connector(connector_id(comp.id, iface), comp.id, iface,
                                                    provider.id, iface)))
    return mutate(model, *edits)


def build_marketplace(shops: int, catalog: ShopCatalog | None = None) -> RTM:
    """``shops`` disjoint copies of the shop architecture, all STARTED."""
    if not isinstance(shops, int) or shops < 1:
        raise InvalidArgumentError(f"shops must be a positive integer, got {shops!r}")
    catalog = catalog or default_catalog()
    names = [f"shop{i}" for i in range(1, shops + 1)]
    comps = [catalog.component(shop, name) for shop in names for name in catalog.names]
    return wire(RTM(MODEL_ID, comps), names, catalog)
