"""Self-healing shop example: catalog, reference engine, mutants and simulated software."""

from .catalog import ShopCatalog, build_marketplace, default_catalog, load_catalog
from .engine import SelfHealingEngine, reference_analyze, reference_plan
from .software import NoisySoftware, SimulatedAdaptableSoftware, reference_execute, reference_monitor

__all__ = [
    "ShopCatalog",
    "build_marketplace",
    "default_catalog",
    "load_catalog",
    "SelfHealingEngine",
    "reference_analyze",
    "reference_plan",
    "SimulatedAdaptableSoftware",
    "NoisySoftware",
    "reference_execute",
    "reference_monitor",
]
