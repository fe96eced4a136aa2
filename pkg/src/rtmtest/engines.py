"""Named step implementations selectable from the command line."""

from __future__ import annotations

from collections.abc import Mapping
from types import MappingProxyType

from .errors import InvalidArgumentError
from .harness import register_masking
from .mape import StepFunctions, identity_step
from .selfhealing.engine import analyze_ignoring_missing, plan_wrong_type, reference_analyze, reference_plan
from .selfhealing.software import (
    execute_never_starting,
    execute_skipping_connectors,
    monitor_filling_missing,
    monitor_reporting_started,
    reference_execute,
    reference_monitor,
)

__all__ = ["ENGINES", "get_engine", "register_engine"]

_ENGINES: dict[str, StepFunctions] = {}


def register_engine(steps: StepFunctions, *, masking: bool = False) -> StepFunctions:
    _ENGINES[steps.name] = steps
    if masking:
        register_masking(steps.name)
    return steps


def get_engine(name: str) -> StepFunctions:
    try:
        return _ENGINES[name]
    except KeyError:
        raise InvalidArgumentError(f"unknown engine {name!r}; known: {', '.join(sorted(_ENGINES))}") from None


register_engine(StepFunctions("self-healing", reference_analyze, reference_plan, reference_monitor, reference_execute))
register_engine(StepFunctions("identity", identity_step, identity_step, reference_monitor, reference_execute))
register_engine(StepFunctions("mutant-analyze", analyze_ignoring_missing, reference_plan,
                              reference_monitor, reference_execute))
register_engine(StepFunctions("mutant-plan", reference_analyze, plan_wrong_type, reference_monitor, reference_execute))
register_engine(StepFunctions("mutant-monitor", reference_analyze, reference_plan,
                              monitor_filling_missing, reference_execute))
register_engine(StepFunctions("mutant-execute", reference_analyze, reference_plan,
                              reference_monitor, execute_skipping_connectors))
# execute leaves new components DEPLOYED and monitor reports them STARTED
register_engine(StepFunctions("masking", reference_analyze, reference_plan,
                              monitor_reporting_started, execute_never_starting), masking=True)

ENGINES: Mapping[str, StepFunctions] = MappingProxyType(_ENGINES)
