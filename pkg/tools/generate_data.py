"""Regenerate the example files shipped in ``rtmtest/data``.

Usage: python3 tools/generate_data.py [OUTDIR]

The files are committed; tests/test_data.py checks they match this script.
"""

from __future__ import annotations

import sys
from pathlib import Path

from rtmtest.automaton import (
    FaultAction,
    FaultKind,
    NO_OP,
    SimAutomaton,
    SimState,
    SimTransition,
    automaton_to_dict,
)
from rtmtest.model import Annotate, Annotation, AnnotationKind, RemoveComponent, dumps, mutate, save
from rtmtest.selfhealing.catalog import build_marketplace, default_catalog
from rtmtest.selfhealing.engine import reference_analyze

REMOVED = "shop1.ItemFilter"

HEAL_PROPS = """\
# a constraint violation never survives the following planned model
healing: atMostConsecutive(violated(any), 1)
# every planned model keeps the critical Authentication component
authentication: always(present("Authentication") @ PLANNED)
"""


def selfhealing_automaton(template) -> SimAutomaton:
    states = (SimState("calm"), SimState("stormy"))
    transitions = (
        SimTransition("calm", "calm", NO_OP, weight=2),
        SimTransition("calm", "stormy", FaultAction(FaultKind.CRASH_REMOVE), weight=1),
        SimTransition("calm", "stormy", FaultAction(FaultKind.EXCEPTION_BURST, params={"count": 6}), weight=1),
        SimTransition("calm", "stormy", FaultAction(FaultKind.LIFECYCLE_FLIP), weight=1),
        SimTransition("stormy", "stormy", FaultAction(FaultKind.REPEAT_LAST), weight=1),
        SimTransition("stormy", "calm", NO_OP, weight=2),
    )
    return SimAutomaton(states, "calm", transitions, template, default_catalog().metric_rule(), "selfhealing")


def generate(out: Path) -> list[Path]:
    oneway = out / "oneway"
    oneway.mkdir(parents=True, exist_ok=True)
    intact = build_marketplace(1)
    removed = mutate(intact, RemoveComponent(REMOVED))
    analyzed = reference_analyze(removed)
    erroneous = mutate(intact, Annotate(Annotation(AnnotationKind.TOMBSTONE, REMOVED, {"reason": "crash"},
                                                   injected=True)))
    written = []

    def put(path: Path, data: bytes) -> None:
        path.write_bytes(data)
        written.append(path)

    for name, model in (("intact", intact), ("removed", removed), ("analyzed", analyzed),
                        ("erroneous", erroneous)):
        save(model, oneway / f"{name}.json")
        written.append(oneway / f"{name}.json")
    put(oneway / "suite.json", dumps([
        {"name": "analyze-marks-missing", "unit": "ANALYZE", "input": "removed.json", "oracle": "analyzed.json"},
        {"name": "plan-recreates-missing", "unit": "PLAN", "input": "analyzed.json", "oracle": "intact.json",
         "ignore": ["planned-actions"]},
        {"name": "analyze-plan-heals", "unit": "ANALYZE_PLAN", "input": "removed.json", "oracle": "intact.json",
         "ignore": ["planned-actions"]},
    ]))
    put(oneway / "em_suite.json", dumps([
        {"name": "execute-monitor-crash", "unit": "EXECUTE_MONITOR", "input": "erroneous.json",
         "repetitions": 5, "software": {}},
    ]))
    put(out / "selfhealing.automaton.json",
        dumps(automaton_to_dict(selfhealing_automaton(intact), template_ref="oneway/intact.json")))
    put(out / "heal.prop", HEAL_PROPS.encode())
    return written


def main(argv: list[str]) -> int:
    out = Path(argv[1]) if len(argv) > 1 else Path(__file__).resolve().parents[1] / "src" / "rtmtest" / "data"
    for path in generate(out):
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
