"""One-way tests of single steps and fragments, plus the execute/monitor co-test.

The harness is a generic test adapter: it loads an input model, triggers the
steps under test and compares their output with an oracle model.
"""

from __future__ import annotations

import json
import traceback
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

from .compare import Diff, check_constraints, diff
from .errors import InvalidArgumentError, ParseError, SetupError, UnsplittableInputError
from .mape import StepFunctions
from .model import (
    RTM,
    Annotation,
    AnnotationKind,
    RemoveComponent,
    load,
    loads,
    mutate,
)

__all__ = [
    "Unit",
    "Outcome",
    "Classification",
    "OneWayTest",
    "EMTest",
    "RunResult",
    "Verdict",
    "Overlay",
    "run_oneway",
    "split_input",
    "recombine",
    "materialize",
    "overlay_region",
    "classify",
    "run_execute_monitor",
    "register_masking",
    "DEFAULT_REPETITIONS",
    "load_suite",
    "run_suite",
    "SuiteReport",
]

DEFAULT_REPETITIONS = 5
EM_IGNORE = frozenset({"annotations"})


class Unit(str, Enum):
    ANALYZE = "ANALYZE"
    PLAN = "PLAN"
    ANALYZE_PLAN = "ANALYZE_PLAN"


class Outcome(str, Enum):
    PASS = "PASS"
    FAIL = "FAIL"


class Classification(str, Enum):
    WORKING = "WORKING"
    POSSIBLY_MASKED = "POSSIBLY_MASKED"
    EXECUTE_FAULT_SUSPECTED = "EXECUTE_FAULT_SUSPECTED"
    MONITOR_FAULT_SUSPECTED = "MONITOR_FAULT_SUSPECTED"
    EXECUTE_AND_MONITOR_FAULT_SUSPECTED = "EXECUTE_AND_MONITOR_FAULT_SUSPECTED"
    UNDETERMINED = "UNDETERMINED"


@dataclass(frozen=True)
class OneWayTest:
    name: str
    unit: Unit
    input: RTM
    oracle: RTM
    ignore: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "unit", Unit(self.unit))
        object.__setattr__(self, "ignore", frozenset(self.ignore))


@dataclass(frozen=True)
class EMTest:
    """Execute/monitor co-test. Fault elements of ``erroneous`` carry ``injected``."""

    name: str
    erroneous: RTM
    repetitions: int = DEFAULT_REPETITIONS
    oracle: RTM | None = None

    def __post_init__(self):
        if self.repetitions < 1:
            raise InvalidArgumentError("repetitions must be >= 1")


@dataclass(frozen=True)
class RunResult:
    diff: Diff
    error: str | None = None

    @property
    def equal(self) -> bool:
        return self.error is None and self.diff.empty


@dataclass(frozen=True)
class Verdict:
    name: str
    outcome: Outcome
    diff: Diff = Diff()
    error: str | None = None
    runs: tuple[RunResult, ...] = ()
    classification: Classification | None = None
    notes: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return self.outcome is Outcome.PASS

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"name": self.name, "outcome": self.outcome.value, "diff": self.diff.to_dict()}
        if self.error is not None:
            out["error"] = self.error
        if self.classification is not None:
            out["classification"] = self.classification.value
            out["runs"] = [{"equal": r.equal, "diff": r.diff.to_dict(), "error": r.error} for r in self.runs]
        if self.notes:
            out["notes"] = list(self.notes)
        return out

    def to_text(self) -> str:
        head = f"{self.outcome.value} {self.name}"
        if self.classification is not None:
            head += f" [{self.classification.value}]"
        lines = [head]
        if self.error:
            lines.append(f"  error: {self.error.splitlines()[-1]}")
        if not self.diff.empty:
            lines.extend("  " + line for line in self.diff.summary().splitlines())
        lines.extend(f"  note: {n}" for n in self.notes)
        return "\n".join(lines)


def _structure_changed(before: RTM, after: RTM) -> bool:
    return not diff(before, after, ignore={"annotations"}).empty


def run_oneway(test: OneWayTest, steps: StepFunctions) -> Verdict:
    """Apply the unit under test to ``test.input`` and compare with ``test.oracle``.

    An exception inside a step is a failed test, not a harness error.
    """
    notes = []
    try:
        if test.unit is Unit.ANALYZE:
            output = steps.analyze(test.input)
            if _structure_changed(test.input, output):
                notes.append("analyze step altered the architecture")
        elif test.unit is Unit.PLAN:
            output = steps.plan(test.input)
        else:
            analyzed = steps.analyze(test.input)
            if _structure_changed(test.input, analyzed):
                notes.append("analyze step altered the architecture")
            output = steps.plan(analyzed)
    except Exception:
        return Verdict(test.name, Outcome.FAIL, error=traceback.format_exc(limit=3))
    d = diff(output, test.oracle, ignore=test.ignore)
    return Verdict(test.name, Outcome.PASS if d.empty else Outcome.FAIL, d, notes=tuple(notes))


# -- splitting erroneous inputs -----------------------------------------------

@dataclass(frozen=True)
class Overlay:
    """The injected part of an erroneous model, as handed to the test adapter."""

    components: tuple = ()
    connectors: tuple = ()
    annotations: tuple[Annotation, ...] = ()
    tombstones: tuple[Annotation, ...] = ()
    metrics: Mapping[str, Mapping[str, float]] = field(default_factory=dict)

    @property
    def deletions(self) -> tuple[str, ...]:
        return tuple(sorted({t.target for t in self.tombstones}))

    @property
    def empty(self) -> bool:
        return not (self.components or self.connectors or self.annotations or self.tombstones or self.metrics)


def split_input(erroneous: RTM) -> tuple[RTM, Overlay]:
    """Separate ``erroneous`` into the part execute can impose and the injected overlay.

    Injected components take their connectors, annotations and metrics into
    the overlay. TOMBSTONE annotations mark components the adapter deletes;
    the valid part keeps those components.
    """
    injected = {c.id for c in erroneous.components.values() if c.injected}
    tombstones = tuple(sorted((a for a in erroneous.annotations if a.kind is AnnotationKind.TOMBSTONE),
                              key=Annotation.sort_key))
    conns = {c.id for c in erroneous.connectors.values()
             if c.injected or c.from_component in injected or c.to_component in injected}
    moved = injected | conns
    anns = tuple(sorted((a for a in erroneous.annotations
                         if a.kind is not AnnotationKind.TOMBSTONE and (a.injected or a.target in moved)),
                        key=Annotation.sort_key))
    if not (moved or tombstones or anns):
        violations = check_constraints(erroneous)
        if violations:
            raise UnsplittableInputError(
                f"input violates {violations[0].constraint} on {violations[0].target} but has no injected elements")
        return erroneous, Overlay()
    overlay = Overlay(
        components=tuple(erroneous.components[c] for c in sorted(injected)),
        connectors=tuple(erroneous.connectors[c] for c in sorted(conns)),
        annotations=anns,
        tombstones=tombstones,
        metrics={k: dict(v) for k, v in erroneous.metrics.items() if k in moved},
    )
    drop_anns = set(anns) | set(tombstones)
    valid = RTM(
        erroneous.id,
        [c for c in erroneous.components.values() if c.id not in injected],
        [c for c in erroneous.connectors.values() if c.id not in conns],
        [a for a in erroneous.annotations if a not in drop_anns],
        {k: dict(v) for k, v in erroneous.metrics.items() if k not in moved},
    )
    return valid, overlay


def recombine(valid: RTM, overlay: Overlay) -> RTM:
    metrics = {k: dict(v) for k, v in valid.metrics.items()}
    metrics.update({k: dict(v) for k, v in overlay.metrics.items()})
    return RTM(
        valid.id,
        [*valid.components.values(), *overlay.components],
        [*valid.connectors.values(), *overlay.connectors],
        [*valid.annotations, *overlay.annotations, *overlay.tombstones],
        metrics,
    )


def materialize(model: RTM) -> RTM:
    """The concrete state an erroneous model describes: tombstoned parts gone, markers cleared."""
    doomed = sorted({a.target for a in model.annotations if a.kind is AnnotationKind.TOMBSTONE})
    model = RTM(
        model.id,
        [c.replace(injected=False) for c in model.components.values()],
        [c.replace(injected=False) for c in model.connectors.values()],
        [Annotation(a.kind, a.target, a.payload) for a in model.annotations
         if a.kind is not AnnotationKind.TOMBSTONE],
        {k: dict(v) for k, v in model.metrics.items()},
    )
    return mutate(model, *(RemoveComponent(cid) for cid in doomed if cid in model.components))


def overlay_region(valid: RTM, overlay: Overlay) -> frozenset[str]:
    """Element ids whose observed state is determined by the test adapter."""
    region = {c.id for c in overlay.components} | {c.id for c in overlay.connectors}
    for cid in overlay.deletions:
        region.add(cid)
        region.update(c.id for c in valid.incident(cid))
    region.update(a.target for a in overlay.annotations)
    return frozenset(region)


# -- execute + monitor ----------------------------------------------------------

_MASKING: set[str] = set()


def register_masking(name: str) -> None:
    """Declare a StepFunctions name whose execute and monitor faults are known to cancel out."""
    _MASKING.add(name)


def classify(runs: Sequence[RunResult], region: frozenset[str], masking: bool = False) -> Classification:
    """Map the per-repetition results onto the possible explanations.

    All runs equal means working (masking cannot be excluded, only flagged).
    Identical non-empty diffs in every run point at execute (diff in the
    valid part), monitor (diff in the overlay part) or both. Anything else is
    attributed to noise from the software or environment.
    """
    if all(r.equal for r in runs):
        return Classification.POSSIBLY_MASKED if masking else Classification.WORKING
    first = runs[0]
    if any(r.equal for r in runs) or any(r != first for r in runs[1:]) or first.error is not None:
        return Classification.UNDETERMINED
    ids = first.diff.element_ids()
    inside = {i for i in ids if i in region}
    if inside and inside == ids:
        return Classification.MONITOR_FAULT_SUSPECTED
    if not inside:
        return Classification.EXECUTE_FAULT_SUSPECTED
    return Classification.EXECUTE_AND_MONITOR_FAULT_SUSPECTED


def run_execute_monitor(test: EMTest, steps: StepFunctions, software: Any) -> Verdict:
    """Run execute then monitor against ``software`` ``test.repetitions`` times.

    Each repetition resets the software, executes the valid part of the
    erroneous input, lets the adapter impose the overlay, monitors, and
    compares with the oracle ignoring annotations (the software holds none).
    """
    if steps.execute is None or steps.monitor is None:
        raise SetupError(f"{steps.name} provides no execute/monitor steps")
    if not callable(getattr(software, "reset", None)) or not getattr(software, "resettable", True):
        raise SetupError("software handle cannot be reset to its initial state")
    valid, overlay = split_input(test.erroneous)
    oracle = materialize(test.oracle if test.oracle is not None else test.erroneous)
    runs = []
    for _ in range(test.repetitions):
        software.reset()
        try:
            steps.execute(valid, software)
            software.inject(overlay)
            observed = steps.monitor(software)
        except Exception:
            runs.append(RunResult(Diff(), traceback.format_exc(limit=3)))
            continue
        runs.append(RunResult(diff(observed, oracle, ignore=EM_IGNORE)))
    masking = steps.name in _MASKING
    verdict_class = classify(runs, overlay_region(valid, overlay), masking)
    passed = all(r.equal for r in runs)
    failing = next((r for r in runs if not r.equal), None)
    notes = []
    if passed:
        notes.append("equal models can still hide an execute fault masked by a monitor fault")
    return Verdict(
        test.name,
        Outcome.PASS if passed else Outcome.FAIL,
        failing.diff if failing else Diff(),
        error=failing.error if failing else None,
        runs=tuple(runs),
        classification=verdict_class,
        notes=tuple(notes),
    )


# -- suites ---------------------------------------------------------------------

SoftwareFactory = Callable[[Mapping[str, Any], RTM, Path], Any]


def _default_software(spec: Mapping[str, Any], model: RTM, base: Path):
    from .selfhealing.software import software_from_spec

    return software_from_spec(spec, model, base)


@dataclass(frozen=True)
class SuiteEntry:
    test: OneWayTest | EMTest
    software: Mapping[str, Any] = field(default_factory=dict)


def load_suite(path: str | Path) -> list[SuiteEntry]:
    """Read a suite file: a JSON list of test records with model-file references."""
    path = Path(path)
    base = path.parent
    records = loads(path.read_bytes())
    if not isinstance(records, list):
        raise ParseError("suite file must contain a JSON list")
    entries = []
    names = set()
    for rec in records:
        try:
            name = rec["name"]
            unit = rec["unit"]
            model = load(base / rec["input"])
            oracle = load(base / rec["oracle"]) if rec.get("oracle") else None
        except KeyError as exc:
            raise ParseError(f"suite record lacks field {exc.args[0]!r}") from None
        if name in names:
            raise ParseError(f"duplicate test name {name!r}")
        names.add(name)
        if unit == "EXECUTE_MONITOR":
            test = EMTest(name, model, int(rec.get("repetitions", DEFAULT_REPETITIONS)), oracle)
            entries.append(SuiteEntry(test, rec.get("software", {})))
        else:
            if oracle is None:
                raise ParseError(f"test {name!r} needs an oracle")
            entries.append(SuiteEntry(OneWayTest(name, Unit(unit), model, oracle, rec.get("ignore", ()))))
    return entries


@dataclass(frozen=True)
class SuiteReport:
    verdicts: tuple[Verdict, ...]

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def to_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "total": len(self.verdicts),
            "failures": sum(not v.passed for v in self.verdicts),
            "tests": [v.to_dict() for v in self.verdicts],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    def to_text(self) -> str:
        lines = [v.to_text() for v in self.verdicts]
        failures = sum(not v.passed for v in self.verdicts)
        lines.append(f"{len(self.verdicts) - failures}/{len(self.verdicts)} passed")
        return "\n".join(lines) + "\n"


def run_suite(
    entries: Iterable[SuiteEntry],
    steps: StepFunctions,
    base: str | Path = ".",
    software_factory: SoftwareFactory | None = None,
) -> SuiteReport:
    factory = software_factory or _default_software
    verdicts = []
    for entry in entries:
        if isinstance(entry.test, OneWayTest):
            verdicts.append(run_oneway(entry.test, steps))
        else:
            software = factory(entry.software, entry.test.erroneous, Path(base))
            verdicts.append(run_execute_monitor(entry.test, steps, software))
    return SuiteReport(tuple(verdicts))
