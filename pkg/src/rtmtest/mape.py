"""Step contracts, phase-labelled snapshots and traces of a MAPE-K loop."""

from __future__ import annotations

from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import Any, Protocol

from .compare import Diff, apply_diff, diff
from .errors import InvalidArgumentError, OrderViolationError, ParseError
from .model import RTM, dumps, from_dict, loads, to_dict

__all__ = [
    "Phase",
    "Snapshot",
    "Trace",
    "record",
    "project",
    "StepFunctions",
    "AdaptableSoftwareHandle",
    "identity_step",
    "trace_to_dict",
    "trace_from_dict",
    "serialize_trace",
    "deserialize_trace",
    "save_trace",
    "load_trace",
]

MAX_SEED = 2**64 - 1


class Phase(str, Enum):
    MONITORED = "MONITORED"
    ANALYZED = "ANALYZED"
    PLANNED = "PLANNED"

    @property
    def rank(self) -> int:
        return _PHASE_RANK[self]


_PHASE_RANK = {Phase.MONITORED: 0, Phase.ANALYZED: 1, Phase.PLANNED: 2}


@dataclass(frozen=True)
class Snapshot:
    phase: Phase
    iteration: int
    model: RTM


def _check_seed(seed: int | None) -> None:
    if seed is not None and not (isinstance(seed, int) and 0 <= seed <= MAX_SEED):
        raise InvalidArgumentError(f"seed must be an unsigned 64-bit integer, got {seed!r}")


def _check_order(previous: Snapshot | None, nxt: Snapshot) -> None:
    if nxt.iteration < 0:
        raise OrderViolationError("iteration must be non-negative")
    if previous is None:
        return
    if nxt.iteration < previous.iteration:
        raise OrderViolationError(
            f"iteration {nxt.iteration} recorded after iteration {previous.iteration}")
    if nxt.iteration == previous.iteration and nxt.phase.rank <= previous.phase.rank:
        raise OrderViolationError(
            f"{nxt.phase.value} recorded after {previous.phase.value} in iteration {nxt.iteration}")


@dataclass(frozen=True)
class Trace:
    """A finite sequence of snapshots; ``meta`` holds replay information."""

    id: str
    seed: int | None = None
    snapshots: tuple[Snapshot, ...] = ()
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        _check_seed(self.seed)
        object.__setattr__(self, "snapshots", tuple(self.snapshots))
        object.__setattr__(self, "meta", MappingProxyType(dict(self.meta)))
        previous = None
        for snap in self.snapshots:
            _check_order(previous, snap)
            previous = snap

    def __len__(self) -> int:
        return len(self.snapshots)

    def __iter__(self):
        return iter(self.snapshots)

    def __getitem__(self, index):
        return self.snapshots[index]

    def models(self) -> list[RTM]:
        return [s.model for s in self.snapshots]

    def with_meta(self, **meta: Any) -> Trace:
        return Trace(self.id, self.seed, self.snapshots, {**self.meta, **meta})

    def replace_snapshot(self, index: int, model: RTM) -> Trace:
        snaps = list(self.snapshots)
        old = snaps[index]
        snaps[index] = Snapshot(old.phase, old.iteration, model)
        return Trace(self.id, self.seed, snaps, self.meta)


def record(trace: Trace, phase: Phase, model: RTM, *, iteration: int | None = None) -> Trace:
    """Append a snapshot; ``MONITORED`` opens a new iteration unless one is given."""
    phase = Phase(phase)
    last = trace.snapshots[-1] if trace.snapshots else None
    if iteration is None:
        if last is None:
            iteration = 0
        elif phase is Phase.MONITORED:
            iteration = last.iteration + 1
        else:
            iteration = last.iteration
    snap = Snapshot(phase, iteration, model)
    _check_order(last, snap)
    return Trace(trace.id, trace.seed, (*trace.snapshots, snap), trace.meta)


def project(trace: Trace, phases: Iterable[Phase]) -> Trace:
    keep = {Phase(p) for p in phases}
    return Trace(trace.id, trace.seed, [s for s in trace.snapshots if s.phase in keep], trace.meta)


class AdaptableSoftwareHandle(Protocol):
    """What the execute/monitor co-test needs from the software under control."""

    def reset(self) -> None: ...

    def inject(self, overlay: Any) -> None: ...


def identity_step(model: RTM) -> RTM:
    return model


@dataclass(frozen=True)
class StepFunctions:
    """One implementation of the MAPE steps.

    ``analyze`` may only add or update annotations. ``plan`` returns the
    repaired model, optionally with PLANNED_ACTION annotations. Both must be
    functions of their input model only. ``monitor`` and ``execute`` talk to
    an adaptable-software handle and are needed only for execute/monitor
    co-tests.
    """

    name: str
    analyze: Callable[[RTM], RTM] = identity_step
    plan: Callable[[RTM], RTM] = identity_step
    monitor: Callable[[Any], RTM] | None = None
    execute: Callable[[RTM, Any], None] | None = None


# -- trace files ------------------------------------------------------------

def trace_to_dict(trace: Trace, storage: str = "full") -> dict[str, Any]:
    if storage not in ("full", "delta"):
        raise InvalidArgumentError(f"storage must be 'full' or 'delta', got {storage!r}")
    doc: dict[str, Any] = {"id": trace.id, "seed": trace.seed, "storage": storage}
    for key, value in trace.meta.items():
        if key in ("id", "seed", "storage", "snapshots"):
            raise InvalidArgumentError(f"reserved trace header key {key!r}")
        doc[key] = value
    records = []
    previous: RTM | None = None
    for snap in trace.snapshots:
        rec: dict[str, Any] = {"iteration": snap.iteration, "phase": snap.phase.value}
        if storage == "delta" and previous is not None:
            rec["diff"] = diff(previous, snap.model).to_dict()
        else:
            rec["model"] = to_dict(snap.model)
        records.append(rec)
        previous = snap.model
    doc["snapshots"] = records
    return doc


def trace_from_dict(doc: Any) -> Trace:
    if not isinstance(doc, Mapping):
        raise ParseError("trace document must be a JSON object")
    try:
        storage = doc.get("storage", "full")
        snapshots = []
        previous: RTM | None = None
        for rec in doc["snapshots"]:
            if "model" in rec:
                model = from_dict(rec["model"])
            elif storage == "delta" and previous is not None:
                model = apply_diff(previous, Diff.from_dict(rec["diff"]))
            else:
                raise ParseError("snapshot record lacks a model")
            snapshots.append(Snapshot(Phase(rec["phase"]), int(rec["iteration"]), model))
            previous = model
        meta = {k: v for k, v in doc.items() if k not in ("id", "seed", "storage", "snapshots")}
        return Trace(doc["id"], doc.get("seed"), snapshots, meta)
    except KeyError as exc:
        raise ParseError(f"trace document lacks field {exc.args[0]!r}") from None


def serialize_trace(trace: Trace, storage: str = "full") -> bytes:
    return dumps(trace_to_dict(trace, storage))


def deserialize_trace(data: bytes | str) -> Trace:
    return trace_from_dict(loads(data))


def save_trace(trace: Trace, path: str | Path, storage: str = "full") -> None:
    Path(path).write_bytes(serialize_trace(trace, storage))


def load_trace(path: str | Path) -> Trace:
    return deserialize_trace(Path(path).read_bytes())
