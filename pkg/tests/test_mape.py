import pytest

from rtmtest.errors import InvalidArgumentError, OrderViolationError, ParseError
from rtmtest.mape import (
    Phase,
    Snapshot,
    Trace,
    deserialize_trace,
    load_trace,
    project,
    record,
    save_trace,
    serialize_trace,
    trace_to_dict,
)
from rtmtest.model import RemoveComponent, mutate
from rtmtest.selfhealing.catalog import build_marketplace
from rtmtest.selfhealing.engine import reference_analyze, reference_plan


def loop_trace(iterations=2):
    m = build_marketplace(1)
    t = Trace("t", seed=3)
    for _ in range(iterations):
        broken = mutate(m, RemoveComponent("shop1.ItemFilter"))
        analyzed = reference_analyze(broken)
        t = record(t, Phase.MONITORED, broken)
        t = record(t, Phase.ANALYZED, analyzed)
        t = record(t, Phase.PLANNED, reference_plan(analyzed))
    return t


def test_record_numbers_iterations():
    t = loop_trace(2)
    assert [(s.phase.value, s.iteration) for s in t] == [
        ("MONITORED", 0), ("ANALYZED", 0), ("PLANNED", 0),
        ("MONITORED", 1), ("ANALYZED", 1), ("PLANNED", 1),
    ]


def test_phase_order_enforced():
    m = build_marketplace(1)
    t = record(Trace("t"), Phase.PLANNED, m)
    with pytest.raises(OrderViolationError):
        record(t, Phase.ANALYZED, m)
    with pytest.raises(OrderViolationError):
        record(t, Phase.PLANNED, m)
    with pytest.raises(OrderViolationError):
        Trace("t", None, [Snapshot(Phase.MONITORED, 2, m), Snapshot(Phase.MONITORED, 1, m)])


def test_phases_may_be_skipped():
    m = build_marketplace(1)
    t = record(record(Trace("t"), Phase.MONITORED, m), Phase.PLANNED, m)
    assert [s.phase for s in t] == [Phase.MONITORED, Phase.PLANNED]


def test_black_box_projection():
    t = project(loop_trace(2), [Phase.MONITORED, Phase.PLANNED])
    assert [s.phase for s in t] == [Phase.MONITORED, Phase.PLANNED] * 2
    assert t.seed == 3


def test_seed_range():
    Trace("t", seed=2**64 - 1)
    with pytest.raises(InvalidArgumentError):
        Trace("t", seed=-1)
    with pytest.raises(InvalidArgumentError):
        Trace("t", seed=2**64)


@pytest.mark.parametrize("storage", ["full", "delta"])
def test_trace_round_trip(tmp_path, storage):
    t = loop_trace(2).with_meta(engine="self-healing")
    save_trace(t, tmp_path / "t.json", storage)
    back = load_trace(tmp_path / "t.json")
    assert back == t
    assert serialize_trace(back) == serialize_trace(t)


def test_delta_storage_is_smaller():
    t = loop_trace(3)
    assert len(serialize_trace(t, "delta")) < len(serialize_trace(t, "full")) / 2
    doc = trace_to_dict(t, "delta")
    assert "model" in doc["snapshots"][0] and "diff" in doc["snapshots"][1]


def test_bad_trace_documents():
    with pytest.raises(ParseError):
        deserialize_trace(b"[]")
    with pytest.raises(ParseError):
        deserialize_trace(b'{"id": "t"}')
    with pytest.raises(InvalidArgumentError):
        trace_to_dict(loop_trace(1), "zip")
