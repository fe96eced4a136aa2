import pytest

from rtmtest.automaton import NO_OP, FaultAction, FaultKind, SimAutomaton, SimState, SimTransition
from rtmtest.engines import get_engine
from rtmtest.errors import UnknownPredicateError
from rtmtest.mape import Phase, Snapshot, Trace
from rtmtest.membership import MembershipResult, add_regression, membership
from rtmtest.model import RemoveComponent, mutate
from rtmtest.selfhealing.catalog import build_marketplace
from rtmtest.simulator import run_campaign

CRASH_SEARCH = FaultAction(FaultKind.CRASH_REMOVE, "id:shop1.Search")


def crash_then_calm(guard="effect()"):
    return SimAutomaton(
        (SimState("s"), SimState("t")), "s",
        (SimTransition("s", "t", CRASH_SEARCH, guard), SimTransition("t", "t", NO_OP)),
        build_marketplace(1), name="crash")


def test_empty_trace_is_member():
    result = membership(Trace("e"), crash_then_calm())
    assert result.member and result.witness_run == ("s",)


def test_generated_trace_is_member():
    a = crash_then_calm()
    trace = run_campaign(a, get_engine("self-healing"), 4, 0).trace
    result = membership(trace, a)
    assert result.member and result.witness_run == ("s", "t", "t", "t", "t")


def test_foreign_snapshot_is_located():
    a = crash_then_calm()
    trace = run_campaign(a, get_engine("self-healing"), 3, 0).trace
    snaps = list(trace.snapshots)
    wrong = mutate(snaps[3].model, RemoveComponent("shop1.Auction"))
    snaps[3] = Snapshot(Phase.MONITORED, 1, wrong)
    result = membership(Trace("x", 0, snaps), a)
    assert not result.member and result.longest_matched_prefix == 3


def test_analyzed_snapshots_are_ignored_by_default():
    a = crash_then_calm()
    trace = run_campaign(a, get_engine("self-healing"), 2, 0).trace
    snaps = list(trace.snapshots)
    snaps[1] = Snapshot(Phase.ANALYZED, 0, build_marketplace(2))
    assert membership(Trace("x", 0, snaps), a).member


def test_guards_filter_transitions():
    trace = run_campaign(crash_then_calm(), get_engine("self-healing"), 2, 0).trace
    assert not membership(trace, crash_then_calm("unchanged()")).member
    assert membership(trace, crash_then_calm('effect() and missing("shop1.Search")')).member


def test_unknown_predicate_in_guard():
    with pytest.raises(UnknownPredicateError):
        membership(Trace("e"), crash_then_calm("fancy()"))


def test_result_invariant():
    with pytest.raises(ValueError):
        MembershipResult(True)
    with pytest.raises(ValueError):
        MembershipResult(False, ("s",), 2)
    assert MembershipResult(False, longest_matched_prefix=0).to_dict() == {
        "member": False, "witness_run": None, "longest_matched_prefix": 0}


def test_add_regression_accepts_the_trace():
    a = crash_then_calm()
    other = SimAutomaton((SimState("s"),), "s", (SimTransition("s", "s", NO_OP),), build_marketplace(1))
    trace = run_campaign(a, get_engine("self-healing"), 3, 0).trace
    assert not membership(trace, other).member
    extended = add_regression(other, trace)
    assert membership(trace, extended).member
    ids = [s.id for s in extended.states]
    assert ids == ["s", "regression1.1", "regression1.2", "regression1.3"]
    assert extended.state("regression1.3").terminal
    b = SimAutomaton((SimState("s"),), "s",
                     (SimTransition("s", "s", FaultAction(FaultKind.CRASH_REMOVE, "id:shop1.Auction")),),
                     build_marketplace(1))
    again = add_regression(extended, run_campaign(b, get_engine("self-healing"), 2, 0).trace)
    assert membership(trace, again).member
    assert "regression2.1" in [s.id for s in again.states]


def test_add_regression_of_member_warns():
    a = crash_then_calm()
    trace = run_campaign(a, get_engine("self-healing"), 2, 0).trace
    with pytest.warns(UserWarning):
        assert add_regression(a, trace) is a
