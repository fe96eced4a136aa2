from fractions import Fraction

import numpy as np
import pytest
from scipy.stats import chisquare

from conftest import DATA
from rtmtest.compare import equal
from rtmtest.errors import InvalidArgumentError, NotFoundError, ParseError
from rtmtest.automaton import (
    NO_OP,
    Fault,
    FaultAction,
    FaultKind,
    MetricRule,
    SimAutomaton,
    SimRandom,
    SimState,
    SimTransition,
    apply_action,
    automaton_from_dict,
    automaton_to_dict,
    candidates,
    initialize,
    load_automaton,
    outcomes,
    save_automaton,
    step_execute,
)
from rtmtest.model import (
    RTM,
    AddComponent,
    Annotate,
    Annotation,
    AnnotationKind,
    Component,
    Lifecycle,
    RemoveComponent,
    SetLifecycle,
    mutate,
)
from rtmtest.selfhealing.catalog import build_marketplace


def test_weighted_choice_frequencies():
    rng = SimRandom(11)
    weights = [Fraction(1), Fraction(2), Fraction(1, 2), Fraction(7, 2)]
    n = 20000
    counts = np.bincount([rng.weighted(weights) for _ in range(n)], minlength=len(weights))
    total = sum(weights)
    expected = [n * float(w / total) for w in weights]
    assert chisquare(counts, expected).pvalue > 0.001


def test_index_draws_nothing_for_one_option():
    a, b = SimRandom(5), SimRandom(5)
    assert a.index(1) == 0
    assert a.uniform() == b.uniform()
    with pytest.raises(InvalidArgumentError):
        a.index(0)


def test_same_seed_same_draws():
    assert [SimRandom(3).uniform() for _ in range(3)] == [SimRandom(3).uniform()] * 3
    a, b = SimRandom(3), SimRandom(3)
    assert [a.index(7) for _ in range(50)] == [b.index(7) for _ in range(50)]


def test_fault_kinds():
    m = build_marketplace(1)
    [(crashed, fault)] = outcomes(m, FaultAction(FaultKind.CRASH_REMOVE, "id:shop1.Search"))
    assert "shop1.Search" not in crashed.components and fault == Fault(FaultKind.CRASH_REMOVE, "shop1.Search", ())
    [(burst, _)] = outcomes(m, FaultAction(FaultKind.EXCEPTION_BURST, "id:shop1.Search"))
    assert burst.metric("shop1.Search", "exceptions") == 6
    [(burst, _)] = outcomes(burst, FaultAction(FaultKind.EXCEPTION_BURST, "id:shop1.Search", {"count": 2}))
    assert burst.metric("shop1.Search", "exceptions") == 8
    [(flipped, _)] = outcomes(m, FaultAction(FaultKind.LIFECYCLE_FLIP, "type:Search"))
    assert flipped.components["shop1.Search"].lifecycle is Lifecycle.STOPPED
    assert len(outcomes(m, FaultAction(FaultKind.CRASH_REMOVE))) == 18


def test_targets_only_live_components():
    m = mutate(build_marketplace(1), SetLifecycle("shop1.Search", Lifecycle.UNDEPLOYED))
    assert "shop1.Search" not in [c.id for c in candidates(m, "RANDOM")]
    assert outcomes(m, FaultAction(FaultKind.CRASH_REMOVE, "id:shop1.Search")) == [(m, None)]


def test_id_target_follows_replacements():
    m = build_marketplace(1)
    auth = m.components["shop1.Authentication"]
    m = mutate(m, RemoveComponent(auth.id), AddComponent(auth.replace(id="shop1.Authentication~2")))
    assert [c.id for c in candidates(m, "id:shop1.Authentication")] == ["shop1.Authentication~2"]


def test_repeat_last():
    m = build_marketplace(1)
    rng = SimRandom(0)
    repeat = FaultAction(FaultKind.REPEAT_LAST)
    assert apply_action(m, repeat, None, rng) == (m, None)
    flip = Fault(FaultKind.LIFECYCLE_FLIP, "shop1.Search", ())
    out, last = apply_action(m, repeat, flip, rng)
    assert out.components["shop1.Search"].lifecycle is Lifecycle.STOPPED and last == flip


def test_no_op_is_faithful():
    m = build_marketplace(1)
    last = Fault(FaultKind.CRASH_REMOVE, "shop1.Search", ())
    assert outcomes(m, NO_OP, last) == [(m, last)]


def test_action_validation():
    with pytest.raises(InvalidArgumentError):
        FaultAction(FaultKind.CRASH_REMOVE, "name:x")
    with pytest.raises(InvalidArgumentError):
        FaultAction(FaultKind.REPLAY)
    with pytest.raises(InvalidArgumentError):
        FaultAction(FaultKind.EXCEPTION_BURST, params={"count": 0})
    with pytest.raises(ValueError):
        FaultAction(FaultKind.LIFECYCLE_FLIP, params={"to": "ASLEEP"})
    a = FaultAction(FaultKind.EXCEPTION_BURST, "type:Search", {"count": 3})
    assert FaultAction.from_dict(a.to_dict()) == a


def test_step_execute_unchanged_plan():
    gt = initialize(build_marketplace(1), MetricRule())
    new, violations = step_execute(gt, gt)
    assert new == gt and violations == []


def test_step_execute_recomputes_touched_components():
    rule = MetricRule(base={"Search": 1.0})
    gt = initialize(build_marketplace(1), rule)
    assert gt.metric("shop1.Search", "response-time") == 1.0 + 2.0 * len(gt.incident("shop1.Search"))
    planned = mutate(gt, RemoveComponent("shop1.ItemFilter"))
    planned = mutate(planned, RemoveComponent("shop1.Auction"))
    new, violations = step_execute(gt, planned, rule)
    # the planner removed started components, which a lifecycle cannot do
    assert {v.target for v in violations} == {"shop1.ItemFilter", "shop1.Auction"}
    # the structure is still adopted
    assert "shop1.ItemFilter" not in new.components
    assert new.metric("shop1.Search", "response-time") == 1.0 + 2.0 * len(new.incident("shop1.Search"))
    assert new.metric("shop1.Inventory", "response-time") < gt.metric("shop1.Inventory", "response-time")


def test_step_execute_keeps_only_history():
    gt = build_marketplace(1)
    planned = mutate(gt, Annotate(Annotation(AnnotationKind.PLANNED_ACTION, "shop1.Search", {"action": "RESTART"})),
                     Annotate(Annotation(AnnotationKind.FAILURE_HISTORY, "marketplace", {"shop1.Search": "1"})))
    new, _ = step_execute(gt, planned)
    assert [a.kind for a in new.annotations] == [AnnotationKind.FAILURE_HISTORY]


def tiny(**kw):
    return SimAutomaton(
        (SimState("s"), SimState("end", terminal=True)),
        "s",
        (SimTransition("s", "s", NO_OP, weight=3), SimTransition("s", "end", NO_OP, weight=Fraction(1, 2))),
        RTM("m", [Component("a", "A", Lifecycle.STARTED)]),
        **kw,
    )


def test_automaton_validation():
    with pytest.raises(NotFoundError):
        SimAutomaton((SimState("s"),), "t", (), RTM("m"))
    with pytest.raises(NotFoundError):
        SimAutomaton((SimState("s"),), "s", (SimTransition("s", "x", NO_OP),), RTM("m"))
    with pytest.raises(InvalidArgumentError):
        SimAutomaton((SimState("s"),), "s", (), RTM("m"))
    with pytest.raises(InvalidArgumentError):
        SimTransition("s", "s", NO_OP, weight=0)
    with pytest.raises(ParseError):
        SimAutomaton((SimState("s"),), "s", (SimTransition("s", "s", NO_OP, guard="effect("),), RTM("m"))
    # unreachable dead ends are tolerated
    SimAutomaton((SimState("s", terminal=True), SimState("x")), "s", (), RTM("m"))


def test_file_round_trip(tmp_path):
    a = tiny(name="tiny")
    save_automaton(a, tmp_path / "a.json")
    back = load_automaton(tmp_path / "a.json")
    assert back == a and equal(back.template, a.template)
    assert automaton_to_dict(back) == automaton_to_dict(a)


def test_template_by_reference():
    shipped = load_automaton(DATA / "selfhealing.automaton.json")
    assert len(shipped.template.components) == 18
    assert shipped.reachable() == {"calm", "stormy"}
    doc = automaton_to_dict(shipped, "oneway/intact.json")
    assert automaton_from_dict(doc, DATA) == shipped


def test_unknown_generator_rejected():
    doc = automaton_to_dict(tiny())
    with pytest.raises(ParseError):
        automaton_from_dict(dict(doc, rng="mt19937"))
    with pytest.raises(ParseError):
        automaton_from_dict({k: v for k, v in doc.items() if k != "states"})


def test_choose_respects_weights():
    a, rng = tiny(), SimRandom(1)
    picks = [a.choose("s", rng).target for _ in range(7000)]
    assert chisquare([picks.count("s"), picks.count("end")], [6000, 1000]).pvalue > 0.001
