import json

import pytest

from conftest import ONEWAY
from rtmtest.compare import Diff, diff
from rtmtest.engines import get_engine
from rtmtest.errors import ParseError, SetupError, UnsplittableInputError
from rtmtest.harness import (
    Classification,
    EMTest,
    OneWayTest,
    Outcome,
    RunResult,
    Unit,
    classify,
    load_suite,
    materialize,
    overlay_region,
    recombine,
    run_execute_monitor,
    run_oneway,
    run_suite,
    split_input,
)
from rtmtest.mape import StepFunctions
from rtmtest.model import (
    RTM,
    Annotate,
    Annotation,
    AnnotationKind,
    Component,
    Lifecycle,
    RemoveComponent,
    load,
    mutate,
)
from rtmtest.selfhealing.catalog import build_marketplace
from rtmtest.selfhealing.software import SimulatedAdaptableSoftware


def oneway_models():
    return load(ONEWAY / "intact.json"), load(ONEWAY / "removed.json"), load(ONEWAY / "analyzed.json")


def test_oneway_units():
    intact, removed, analyzed = oneway_models()
    steps = get_engine("self-healing")
    assert run_oneway(OneWayTest("a", Unit.ANALYZE, removed, analyzed), steps).passed
    assert run_oneway(OneWayTest("p", Unit.PLAN, analyzed, intact, ("planned-actions",)), steps).passed
    failed = run_oneway(OneWayTest("p", Unit.PLAN, analyzed, intact), steps)
    assert failed.outcome is Outcome.FAIL
    assert {e.value.kind for e in failed.diff.removed} == {AnnotationKind.PLANNED_ACTION, AnnotationKind.FAILURE_HISTORY}


def test_step_exception_is_a_failed_test():
    def boom(model):
        raise RuntimeError("kaput")

    intact, removed, analyzed = oneway_models()
    v = run_oneway(OneWayTest("x", Unit.ANALYZE, removed, analyzed), StepFunctions("boom", analyze=boom))
    assert v.outcome is Outcome.FAIL and "kaput" in v.error


def test_analyze_changing_structure_is_noted():
    intact, removed, analyzed = oneway_models()
    v = run_oneway(OneWayTest("x", Unit.ANALYZE, removed, analyzed), StepFunctions("bad", analyze=lambda m: intact))
    assert v.outcome is Outcome.FAIL and v.notes


def test_verdict_reports():
    intact, removed, analyzed = oneway_models()
    v = run_oneway(OneWayTest("a", Unit.ANALYZE, removed, intact), get_engine("self-healing"))
    doc = v.to_dict()
    assert doc["name"] == "a" and doc["outcome"] == "FAIL"
    json.dumps(doc)
    assert v.to_text().startswith("FAIL a")


def test_split_and_recombine():
    erroneous = load(ONEWAY / "erroneous.json")
    valid, overlay = split_input(erroneous)
    assert overlay.deletions == ("shop1.ItemFilter",)
    assert not any(a.kind is AnnotationKind.TOMBSTONE for a in valid.annotations)
    assert recombine(valid, overlay) == erroneous
    assert "shop1.ItemFilter" not in materialize(erroneous).components
    assert overlay_region(valid, overlay) == {
        "shop1.ItemFilter", "shop1.ItemFilter:IInventory", "shop1.Search:IItemFilter"}


def test_split_injected_component():
    m = build_marketplace(1)
    ghost = Component("shop1.Ghost", "Ghost", Lifecycle.STARTED, injected=True)
    from rtmtest.model import AddComponent, SetMetric

    erroneous = mutate(m, AddComponent(ghost), SetMetric("shop1.Ghost", "exceptions", 9))
    valid, overlay = split_input(erroneous)
    assert valid == m
    assert [c.id for c in overlay.components] == ["shop1.Ghost"]
    assert overlay.metrics == {"shop1.Ghost": {"exceptions": 9.0}}
    assert recombine(valid, overlay) == erroneous


def test_unsplittable_input():
    broken = mutate(build_marketplace(1), RemoveComponent("shop1.ItemFilter"))
    with pytest.raises(UnsplittableInputError):
        split_input(broken)
    valid, overlay = split_input(build_marketplace(1))
    assert overlay.empty


def test_classify():
    same = RunResult(Diff())
    d_out = diff(RTM("m", [Component("x", "T")]), RTM("m"))
    d_in = diff(RTM("m", [Component("y", "T")]), RTM("m"))
    both = diff(RTM("m", [Component("x", "T"), Component("y", "T")]), RTM("m"))
    region = frozenset({"y"})
    assert classify([same] * 3, region) is Classification.WORKING
    assert classify([same] * 3, region, masking=True) is Classification.POSSIBLY_MASKED
    assert classify([RunResult(d_out)] * 3, region) is Classification.EXECUTE_FAULT_SUSPECTED
    assert classify([RunResult(d_in)] * 3, region) is Classification.MONITOR_FAULT_SUSPECTED
    assert classify([RunResult(both)] * 3, region) is Classification.EXECUTE_AND_MONITOR_FAULT_SUSPECTED
    assert classify([same, RunResult(d_in), same], region) is Classification.UNDETERMINED
    assert classify([RunResult(d_in), RunResult(d_out)], region) is Classification.UNDETERMINED


def em_test():
    return EMTest("em", load(ONEWAY / "erroneous.json"))


def test_execute_monitor_engines():
    fresh = lambda: SimulatedAdaptableSoftware(RTM("marketplace"))  # noqa: E731
    assert run_execute_monitor(em_test(), get_engine("self-healing"), fresh()).classification \
        is Classification.WORKING
    assert run_execute_monitor(em_test(), get_engine("mutant-execute"), fresh()).classification \
        is Classification.EXECUTE_FAULT_SUSPECTED
    masked = run_execute_monitor(em_test(), get_engine("masking"), fresh())
    assert masked.outcome is Outcome.PASS and masked.classification is Classification.POSSIBLY_MASKED


def test_execute_monitor_setup_errors():
    with pytest.raises(SetupError):
        run_execute_monitor(em_test(), StepFunctions("no-em"), SimulatedAdaptableSoftware(RTM("marketplace")))

    class Stuck:
        resettable = False

        def reset(self):
            pass

    with pytest.raises(SetupError):
        run_execute_monitor(em_test(), get_engine("self-healing"), Stuck())


def test_repetitions_positive():
    with pytest.raises(ValueError):
        EMTest("em", build_marketplace(1), repetitions=0)


def test_suites():
    report = run_suite(load_suite(ONEWAY / "suite.json"), get_engine("self-healing"), ONEWAY)
    assert report.passed and report.exit_code == 0
    assert json.loads(report.to_json())["total"] == 3
    em = run_suite(load_suite(ONEWAY / "em_suite.json"), get_engine("mutant-monitor"), ONEWAY)
    assert em.exit_code == 1
    assert em.verdicts[0].classification is Classification.MONITOR_FAULT_SUSPECTED


def test_bad_suites(tmp_path):
    (tmp_path / "s.json").write_text('{"name": "x"}')
    with pytest.raises(ParseError):
        load_suite(tmp_path / "s.json")
    (tmp_path / "s.json").write_text('[{"name": "x", "input": "m.json"}]')
    with pytest.raises(ParseError):
        load_suite(tmp_path / "s.json")


def test_failure_annotations_are_input_not_oracle_noise():
    intact = build_marketplace(1)
    marked = mutate(intact, Annotate(Annotation(AnnotationKind.LIFECYCLE_FAILURE, "shop1.Search")))
    v = run_oneway(OneWayTest("x", Unit.PLAN, marked, intact, ("planned-actions",)), get_engine("self-healing"))
    assert v.passed
