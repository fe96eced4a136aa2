import pytest

from rtmtest.compare import (
    Diff,
    apply_diff,
    check_adaptation_well_defined,
    check_constraints,
    diff,
    equal,
    register_constraint,
    registered_constraints,
    ConstraintViolation,
)
from rtmtest.errors import InconsistentDiffError, InvalidArgumentError, UnknownConstraintError
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
    SetMetric,
    mutate,
)
from rtmtest.selfhealing.catalog import build_marketplace


def shop():
    return build_marketplace(1)


def test_removed_component_reports_component_and_connectors():
    m = shop()
    d = diff(m, mutate(m, RemoveComponent("shop1.ItemFilter")))
    assert [(e.kind, e.id) for e in d.removed] == [
        ("component", "shop1.ItemFilter"),
        ("connector", "shop1.ItemFilter:IInventory"),
        ("connector", "shop1.Search:IItemFilter"),
    ]
    assert not d.added and not d.changed


def test_identical_models_give_empty_diff():
    m = shop()
    assert diff(m, m).empty and equal(m, m) and not diff(m, m)


def test_field_and_metric_changes():
    m = shop()
    n = mutate(m, SetLifecycle("shop1.Search", Lifecycle.STOPPED), SetMetric("shop1.Search", "rt", 4),
               SetMetric("marketplace", "load", 1))
    d = diff(m, n)
    assert [(c.element, c.field, c.old, c.new) for c in d.changed] == [
        ("@model", "metric:load", None, 1.0),
        ("shop1.Search", "lifecycle", "STARTED", "STOPPED"),
        ("shop1.Search", "metric:rt", None, 4.0),
    ]
    assert diff(m, n, ignore={"metrics"}).changed[0].field == "lifecycle"


def test_ignore_categories():
    m = shop()
    planned = mutate(m, Annotate(Annotation(AnnotationKind.PLANNED_ACTION, "shop1.Search", {"action": "RESTART"})),
                     Annotate(Annotation(AnnotationKind.FAILURE_HISTORY, "marketplace", {"x": "1"})))
    failing = mutate(m, Annotate(Annotation(AnnotationKind.LIFECYCLE_FAILURE, "shop1.Search")))
    assert len(diff(m, planned).added) == 2
    assert equal(m, planned, ignore={"planned-actions"})
    assert not equal(m, failing, ignore={"planned-actions"})
    assert equal(m, failing, ignore={"annotations"})
    with pytest.raises(InvalidArgumentError):
        diff(m, m, ignore={"colours"})


def test_model_rename_round_trips():
    a = RTM("a", [Component("x", "T")], metrics={"a": {"load": 2}})
    b = RTM("b", [Component("x", "T")], metrics={"b": {"load": 2}})
    d = diff(a, b)
    assert [(c.element, c.field) for c in d.changed] == [("@model", "id")]
    assert apply_diff(a, d) == b


def test_apply_diff_checks_base():
    m = shop()
    d = diff(m, mutate(m, RemoveComponent("shop1.ItemFilter")))
    with pytest.raises(InconsistentDiffError):
        apply_diff(RTM("marketplace"), d)
    added = diff(RTM("marketplace"), m)
    with pytest.raises(InconsistentDiffError):
        apply_diff(m, added)


def test_diff_dict_round_trip():
    m = shop()
    n = mutate(m, RemoveComponent("shop1.Search"), SetMetric("shop1.Inventory", "rt", 1.5))
    d = diff(m, n)
    assert Diff.from_dict(d.to_dict()) == d
    assert apply_diff(m, Diff.from_dict(d.to_dict())) == n


def test_marketplace_satisfies_constraints():
    assert check_constraints(shop()) == []
    assert set(registered_constraints()) >= {
        "critical-components-present", "no-dangling-required", "lifecycle-states-legal", "connector-endpoints-exist"}


def test_dangling_required_interface():
    m = mutate(shop(), RemoveComponent("shop1.ItemFilter"))
    found = check_constraints(m)
    assert [(v.constraint, v.target) for v in found] == [("no-dangling-required", "shop1.Search")]


def test_critical_component_missing_needs_expectation():
    m = mutate(shop(), RemoveComponent("shop1.Authentication"))
    without = {v.constraint for v in check_constraints(m)}
    assert "critical-components-present" not in without
    found = check_constraints(m, ["critical-components-present"], expected_critical={"shop1.Authentication"})
    assert [v.target for v in found] == ["shop1.Authentication"]


def test_replacement_counts_for_critical():
    m = shop()
    auth = m.components["shop1.Authentication"]
    m = mutate(m, RemoveComponent(auth.id), AddComponent(auth.replace(id="shop1.Authentication~1")))
    assert check_constraints(m, ["critical-components-present"], expected_critical={"shop1.Authentication"}) == []


def test_undeployed_but_wired():
    m = mutate(shop(), SetLifecycle("shop1.ItemFilter", Lifecycle.UNDEPLOYED))
    assert ("lifecycle-states-legal", "shop1.ItemFilter") in [(v.constraint, v.target) for v in check_constraints(m)]


def test_violations_sorted():
    m = mutate(shop(), RemoveComponent("shop1.Inventory"))
    found = check_constraints(m)
    assert found == sorted(found) and len(found) > 1


def test_unknown_constraint():
    with pytest.raises(UnknownConstraintError):
        check_constraints(shop(), ["made-up"])


def test_custom_constraint():
    @register_constraint("test-no-gamma")
    def _no_gamma(model, ctx):
        return [ConstraintViolation("test-no-gamma", c.id, "gamma") for c in model.components.values()
                if c.type_name == "Gamma"]

    m = RTM("m", [Component("g", "Gamma")])
    assert [v.target for v in check_constraints(m, ["test-no-gamma"])] == ["g"]


def test_well_definedness():
    a = Component("a", "A", Lifecycle.STARTED)
    before = RTM("m", [a])
    assert check_adaptation_well_defined(before, before) == []
    assert check_adaptation_well_defined(before, RTM("m", [a.replace(lifecycle=Lifecycle.UNDEPLOYED)])) == []
    assert [v.target for v in check_adaptation_well_defined(before, RTM("m"))] == ["a"]
    assert check_adaptation_well_defined(before, RTM("m", [a.replace(lifecycle=Lifecycle.DEPLOYED)]))
    assert check_adaptation_well_defined(RTM("m"), RTM("m", [a.replace(lifecycle=Lifecycle.STOPPED)]))
    assert check_adaptation_well_defined(RTM("m", [a.replace(injected=True)]), RTM("m")) == []
    undeployed = RTM("m", [a.replace(lifecycle=Lifecycle.UNDEPLOYED)])
    assert check_adaptation_well_defined(undeployed, RTM("m")) == []
