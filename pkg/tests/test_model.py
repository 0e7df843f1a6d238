import dataclasses

import pytest

from hv.errors import ModelLookupError
from hv.model import (
    Class,
    Interaction,
    Lifeline,
    Message,
    Model,
    Operation,
    UnresolvedReason,
    associated,
    element_path,
    on_inheritance_cycle,
    operations_of,
    resolve_lifeline_type,
    validate_wellformed,
)
from hv.canonical import parse_canonical
from hv.sim import SimParams, generate_model


def test_resolve_lifeline_via_type_ref(order_model):
    resolution = resolve_lifeline_type(order_model, "L1")
    assert resolution.resolved and resolution.class_id == "C1"


def test_resolve_lifeline_unknown_name():
    model = Model(
        model_id="m",
        interactions=(
            Interaction(id="i", name="I", lifelines=(Lifeline(id="l", name="x", type_name="Ghost"),)),
        ),
    )
    resolution = resolve_lifeline_type(model, "l")
    assert not resolution.resolved
    assert resolution.reason is UnresolvedReason.UNKNOWN_NAME


def test_resolve_lifeline_ambiguous_name(showcase_model):
    resolution = resolve_lifeline_type(showcase_model, "LD")
    assert resolution.reason is UnresolvedReason.AMBIGUOUS_NAME
    assert resolution.candidates == ("D1", "D2")


def test_resolve_lifeline_no_type_and_dangling_ref():
    model = Model(
        model_id="m",
        interactions=(
            Interaction(
                id="i",
                name="I",
                lifelines=(
                    Lifeline(id="l1", name="a"),
                    Lifeline(id="l2", name="b", type_ref="nope"),
                ),
            ),
        ),
    )
    assert resolve_lifeline_type(model, "l1").reason is UnresolvedReason.NO_TYPE
    assert resolve_lifeline_type(model, "l2").reason is UnresolvedReason.DANGLING_REF


def test_resolve_lifeline_unknown_id_raises(order_model):
    with pytest.raises(ModelLookupError):
        resolve_lifeline_type(order_model, "no-such-lifeline")


def test_operations_of_declaration_order(order_model):
    own = operations_of(order_model, "C3")
    assert [(owner, op.name) for owner, op in own] == [("C3", "place"), ("C3", "cancel")]


def test_operations_of_inherited_nearest_first(order_model):
    inherited = operations_of(order_model, "C2", include_inherited=True)
    assert [(owner, op.name) for owner, op in inherited] == [("C1", "notify")]


def _cyclic_model():
    return Model(
        model_id="m",
        classes=(
            Class(id="A", name="A", superclass_ids=("B",), operations=(Operation(id="A-x", name="x"),)),
            Class(id="B", name="B", superclass_ids=("A",), operations=(Operation(id="B-y", name="y"),)),
        ),
    )


def test_operations_of_terminates_on_cycle():
    model = _cyclic_model()
    ops = operations_of(model, "A", include_inherited=True)
    assert [op.name for _, op in ops] == ["x", "y"]
    total_ops = sum(len(c.operations) for c in model.classes)
    assert len(ops) <= total_ops


def test_associated_direct_and_self(order_model):
    assert associated(order_model, "C1", "C3")
    assert associated(order_model, "C3", "C3")


def test_associated_through_ancestry(order_model):
    # PremiumCustomer inherits Customer's association with Order.
    assert associated(order_model, "C2", "C3")


def test_associated_symmetry_over_generated_models():
    for seed in range(3):
        model = generate_model(SimParams(seed=seed, classes=8, interactions=2))
        ids = [c.id for c in model.classes]
        for a in ids:
            for b in ids:
                assert associated(model, a, b) == associated(model, b, a)


def test_associated_dangling_id_raises(order_model):
    with pytest.raises(ModelLookupError):
        associated(order_model, "C1", "nope")


def test_validate_wellformed_empty():
    assert validate_wellformed(Model(model_id="m")) == []


def test_validate_wellformed_order_fixture_clean(order_model):
    assert validate_wellformed(order_model) == []


def test_validate_wellformed_dangling_association_end():
    text = """{"modelId":"m","classes":[{"id":"c","name":"C"}],
        "enumerations":[],"interactions":[],
        "associations":[{"id":"a","endA":{"classId":"c"},"endB":{"classId":"Cx"}}]}"""
    model = parse_canonical(text).model
    issues = validate_wellformed(model)
    assert [i.kind for i in issues] == ["danglingAssociationEnd"]
    assert issues[0].element_id == "a"


def test_validate_wellformed_duplicate_id_lenient_parse():
    text = """{"modelId":"m","classes":[{"id":"C1","name":"A"},{"id":"C1","name":"B"}],
        "enumerations":[],"associations":[],"interactions":[]}"""
    report = parse_canonical(text, lenient=True)
    assert report.ok and report.warnings
    issues = validate_wellformed(report.model)
    assert [(i.kind, i.element_id) for i in issues] == [("duplicateId", "C1")]


def test_validate_wellformed_cycle_and_order():
    issues = validate_wellformed(_cyclic_model())
    assert [(i.element_id, i.kind) for i in issues] == [
        ("A", "inheritanceCycle"),
        ("B", "inheritanceCycle"),
    ]
    assert on_inheritance_cycle(_cyclic_model(), "A")


def test_validate_wellformed_message_endpoint_outside():
    model = Model(
        model_id="m",
        interactions=(
            Interaction(
                id="i1",
                name="One",
                lifelines=(Lifeline(id="l1", name="a"),),
                messages=(
                    Message(id="m1", name="go", source_lifeline_id="l1", target_lifeline_id="elsewhere"),
                ),
            ),
        ),
    )
    issues = validate_wellformed(model)
    assert [i.kind for i in issues] == ["messageEndpointOutsideInteraction"]
    assert issues[0].element_id == "m1"


def test_top_level_collections_normalized_to_id_order():
    model = Model(
        model_id="m",
        classes=(Class(id="z", name="Z"), Class(id="a", name="A")),
    )
    assert [c.id for c in model.classes] == ["a", "z"]


def test_nested_collections_keep_declaration_order(order_model):
    assert [op.id for op in order_model.idx.class_of("C3").operations] == ["C3-place", "C3-cancel"]


def test_element_path_rendering(order_model):
    assert element_path(order_model, "M3") == "Checkout/pay#M3"
    assert element_path(order_model, "C3-place") == "Order.place#C3-place"
    assert element_path(order_model, "C1") == "Customer#C1"
    assert element_path(order_model, "L1") == "Checkout/customer#L1"
    assert element_path(order_model, "ghost") == "#ghost"


def test_resolution_pure_across_calls(order_model):
    first = resolve_lifeline_type(order_model, "L2")
    second = resolve_lifeline_type(order_model, "L2")
    assert first == second


def test_model_equality_is_structural(order_model):
    clone = dataclasses.replace(order_model)
    assert clone == order_model and clone is not order_model
