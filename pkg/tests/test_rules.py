import dataclasses
import pathlib

import pytest

from hv import rules
from hv.errors import ModelLookupError
from hv.model import (
    Class,
    Interaction,
    Lifeline,
    Message,
    MessageSort,
    Model,
    Operation,
    Parameter,
    Visibility,
)
from hv.canonical import parse_canonical
from hv.sim import SimParams, generate_model


def _with_message(order_model, message_id, **changes):
    interactions = []
    for inter in order_model.interactions:
        messages = tuple(
            dataclasses.replace(m, **changes) if m.id == message_id else m
            for m in inter.messages
        )
        interactions.append(dataclasses.replace(inter, messages=messages))
    return dataclasses.replace(order_model, interactions=tuple(interactions))


def _rule_ids(result):
    return [d.rule_id for d in result.diagnostics]


# --- MSG-UNNAMED -------------------------------------------------------------


def test_unnamed_sync_message_flagged(order_model):
    result = rules.check_msg_unnamed(order_model, "M1")
    assert _rule_ids(result) == ["MSG-UNNAMED"]
    assert result.read_set == {"M1"}


def test_unnamed_reply_message_exempt(order_model):
    model = _with_message(order_model, "M1", sort=MessageSort.REPLY)
    assert rules.check_msg_unnamed(model, "M1").diagnostics == ()


def test_whitespace_only_name_flagged(order_model):
    model = _with_message(order_model, "M2", name="  ")
    assert _rule_ids(rules.check_msg_unnamed(model, "M2")) == ["MSG-UNNAMED"]


# --- MSG-UNDEF-OP ------------------------------------------------------------


def test_undefined_operation_flagged(order_model):
    result = rules.check_msg_undef_op(order_model, "M3")
    assert _rule_ids(result) == ["MSG-UNDEF-OP"]
    assert result.diagnostics[0].related_element_ids == ("C3",)


def test_defined_operation_clean(order_model):
    assert rules.check_msg_undef_op(order_model, "M2").diagnostics == ()


def test_operation_inherited_from_superclass(order_model):
    # message to the PremiumCustomer lifeline calling Customer's operation
    model = _with_message(order_model, "M2", name="notify", target_lifeline_id="L3", arguments=())
    assert rules.check_msg_undef_op(model, "M2").diagnostics == ()


def test_undef_op_suppressed_for_unresolved_lifeline(order_model):
    lifelines = order_model.interactions[0].lifelines + (Lifeline(id="LX", name="ghost"),)
    inter = dataclasses.replace(order_model.interactions[0], lifelines=lifelines)
    model = dataclasses.replace(order_model, interactions=(inter,))
    model = _with_message(model, "M3", target_lifeline_id="LX")
    assert rules.check_msg_undef_op(model, "M3").diagnostics == ()
    # ... the lifeline rule owns that finding
    assert _rule_ids(rules.check_lifeline_type(model, "LX")) == ["LIFELINE-UNDEF-TYPE"]


# --- MSG-PARAM-MISMATCH --------------------------------------------------------


def test_matching_arity_clean(order_model):
    assert rules.check_msg_param_mismatch(order_model, "M2").diagnostics == ()


def test_arity_mismatch_flagged(order_model):
    model = _with_message(order_model, "M2", arguments=())
    result = rules.check_msg_param_mismatch(model, "M2")
    assert _rule_ids(result) == ["MSG-PARAM-MISMATCH"]
    assert result.diagnostics[0].related_element_ids == ("C3-place",)


def test_overloads_any_arity_match_clean():
    model = Model(
        model_id="m",
        classes=(
            Class(
                id="c",
                name="C",
                operations=(
                    Operation(id="o1", name="place", parameters=(Parameter("a", "int"),)),
                    Operation(
                        id="o2",
                        name="place",
                        parameters=(Parameter("a", "int"), Parameter("b", "int")),
                    ),
                ),
            ),
        ),
        interactions=(
            Interaction(
                id="i",
                name="I",
                lifelines=(Lifeline(id="l", name="x", type_ref="c"),),
                messages=(
                    Message(
                        id="ms",
                        name="place",
                        source_lifeline_id="l",
                        target_lifeline_id="l",
                        arguments=("x", "y"),
                    ),
                ),
            ),
        ),
    )
    assert rules.check_msg_param_mismatch(model, "ms").diagnostics == ()


def test_out_parameters_do_not_count_toward_arity():
    op = Operation(
        id="o",
        name="go",
        parameters=(Parameter("a", "int"), Parameter("r", "int", "out")),
    )
    assert op.input_arity() == 1


def test_no_candidates_means_param_rule_does_not_apply(order_model):
    assert rules.check_msg_param_mismatch(order_model, "M3").diagnostics == ()


# --- MSG-NO-ASSOC ---------------------------------------------------------------


def test_associated_classes_clean(order_model):
    assert rules.check_msg_no_assoc(order_model, "M2").diagnostics == ()


def test_missing_association_flagged(showcase_model):
    result = rules.check_msg_no_assoc(showcase_model, "N4")
    assert _rule_ids(result) == ["MSG-NO-ASSOC"]
    assert result.diagnostics[0].related_element_ids == ("S1", "K1")


def test_self_message_exempt(order_model):
    model = _with_message(order_model, "M2", source_lifeline_id="L2")
    assert rules.check_msg_no_assoc(model, "M2").diagnostics == ()


# --- LIFELINE-UNDEF-TYPE ----------------------------------------------------------


def test_resolved_lifeline_clean(order_model):
    assert rules.check_lifeline_type(order_model, "L1").diagnostics == ()


def test_ambiguous_lifeline_flagged(showcase_model):
    result = rules.check_lifeline_type(showcase_model, "LD")
    assert _rule_ids(result) == ["LIFELINE-UNDEF-TYPE"]
    assert "ambiguousName" in result.diagnostics[0].message
    assert result.diagnostics[0].related_element_ids == ("D1", "D2")


def test_untyped_lifeline_flagged():
    model = Model(
        model_id="m",
        interactions=(Interaction(id="i", name="I", lifelines=(Lifeline(id="l", name="x"),)),),
    )
    result = rules.check_lifeline_type(model, "l")
    assert "noType" in result.diagnostics[0].message


# --- MSG-PRIVATE-OP ------------------------------------------------------------


def test_private_call_from_other_class_flagged(order_model):
    result = rules.check_private_call(order_model, "M4")
    assert _rule_ids(result) == ["MSG-PRIVATE-OP"]
    assert result.diagnostics[0].related_element_ids == ("C3-cancel",)


def test_private_self_call_clean(order_model):
    model = _with_message(order_model, "M4", source_lifeline_id="L2")
    assert rules.check_private_call(model, "M4").diagnostics == ()


def test_public_call_clean(order_model):
    assert rules.check_private_call(order_model, "M2").diagnostics == ()


def _protected_model(source_class_id):
    return Model(
        model_id="m",
        classes=(
            Class(
                id="base",
                name="Base",
                operations=(
                    Operation(id="base-guard", name="guard", visibility=Visibility.PROTECTED),
                ),
            ),
            Class(id="other", name="Other"),
            Class(id="sub", name="Sub", superclass_ids=("base",)),
        ),
        interactions=(
            Interaction(
                id="i",
                name="I",
                lifelines=(
                    Lifeline(id="src", name="s", type_ref=source_class_id),
                    Lifeline(id="tgt", name="t", type_ref="base"),
                ),
                messages=(
                    Message(id="ms", name="guard", source_lifeline_id="src", target_lifeline_id="tgt"),
                ),
            ),
        ),
    )


def test_protected_call_from_descendant_clean():
    assert rules.check_private_call(_protected_model("sub"), "ms").diagnostics == ()


def test_protected_call_from_unrelated_class_flagged():
    result = rules.check_private_call(_protected_model("other"), "ms")
    assert _rule_ids(result) == ["MSG-PRIVATE-OP"]
    assert "protected" in result.diagnostics[0].message


# --- STRUCT-WELLFORMED -------------------------------------------------------------


def test_struct_clean_class(order_model):
    assert rules.check_structure(order_model, "C1").diagnostics == ()


def test_struct_dangling_association_end():
    text = """{"modelId":"m","classes":[{"id":"c","name":"C"}],
        "enumerations":[],"interactions":[],
        "associations":[{"id":"a","endA":{"classId":"c"},"endB":{"classId":"Cx"}}]}"""
    model = parse_canonical(text).model
    result = rules.check_structure(model, "a")
    assert len(result.diagnostics) == 1
    assert "Cx" in result.diagnostics[0].message


def test_struct_cycle_one_diagnostic_per_class():
    model = Model(
        model_id="m",
        classes=(
            Class(id="A", name="A", superclass_ids=("B",)),
            Class(id="B", name="B", superclass_ids=("A",)),
        ),
    )
    for class_id in ("A", "B"):
        result = rules.check_structure(model, class_id)
        assert ["inheritance cycle" in d.message for d in result.diagnostics] == [True]


def test_struct_duplicate_id_via_lenient_parse():
    text = """{"modelId":"m","classes":[{"id":"C1","name":"A"},{"id":"C1","name":"B"}],
        "enumerations":[],"associations":[],"interactions":[]}"""
    model = parse_canonical(text, lenient=True).model
    result = rules.check_structure(model, "C1")
    assert any("used by 2 elements" in d.message for d in result.diagnostics)


def test_struct_unknown_subject_raises(order_model):
    with pytest.raises(ModelLookupError):
        rules.check_structure(order_model, "E1")  # enumerations are not subjects


# --- catalog / subjects / purity ---------------------------------------------------


def test_catalog_shape():
    entries = rules.catalog()
    assert len(entries) == 7
    ids = [e.rule_id for e in entries]
    assert len(set(ids)) == 7
    assert all(e.title and e.description for e in entries)


def test_subjects_of(order_model):
    assert rules.subjects_of("MSG-UNNAMED", order_model) == ["M1", "M2", "M3", "M4"]
    assert rules.subjects_of("LIFELINE-UNDEF-TYPE", order_model) == ["L1", "L2", "L3"]
    assert rules.subjects_of("STRUCT-WELLFORMED", Model(model_id="m")) == []
    with pytest.raises(ModelLookupError):
        rules.subjects_of("NOPE", order_model)


def test_evaluate_pure(order_model):
    for rule_id in rules.RULE_IDS:
        for subject in rules.subjects_of(rule_id, order_model):
            assert rules.evaluate(rule_id, order_model, subject) == rules.evaluate(
                rule_id, order_model, subject
            )


def test_tracked_and_untracked_paths_agree():
    for seed in range(4):
        model = generate_model(SimParams(seed=seed, classes=8, interactions=3))
        for rule_id in rules.RULE_IDS:
            for subject in rules.subjects_of(rule_id, model):
                tracked = rules.evaluate(rule_id, model, subject).diagnostics
                untracked = tuple(rules.diagnostics_for(rule_id, model, subject))
                assert tracked == untracked


def test_read_set_contains_subject_and_related(order_model, showcase_model):
    for model in (order_model, showcase_model):
        for rule_id in rules.RULE_IDS:
            for subject in rules.subjects_of(rule_id, model):
                result = rules.evaluate(rule_id, model, subject)
                assert subject in result.read_set
                for diag in result.diagnostics:
                    assert set(diag.related_element_ids) <= result.read_set


def test_no_double_reporting_on_unresolved_target(order_model):
    lifelines = order_model.interactions[0].lifelines + (Lifeline(id="LX", name="ghost"),)
    inter = dataclasses.replace(order_model.interactions[0], lifelines=lifelines)
    model = dataclasses.replace(order_model, interactions=(inter,))
    model = _with_message(model, "M2", target_lifeline_id="LX")
    for rule_id in ("MSG-UNDEF-OP", "MSG-PARAM-MISMATCH", "MSG-NO-ASSOC", "MSG-PRIVATE-OP"):
        assert rules.evaluate(rule_id, model, "M2").diagnostics == ()
    assert _rule_ids(rules.check_lifeline_type(model, "LX")) == ["LIFELINE-UNDEF-TYPE"]


def test_exempt_sorts_for_all_message_rules(order_model):
    for sort in (MessageSort.REPLY, MessageSort.CREATE, MessageSort.DELETE):
        model = _with_message(order_model, "M3", sort=sort)
        for rule_id in ("MSG-UNNAMED", "MSG-UNDEF-OP", "MSG-PARAM-MISMATCH",
                        "MSG-NO-ASSOC", "MSG-PRIVATE-OP"):
            assert rules.evaluate(rule_id, model, "M3").diagnostics == ()


def test_rule_reference_document_in_sync():
    generated = rules.reference_markdown()
    for rule_id in rules.RULE_IDS:
        assert f"## {rule_id}" in generated
    committed = pathlib.Path(__file__).parent.parent / "docs" / "RULES.md"
    assert committed.read_text() == generated
