import dataclasses

import pytest

from hv import rules
from hv.canonical import class_to_dict, association_to_dict
from hv.diffing import ChangeEvent, EventKind, diff
from hv.engine import Engine, full_check, full_check_evaluation_count
from hv.errors import ResyncRequiredError, StaleEventError
from hv.model import (
    Association,
    AssociationEnd,
    Class,
    ElementKind,
    Model,
    ModelIndex,
)
from hv.sim import (
    Rng,
    SimParams,
    SimState,
    edit_rng_seed,
    generate_edits,
    generate_model,
)

from .helpers import mutate_model


def _event(model, seq, **kwargs):
    return ChangeEvent(seq=seq, model_id=model.model_id, revision=model.revision + 1, **kwargs)


def _comparable(diag):
    return (
        diag.rule_id,
        diag.severity,
        diag.element_id,
        diag.interaction_id,
        diag.related_element_ids,
        diag.message,
    )


def test_init_empty_model():
    engine = Engine(Model(model_id="m"))
    assert engine.current() == []
    assert engine.eval_counter == 0
    assert engine.results == {}


def test_init_order_fixture(order_model):
    engine = Engine(order_model)
    assert sorted((d.rule_id, d.element_id) for d in engine.current()) == [
        ("MSG-PRIVATE-OP", "M4"),
        ("MSG-UNDEF-OP", "M3"),
        ("MSG-UNNAMED", "M1"),
    ]
    expected = sum(len(rules.subjects_of(r, order_model)) for r in rules.RULE_IDS)
    assert engine.eval_counter == expected
    engine.audit()


def test_full_check_matches_init(order_model, showcase_model):
    for model in (order_model, showcase_model):
        assert [d for d in full_check(model)] == Engine(model).current()
    assert full_check(Model(model_id="m")) == []


def test_rename_resolves_undefined_operation(order_model):
    engine = Engine(order_model)
    event = _event(
        order_model,
        1,
        kind=EventKind.CHANGED,
        element_kind=ElementKind.MESSAGE,
        element_id="M3",
        owner_id="I1",
        property="name",
        old_value="pay",
        new_value="place",
    )
    delta = engine.process([event])
    assert [d.rule_id for d in delta.removed] == ["MSG-UNDEF-OP"]
    assert delta.added == ()
    assert delta.revision == 1 and engine.revision == 1
    engine.audit()
    assert [_comparable(d) for d in engine.current()] == [
        _comparable(d) for d in full_check(engine.snapshot)
    ]


def test_event_outside_any_read_set_is_free(order_model):
    engine = Engine(order_model)
    before_evals = engine.eval_counter
    event = _event(
        order_model,
        1,
        kind=EventKind.CHANGED,
        element_kind=ElementKind.ENUMERATION,
        element_id="E1",
        property="literals",
        old_value=["OPEN", "PAID"],
        new_value=["OPEN", "PAID", "VOID"],
    )
    delta = engine.process([event])
    assert delta.is_empty
    assert engine.eval_counter == before_evals
    engine.audit()


def test_attribute_change_is_free(order_model):
    engine = Engine(order_model)
    before_evals = engine.eval_counter
    delta = engine.process(
        [
            _event(
                order_model,
                1,
                kind=EventKind.CHANGED,
                element_kind=ElementKind.ATTRIBUTE,
                element_id="C3-total",
                owner_id="C3",
                property="name",
                old_value="total",
                new_value="sum",
            )
        ]
    )
    assert delta.is_empty
    # the owner class is touched, so rules reading C3 re-run, but results stay
    assert engine.eval_counter >= before_evals
    engine.audit()


def test_seq_gap_resync_state_unchanged(order_model):
    engine = Engine(order_model)
    snapshot = engine.snapshot
    event = _event(
        order_model,
        5,
        kind=EventKind.CHANGED,
        element_kind=ElementKind.MESSAGE,
        element_id="M3",
        owner_id="I1",
        property="name",
        old_value="pay",
        new_value="x",
    )
    with pytest.raises(ResyncRequiredError):
        engine.process([event])
    assert engine.snapshot is snapshot and engine.last_seq == 0
    engine.audit()


def test_duplicate_batch_dropped(order_model):
    engine = Engine(order_model)
    event = _event(
        order_model,
        1,
        kind=EventKind.CHANGED,
        element_kind=ElementKind.MESSAGE,
        element_id="M3",
        owner_id="I1",
        property="name",
        old_value="pay",
        new_value="place",
    )
    first = engine.process([event])
    assert not first.is_empty
    replay = engine.process([event])
    assert replay.is_empty and replay.revision == engine.revision == 1


def test_stale_event_reports_seq(order_model):
    engine = Engine(order_model)
    event = _event(
        order_model,
        1,
        kind=EventKind.CHANGED,
        element_kind=ElementKind.MESSAGE,
        element_id="ghost",
        property="name",
        old_value="a",
        new_value="b",
    )
    with pytest.raises(StaleEventError) as exc:
        engine.process([event])
    assert exc.value.seq == 1
    assert engine.revision == 0
    engine.audit()


def test_added_class_fixes_unknown_name(showcase_model):
    # LD is ambiguous between D1/D2: removing one Dup class resolves it.
    engine = Engine(showcase_model)
    assert any(d.rule_id == "LIFELINE-UNDEF-TYPE" for d in engine.current())
    delta = engine.process(
        [
            _event(
                showcase_model,
                1,
                kind=EventKind.REMOVED,
                element_kind=ElementKind.CLASS,
                element_id="D2",
            )
        ]
    )
    assert [d.rule_id for d in delta.removed] == ["LIFELINE-UNDEF-TYPE"]
    engine.audit()
    # adding it back re-introduces the ambiguity
    delta = engine.process(
        [
            _event(
                engine.snapshot,
                2,
                kind=EventKind.ADDED,
                element_kind=ElementKind.CLASS,
                element_id="D2",
                payload=class_to_dict(Class(id="D2", name="Dup")),
            )
        ]
    )
    assert [d.rule_id for d in delta.added] == ["LIFELINE-UNDEF-TYPE"]
    engine.audit()


def test_added_association_fixes_no_assoc(showcase_model):
    engine = Engine(showcase_model)
    assoc = Association(
        id="AS2", end_a=AssociationEnd("S1"), end_b=AssociationEnd("K1")
    )
    delta = engine.process(
        [
            _event(
                showcase_model,
                1,
                kind=EventKind.ADDED,
                element_kind=ElementKind.ASSOCIATION,
                element_id="AS2",
                payload=association_to_dict(assoc),
            )
        ]
    )
    assert [d.rule_id for d in delta.removed] == ["MSG-NO-ASSOC"]
    engine.audit()


def test_delta_matches_symmetric_difference(order_model):
    engine = Engine(order_model)
    before = {d.identity for d in engine.current()}
    delta = engine.process(
        [
            _event(
                order_model,
                1,
                kind=EventKind.CHANGED,
                element_kind=ElementKind.MESSAGE,
                element_id="M1",
                owner_id="I1",
                property="name",
                old_value="",
                new_value="place",
            )
        ]
    )
    after = {d.identity for d in engine.current()}
    assert {d.identity for d in delta.added} == after - before
    assert {d.identity for d in delta.removed} == before - after


def test_current_stable_across_calls(order_model):
    engine = Engine(order_model)
    assert engine.current() == engine.current()


def test_incremental_work_bounded_by_dependents(order_model):
    engine = Engine(order_model)
    dependents = {pair for key in ("C3-place", "C3") for pair in engine._dep.get(key, ())}
    before = engine.eval_counter
    engine.process(
        [
            _event(
                order_model,
                1,
                kind=EventKind.CHANGED,
                element_kind=ElementKind.OPERATION,
                element_id="C3-place",
                owner_id="C3",
                property="name",
                old_value="place",
                new_value="submit",
            )
        ]
    )
    assert engine.eval_counter - before <= len(dependents)


def test_oracle_equivalence_with_audit_over_edit_stream():
    params = SimParams(seed=77, classes=10, interactions=3, steps=40)
    engine = Engine(generate_model(params))
    state = SimState(Rng(edit_rng_seed(params.seed)))
    for _ in range(params.steps):
        batch, _ = generate_edits(params, state, engine.snapshot)
        engine.process(batch)
        engine.audit()
        assert [_comparable(d) for d in engine.current()] == [
            _comparable(d) for d in full_check(engine.snapshot)
        ]


def test_oracle_equivalence_under_structural_diffs():
    # diff-produced batches cover class/enum/interaction add+remove, which the
    # simulation edit vocabulary deliberately leaves out
    for seed in range(8):
        before = generate_model(SimParams(seed=seed, classes=6, interactions=2))
        engine = Engine(before)
        current_model = before
        seq = 1
        for round_ in range(4):
            after = mutate_model(seed * 31 + round_, current_model, count=3)
            after = dataclasses.replace(after, revision=current_model.revision)
            events = diff(current_model, after, first_seq=seq)
            if events:
                seq = events[-1].seq + 1
                engine.process(events)
                engine.audit()
            current_model = engine.snapshot
            assert [_comparable(d) for d in engine.current()] == [
                _comparable(d) for d in full_check(engine.snapshot)
            ]


def test_patched_index_equals_fresh_build():
    params = SimParams(
        seed=5,
        classes=10,
        interactions=3,
        steps=60,
        edit_mix={"renameOp": 2, "renameMsg": 2, "retargetLifeline": 1, "changeParams": 1},
    )
    engine = Engine(generate_model(params))
    state = SimState(Rng(edit_rng_seed(params.seed)))
    patched_seen = 0
    for _ in range(params.steps):
        previous_idx = engine.snapshot.idx
        batch, _ = generate_edits(params, state, engine.snapshot)
        engine.process(batch)
        idx = engine.snapshot.idx
        fresh = ModelIndex(engine.snapshot)
        assert idx.elements == fresh.elements
        assert idx.id_counts == fresh.id_counts
        assert idx.class_ids_by_name == fresh.class_ids_by_name
        assert idx.assoc_ids_by_pair == fresh.assoc_ids_by_pair
        assert idx.lifeline_ids_by_interaction == fresh.lifeline_ids_by_interaction
        # a patched index shares the (immutable) id-count table with its base
        if idx.id_counts is previous_idx.id_counts:
            patched_seen += 1
    assert patched_seen == params.steps


def test_full_check_evaluation_count_matches_engine(order_model):
    assert full_check_evaluation_count(order_model) == Engine(order_model).eval_counter


def test_empty_batch_is_a_no_op(order_model):
    engine = Engine(order_model)
    delta = engine.process([])
    assert delta.is_empty and engine.revision == 0
