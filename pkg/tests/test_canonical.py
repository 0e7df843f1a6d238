import json

import pytest
from hypothesis import given, settings, strategies as st

from hv.canonical import parse_canonical, parse_path, serialize_canonical
from hv.model import Model
from hv.sim import SimParams, generate_model

EMPTY_GOLDEN = (
    "{\n"
    '  "modelId": "m",\n'
    '  "revision": 0,\n'
    '  "classes": [],\n'
    '  "enumerations": [],\n'
    '  "associations": [],\n'
    '  "interactions": []\n'
    "}\n"
)


def test_empty_model_serialization_golden():
    assert serialize_canonical(Model(model_id="m")) == EMPTY_GOLDEN


def test_parse_minimal_document():
    report = parse_canonical(
        '{"modelId":"m","revision":0,"classes":[],"enumerations":[],'
        '"associations":[],"interactions":[]}'
    )
    assert report.ok and not report.warnings
    assert report.model == Model(model_id="m")


def test_parse_defaults():
    text = """{"modelId":"m","classes":[{"id":"c","name":"C","operations":[
        {"id":"o","name":"go","parameters":[{"name":"p","typeName":"int"}]}]}],
        "enumerations":[],"associations":[],
        "interactions":[{"id":"i","name":"I","lifelines":[],
          "messages":[{"id":"ms","name":"go","sourceLifelineId":"x","targetLifelineId":"y"}]}]}"""
    report = parse_canonical(text)
    assert report.ok
    model = report.model
    assert model.revision == 0
    op = model.classes[0].operations[0]
    assert op.visibility.value == "public"
    assert op.parameters[0].direction.value == "in"
    message = model.interactions[0].messages[0]
    assert message.sort.value == "sync"
    assert message.arguments == ()


def test_round_trip_order_fixture(order_model):
    report = parse_canonical(serialize_canonical(order_model))
    assert report.ok and report.model == order_model


def test_serialize_deterministic(order_model):
    assert serialize_canonical(order_model) == serialize_canonical(order_model)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10_000))
def test_round_trip_generated_models(seed):
    model = generate_model(SimParams(seed=seed, classes=6, interactions=2))
    report = parse_canonical(serialize_canonical(model))
    assert report.ok and report.model == model


def test_unknown_field_fatal_in_strict_mode():
    report = parse_canonical('{"modelId":"m","classes":[],"enumerations":[],'
                             '"associations":[],"interactions":[],"bogus":1}')
    assert not report.ok
    assert report.fatal.path == "/bogus"


def test_unknown_field_warns_in_lenient_mode():
    report = parse_canonical(
        '{"modelId":"m","classes":[],"enumerations":[],'
        '"associations":[],"interactions":[],"bogus":1}',
        lenient=True,
    )
    assert report.ok
    assert [w.path for w in report.warnings] == ["/bogus"]


def test_duplicate_element_id_fatal_in_strict_mode():
    text = """{"modelId":"m","classes":[{"id":"C1","name":"A"},{"id":"C1","name":"B"}],
        "enumerations":[],"associations":[],"interactions":[]}"""
    report = parse_canonical(text)
    assert not report.ok
    assert report.fatal.code == "duplicateId"
    assert report.fatal.path == "/classes/1/id"


def test_duplicate_json_key_fatal():
    report = parse_canonical('{"modelId":"m","modelId":"n"}')
    assert not report.ok and report.fatal.code == "malformed"


def test_malformed_document_fatal():
    report = parse_canonical("{nope")
    assert not report.ok and report.fatal.code == "malformed"


def test_wrong_type_fatal_with_path():
    report = parse_canonical('{"modelId":"m","classes":{},"enumerations":[],'
                             '"associations":[],"interactions":[]}')
    assert not report.ok and report.fatal.path == "/classes"


def test_missing_required_field_fatal_with_path():
    report = parse_canonical('{"modelId":"m","classes":[{"id":"c"}],"enumerations":[],'
                             '"associations":[],"interactions":[]}')
    assert not report.ok and report.fatal.path == "/classes/0"


def test_duplicate_parameter_names_rejected():
    text = """{"modelId":"m","classes":[{"id":"c","name":"C","operations":[
        {"id":"o","name":"go","parameters":[
            {"name":"p","typeName":"int"},{"name":"p","typeName":"bool"}]}]}],
        "enumerations":[],"associations":[],"interactions":[]}"""
    assert not parse_canonical(text).ok
    lenient = parse_canonical(text, lenient=True)
    assert lenient.ok and lenient.warnings


def test_invalid_enum_value_fatal():
    text = """{"modelId":"m","classes":[],"enumerations":[],"associations":[],
        "interactions":[{"id":"i","name":"I","lifelines":[],"messages":[
          {"id":"ms","name":"x","sort":"carrier-pigeon",
           "sourceLifelineId":"a","targetLifelineId":"b"}]}]}"""
    report = parse_canonical(text)
    assert not report.ok
    assert report.fatal.path.endswith("/sort")


def test_parse_path_rejects_unknown_extension(tmp_path):
    target = tmp_path / "model.txt"
    target.write_text("{}")
    with pytest.raises(ValueError):
        parse_path(str(target))


def test_serialized_form_parses_back_with_zero_warnings(showcase_model):
    text = serialize_canonical(showcase_model)
    report = parse_canonical(text)
    assert report.ok and not report.warnings
    assert json.loads(text)["modelId"] == "showcase"
