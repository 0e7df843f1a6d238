import dataclasses
import xml.etree.ElementTree as ET

from hv.canonical import parse_path
from hv.engine import full_check
from hv.sim import Rng
from hv.xmi import parse_xmi

from .conftest import FIXTURES


def test_mini_xmi_matches_handwritten_canonical():
    via_xmi = parse_path(str(FIXTURES / "mini.uml"))
    via_canonical = parse_path(str(FIXTURES / "mini.hvm.json"))
    assert via_xmi.ok and not via_xmi.warnings
    assert via_xmi.model == via_canonical.model


def test_showcase_xmi_structure(showcase_model):
    report = parse_path(str(FIXTURES / "showcase.uml"))
    assert report.ok and not report.warnings
    model = report.model
    assert model.classes == showcase_model.classes
    assert model.associations == showcase_model.associations
    # The reader types lifelines only through their represented property, so
    # the deliberately ambiguous LD lifeline comes back untyped.
    patched = tuple(
        dataclasses.replace(l, type_name="Dup") if l.id == "LD" else l
        for l in model.interactions[0].lifelines
    )
    fixed = dataclasses.replace(model.interactions[0], lifelines=patched)
    assert (fixed,) == showcase_model.interactions


def test_showcase_xmi_still_yields_six_diagnostics():
    model = parse_path(str(FIXTURES / "showcase.uml")).model
    diags = full_check(model)
    assert len(diags) == 6
    assert sorted({d.rule_id for d in diags}) == [
        "LIFELINE-UNDEF-TYPE",
        "MSG-NO-ASSOC",
        "MSG-PARAM-MISMATCH",
        "MSG-PRIVATE-OP",
        "MSG-UNDEF-OP",
        "MSG-UNNAMED",
    ]


def test_unknown_packaged_element_is_skipped_with_warning():
    text = """<?xml version="1.0"?>
    <uml:Model xmlns:uml="http://www.eclipse.org/uml2/5.0.0/UML"
               xmlns:xmi="http://www.omg.org/spec/XMI/20131001" name="m">
      <packagedElement xmi:type="uml:Class" xmi:id="c1" name="Order"/>
      <packagedElement xmi:type="uml:StateMachine" xmi:id="sm" name="Lifecycle"/>
    </uml:Model>"""
    report = parse_xmi(text)
    assert report.ok
    assert len(report.model.classes) == 1
    assert any("StateMachine" in w.message for w in report.warnings)
    assert all(w.path.startswith("/Model/") for w in report.warnings)


def test_message_with_missing_ends_is_skipped():
    text = """<?xml version="1.0"?>
    <uml:Model xmlns:uml="http://www.eclipse.org/uml2/5.0.0/UML"
               xmlns:xmi="http://www.omg.org/spec/XMI/20131001" name="m">
      <packagedElement xmi:type="uml:Interaction" xmi:id="i1" name="I">
        <lifeline xmi:id="l1" name="a"/>
        <message xmi:id="ms1" name="lost" messageSort="synchCall"/>
      </packagedElement>
    </uml:Model>"""
    report = parse_xmi(text)
    assert report.ok
    assert report.model.interactions[0].messages == ()
    assert any("unresolvable end references" in w.message for w in report.warnings)


def test_elements_without_ids_get_synthesized_ones():
    text = """<?xml version="1.0"?>
    <uml:Model xmlns:uml="http://www.eclipse.org/uml2/5.0.0/UML"
               xmlns:xmi="http://www.omg.org/spec/XMI/20131001" name="m">
      <packagedElement xmi:type="uml:Class" name="Anon"/>
    </uml:Model>"""
    report = parse_xmi(text)
    assert report.ok
    assert report.model.classes[0].id == "gen:/Model/packagedElement[1]"


def test_malformed_xml_is_fatal():
    report = parse_xmi("<uml:Model")
    assert not report.ok and report.fatal.code == "malformed"


def test_unrecognized_root_records_namespace_warning():
    report = parse_xmi('<weird xmlns="urn:something"><child/></weird>')
    assert report.ok
    assert any("urn:something" in w.message for w in report.warnings)


def _prune(rng: Rng, root: ET.Element) -> None:
    nodes = list(root.iter())
    for _ in range(1 + rng.below(4)):
        node = nodes[rng.below(len(nodes))]
        if rng.chance(500) and node.attrib:
            keys = sorted(node.attrib)
            del node.attrib[keys[rng.below(len(keys))]]
        else:
            children = list(node)
            if children:
                node.remove(children[rng.below(len(children))])


def test_pruned_documents_never_fatal():
    source = (FIXTURES / "showcase.uml").read_text()
    for seed in range(60):
        rng = Rng(seed)
        root = ET.fromstring(source)
        _prune(rng, root)
        report = parse_xmi(ET.tostring(root, encoding="unicode"))
        assert report.ok, (seed, report.fatal)
