"""Best-effort reader for Eclipse-UML2-style XMI files.

This is an input-only convenience for models persisted by EMF-based
editors.  It recognises packaged classes, associations, enumerations and
interactions inside a single root model element and maps them onto the
canonical in-memory types.  Anything unrecognised, and any unresolvable
cross-reference, produces a warning carrying the element's document path
and is skipped; only malformed XML is fatal.  There is no XMI writer.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET

from hv.canonical import ParseFatal, ParseIssue, ParseReport
from hv.model import (
    Association,
    AssociationEnd,
    Attribute,
    Class,
    Enumeration,
    Interaction,
    Lifeline,
    Message,
    MessageSort,
    Model,
    Operation,
    Parameter,
    ParameterDirection,
    Visibility,
)

_SORT_MAP = {
    "synchCall": MessageSort.SYNC,
    "asynchCall": MessageSort.ASYNC,
    "asynchSignal": MessageSort.ASYNC,
    "reply": MessageSort.REPLY,
    "createMessage": MessageSort.CREATE,
    "deleteMessage": MessageSort.DELETE,
}


def _local(tag) -> str:
    tag = str(tag)
    return tag.rsplit("}", 1)[-1] if "}" in tag else tag


def _attr(elem: ET.Element, name: str) -> str | None:
    for key, value in elem.attrib.items():
        if _local(key) == name:
            return value
    return None


def _xmi_type(elem: ET.Element) -> str | None:
    value = _attr(elem, "type")
    if value is None:
        return None
    return value.rsplit(":", 1)[-1]


# Intermediate records; classes are built late so attribute/parameter type
# names can resolve against every classifier in the document.
class _RawOp:
    __slots__ = ("id", "name", "visibility", "params", "return_ref")

    def __init__(self, op_id, name, visibility, params, return_ref):
        self.id = op_id
        self.name = name
        self.visibility = visibility
        self.params = params  # (name, type ref or None, direction)
        self.return_ref = return_ref


class _RawClass:
    __slots__ = ("id", "name", "supers", "attrs", "ops")

    def __init__(self, class_id, name):
        self.id = class_id
        self.name = name
        self.supers: list[str] = []
        self.attrs: list[tuple[str, str, str | None, Visibility]] = []
        self.ops: list[_RawOp] = []


class _Reader:
    def __init__(self) -> None:
        self.warnings: list[ParseIssue] = []
        self.names: dict[str, str] = {}  # classifier id -> name
        # property id -> (type id or None, owning class id or None)
        self.properties: dict[str, tuple[str | None, str | None]] = {}
        self.bounds: dict[str, str] = {}  # property id -> multiplicity text
        self.raw_classes: list[_RawClass] = []
        self.enums: list[Enumeration] = []

    def warn(self, path: str, message: str) -> None:
        self.warnings.append(ParseIssue(path, message))

    def element_id(self, elem: ET.Element, path: str) -> str:
        return _attr(elem, "id") or f"gen:{path}"

    def _ref_of(self, elem: ET.Element, name: str) -> str | None:
        value = _attr(elem, name)
        if value is not None:
            return value.split()[0] if value.split() else None
        for child in elem:
            if _local(child.tag) == name:
                return _attr(child, "idref") or _attr(child, "href")
        return None

    def _type_name_of(self, ref: str | None) -> str:
        if ref is None:
            return ""
        return self.names.get(ref, ref)

    def _visibility(self, elem: ET.Element, path: str) -> Visibility:
        raw = _attr(elem, "visibility")
        if raw is None:
            return Visibility.PUBLIC
        try:
            return Visibility(raw)
        except ValueError:
            self.warn(path, f"unknown visibility {raw!r}; defaulting to public")
            return Visibility.PUBLIC

    # --- pass 1: classifiers -------------------------------------------------

    def collect_class(self, elem: ET.Element, path: str) -> None:
        raw = _RawClass(self.element_id(elem, path), _attr(elem, "name") or "")
        counters: dict[str, int] = {}
        for child in elem:
            tag = _local(child.tag)
            counters[tag] = counters.get(tag, 0) + 1
            child_path = f"{path}/{tag}[{counters[tag]}]"
            if tag == "ownedAttribute":
                prop_id = self.element_id(child, child_path)
                type_ref = self._ref_of(child, "type")
                self.properties[prop_id] = (type_ref, raw.id)
                self._remember_bounds(child, prop_id)
                raw.attrs.append(
                    (prop_id, _attr(child, "name") or "", type_ref, self._visibility(child, child_path))
                )
            elif tag == "ownedOperation":
                raw.ops.append(self._collect_operation(child, child_path))
            elif tag == "generalization":
                general = self._ref_of(child, "general")
                if general is None:
                    self.warn(child_path, "generalization without resolvable target skipped")
                else:
                    raw.supers.append(general)
            else:
                self.warn(child_path, f"unrecognized class member <{tag}> skipped")
        self.names[raw.id] = raw.name
        self.raw_classes.append(raw)

    def _collect_operation(self, elem: ET.Element, path: str) -> _RawOp:
        params: list[tuple[str, str | None, str]] = []
        return_ref: str | None = None
        position = 0
        for child in elem:
            if _local(child.tag) != "ownedParameter":
                continue
            position += 1
            direction = _attr(child, "direction") or "in"
            type_ref = self._ref_of(child, "type")
            if direction == "return":
                return_ref = type_ref
                continue
            if direction not in ("in", "inout", "out"):
                self.warn(
                    f"{path}/ownedParameter[{position}]",
                    f"unknown parameter direction {direction!r}; defaulting to in",
                )
                direction = "in"
            params.append((_attr(child, "name") or f"p{position}", type_ref, direction))
        op = _RawOp(
            self.element_id(elem, path),
            _attr(elem, "name") or "",
            self._visibility(elem, path),
            params,
            return_ref,
        )
        self.names[op.id] = op.name
        return op

    def collect_enum(self, elem: ET.Element, path: str) -> None:
        enum_id = self.element_id(elem, path)
        name = _attr(elem, "name") or ""
        literals: list[str] = []
        for i, child in enumerate(elem, start=1):
            if _local(child.tag) == "ownedLiteral":
                literals.append(_attr(child, "name") or f"literal{i}")
        self.names[enum_id] = name
        self.enums.append(Enumeration(id=enum_id, name=name, literals=tuple(literals)))

    def _remember_bounds(self, elem: ET.Element, prop_id: str) -> None:
        lower: str | None = None
        upper: str | None = None
        for child in elem:
            tag = _local(child.tag)
            if tag == "lowerValue":
                lower = _attr(child, "value") or "0"
            elif tag == "upperValue":
                upper = _attr(child, "value") or "*"
        if upper == "-1":
            upper = "*"
        if lower is None and upper is None:
            return
        lower = lower if lower is not None else upper
        upper = upper if upper is not None else lower
        self.bounds[prop_id] = lower if lower == upper else f"{lower}..{upper}"

    # --- pass 2: relationships and behaviour ---------------------------------

    def read_association(self, elem: ET.Element, path: str) -> Association | None:
        assoc_id = self.element_id(elem, path)
        end_ids: list[str] = []
        member = _attr(elem, "memberEnd")
        if member:
            end_ids.extend(member.split())
        position = 0
        for child in elem:
            if _local(child.tag) == "ownedEnd":
                position += 1
                end_id = self.element_id(child, f"{path}/ownedEnd[{position}]")
                self.properties[end_id] = (self._ref_of(child, "type"), None)
                self._remember_bounds(child, end_id)
                if end_id not in end_ids:
                    end_ids.append(end_id)
        ends: list[AssociationEnd] = []
        for end_id in end_ids:
            prop = self.properties.get(end_id)
            if prop is None or prop[0] is None:
                continue
            type_ref, owner = prop
            ends.append(
                AssociationEnd(
                    class_id=type_ref,
                    multiplicity=self.bounds.get(end_id, "1"),
                    navigable=owner is not None,
                )
            )
            if len(ends) == 2:
                break
        if len(ends) < 2:
            self.warn(path, "association with unresolvable ends skipped")
            return None
        return Association(id=assoc_id, name=_attr(elem, "name"), end_a=ends[0], end_b=ends[1])

    def read_interaction(self, elem: ET.Element, path: str) -> Interaction:
        inter_id = self.element_id(elem, path)
        lifeline_elems: list[tuple[ET.Element, str]] = []
        message_elems: list[tuple[ET.Element, str]] = []
        covered_by_fragment: dict[str, str] = {}
        counters: dict[str, int] = {}
        for child in elem:
            tag = _local(child.tag)
            counters[tag] = counters.get(tag, 0) + 1
            child_path = f"{path}/{tag}[{counters[tag]}]"
            if tag == "ownedAttribute":
                prop_id = self.element_id(child, child_path)
                self.properties[prop_id] = (self._ref_of(child, "type"), None)
            elif tag == "lifeline":
                lifeline_elems.append((child, child_path))
            elif tag == "fragment":
                kind = _xmi_type(child)
                if kind == "MessageOccurrenceSpecification":
                    covered = _attr(child, "covered")
                    if covered:
                        covered_by_fragment[self.element_id(child, child_path)] = covered.split()[0]
                else:
                    self.warn(child_path, f"unrecognized fragment type {kind!r} skipped")
            elif tag == "message":
                message_elems.append((child, child_path))
            else:
                self.warn(child_path, f"unrecognized interaction member <{tag}> skipped")

        lifelines: list[Lifeline] = []
        for child, child_path in lifeline_elems:
            lifeline_id = self.element_id(child, child_path)
            represents = self._ref_of(child, "represents")
            type_ref: str | None = None
            if represents is not None:
                prop = self.properties.get(represents)
                if prop is None:
                    self.warn(child_path, f"lifeline represents unknown property {represents!r}")
                else:
                    type_ref = prop[0]
            lifelines.append(
                Lifeline(id=lifeline_id, name=_attr(child, "name") or "", type_ref=type_ref)
            )

        messages: list[Message] = []
        for child, child_path in message_elems:
            send = self._ref_of(child, "sendEvent")
            receive = self._ref_of(child, "receiveEvent")
            source = covered_by_fragment.get(send) if send else None
            target = covered_by_fragment.get(receive) if receive else None
            if source is None or target is None:
                self.warn(child_path, "message with unresolvable end references skipped")
                continue
            raw_sort = _attr(child, "messageSort") or "synchCall"
            sort = _SORT_MAP.get(raw_sort)
            if sort is None:
                self.warn(child_path, f"unknown message sort {raw_sort!r}; defaulting to sync")
                sort = MessageSort.SYNC
            name = _attr(child, "name") or ""
            signature = self._ref_of(child, "signature")
            if signature is not None:
                resolved = self.names.get(signature)
                if resolved is not None:
                    name = resolved
                else:
                    self.warn(
                        child_path,
                        f"message signature {signature!r} does not resolve; keeping name attribute",
                    )
            arguments = []
            for arg in child:
                if _local(arg.tag) == "argument":
                    value = _attr(arg, "value") or _attr(arg, "name")
                    if value is not None:
                        arguments.append(value)
            messages.append(
                Message(
                    id=self.element_id(child, child_path),
                    name=name,
                    sort=sort,
                    source_lifeline_id=source,
                    target_lifeline_id=target,
                    arguments=tuple(arguments),
                )
            )
        return Interaction(
            id=inter_id,
            name=_attr(elem, "name") or "",
            lifelines=tuple(lifelines),
            messages=tuple(messages),
        )

    # --- toplevel -------------------------------------------------------------

    def read(self, root: ET.Element) -> Model:
        model_elem, root_path = self._find_model(root)
        assoc_elems: list[tuple[ET.Element, str]] = []
        inter_elems: list[tuple[ET.Element, str]] = []
        counters: dict[str, int] = {}
        for child in model_elem:
            tag = _local(child.tag)
            counters[tag] = counters.get(tag, 0) + 1
            path = f"{root_path}/{tag}[{counters[tag]}]"
            if tag != "packagedElement":
                self.warn(path, f"unrecognized element <{tag}> skipped")
                continue
            kind = _xmi_type(child)
            if kind == "Class":
                self.collect_class(child, path)
            elif kind == "Enumeration":
                self.collect_enum(child, path)
            elif kind == "Association":
                assoc_elems.append((child, path))
            elif kind == "Interaction":
                inter_elems.append((child, path))
            else:
                self.warn(path, f"unrecognized packaged element type {kind!r} skipped")

        classes = tuple(self._build_class(raw) for raw in self.raw_classes)
        associations = tuple(
            assoc
            for assoc in (self.read_association(e, p) for e, p in assoc_elems)
            if assoc is not None
        )
        interactions = tuple(self.read_interaction(e, p) for e, p in inter_elems)
        return Model(
            model_id=_attr(model_elem, "name") or self.element_id(model_elem, root_path),
            revision=0,
            classes=classes,
            enumerations=tuple(self.enums),
            associations=associations,
            interactions=interactions,
        )

    def _find_model(self, root: ET.Element) -> tuple[ET.Element, str]:
        if _local(root.tag) == "Model":
            return root, "/Model"
        for child in root:
            if _local(child.tag) == "Model":
                return child, f"/{_local(root.tag)}/Model"
        self.warn(
            f"/{_local(root.tag)}",
            f"root element <{root.tag}> is not a recognized model container; "
            "reading its children directly",
        )
        return root, f"/{_local(root.tag)}"

    def _build_class(self, raw: _RawClass) -> Class:
        return Class(
            id=raw.id,
            name=raw.name,
            superclass_ids=tuple(raw.supers),
            attributes=tuple(
                Attribute(
                    id=attr_id,
                    name=name,
                    type_name=self._type_name_of(type_ref),
                    visibility=visibility,
                )
                for attr_id, name, type_ref, visibility in raw.attrs
            ),
            operations=tuple(
                Operation(
                    id=op.id,
                    name=op.name,
                    visibility=op.visibility,
                    parameters=tuple(
                        Parameter(
                            name=pname,
                            type_name=self._type_name_of(pref),
                            direction=ParameterDirection(pdir),
                        )
                        for pname, pref, pdir in op.params
                    ),
                    return_type_name=self._type_name_of(op.return_ref) if op.return_ref else None,
                )
                for op in raw.ops
            ),
        )


def parse_xmi(text: str) -> ParseReport:
    """Parse an XMI document into a :class:`ParseReport`.

    Never fatal on well-formed XML: unrecognised content is skipped with a
    warning naming its document path.
    """
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        return ParseReport(fatal=ParseFatal("", f"malformed XML: {exc}", "malformed"))
    reader = _Reader()
    model = reader.read(root)
    return ParseReport(model=model, warnings=reader.warnings)
