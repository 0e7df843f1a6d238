"""Canonical text format: the normative interchange for models.

The format is JSON with a fixed schema.  Parsing is strict by default:
unknown fields, duplicate JSON keys and duplicate element ids are fatal.
With ``lenient=True`` unknown fields and duplicate ids degrade to warnings
(duplicate ids then surface through ``validate_wellformed`` instead).

Serialization is deterministic byte-for-byte: fixed key order, top-level
element lists in id order (already guaranteed by ``Model``), two-space
indentation and a trailing newline.  ``parse_canonical`` inverts
``serialize_canonical`` exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from hv.model import (
    Association,
    AssociationEnd,
    Attribute,
    Class,
    ElementKind,
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

CANONICAL_EXTENSION = ".hvm.json"
XMI_EXTENSION = ".uml"


@dataclass(frozen=True, slots=True)
class ParseIssue:
    path: str
    message: str


@dataclass(frozen=True, slots=True)
class ParseFatal:
    path: str
    message: str
    code: str = "schema"  # schema | malformed | duplicateId


@dataclass(slots=True)
class ParseReport:
    model: Model | None = None
    warnings: list[ParseIssue] = field(default_factory=list)
    fatal: ParseFatal | None = None

    @property
    def ok(self) -> bool:
        return self.fatal is None


class _Fatal(Exception):
    def __init__(self, path: str, message: str, code: str = "schema"):
        super().__init__(f"{path}: {message}")
        self.fatal = ParseFatal(path, message, code)


class _Ctx:
    __slots__ = ("lenient", "warnings", "seen_ids")

    def __init__(self, lenient: bool):
        self.lenient = lenient
        self.warnings: list[ParseIssue] = []
        self.seen_ids: set[str] = set()

    def warn(self, path: str, message: str) -> None:
        self.warnings.append(ParseIssue(path, message))

    def reject_or_warn(self, path: str, message: str, code: str = "schema") -> None:
        if self.lenient:
            self.warn(path, message)
        else:
            raise _Fatal(path, message, code)


def _no_duplicate_keys(pairs):
    seen = set()
    out = {}
    for key, value in pairs:
        if key in seen:
            raise ValueError(f"duplicate key {key!r}")
        seen.add(key)
        out[key] = value
    return out


def _obj(value, path: str, ctx: _Ctx, required: tuple[str, ...], optional: tuple[str, ...]) -> dict:
    if not isinstance(value, dict):
        raise _Fatal(path, f"expected object, got {type(value).__name__}")
    for key in value:
        if key not in required and key not in optional:
            ctx.reject_or_warn(f"{path}/{key}", f"unknown field {key!r}")
    for key in required:
        if key not in value:
            raise _Fatal(path, f"missing required field {key!r}")
    return value


def _str(value, path: str, allow_empty: bool = True) -> str:
    if not isinstance(value, str):
        raise _Fatal(path, f"expected string, got {type(value).__name__}")
    if not allow_empty and not value:
        raise _Fatal(path, "must be a non-empty string")
    return value


def _bool(value, path: str) -> bool:
    if not isinstance(value, bool):
        raise _Fatal(path, f"expected boolean, got {type(value).__name__}")
    return value


def _int(value, path: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise _Fatal(path, f"expected integer, got {type(value).__name__}")
    if minimum is not None and value < minimum:
        raise _Fatal(path, f"must be >= {minimum}")
    return value


def _list(value, path: str) -> list:
    if not isinstance(value, list):
        raise _Fatal(path, f"expected array, got {type(value).__name__}")
    return value


def _str_list(value, path: str) -> tuple[str, ...]:
    return tuple(_str(v, f"{path}/{i}") for i, v in enumerate(_list(value, path)))


def _enum(enum_type, value, path: str):
    text = _str(value, path)
    try:
        return enum_type(text)
    except ValueError:
        allowed = ", ".join(member.value for member in enum_type)
        raise _Fatal(path, f"invalid value {text!r}; expected one of: {allowed}") from None


def _element_id(data: dict, path: str, ctx: _Ctx) -> str:
    element_id = _str(data["id"], f"{path}/id", allow_empty=False)
    if element_id in ctx.seen_ids:
        ctx.reject_or_warn(f"{path}/id", f"duplicate element id {element_id!r}", "duplicateId")
    ctx.seen_ids.add(element_id)
    return element_id


def _parameter(data, path: str, ctx: _Ctx) -> Parameter:
    data = _obj(data, path, ctx, ("name", "typeName"), ("direction",))
    return Parameter(
        name=_str(data["name"], f"{path}/name"),
        type_name=_str(data["typeName"], f"{path}/typeName"),
        direction=_enum(ParameterDirection, data.get("direction", "in"), f"{path}/direction"),
    )


def _operation(data, path: str, ctx: _Ctx) -> Operation:
    data = _obj(data, path, ctx, ("id", "name"), ("visibility", "parameters", "returnTypeName"))
    params = tuple(
        _parameter(p, f"{path}/parameters/{i}", ctx)
        for i, p in enumerate(_list(data.get("parameters", []), f"{path}/parameters"))
    )
    names = [p.name for p in params]
    if len(set(names)) != len(names):
        ctx.reject_or_warn(f"{path}/parameters", "parameter names must be unique")
    return Operation(
        id=_element_id(data, path, ctx),
        name=_str(data["name"], f"{path}/name"),
        visibility=_enum(Visibility, data.get("visibility", "public"), f"{path}/visibility"),
        parameters=params,
        return_type_name=(
            _str(data["returnTypeName"], f"{path}/returnTypeName")
            if "returnTypeName" in data
            else None
        ),
    )


def _attribute(data, path: str, ctx: _Ctx) -> Attribute:
    data = _obj(data, path, ctx, ("id", "name", "typeName"), ("visibility",))
    return Attribute(
        id=_element_id(data, path, ctx),
        name=_str(data["name"], f"{path}/name"),
        type_name=_str(data["typeName"], f"{path}/typeName"),
        visibility=_enum(Visibility, data.get("visibility", "public"), f"{path}/visibility"),
    )


def _class(data, path: str, ctx: _Ctx) -> Class:
    data = _obj(
        data,
        path,
        ctx,
        ("id", "name"),
        ("isAbstract", "superclassIds", "attributes", "operations"),
    )
    return Class(
        id=_element_id(data, path, ctx),
        name=_str(data["name"], f"{path}/name"),
        is_abstract=_bool(data.get("isAbstract", False), f"{path}/isAbstract"),
        superclass_ids=_str_list(data.get("superclassIds", []), f"{path}/superclassIds"),
        attributes=tuple(
            _attribute(a, f"{path}/attributes/{i}", ctx)
            for i, a in enumerate(_list(data.get("attributes", []), f"{path}/attributes"))
        ),
        operations=tuple(
            _operation(o, f"{path}/operations/{i}", ctx)
            for i, o in enumerate(_list(data.get("operations", []), f"{path}/operations"))
        ),
    )


def _enumeration(data, path: str, ctx: _Ctx) -> Enumeration:
    data = _obj(data, path, ctx, ("id", "name", "literals"), ())
    literals = _str_list(data["literals"], f"{path}/literals")
    if len(set(literals)) != len(literals):
        ctx.reject_or_warn(f"{path}/literals", "literals must be unique")
    return Enumeration(
        id=_element_id(data, path, ctx),
        name=_str(data["name"], f"{path}/name"),
        literals=literals,
    )


def _association_end(data, path: str, ctx: _Ctx) -> AssociationEnd:
    data = _obj(data, path, ctx, ("classId",), ("multiplicity", "navigable"))
    return AssociationEnd(
        class_id=_str(data["classId"], f"{path}/classId", allow_empty=False),
        multiplicity=_str(data.get("multiplicity", "1"), f"{path}/multiplicity"),
        navigable=_bool(data.get("navigable", True), f"{path}/navigable"),
    )


def _association(data, path: str, ctx: _Ctx) -> Association:
    data = _obj(data, path, ctx, ("id", "endA", "endB"), ("name",))
    return Association(
        id=_element_id(data, path, ctx),
        name=_str(data["name"], f"{path}/name") if "name" in data else None,
        end_a=_association_end(data["endA"], f"{path}/endA", ctx),
        end_b=_association_end(data["endB"], f"{path}/endB", ctx),
    )


def _lifeline(data, path: str, ctx: _Ctx) -> Lifeline:
    data = _obj(data, path, ctx, ("id", "name"), ("typeRef", "typeName"))
    return Lifeline(
        id=_element_id(data, path, ctx),
        name=_str(data["name"], f"{path}/name"),
        type_ref=_str(data["typeRef"], f"{path}/typeRef") if "typeRef" in data else None,
        type_name=_str(data["typeName"], f"{path}/typeName") if "typeName" in data else None,
    )


def _message(data, path: str, ctx: _Ctx) -> Message:
    data = _obj(
        data,
        path,
        ctx,
        ("id", "name", "sourceLifelineId", "targetLifelineId"),
        ("sort", "arguments"),
    )
    return Message(
        id=_element_id(data, path, ctx),
        name=_str(data["name"], f"{path}/name"),
        sort=_enum(MessageSort, data.get("sort", "sync"), f"{path}/sort"),
        source_lifeline_id=_str(data["sourceLifelineId"], f"{path}/sourceLifelineId", allow_empty=False),
        target_lifeline_id=_str(data["targetLifelineId"], f"{path}/targetLifelineId", allow_empty=False),
        arguments=_str_list(data.get("arguments", []), f"{path}/arguments"),
    )


def _interaction(data, path: str, ctx: _Ctx) -> Interaction:
    data = _obj(data, path, ctx, ("id", "name", "lifelines", "messages"), ())
    return Interaction(
        id=_element_id(data, path, ctx),
        name=_str(data["name"], f"{path}/name"),
        lifelines=tuple(
            _lifeline(l, f"{path}/lifelines/{i}", ctx)
            for i, l in enumerate(_list(data["lifelines"], f"{path}/lifelines"))
        ),
        messages=tuple(
            _message(m, f"{path}/messages/{i}", ctx)
            for i, m in enumerate(_list(data["messages"], f"{path}/messages"))
        ),
    )


def model_from_dict(data, ctx: _Ctx) -> Model:
    data = _obj(
        data,
        "",
        ctx,
        ("modelId", "classes", "enumerations", "associations", "interactions"),
        ("revision",),
    )
    return Model(
        model_id=_str(data["modelId"], "/modelId", allow_empty=False),
        revision=_int(data.get("revision", 0), "/revision", minimum=0),
        classes=tuple(
            _class(c, f"/classes/{i}", ctx)
            for i, c in enumerate(_list(data["classes"], "/classes"))
        ),
        enumerations=tuple(
            _enumeration(e, f"/enumerations/{i}", ctx)
            for i, e in enumerate(_list(data["enumerations"], "/enumerations"))
        ),
        associations=tuple(
            _association(a, f"/associations/{i}", ctx)
            for i, a in enumerate(_list(data["associations"], "/associations"))
        ),
        interactions=tuple(
            _interaction(x, f"/interactions/{i}", ctx)
            for i, x in enumerate(_list(data["interactions"], "/interactions"))
        ),
    )


def parse_canonical(text: str, *, lenient: bool = False) -> ParseReport:
    """Parse a canonical document into a :class:`ParseReport`."""
    ctx = _Ctx(lenient)
    try:
        data = json.loads(text, object_pairs_hook=_no_duplicate_keys)
    except ValueError as exc:
        return ParseReport(fatal=ParseFatal("", f"malformed document: {exc}", "malformed"))
    try:
        model = model_from_dict(data, ctx)
    except _Fatal as exc:
        return ParseReport(warnings=ctx.warnings, fatal=exc.fatal)
    return ParseReport(model=model, warnings=ctx.warnings)


# --- serialization -----------------------------------------------------------


def parameter_to_dict(param: Parameter) -> dict:
    return {
        "name": param.name,
        "typeName": param.type_name,
        "direction": param.direction.value,
    }


def operation_to_dict(op: Operation) -> dict:
    out = {
        "id": op.id,
        "name": op.name,
        "visibility": op.visibility.value,
        "parameters": [parameter_to_dict(p) for p in op.parameters],
    }
    if op.return_type_name is not None:
        out["returnTypeName"] = op.return_type_name
    return out


def attribute_to_dict(attr: Attribute) -> dict:
    return {
        "id": attr.id,
        "name": attr.name,
        "typeName": attr.type_name,
        "visibility": attr.visibility.value,
    }


def class_to_dict(cls: Class, include_children: bool = True) -> dict:
    return {
        "id": cls.id,
        "name": cls.name,
        "isAbstract": cls.is_abstract,
        "superclassIds": list(cls.superclass_ids),
        "attributes": [attribute_to_dict(a) for a in cls.attributes] if include_children else [],
        "operations": [operation_to_dict(o) for o in cls.operations] if include_children else [],
    }


def enumeration_to_dict(enum: Enumeration) -> dict:
    return {"id": enum.id, "name": enum.name, "literals": list(enum.literals)}


def association_end_to_dict(end: AssociationEnd) -> dict:
    return {
        "classId": end.class_id,
        "multiplicity": end.multiplicity,
        "navigable": end.navigable,
    }


def association_to_dict(assoc: Association) -> dict:
    out: dict = {"id": assoc.id}
    if assoc.name is not None:
        out["name"] = assoc.name
    out["endA"] = association_end_to_dict(assoc.end_a)
    out["endB"] = association_end_to_dict(assoc.end_b)
    return out


def lifeline_to_dict(lifeline: Lifeline) -> dict:
    out = {"id": lifeline.id, "name": lifeline.name}
    if lifeline.type_ref is not None:
        out["typeRef"] = lifeline.type_ref
    if lifeline.type_name is not None:
        out["typeName"] = lifeline.type_name
    return out


def message_to_dict(message: Message) -> dict:
    return {
        "id": message.id,
        "name": message.name,
        "sort": message.sort.value,
        "sourceLifelineId": message.source_lifeline_id,
        "targetLifelineId": message.target_lifeline_id,
        "arguments": list(message.arguments),
    }


def interaction_to_dict(inter: Interaction, include_children: bool = True) -> dict:
    return {
        "id": inter.id,
        "name": inter.name,
        "lifelines": [lifeline_to_dict(l) for l in inter.lifelines] if include_children else [],
        "messages": [message_to_dict(m) for m in inter.messages] if include_children else [],
    }


def model_to_dict(model: Model) -> dict:
    return {
        "modelId": model.model_id,
        "revision": model.revision,
        "classes": [class_to_dict(c) for c in model.classes],
        "enumerations": [enumeration_to_dict(e) for e in model.enumerations],
        "associations": [association_to_dict(a) for a in model.associations],
        "interactions": [interaction_to_dict(x) for x in model.interactions],
    }


def serialize_canonical(model: Model) -> str:
    return json.dumps(model_to_dict(model), indent=2, ensure_ascii=False) + "\n"


_ELEMENT_TO_DICT = {
    ElementKind.CLASS: class_to_dict,
    ElementKind.OPERATION: operation_to_dict,
    ElementKind.ATTRIBUTE: attribute_to_dict,
    ElementKind.ENUMERATION: enumeration_to_dict,
    ElementKind.ASSOCIATION: association_to_dict,
    ElementKind.INTERACTION: interaction_to_dict,
    ElementKind.LIFELINE: lifeline_to_dict,
    ElementKind.MESSAGE: message_to_dict,
}

_ELEMENT_FROM_DICT = {
    ElementKind.CLASS: _class,
    ElementKind.OPERATION: _operation,
    ElementKind.ATTRIBUTE: _attribute,
    ElementKind.ENUMERATION: _enumeration,
    ElementKind.ASSOCIATION: _association,
    ElementKind.INTERACTION: _interaction,
    ElementKind.LIFELINE: _lifeline,
    ElementKind.MESSAGE: _message,
}


def element_to_dict(kind: ElementKind, element, include_children: bool = True) -> dict:
    builder = _ELEMENT_TO_DICT[kind]
    if kind in (ElementKind.CLASS, ElementKind.INTERACTION):
        return builder(element, include_children)
    return builder(element)


def element_from_dict(kind: ElementKind, data):
    """Parse one element payload (strict).  Raises ``ValueError`` on errors."""
    builder = _ELEMENT_FROM_DICT.get(kind)
    if builder is None:
        raise ValueError(f"element kind {kind.value!r} has no payload form")
    try:
        return builder(data, "", _Ctx(lenient=False))
    except _Fatal as exc:
        raise ValueError(f"invalid {kind.value} payload at {exc.fatal.path!r}: {exc.fatal.message}") from None


def parameter_from_dict(data) -> Parameter:
    try:
        return _parameter(data, "", _Ctx(lenient=False))
    except _Fatal as exc:
        raise ValueError(f"invalid parameter: {exc.fatal.message}") from None


def association_end_from_dict(data) -> AssociationEnd:
    try:
        return _association_end(data, "", _Ctx(lenient=False))
    except _Fatal as exc:
        raise ValueError(f"invalid association end: {exc.fatal.message}") from None


def parse_path(path: str, *, lenient: bool = False) -> ParseReport:
    """Parse a model file, selecting the reader from the file extension."""
    from hv import xmi  # local import: xmi pulls in xml.etree

    name = str(path)
    if name.endswith(CANONICAL_EXTENSION) or name.endswith(".json"):
        reader = lambda text: parse_canonical(text, lenient=lenient)
    elif name.endswith(XMI_EXTENSION) or name.endswith(".xmi"):
        reader = xmi.parse_xmi
    else:
        raise ValueError(
            f"cannot infer format of {name!r}: expected {CANONICAL_EXTENSION} or {XMI_EXTENSION}"
        )
    with open(path, "r", encoding="utf-8") as handle:
        return reader(handle.read())
