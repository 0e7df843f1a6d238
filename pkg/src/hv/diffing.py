"""Structural diff between model snapshots, and event application.

``diff`` turns two snapshots of the same model into an ordered list of
:class:`ChangeEvent`; ``apply`` replays events onto a snapshot, producing a
new snapshot.  Folding ``apply`` over ``diff(before, after)`` starting at
``before`` reproduces ``after`` exactly (up to the revision counter, which
only the engine advances).

Event identity is by element id.  Containment is flattened: adding a class
with operations yields one event for the class shell followed by one per
operation, parents first; removals are emitted children first.  Scalar
properties diff one event per property; an operation's parameter list, an
enumeration's literal list, association ends and the declaration order of
child lists are whole-value properties.  Moves and re-parenting become
remove + add.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from hv import canonical
from hv.errors import ModelIdMismatchError, StaleEventError
from hv.model import (
    Association,
    Class,
    ElementKind,
    Enumeration,
    Interaction,
    Lifeline,
    Message,
    MessageSort,
    Model,
    Operation,
    ParameterDirection,
    Visibility,
    _StrEnum,
)


class EventKind(_StrEnum):
    ADDED = "ElementAdded"
    REMOVED = "ElementRemoved"
    CHANGED = "PropertyChanged"


@dataclass(frozen=True, slots=True)
class ChangeEvent:
    seq: int
    model_id: str
    revision: int
    kind: EventKind
    element_kind: ElementKind
    element_id: str
    owner_id: str | None = None  # containing element, for child kinds
    property: str | None = None  # PropertyChanged only
    old_value: object = None
    new_value: object = None
    payload: dict | None = None  # ElementAdded only

    def to_dict(self) -> dict:
        out: dict = {
            "seq": self.seq,
            "modelId": self.model_id,
            "revision": self.revision,
            "kind": self.kind.value,
            "elementKind": self.element_kind.value,
            "elementId": self.element_id,
        }
        if self.owner_id is not None:
            out["ownerId"] = self.owner_id
        if self.kind is EventKind.CHANGED:
            out["property"] = self.property
            out["oldValue"] = self.old_value
            out["newValue"] = self.new_value
        if self.kind is EventKind.ADDED:
            out["payload"] = self.payload
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ChangeEvent":
        if not isinstance(data, dict):
            raise ValueError(f"event must be an object, got {type(data).__name__}")
        try:
            kind = EventKind(data["kind"])
            element_kind = ElementKind(data["elementKind"])
            seq = data["seq"]
            model_id = data["modelId"]
            revision = data["revision"]
            element_id = data["elementId"]
        except KeyError as exc:
            raise ValueError(f"event missing required field {exc.args[0]!r}") from None
        except ValueError as exc:
            raise ValueError(f"invalid event: {exc}") from None
        if not isinstance(seq, int) or isinstance(seq, bool) or seq < 1:
            raise ValueError("event seq must be a positive integer")
        if not isinstance(revision, int) or isinstance(revision, bool):
            raise ValueError("event revision must be an integer")
        if not isinstance(model_id, str) or not isinstance(element_id, str) or not element_id:
            raise ValueError("event modelId/elementId must be strings")
        prop = data.get("property")
        # Back-compat for streams that mark parameter-list changes with their
        # own element kind; normalise to the operation property form.
        if element_kind is ElementKind.PARAMETER_LIST:
            element_kind = ElementKind.OPERATION
            prop = prop or "parameterList"
        if kind is EventKind.CHANGED:
            if not prop:
                raise ValueError("PropertyChanged event requires a property")
            if "oldValue" not in data or "newValue" not in data:
                raise ValueError("PropertyChanged event requires oldValue and newValue")
        if kind is EventKind.ADDED and not isinstance(data.get("payload"), dict):
            raise ValueError("ElementAdded event requires an object payload")
        return cls(
            seq=seq,
            model_id=model_id,
            revision=revision,
            kind=kind,
            element_kind=element_kind,
            element_id=element_id,
            owner_id=data.get("ownerId"),
            property=prop if kind is EventKind.CHANGED else None,
            old_value=data.get("oldValue"),
            new_value=data.get("newValue"),
            payload=data.get("payload") if kind is EventKind.ADDED else None,
        )


def serialize_events(events) -> str:
    """Newline-delimited canonical event records, one per line."""
    return "".join(
        json.dumps(event.to_dict(), separators=(",", ":"), ensure_ascii=False) + "\n"
        for event in events
    )


def parse_events(text: str) -> list[ChangeEvent]:
    events = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            events.append(ChangeEvent.from_dict(json.loads(line)))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return events


# --- property tables ----------------------------------------------------------


def _params_value(op: Operation) -> list:
    return [canonical.parameter_to_dict(p) for p in op.parameters]


def _end_value(end) -> dict:
    return canonical.association_end_to_dict(end)


# kind -> property name -> getter producing the canonical JSON value
_PROPS: dict[ElementKind, dict[str, callable]] = {
    ElementKind.CLASS: {
        "name": lambda c: c.name,
        "isAbstract": lambda c: c.is_abstract,
        "superclassIds": lambda c: list(c.superclass_ids),
    },
    ElementKind.OPERATION: {
        "name": lambda o: o.name,
        "visibility": lambda o: o.visibility.value,
        "returnTypeName": lambda o: o.return_type_name,
        "parameterList": _params_value,
    },
    ElementKind.ATTRIBUTE: {
        "name": lambda a: a.name,
        "typeName": lambda a: a.type_name,
        "visibility": lambda a: a.visibility.value,
    },
    ElementKind.ENUMERATION: {
        "name": lambda e: e.name,
        "literals": lambda e: list(e.literals),
    },
    ElementKind.ASSOCIATION: {
        "name": lambda a: a.name,
        "endA": lambda a: _end_value(a.end_a),
        "endB": lambda a: _end_value(a.end_b),
    },
    ElementKind.INTERACTION: {
        "name": lambda i: i.name,
    },
    ElementKind.LIFELINE: {
        "name": lambda l: l.name,
        "typeRef": lambda l: l.type_ref,
        "typeName": lambda l: l.type_name,
    },
    ElementKind.MESSAGE: {
        "name": lambda m: m.name,
        "sort": lambda m: m.sort.value,
        "sourceLifelineId": lambda m: m.source_lifeline_id,
        "targetLifelineId": lambda m: m.target_lifeline_id,
        "arguments": lambda m: list(m.arguments),
    },
}


def _set_property(element, kind: ElementKind, prop: str, value):
    """Return a copy of ``element`` with ``prop`` set from a JSON value."""
    import dataclasses

    try:
        if kind is ElementKind.CLASS:
            if prop == "name":
                return dataclasses.replace(element, name=_expect_str(value))
            if prop == "isAbstract":
                return dataclasses.replace(element, is_abstract=_expect_bool(value))
            if prop == "superclassIds":
                return dataclasses.replace(element, superclass_ids=_expect_str_tuple(value))
        elif kind is ElementKind.OPERATION:
            if prop == "name":
                return dataclasses.replace(element, name=_expect_str(value))
            if prop == "visibility":
                return dataclasses.replace(element, visibility=Visibility(_expect_str(value)))
            if prop == "returnTypeName":
                return dataclasses.replace(
                    element, return_type_name=None if value is None else _expect_str(value)
                )
            if prop == "parameterList":
                return dataclasses.replace(
                    element,
                    parameters=tuple(canonical.parameter_from_dict(p) for p in _expect_list(value)),
                )
        elif kind is ElementKind.ATTRIBUTE:
            if prop == "name":
                return dataclasses.replace(element, name=_expect_str(value))
            if prop == "typeName":
                return dataclasses.replace(element, type_name=_expect_str(value))
            if prop == "visibility":
                return dataclasses.replace(element, visibility=Visibility(_expect_str(value)))
        elif kind is ElementKind.ENUMERATION:
            if prop == "name":
                return dataclasses.replace(element, name=_expect_str(value))
            if prop == "literals":
                return dataclasses.replace(element, literals=_expect_str_tuple(value))
        elif kind is ElementKind.ASSOCIATION:
            if prop == "name":
                return dataclasses.replace(element, name=None if value is None else _expect_str(value))
            if prop == "endA":
                return dataclasses.replace(element, end_a=canonical.association_end_from_dict(value))
            if prop == "endB":
                return dataclasses.replace(element, end_b=canonical.association_end_from_dict(value))
        elif kind is ElementKind.INTERACTION:
            if prop == "name":
                return dataclasses.replace(element, name=_expect_str(value))
        elif kind is ElementKind.LIFELINE:
            if prop == "name":
                return dataclasses.replace(element, name=_expect_str(value))
            if prop == "typeRef":
                return dataclasses.replace(element, type_ref=None if value is None else _expect_str(value))
            if prop == "typeName":
                return dataclasses.replace(element, type_name=None if value is None else _expect_str(value))
        elif kind is ElementKind.MESSAGE:
            if prop == "name":
                return dataclasses.replace(element, name=_expect_str(value))
            if prop == "sort":
                return dataclasses.replace(element, sort=MessageSort(_expect_str(value)))
            if prop == "sourceLifelineId":
                return dataclasses.replace(element, source_lifeline_id=_expect_str(value))
            if prop == "targetLifelineId":
                return dataclasses.replace(element, target_lifeline_id=_expect_str(value))
            if prop == "arguments":
                return dataclasses.replace(element, arguments=_expect_str_tuple(value))
    except (ValueError, TypeError) as exc:
        raise ValueError(f"bad value for {kind.value}.{prop}: {exc}") from None
    raise ValueError(f"unknown property {prop!r} for element kind {kind.value!r}")


def _expect_str(value) -> str:
    if not isinstance(value, str):
        raise ValueError(f"expected string, got {type(value).__name__}")
    return value


def _expect_bool(value) -> bool:
    if not isinstance(value, bool):
        raise ValueError(f"expected boolean, got {type(value).__name__}")
    return value


def _expect_list(value) -> list:
    if not isinstance(value, list):
        raise ValueError(f"expected array, got {type(value).__name__}")
    return value


def _expect_str_tuple(value) -> tuple[str, ...]:
    return tuple(_expect_str(v) for v in _expect_list(value))


# Child list slots per container: (child kind, attribute, order property).
_CHILD_SLOTS: dict[ElementKind, tuple[tuple[ElementKind, str, str], ...]] = {
    ElementKind.CLASS: (
        (ElementKind.ATTRIBUTE, "attributes", "attributeOrder"),
        (ElementKind.OPERATION, "operations", "operationOrder"),
    ),
    ElementKind.INTERACTION: (
        (ElementKind.LIFELINE, "lifelines", "lifelineOrder"),
        (ElementKind.MESSAGE, "messages", "messageOrder"),
    ),
}

_ORDER_PROPS = {
    slot_prop: (container_kind, attr)
    for container_kind, slots in _CHILD_SLOTS.items()
    for _, attr, slot_prop in slots
}

_TOP_COLLECTIONS: tuple[tuple[ElementKind, str], ...] = (
    (ElementKind.CLASS, "classes"),
    (ElementKind.ENUMERATION, "enumerations"),
    (ElementKind.ASSOCIATION, "associations"),
    (ElementKind.INTERACTION, "interactions"),
)

_TOP_ATTR = dict(_TOP_COLLECTIONS)

_CHILD_CONTAINER_ATTR = {
    ElementKind.OPERATION: ("classes", "operations"),
    ElementKind.ATTRIBUTE: ("classes", "attributes"),
    ElementKind.LIFELINE: ("interactions", "lifelines"),
    ElementKind.MESSAGE: ("interactions", "messages"),
}


# --- diff ---------------------------------------------------------------------


def diff(before: Model, after: Model, *, first_seq: int = 1) -> list[ChangeEvent]:
    """Minimal ordered event list turning ``before`` into ``after``.

    Emission order: removals (children before containers), additions
    (containers before children), then property changes; each tier is
    sorted by element id (property changes by id then property name).
    """
    if before.model_id != after.model_id:
        raise ModelIdMismatchError(
            f"cannot diff models {before.model_id!r} and {after.model_id!r}"
        )

    removed_children: list[tuple] = []
    removed_top: list[tuple] = []
    added_top: list[tuple] = []
    added_children: list[tuple] = []
    props: list[tuple] = []

    def emit_prop(kind: ElementKind, element_id: str, owner: str | None, prop, old, new):
        props.append((element_id, prop, kind, owner, old, new))

    # Top-level membership.
    for kind, attr in _TOP_COLLECTIONS:
        b_map = {e.id: e for e in getattr(before, attr)}
        a_map = {e.id: e for e in getattr(after, attr)}
        for element_id in b_map.keys() - a_map.keys():
            removed_top.append((element_id, kind))
        for element_id in a_map.keys() - b_map.keys():
            payload = canonical.element_to_dict(kind, a_map[element_id], include_children=False)
            added_top.append((element_id, kind, payload))
        for element_id in b_map.keys() & a_map.keys():
            b_elem, a_elem = b_map[element_id], a_map[element_id]
            for prop, getter in _PROPS[kind].items():
                old, new = getter(b_elem), getter(a_elem)
                if old != new:
                    emit_prop(kind, element_id, None, prop, old, new)

    # Children, per container slot.  Membership is global per child kind so
    # that re-parenting becomes remove + add.
    for container_kind, slots in _CHILD_SLOTS.items():
        collection_attr = "classes" if container_kind is ElementKind.CLASS else "interactions"
        b_parents = {e.id: e for e in getattr(before, collection_attr)}
        a_parents = {e.id: e for e in getattr(after, collection_attr)}
        for child_kind, attr, order_prop in slots:
            b_children = {
                child.id: (child, parent.id)
                for parent in b_parents.values()
                for child in getattr(parent, attr)
            }
            a_children = {
                child.id: (child, parent.id)
                for parent in a_parents.values()
                for child in getattr(parent, attr)
            }
            for child_id, (child, owner) in b_children.items():
                survives = child_id in a_children and a_children[child_id][1] == owner
                if not survives:
                    removed_children.append((child_id, child_kind, owner))
            for child_id, (child, owner) in a_children.items():
                fresh = child_id not in b_children or b_children[child_id][1] != owner
                if fresh:
                    payload = canonical.element_to_dict(child_kind, child)
                    added_children.append((child_id, child_kind, owner, payload))
                else:
                    b_child = b_children[child_id][0]
                    for prop, getter in _PROPS[child_kind].items():
                        old, new = getter(b_child), getter(child)
                        if old != new:
                            emit_prop(child_kind, child_id, owner, prop, old, new)
            # Declaration order: replaying removals + id-ordered appends must
            # land on the after order, else emit one whole-value order event.
            for parent_id, a_parent in a_parents.items():
                actual = [child.id for child in getattr(a_parent, attr)]
                b_parent = b_parents.get(parent_id)
                survivors = [
                    child.id
                    for child in (getattr(b_parent, attr) if b_parent is not None else ())
                    if child.id in a_children and a_children[child.id][1] == parent_id
                ]
                appended = sorted(
                    child_id
                    for child_id in actual
                    if child_id not in b_children or b_children[child_id][1] != parent_id
                )
                simulated = survivors + appended
                if simulated != actual:
                    emit_prop(container_kind, parent_id, None, order_prop, simulated, actual)

    events: list[ChangeEvent] = []
    revision = before.revision + 1
    seq = first_seq

    def push(kind, element_kind, element_id, owner=None, prop=None, old=None, new=None, payload=None):
        nonlocal seq
        events.append(
            ChangeEvent(
                seq=seq,
                model_id=before.model_id,
                revision=revision,
                kind=kind,
                element_kind=element_kind,
                element_id=element_id,
                owner_id=owner,
                property=prop,
                old_value=old,
                new_value=new,
                payload=payload,
            )
        )
        seq += 1

    for element_id, kind, owner in sorted(removed_children):
        push(EventKind.REMOVED, kind, element_id, owner=owner)
    for element_id, kind in sorted(removed_top):
        push(EventKind.REMOVED, kind, element_id)
    for element_id, kind, payload in sorted(added_top):
        push(EventKind.ADDED, kind, element_id, payload=payload)
    for element_id, kind, owner, payload in sorted(added_children):
        push(EventKind.ADDED, kind, element_id, owner=owner, payload=payload)
    for element_id, prop, kind, owner, old, new in sorted(props, key=lambda p: (p[0], p[1])):
        push(EventKind.CHANGED, kind, element_id, owner=owner, prop=prop, old=old, new=new)
    return events


# --- apply --------------------------------------------------------------------


def _stale(event: ChangeEvent, reason: str) -> StaleEventError:
    return StaleEventError(
        f"stale event seq={event.seq} on {event.element_kind.value} "
        f"{event.element_id!r}: {reason}",
        seq=event.seq,
        element_id=event.element_id,
    )


def _find_entry(model: Model, element_id: str):
    """Direct (kind, element, owner) lookup without building the model index.

    ``apply`` runs on intermediate snapshots whose index would be built only
    to be thrown away; a plain walk is far cheaper at event granularity.
    """
    for cls in model.classes:
        if cls.id == element_id:
            return ElementKind.CLASS, cls, None
        for op in cls.operations:
            if op.id == element_id:
                return ElementKind.OPERATION, op, cls.id
        for attr in cls.attributes:
            if attr.id == element_id:
                return ElementKind.ATTRIBUTE, attr, cls.id
    for enum in model.enumerations:
        if enum.id == element_id:
            return ElementKind.ENUMERATION, enum, None
    for assoc in model.associations:
        if assoc.id == element_id:
            return ElementKind.ASSOCIATION, assoc, None
    for inter in model.interactions:
        if inter.id == element_id:
            return ElementKind.INTERACTION, inter, None
        for lifeline in inter.lifelines:
            if lifeline.id == element_id:
                return ElementKind.LIFELINE, lifeline, inter.id
        for message in inter.messages:
            if message.id == element_id:
                return ElementKind.MESSAGE, message, inter.id
    return None


def _replace_top(model: Model, attr: str, elements) -> Model:
    import dataclasses

    return dataclasses.replace(model, **{attr: tuple(elements)})


def _replace_child_list(model: Model, owner_id: str, child_attr: str, children) -> Model:
    import dataclasses

    collection_attr = "classes" if child_attr in ("operations", "attributes") else "interactions"
    out = []
    for container in getattr(model, collection_attr):
        if container.id == owner_id:
            container = dataclasses.replace(container, **{child_attr: tuple(children)})
        out.append(container)
    return dataclasses.replace(model, **{collection_attr: tuple(out)})


def apply(model: Model, event: ChangeEvent) -> Model:
    """Apply one event, returning a new snapshot.

    The input snapshot is never modified and the revision field is left
    untouched; the engine advances it once per batch.  An event that does
    not fit the snapshot (id already present / missing, wrong kind, stale
    old value) raises :class:`StaleEventError`.
    """
    if event.model_id != model.model_id:
        raise _stale(event, f"event targets model {event.model_id!r}")
    kind = event.element_kind

    if event.kind is EventKind.ADDED:
        if _find_entry(model, event.element_id) is not None:
            raise _stale(event, "id already present")
        try:
            element = canonical.element_from_dict(kind, event.payload)
        except ValueError as exc:
            raise _stale(event, str(exc)) from None
        if element.id != event.element_id:
            raise _stale(event, f"payload id {element.id!r} does not match event")
        if kind in _CHILD_CONTAINER_ATTR:
            if event.owner_id is None:
                raise _stale(event, "child element event lacks ownerId")
            collection_attr, child_attr = _CHILD_CONTAINER_ATTR[kind]
            expected_owner_kind = (
                ElementKind.CLASS if collection_attr == "classes" else ElementKind.INTERACTION
            )
            owner_entry = _find_entry(model, event.owner_id)
            if owner_entry is None or owner_entry[0] is not expected_owner_kind:
                raise _stale(event, f"owner {event.owner_id!r} is not a live {expected_owner_kind.value}")
            children = list(getattr(owner_entry[1], child_attr)) + [element]
            return _replace_child_list(model, event.owner_id, child_attr, children)
        attr = _TOP_ATTR[kind]
        return _replace_top(model, attr, getattr(model, attr) + (element,))

    entry = _find_entry(model, event.element_id)
    if entry is None or entry[0] is not kind:
        raise _stale(event, "no live element of this kind with this id")
    _, element, owner = entry

    if event.kind is EventKind.REMOVED:
        if event.owner_id is not None and owner != event.owner_id:
            raise _stale(event, f"element is owned by {owner!r}, not {event.owner_id!r}")
        if kind in _CHILD_CONTAINER_ATTR:
            _, child_attr = _CHILD_CONTAINER_ATTR[kind]
            owner_entry = _find_entry(model, owner)
            children = [c for c in getattr(owner_entry[1], child_attr) if c.id != event.element_id]
            return _replace_child_list(model, owner, child_attr, children)
        attr = _TOP_ATTR[kind]
        remaining = [e for e in getattr(model, attr) if e.id != event.element_id]
        return _replace_top(model, attr, remaining)

    # PropertyChanged
    prop = event.property
    if prop in _ORDER_PROPS:
        container_kind, child_attr = _ORDER_PROPS[prop]
        if kind is not container_kind:
            raise _stale(event, f"property {prop!r} does not belong to {kind.value}")
        children = list(getattr(element, child_attr))
        current_order = [c.id for c in children]
        if event.old_value != current_order:
            raise _stale(event, f"current order {current_order!r} does not match oldValue")
        if not isinstance(event.new_value, list) or sorted(event.new_value) != sorted(current_order):
            raise _stale(event, "newValue is not a permutation of the current children")
        by_id = {c.id: c for c in children}
        reordered = [by_id[child_id] for child_id in event.new_value]
        return _replace_child_list(model, event.element_id, child_attr, reordered)

    getter = _PROPS[kind].get(prop) if prop else None
    if getter is None:
        raise _stale(event, f"unknown property {prop!r}")
    current = getter(element)
    if current != event.old_value:
        raise _stale(event, f"current value {current!r} does not match oldValue")
    try:
        replacement = _set_property(element, kind, prop, event.new_value)
    except ValueError as exc:
        raise _stale(event, str(exc)) from None
    if kind in _CHILD_CONTAINER_ATTR:
        _, child_attr = _CHILD_CONTAINER_ATTR[kind]
        owner_entry = _find_entry(model, owner)
        children = [
            replacement if c.id == event.element_id else c
            for c in getattr(owner_entry[1], child_attr)
        ]
        return _replace_child_list(model, owner, child_attr, children)
    attr = _TOP_ATTR[kind]
    elements = [replacement if e.id == event.element_id else e for e in getattr(model, attr)]
    return _replace_top(model, attr, elements)


def apply_all(model: Model, events) -> Model:
    for event in events:
        model = apply(model, event)
    return model
