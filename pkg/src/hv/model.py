"""In-memory snapshot of a combined UML class + sequence model.

A :class:`Model` is immutable after construction: every mutation path in
the package produces a new snapshot (see ``hv.diffing.apply``).  Top-level
element collections are normalised to id order on construction so that
structurally equal models compare equal regardless of how they were built;
nested collections (operations, attributes, lifelines, messages) keep their
declaration order because it is meaningful.

The query functions in this module accept an optional ``reads`` set.  When
given, every element id whose state influenced the answer is added to it,
plus two reserved derived-map keys (`DEP_CLASS_NAMES`, `DEP_ASSOC_TOPOLOGY`)
for answers that depend on name->class or class-pair->association lookups.
The incremental engine uses these recorded reads to decide what to
re-evaluate; see ``hv.engine`` for the key semantics on the write side.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

from hv.errors import ModelLookupError


class _StrEnum(str, Enum):
    def __str__(self) -> str:  # stable across 3.10/3.11+ format changes
        return self.value


class Visibility(_StrEnum):
    PUBLIC = "public"
    PROTECTED = "protected"
    PACKAGE = "package"
    PRIVATE = "private"


class ParameterDirection(_StrEnum):
    IN = "in"
    INOUT = "inout"
    OUT = "out"


class MessageSort(_StrEnum):
    SYNC = "sync"
    ASYNC = "async"
    REPLY = "reply"
    CREATE = "create"
    DELETE = "delete"


#: Message sorts that represent operation calls; the other sorts are exempt
#: from the message rules.
CALL_SORTS = (MessageSort.SYNC, MessageSort.ASYNC)


class ElementKind(_StrEnum):
    CLASS = "class"
    OPERATION = "operation"
    ATTRIBUTE = "attribute"
    PARAMETER_LIST = "parameterList"  # accepted on the wire, never emitted
    ENUMERATION = "enumeration"
    ASSOCIATION = "association"
    INTERACTION = "interaction"
    LIFELINE = "lifeline"
    MESSAGE = "message"


#: Element kinds that live inside a container element.  Events touching them
#: carry the owner's id.
CHILD_KINDS = (
    ElementKind.OPERATION,
    ElementKind.ATTRIBUTE,
    ElementKind.LIFELINE,
    ElementKind.MESSAGE,
)

# Reserved dependency keys for derived lookup tables.  They share the id
# namespace of read-sets and the dependency index; the "~" prefix keeps them
# out of the way of realistic element ids (a collision would only cause
# extra re-evaluation, never a missed one).
DEP_CLASS_NAMES = "~names:class"
DEP_ASSOC_TOPOLOGY = "~topology:association"


@dataclass(frozen=True, slots=True)
class Parameter:
    name: str
    type_name: str
    direction: ParameterDirection = ParameterDirection.IN


@dataclass(frozen=True, slots=True)
class Operation:
    id: str
    name: str
    visibility: Visibility = Visibility.PUBLIC
    parameters: tuple[Parameter, ...] = ()
    return_type_name: str | None = None

    def input_arity(self) -> int:
        """Number of parameters a caller must supply (in/inout)."""
        return sum(
            1
            for p in self.parameters
            if p.direction in (ParameterDirection.IN, ParameterDirection.INOUT)
        )


@dataclass(frozen=True, slots=True)
class Attribute:
    id: str
    name: str
    type_name: str
    visibility: Visibility = Visibility.PUBLIC


@dataclass(frozen=True, slots=True)
class Class:
    id: str
    name: str
    is_abstract: bool = False
    superclass_ids: tuple[str, ...] = ()
    attributes: tuple[Attribute, ...] = ()
    operations: tuple[Operation, ...] = ()


@dataclass(frozen=True, slots=True)
class Enumeration:
    id: str
    name: str
    literals: tuple[str, ...] = ()


@dataclass(frozen=True, slots=True)
class AssociationEnd:
    class_id: str
    multiplicity: str = "1"
    navigable: bool = True


@dataclass(frozen=True, slots=True)
class Association:
    id: str
    end_a: AssociationEnd
    end_b: AssociationEnd
    name: str | None = None


@dataclass(frozen=True, slots=True)
class Lifeline:
    id: str
    name: str
    type_ref: str | None = None
    type_name: str | None = None


@dataclass(frozen=True, slots=True)
class Message:
    id: str
    name: str
    source_lifeline_id: str
    target_lifeline_id: str
    sort: MessageSort = MessageSort.SYNC
    arguments: tuple[str, ...] = ()


@dataclass(frozen=True, slots=True)
class Interaction:
    id: str
    name: str
    lifelines: tuple[Lifeline, ...] = ()
    messages: tuple[Message, ...] = ()


@dataclass(frozen=True)
class Model:
    model_id: str
    revision: int = 0
    classes: tuple[Class, ...] = ()
    enumerations: tuple[Enumeration, ...] = ()
    associations: tuple[Association, ...] = ()
    interactions: tuple[Interaction, ...] = ()

    def __post_init__(self) -> None:
        # Canonical top-level order; stable sort keeps duplicate-id input
        # deterministic.  Already-sorted input (the common case on replace)
        # pays only the scan.
        for name in ("classes", "enumerations", "associations", "interactions"):
            value = getattr(self, name)
            if any(value[i].id > value[i + 1].id for i in range(len(value) - 1)):
                object.__setattr__(
                    self, name, tuple(sorted(value, key=lambda e: e.id))
                )

    @cached_property
    def idx(self) -> "ModelIndex":
        return ModelIndex(self)


class UnresolvedReason(_StrEnum):
    NO_TYPE = "noType"
    DANGLING_REF = "danglingRef"
    UNKNOWN_NAME = "unknownName"
    AMBIGUOUS_NAME = "ambiguousName"


@dataclass(frozen=True, slots=True)
class TypeResolution:
    """Outcome of resolving a lifeline to its classifier."""

    class_id: str | None = None
    reason: UnresolvedReason | None = None
    candidates: tuple[str, ...] = ()  # matching class ids for name lookups

    @property
    def resolved(self) -> bool:
        return self.class_id is not None


@dataclass(frozen=True, slots=True)
class StructuralIssue:
    kind: str
    element_id: str
    detail: str


ISSUE_DUPLICATE_ID = "duplicateId"
ISSUE_DANGLING_SUPERCLASS = "danglingSuperclass"
ISSUE_DANGLING_ASSOCIATION_END = "danglingAssociationEnd"
ISSUE_MESSAGE_ENDPOINT_OUTSIDE = "messageEndpointOutsideInteraction"
ISSUE_INHERITANCE_CYCLE = "inheritanceCycle"


class ModelIndex:
    """Lookup tables for one snapshot, built once and shared by all queries.

    The lazy caches (:meth:`ancestry`, :meth:`inherited_operations`,
    :meth:`resolve_lifeline`) return the set of dependency keys that were
    read alongside the answer, so tracked and untracked callers share one
    code path.
    """

    __slots__ = (
        "model",
        "elements",
        "id_counts",
        "class_ids_by_name",
        "assoc_ids_by_pair",
        "lifeline_ids_by_interaction",
        "scratch",
        "has_duplicates",
        "_ancestry",
        "_inherited_ops",
        "_resolutions",
        "_assoc_checks",
        "_cycles",
    )

    def __init__(self, model: Model) -> None:
        self.model = model
        # id -> (kind, element, owner id or None); first occurrence wins when
        # the input carries duplicate ids.
        elements: dict[str, tuple[ElementKind, object, str | None]] = {}
        counts: dict[str, int] = {}
        self.class_ids_by_name: dict[str, list[str]] = {}
        self.assoc_ids_by_pair: dict[tuple[str, str], list[str]] = {}
        self.lifeline_ids_by_interaction: dict[str, frozenset[str]] = {}
        #: per-snapshot memo space for pure derived results (rules use it)
        self.scratch: dict = {}
        self._ancestry: dict[str, tuple[tuple[str, ...], frozenset[str]]] = {}
        self._inherited_ops: dict[str, tuple[tuple[str, Operation], ...]] = {}
        self._resolutions: dict[str, tuple[TypeResolution, frozenset[str]]] = {}
        self._assoc_checks: dict[tuple[str, str], tuple[bool, frozenset[str]]] = {}
        self._cycles: dict[str, tuple[bool, frozenset[str]]] = {}

        self.has_duplicates = False

        def add(element_id, kind, element, owner):
            if element_id in elements:
                counts[element_id] += 1
                self.has_duplicates = True
            else:
                counts[element_id] = 1
                elements[element_id] = (kind, element, owner)

        for cls in model.classes:
            add(cls.id, ElementKind.CLASS, cls, None)
            self.class_ids_by_name.setdefault(cls.name, []).append(cls.id)
            for attr in cls.attributes:
                add(attr.id, ElementKind.ATTRIBUTE, attr, cls.id)
            for op in cls.operations:
                add(op.id, ElementKind.OPERATION, op, cls.id)
        for enum in model.enumerations:
            add(enum.id, ElementKind.ENUMERATION, enum, None)
        for assoc in model.associations:
            add(assoc.id, ElementKind.ASSOCIATION, assoc, None)
            pair = _pair_key(assoc.end_a.class_id, assoc.end_b.class_id)
            self.assoc_ids_by_pair.setdefault(pair, []).append(assoc.id)
        for inter in model.interactions:
            add(inter.id, ElementKind.INTERACTION, inter, None)
            for lifeline in inter.lifelines:
                add(lifeline.id, ElementKind.LIFELINE, lifeline, inter.id)
            for message in inter.messages:
                add(message.id, ElementKind.MESSAGE, message, inter.id)
            self.lifeline_ids_by_interaction[inter.id] = frozenset(
                lf.id for lf in inter.lifelines
            )
        self.elements = elements
        self.id_counts = counts

    def entry(self, element_id: str):
        return self.elements.get(element_id)

    def require(self, element_id: str, kind: ElementKind):
        """Return (element, owner) or raise for a dangling/mistyped id."""
        found = self.elements.get(element_id)
        if found is None or found[0] is not kind:
            raise ModelLookupError(
                f"no {kind.value} with id {element_id!r} in model "
                f"{self.model.model_id!r}"
            )
        return found[1], found[2]

    def class_of(self, class_id: str) -> Class | None:
        found = self.elements.get(class_id)
        if found is not None and found[0] is ElementKind.CLASS:
            return found[1]  # type: ignore[return-value]
        return None

    def ancestry(self, class_id: str) -> tuple[tuple[str, ...], frozenset[str]]:
        """BFS ancestry of a class, self first.

        Returns ``(order, reads)``: ``order`` holds the ids of existing
        classes in visit order; ``reads`` adds every id that was looked at,
        including dangling superclass references.  Cycle-safe via the
        visited set.
        """
        cached = self._ancestry.get(class_id)
        if cached is not None:
            return cached
        order: list[str] = []
        reads: set[str] = set()
        queue = [class_id]
        seen: set[str] = set()
        while queue:
            current = queue.pop(0)
            if current in seen:
                continue
            seen.add(current)
            reads.add(current)
            cls = self.class_of(current)
            if cls is None:
                continue
            order.append(current)
            queue.extend(cls.superclass_ids)
        result = (tuple(order), frozenset(reads))
        self._ancestry[class_id] = result
        return result

    def inherited_operations(self, class_id: str) -> tuple[tuple[str, Operation], ...]:
        cached = self._inherited_ops.get(class_id)
        if cached is None:
            order, _ = self.ancestry(class_id)
            ops: list[tuple[str, Operation]] = []
            for cid in order:
                cls = self.class_of(cid)
                assert cls is not None
                ops.extend((cid, op) for op in cls.operations)
            cached = tuple(ops)
            self._inherited_ops[class_id] = cached
        return cached

    def associated_with_reads(self, class_a: str, class_b: str) -> tuple[bool, frozenset[str]]:
        """Cached association check between two existing classes."""
        key = _pair_key(class_a, class_b)
        cached = self._assoc_checks.get(key)
        if cached is not None:
            return cached
        reads: set[str] = set()
        order_a, reads_a = self.ancestry(class_a)
        order_b, reads_b = self.ancestry(class_b)
        reads.update(reads_a)
        reads.update(reads_b)
        hit = False
        for x in order_a:
            for y in order_b:
                candidates = self.assoc_ids_by_pair.get(_pair_key(x, y))
                if candidates:
                    reads.add(candidates[0])
                    hit = True
                    break
            if hit:
                break
        if not hit:
            # A negative answer depends on the association topology as a
            # whole: adding or re-pointing any association could flip it.
            reads.add(DEP_ASSOC_TOPOLOGY)
        result = (hit, frozenset(reads))
        self._assoc_checks[key] = result
        return result

    @classmethod
    def patched_from(
        cls, base: "ModelIndex", model: Model, changed
    ) -> "ModelIndex | None":
        """Index for a snapshot differing from ``base`` only in element properties.

        ``changed`` holds ``(kind, element_id, owner_id)`` for every element a
        batch touched with property changes.  Membership tables are shared or
        copy-on-write-patched; all derived caches start empty, exactly as a
        fresh build would.  Returns None when patching is not safe (duplicate
        ids in the base, or an element that cannot be located), in which case
        the caller builds from scratch.  Fresh-build equivalence is covered by
        a dedicated property test.
        """
        if base.has_duplicates:
            return None
        from bisect import bisect_left, insort

        def find_top(collection, element_id):
            pos = bisect_left(collection, element_id, key=lambda e: e.id)
            if pos < len(collection) and collection[pos].id == element_id:
                return collection[pos]
            return None

        def move_bucket(table, old_key, new_key, element_id):
            old_bucket = [e for e in table.get(old_key, ()) if e != element_id]
            if old_bucket:
                table[old_key] = old_bucket
            else:
                table.pop(old_key, None)
            new_bucket = list(table.get(new_key, ()))
            insort(new_bucket, element_id)
            table[new_key] = new_bucket

        elements = dict(base.elements)
        names = base.class_ids_by_name
        pairs = base.assoc_ids_by_pair
        names_copied = pairs_copied = False
        seen: set[str] = set()
        for kind, element_id, owner_id in changed:
            if element_id in seen:
                continue
            seen.add(element_id)
            old_entry = base.elements.get(element_id)
            if old_entry is None or old_entry[0] is not kind:
                return None
            if kind in CHILD_KINDS:
                owner_id = owner_id if owner_id is not None else old_entry[2]
                if kind in (ElementKind.OPERATION, ElementKind.ATTRIBUTE):
                    collection, owner_kind = model.classes, ElementKind.CLASS
                    child_attr = "operations" if kind is ElementKind.OPERATION else "attributes"
                else:
                    collection, owner_kind = model.interactions, ElementKind.INTERACTION
                    child_attr = "lifelines" if kind is ElementKind.LIFELINE else "messages"
                owner = find_top(collection, owner_id)
                if owner is None:
                    return None
                child = next((c for c in getattr(owner, child_attr) if c.id == element_id), None)
                if child is None:
                    return None
                elements[owner_id] = (owner_kind, owner, None)
                elements[element_id] = (kind, child, owner_id)
            elif kind is ElementKind.CLASS:
                new_cls = find_top(model.classes, element_id)
                if new_cls is None:
                    return None
                elements[element_id] = (kind, new_cls, None)
                old_cls = old_entry[1]
                if old_cls.name != new_cls.name:
                    if not names_copied:
                        names = dict(names)
                        names_copied = True
                    move_bucket(names, old_cls.name, new_cls.name, element_id)
            elif kind is ElementKind.ASSOCIATION:
                new_assoc = find_top(model.associations, element_id)
                if new_assoc is None:
                    return None
                elements[element_id] = (kind, new_assoc, None)
                old_assoc = old_entry[1]
                old_pair = _pair_key(old_assoc.end_a.class_id, old_assoc.end_b.class_id)
                new_pair = _pair_key(new_assoc.end_a.class_id, new_assoc.end_b.class_id)
                if old_pair != new_pair:
                    if not pairs_copied:
                        pairs = dict(pairs)
                        pairs_copied = True
                    move_bucket(pairs, old_pair, new_pair, element_id)
            elif kind is ElementKind.ENUMERATION or kind is ElementKind.INTERACTION:
                collection = (
                    model.enumerations if kind is ElementKind.ENUMERATION else model.interactions
                )
                new_obj = find_top(collection, element_id)
                if new_obj is None:
                    return None
                elements[element_id] = (kind, new_obj, None)
            else:
                return None

        idx = object.__new__(cls)
        idx.model = model
        idx.elements = elements
        idx.id_counts = base.id_counts  # property changes never alter counts
        idx.class_ids_by_name = names
        idx.assoc_ids_by_pair = pairs
        idx.lifeline_ids_by_interaction = base.lifeline_ids_by_interaction
        idx.scratch = {}
        idx.has_duplicates = False
        idx._ancestry = {}
        idx._inherited_ops = {}
        idx._resolutions = {}
        idx._assoc_checks = {}
        idx._cycles = {}
        return idx

    def cycle_check(self, class_id: str) -> tuple[bool, frozenset[str]]:
        """Cached: can the class reach itself through superclass links."""
        cached = self._cycles.get(class_id)
        if cached is not None:
            return cached
        cls = self.class_of(class_id)
        if cls is None:
            raise ModelLookupError(f"no class with id {class_id!r}")
        on_cycle = False
        seen: set[str] = set()
        queue = list(cls.superclass_ids)
        while queue:
            current = queue.pop(0)
            if current == class_id:
                on_cycle = True
                break
            if current in seen:
                continue
            seen.add(current)
            parent = self.class_of(current)
            if parent is not None:
                queue.extend(parent.superclass_ids)
        result = (on_cycle, frozenset(seen | {class_id}))
        self._cycles[class_id] = result
        return result

    def resolve_lifeline(self, lifeline_id: str) -> tuple[TypeResolution, frozenset[str]]:
        cached = self._resolutions.get(lifeline_id)
        if cached is not None:
            return cached
        lifeline, _ = self.require(lifeline_id, ElementKind.LIFELINE)
        reads: set[str] = {lifeline_id}
        if lifeline.type_ref is not None:
            reads.add(lifeline.type_ref)
            if self.class_of(lifeline.type_ref) is not None:
                resolution = TypeResolution(class_id=lifeline.type_ref)
            else:
                resolution = TypeResolution(reason=UnresolvedReason.DANGLING_REF)
        elif lifeline.type_name is not None:
            reads.add(DEP_CLASS_NAMES)
            matches = self.class_ids_by_name.get(lifeline.type_name, [])
            reads.update(matches)
            if len(matches) == 1:
                resolution = TypeResolution(
                    class_id=matches[0], candidates=tuple(matches)
                )
            elif not matches:
                resolution = TypeResolution(reason=UnresolvedReason.UNKNOWN_NAME)
            else:
                resolution = TypeResolution(
                    reason=UnresolvedReason.AMBIGUOUS_NAME, candidates=tuple(matches)
                )
        else:
            resolution = TypeResolution(reason=UnresolvedReason.NO_TYPE)
        result = (resolution, frozenset(reads))
        self._resolutions[lifeline_id] = result
        return result


def _pair_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


def _record(reads: set[str] | None, keys) -> None:
    if reads is not None:
        reads.update(keys)


def resolve_lifeline_type(
    model: Model, lifeline_id: str, reads: set[str] | None = None
) -> TypeResolution:
    """Resolve a lifeline to its classifier.

    Resolution order: an existing ``type_ref`` must reference a class;
    otherwise a ``type_name`` must match exactly one class by
    case-sensitive name.  Anything else is unresolved with a reason.
    """
    resolution, dep = model.idx.resolve_lifeline(lifeline_id)
    _record(reads, dep)
    return resolution


def operations_of(
    model: Model,
    class_id: str,
    include_inherited: bool = False,
    reads: set[str] | None = None,
) -> list[tuple[str, Operation]]:
    """Operations callable on a class, nearest owner first.

    Own operations come first in declaration order, then each ancestor's in
    breadth-first order over ``superclass_ids``.  Cyclic inheritance is
    tolerated: every class contributes at most once.
    """
    idx = model.idx
    idx.require(class_id, ElementKind.CLASS)
    if not include_inherited:
        cls = idx.class_of(class_id)
        assert cls is not None
        _record(reads, (class_id,))
        _record(reads, (op.id for op in cls.operations))
        return [(class_id, op) for op in cls.operations]
    _, ancestry_reads = idx.ancestry(class_id)
    ops = idx.inherited_operations(class_id)
    _record(reads, ancestry_reads)
    _record(reads, (op.id for _, op in ops))
    return list(ops)


def associated(
    model: Model, class_a: str, class_b: str, reads: set[str] | None = None
) -> bool:
    """True iff some association links the two classes or their ancestors.

    End order and navigability are ignored; a class is always associated
    with itself.
    """
    idx = model.idx
    idx.require(class_a, ElementKind.CLASS)
    idx.require(class_b, ElementKind.CLASS)
    if class_a == class_b:
        _record(reads, (class_a,))
        return True
    hit, dep = idx.associated_with_reads(class_a, class_b)
    _record(reads, dep)
    return hit


def on_inheritance_cycle(model: Model, class_id: str, reads: set[str] | None = None) -> bool:
    """True iff the class can reach itself through superclass links."""
    on_cycle, dep = model.idx.cycle_check(class_id)
    _record(reads, dep)
    return on_cycle


def validate_wellformed(model: Model) -> list[StructuralIssue]:
    """Whole-model structural audit.

    All findings are data, never exceptions: duplicate ids, dangling
    superclass and association-end references, message endpoints outside
    their interaction, inheritance cycles.  Output is sorted by
    (element id, kind).
    """
    idx = model.idx
    issues: list[StructuralIssue] = []
    for element_id, count in idx.id_counts.items():
        if count > 1:
            issues.append(
                StructuralIssue(
                    ISSUE_DUPLICATE_ID,
                    element_id,
                    f"id {element_id!r} is used by {count} elements",
                )
            )
    for cls in model.classes:
        for super_id in cls.superclass_ids:
            if idx.class_of(super_id) is None:
                issues.append(
                    StructuralIssue(
                        ISSUE_DANGLING_SUPERCLASS,
                        cls.id,
                        f"class {cls.name!r} lists unknown superclass {super_id!r}",
                    )
                )
        if on_inheritance_cycle(model, cls.id):
            issues.append(
                StructuralIssue(
                    ISSUE_INHERITANCE_CYCLE,
                    cls.id,
                    f"class {cls.name!r} participates in an inheritance cycle",
                )
            )
    for assoc in model.associations:
        for label, end in (("A", assoc.end_a), ("B", assoc.end_b)):
            if idx.class_of(end.class_id) is None:
                issues.append(
                    StructuralIssue(
                        ISSUE_DANGLING_ASSOCIATION_END,
                        assoc.id,
                        f"end {label} references unknown class {end.class_id!r}",
                    )
                )
    for inter in model.interactions:
        lifeline_ids = idx.lifeline_ids_by_interaction[inter.id]
        for message in inter.messages:
            for role, ref in (
                ("source", message.source_lifeline_id),
                ("target", message.target_lifeline_id),
            ):
                if ref not in lifeline_ids:
                    issues.append(
                        StructuralIssue(
                            ISSUE_MESSAGE_ENDPOINT_OUTSIDE,
                            message.id,
                            f"{role} endpoint {ref!r} is not a lifeline of "
                            f"interaction {inter.name!r}",
                        )
                    )
    issues.sort(key=lambda issue: (issue.element_id, issue.kind))
    return issues


def element_path(model: Model, element_id: str) -> str:
    """Human-oriented location string, e.g. ``Checkout/pay#m3``."""
    found = model.idx.entry(element_id)
    if found is None:
        return f"#{element_id}"
    kind, element, owner = found
    if kind in (ElementKind.LIFELINE, ElementKind.MESSAGE):
        owner_entry = model.idx.entry(owner) if owner else None
        prefix = owner_entry[1].name if owner_entry else "?"
        return f"{prefix}/{element.name}#{element_id}"
    if kind in (ElementKind.OPERATION, ElementKind.ATTRIBUTE):
        owner_entry = model.idx.entry(owner) if owner else None
        prefix = owner_entry[1].name if owner_entry else "?"
        return f"{prefix}.{element.name}#{element_id}"
    name = getattr(element, "name", None) or ""
    return f"{name}#{element_id}"
