"""Consistency-rule catalog for class/sequence cross-checking.

Each rule maps one subject element to zero or more :class:`Diagnostic`
objects and, when evaluated through :func:`evaluate`, records the exact set
of dependency keys it read (element ids plus the derived-map keys from
``hv.model``).  The read-set is the contract that makes incremental
re-evaluation sound: mutations whose touched keys are disjoint from a
rule instance's read-set can never change its outcome.

Suppression order avoids double reporting: a message whose target lifeline
does not resolve yields only LIFELINE-UNDEF-TYPE, never the message rules
that would need the resolved class.  Reply/create/delete messages are
exempt from all message rules; their UML semantics do not map to named
owned operations.

The rule bodies live in ``*_core`` functions taking a prefetched element;
the public ``check_*`` wrappers resolve the subject id first, while the
batch oracle walks the element table once and calls the cores directly.
"""

from __future__ import annotations

from dataclasses import dataclass

from hv.errors import ModelLookupError
from hv.model import (
    CALL_SORTS,
    ElementKind,
    Model,
    UnresolvedReason,
    Visibility,
    _StrEnum,
    associated,
    operations_of,
    resolve_lifeline_type,
)

RULE_MSG_UNNAMED = "MSG-UNNAMED"
RULE_MSG_UNDEF_OP = "MSG-UNDEF-OP"
RULE_MSG_PARAM_MISMATCH = "MSG-PARAM-MISMATCH"
RULE_MSG_NO_ASSOC = "MSG-NO-ASSOC"
RULE_LIFELINE_UNDEF_TYPE = "LIFELINE-UNDEF-TYPE"
RULE_MSG_PRIVATE_OP = "MSG-PRIVATE-OP"
RULE_STRUCT_WELLFORMED = "STRUCT-WELLFORMED"


class Severity(_StrEnum):
    ERROR = "error"
    WARNING = "warning"
    INFO = "info"


_SEVERITY_RANK = {Severity.INFO: 0, Severity.WARNING: 1, Severity.ERROR: 2}


def severity_rank(severity: Severity) -> int:
    return _SEVERITY_RANK[severity]


@dataclass(frozen=True, slots=True)
class Diagnostic:
    """One detected inconsistency."""

    rule_id: str
    severity: Severity
    message: str
    element_id: str
    interaction_id: str | None = None
    related_element_ids: tuple[str, ...] = ()
    model_revision: int = 0

    @property
    def identity(self) -> tuple[str, str, str]:
        """Stable identity used for delta membership across revisions."""
        return (self.rule_id, self.element_id, self.message)

    @property
    def sort_key(self) -> tuple[str, str, str]:
        return (self.rule_id, self.element_id, self.message)

    def to_dict(self) -> dict:
        out: dict = {
            "ruleId": self.rule_id,
            "severity": self.severity.value,
            "message": self.message,
            "elementId": self.element_id,
        }
        if self.interaction_id is not None:
            out["interactionId"] = self.interaction_id
        out["relatedElementIds"] = list(self.related_element_ids)
        out["modelRevision"] = self.model_revision
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Diagnostic":
        return cls(
            rule_id=data["ruleId"],
            severity=Severity(data["severity"]),
            message=data["message"],
            element_id=data["elementId"],
            interaction_id=data.get("interactionId"),
            related_element_ids=tuple(data.get("relatedElementIds", ())),
            model_revision=data.get("modelRevision", 0),
        )


@dataclass(frozen=True, slots=True)
class RuleDescriptor:
    rule_id: str
    subject_kinds: tuple[ElementKind, ...]
    severity: Severity
    title: str
    description: str


@dataclass(frozen=True, slots=True)
class EvaluationResult:
    diagnostics: tuple[Diagnostic, ...]
    read_set: frozenset[str]


# --- rule bodies -----------------------------------------------------------------


def _resolve_endpoint(model: Model, lifeline_id: str, reads):
    """Resolve a message endpoint; None when the lifeline is missing."""
    if reads is not None:
        reads.add(lifeline_id)
    entry = model.idx.elements.get(lifeline_id)
    if entry is None or entry[0] is not ElementKind.LIFELINE:
        return None
    resolution, dep = model.idx.resolve_lifeline(lifeline_id)
    if reads is not None:
        reads.update(dep)
    return resolution


def _call_candidates(model: Model, message, reads):
    """Operations matching the message name on the resolved target class.

    Returns ``(target_class_id, candidates)``; ``(None, ())`` when the rule
    does not apply (exempt sort, blank name, unresolved target).  The three
    operation-matching rules share one memoized computation per snapshot;
    tracked callers replay its recorded reads.
    """
    cached = model.idx.scratch.get(message.id)
    if cached is None or (reads is not None and cached[2] is None):
        # Untracked (oracle) callers skip the read bookkeeping; a tracked
        # caller upgrades the cache entry with the recorded reads.
        local: set[str] | None = set() if reads is not None else None
        if message.sort not in CALL_SORTS or not message.name.strip():
            cached = (None, (), None if local is None else frozenset(local))
        else:
            resolution = _resolve_endpoint(model, message.target_lifeline_id, local)
            if resolution is None or not resolution.resolved:
                cached = (None, (), None if local is None else frozenset(local))
            else:
                target = resolution.class_id
                candidates = tuple(
                    (owner_id, op)
                    for owner_id, op in operations_of(
                        model, target, include_inherited=True, reads=local
                    )
                    if op.name == message.name
                )
                cached = (target, candidates, None if local is None else frozenset(local))
        model.idx.scratch[message.id] = cached
    if reads is not None:
        reads.update(cached[2])
    return cached[0], cached[1]


def _msg_unnamed_core(model: Model, message, owner, reads) -> list[Diagnostic]:
    if message.sort in CALL_SORTS and not message.name.strip():
        return [
            Diagnostic(
                RULE_MSG_UNNAMED,
                Severity.WARNING,
                f"{message.sort.value} message has no name",
                message.id,
                owner,
                (),
                model.revision,
            )
        ]
    return []


def _msg_undef_op_core(model: Model, message, owner, reads) -> list[Diagnostic]:
    target, candidates = _call_candidates(model, message, reads)
    if target is None or candidates:
        return []
    target_class = model.idx.class_of(target)
    return [
        Diagnostic(
            RULE_MSG_UNDEF_OP,
            Severity.ERROR,
            f"operation {message.name!r} is not defined on class "
            f"{target_class.name!r} or its ancestors",
            message.id,
            owner,
            (target,),
            model.revision,
        )
    ]


def _msg_param_mismatch_core(model: Model, message, owner, reads) -> list[Diagnostic]:
    target, candidates = _call_candidates(model, message, reads)
    if not candidates:
        return []
    supplied = len(message.arguments)
    if any(op.input_arity() == supplied for _, op in candidates):
        return []
    target_class = model.idx.class_of(target)
    return [
        Diagnostic(
            RULE_MSG_PARAM_MISMATCH,
            Severity.ERROR,
            f"message {message.name!r} carries {supplied} argument(s) but no "
            f"matching operation on class {target_class.name!r} accepts {supplied}",
            message.id,
            owner,
            tuple(op.id for _, op in candidates),
            model.revision,
        )
    ]


def _msg_no_assoc_core(model: Model, message, owner, reads) -> list[Diagnostic]:
    if message.sort not in CALL_SORTS:
        return []
    source = _resolve_endpoint(model, message.source_lifeline_id, reads)
    if source is None or not source.resolved:
        return []
    target = _resolve_endpoint(model, message.target_lifeline_id, reads)
    if target is None or not target.resolved:
        return []
    if source.class_id == target.class_id:
        return []
    hit, dep = model.idx.associated_with_reads(source.class_id, target.class_id)
    if reads is not None:
        reads.update(dep)
    if hit:
        return []
    idx = model.idx
    label = message.name.strip() or message.id
    return [
        Diagnostic(
            RULE_MSG_NO_ASSOC,
            Severity.WARNING,
            f"no association connects class {idx.class_of(source.class_id).name!r} "
            f"to class {idx.class_of(target.class_id).name!r} for message {label!r}",
            message.id,
            owner,
            (source.class_id, target.class_id),
            model.revision,
        )
    ]


def _msg_private_core(model: Model, message, owner, reads) -> list[Diagnostic]:
    target, candidates = _call_candidates(model, message, reads)
    if not candidates:
        return []
    owner_id, nearest = candidates[0]
    visibility = nearest.visibility
    if visibility is Visibility.PUBLIC or visibility is Visibility.PACKAGE:
        return []
    source = _resolve_endpoint(model, message.source_lifeline_id, reads)
    if source is None or not source.resolved:
        return []
    violation: str | None = None
    if visibility is Visibility.PRIVATE:
        if source.class_id != target:
            violation = "private"
    else:  # protected: callable from the target class or its descendants
        ancestry, ancestry_reads = model.idx.ancestry(source.class_id)
        if reads is not None:
            reads.update(ancestry_reads)
        if source.class_id != target and target not in ancestry:
            violation = "protected"
    if violation is None:
        return []
    idx = model.idx
    return [
        Diagnostic(
            RULE_MSG_PRIVATE_OP,
            Severity.WARNING,
            f"operation {nearest.name!r} of class {idx.class_of(owner_id).name!r} "
            f"is {violation} and not callable from class "
            f"{idx.class_of(source.class_id).name!r}",
            message.id,
            owner,
            (nearest.id,),
            model.revision,
        )
    ]


def _lifeline_core(model: Model, lifeline, owner, reads) -> list[Diagnostic]:
    resolution, dep = model.idx.resolve_lifeline(lifeline.id)
    if reads is not None:
        reads.update(dep)
    if resolution.resolved:
        return []
    reason = resolution.reason
    if reason is UnresolvedReason.NO_TYPE:
        detail = "has neither a type reference nor a type name"
    elif reason is UnresolvedReason.DANGLING_REF:
        detail = f"references unknown classifier {lifeline.type_ref!r}"
    elif reason is UnresolvedReason.UNKNOWN_NAME:
        detail = f"names unknown class {lifeline.type_name!r}"
    else:
        detail = (
            f"names class {lifeline.type_name!r} which matches "
            f"{len(resolution.candidates)} classes"
        )
    return [
        Diagnostic(
            RULE_LIFELINE_UNDEF_TYPE,
            Severity.ERROR,
            f"lifeline {lifeline.name!r} {detail} ({reason.value})",
            lifeline.id,
            owner,
            resolution.candidates,
            model.revision,
        )
    ]


def _struct_core(model: Model, kind, element, owner, reads) -> list[Diagnostic]:
    idx = model.idx
    out: list[Diagnostic] = []

    def emit(detail: str, interaction_id=None):
        out.append(
            Diagnostic(
                RULE_STRUCT_WELLFORMED,
                Severity.ERROR,
                detail,
                element.id,
                interaction_id,
                (),
                model.revision,
            )
        )

    count = idx.id_counts[element.id]
    if count > 1:
        emit(f"element id {element.id!r} is used by {count} elements")

    if kind is ElementKind.CLASS:
        for super_id in element.superclass_ids:
            if reads is not None:
                reads.add(super_id)
            if idx.class_of(super_id) is None:
                emit(f"class {element.name!r} lists unknown superclass {super_id!r}")
        on_cycle, dep = idx.cycle_check(element.id)
        if reads is not None:
            reads.update(dep)
        if on_cycle:
            emit(f"class {element.name!r} participates in an inheritance cycle")
    elif kind is ElementKind.ASSOCIATION:
        for label, end in (("A", element.end_a), ("B", element.end_b)):
            if reads is not None:
                reads.add(end.class_id)
            if idx.class_of(end.class_id) is None:
                emit(f"end {label} references unknown class {end.class_id!r}")
    else:  # message
        if reads is not None:
            reads.add(owner)
            reads.add(element.source_lifeline_id)
            reads.add(element.target_lifeline_id)
        lifeline_ids = idx.lifeline_ids_by_interaction.get(owner, frozenset())
        for role, ref in (
            ("source", element.source_lifeline_id),
            ("target", element.target_lifeline_id),
        ):
            if ref not in lifeline_ids:
                interaction = idx.elements[owner][1]
                emit(
                    f"{role} endpoint {ref!r} is not a lifeline of interaction "
                    f"{interaction.name!r}",
                    interaction_id=owner,
                )
    return out


# --- subject-id wrappers (tracked entry points) -----------------------------------

_STRUCT_KINDS = (ElementKind.CLASS, ElementKind.ASSOCIATION, ElementKind.MESSAGE)


def _require(model: Model, subject_id: str, kinds) -> tuple:
    entry = model.idx.elements.get(subject_id)
    if entry is None or entry[0] not in kinds:
        wanted = "/".join(k.value for k in kinds)
        raise ModelLookupError(
            f"no {wanted} with id {subject_id!r} in model {model.model_id!r}"
        )
    return entry


def _message_checker(core):
    def checker(model: Model, message_id: str, reads) -> list[Diagnostic]:
        _, message, owner = _require(model, message_id, (ElementKind.MESSAGE,))
        if reads is not None:
            reads.add(message_id)
        return core(model, message, owner, reads)

    return checker


def _check_lifeline_type(model: Model, lifeline_id: str, reads) -> list[Diagnostic]:
    _, lifeline, owner = _require(model, lifeline_id, (ElementKind.LIFELINE,))
    if reads is not None:
        reads.add(lifeline_id)
    return _lifeline_core(model, lifeline, owner, reads)


def _check_structure(model: Model, element_id: str, reads) -> list[Diagnostic]:
    kind, element, owner = _require(model, element_id, _STRUCT_KINDS)
    if reads is not None:
        reads.add(element_id)
    return _struct_core(model, kind, element, owner, reads)


_MESSAGE_KINDS = (ElementKind.MESSAGE,)

_CATALOG: tuple[tuple[RuleDescriptor, object], ...] = (
    (
        RuleDescriptor(
            RULE_MSG_UNNAMED,
            _MESSAGE_KINDS,
            Severity.WARNING,
            "Message without a name",
            "A synchronous or asynchronous message must carry a non-blank name "
            "so it can be matched against an operation.",
        ),
        _message_checker(_msg_unnamed_core),
    ),
    (
        RuleDescriptor(
            RULE_MSG_UNDEF_OP,
            _MESSAGE_KINDS,
            Severity.ERROR,
            "Message calls an undefined operation",
            "A call message must name an operation owned by the target "
            "lifeline's class or one of its ancestors (case-sensitive).",
        ),
        _message_checker(_msg_undef_op_core),
    ),
    (
        RuleDescriptor(
            RULE_MSG_PARAM_MISMATCH,
            _MESSAGE_KINDS,
            Severity.ERROR,
            "Message arguments do not match any overload",
            "Among operations matching the message name, at least one must "
            "accept exactly as many in/inout parameters as the message "
            "carries arguments.",
        ),
        _message_checker(_msg_param_mismatch_core),
    ),
    (
        RuleDescriptor(
            RULE_MSG_NO_ASSOC,
            _MESSAGE_KINDS,
            Severity.WARNING,
            "Message between unassociated classes",
            "A call message between lifelines of two different classes "
            "expects an association linking the classes or their ancestors; "
            "self-messages are exempt.",
        ),
        _message_checker(_msg_no_assoc_core),
    ),
    (
        RuleDescriptor(
            RULE_LIFELINE_UNDEF_TYPE,
            (ElementKind.LIFELINE,),
            Severity.ERROR,
            "Lifeline without a resolvable type",
            "Each lifeline must resolve to exactly one class, either through "
            "its type reference or by unambiguous class name.",
        ),
        _check_lifeline_type,
    ),
    (
        RuleDescriptor(
            RULE_MSG_PRIVATE_OP,
            _MESSAGE_KINDS,
            Severity.WARNING,
            "Message calls an inaccessible operation",
            "The nearest operation matching a call message must be visible "
            "from the source class: private operations require the same "
            "class, protected ones a descendant.",
        ),
        _message_checker(_msg_private_core),
    ),
    (
        RuleDescriptor(
            RULE_STRUCT_WELLFORMED,
            (ElementKind.ASSOCIATION, ElementKind.CLASS, ElementKind.MESSAGE),
            Severity.ERROR,
            "Structurally broken element",
            "Duplicate element ids, dangling superclass or association-end "
            "references, inheritance cycles and message endpoints outside "
            "their interaction.",
        ),
        _check_structure,
    ),
)

_CHECKERS = {descriptor.rule_id: checker for descriptor, checker in _CATALOG}
_DESCRIPTORS = {descriptor.rule_id: descriptor for descriptor, _ in _CATALOG}

RULE_IDS: tuple[str, ...] = tuple(descriptor.rule_id for descriptor, _ in _CATALOG)

#: subject kind -> rule ids evaluated on elements of that kind
RULES_BY_SUBJECT_KIND: dict[ElementKind, tuple[str, ...]] = {}
for _descriptor, _ in _CATALOG:
    for _kind in _descriptor.subject_kinds:
        RULES_BY_SUBJECT_KIND.setdefault(_kind, ())
        RULES_BY_SUBJECT_KIND[_kind] += (_descriptor.rule_id,)

#: untracked fused dispatch used by the batch oracle, one entry per subject
#: kind: list of (rule order preserved) core functions.
MESSAGE_CORES = (
    _msg_unnamed_core,
    _msg_undef_op_core,
    _msg_param_mismatch_core,
    _msg_no_assoc_core,
    _msg_private_core,
)


def catalog() -> list[RuleDescriptor]:
    """The rule catalog, in stable order."""
    return [descriptor for descriptor, _ in _CATALOG]


def descriptor(rule_id: str) -> RuleDescriptor:
    try:
        return _DESCRIPTORS[rule_id]
    except KeyError:
        raise ModelLookupError(f"unknown rule {rule_id!r}") from None


def subjects_of(rule_id: str, model: Model) -> list[str]:
    """Ids of all elements the rule applies to, sorted by id."""
    kinds = descriptor(rule_id).subject_kinds
    subjects: set[str] = set()
    if ElementKind.CLASS in kinds:
        subjects.update(c.id for c in model.classes)
    if ElementKind.ASSOCIATION in kinds:
        subjects.update(a.id for a in model.associations)
    if ElementKind.LIFELINE in kinds:
        subjects.update(l.id for i in model.interactions for l in i.lifelines)
    if ElementKind.MESSAGE in kinds:
        subjects.update(m.id for i in model.interactions for m in i.messages)
    return sorted(subjects)


def evaluate(rule_id: str, model: Model, subject_id: str) -> EvaluationResult:
    """Evaluate one rule on one subject, recording its read-set.

    Pure in the snapshot: identical inputs produce identical results,
    including the read-set.  The read-set always contains the subject and
    every related element id of every diagnostic.
    """
    checker = _CHECKERS.get(rule_id)
    if checker is None:
        raise ModelLookupError(f"unknown rule {rule_id!r}")
    reads: set[str] = {subject_id}
    diagnostics = checker(model, subject_id, reads)
    if __debug__:
        for diag in diagnostics:
            missing = set(diag.related_element_ids) - reads
            assert not missing, f"{rule_id}: related ids {missing} escaped the read-set"
    return EvaluationResult(tuple(diagnostics), frozenset(reads))


def diagnostics_for(rule_id: str, model: Model, subject_id: str) -> list[Diagnostic]:
    """Untracked evaluation; same diagnostics as :func:`evaluate`."""
    checker = _CHECKERS.get(rule_id)
    if checker is None:
        raise ModelLookupError(f"unknown rule {rule_id!r}")
    return checker(model, subject_id, None)


# Public per-rule entry points.


def check_msg_unnamed(model: Model, message_id: str) -> EvaluationResult:
    return evaluate(RULE_MSG_UNNAMED, model, message_id)


def check_msg_undef_op(model: Model, message_id: str) -> EvaluationResult:
    return evaluate(RULE_MSG_UNDEF_OP, model, message_id)


def check_msg_param_mismatch(model: Model, message_id: str) -> EvaluationResult:
    return evaluate(RULE_MSG_PARAM_MISMATCH, model, message_id)


def check_msg_no_assoc(model: Model, message_id: str) -> EvaluationResult:
    return evaluate(RULE_MSG_NO_ASSOC, model, message_id)


def check_lifeline_type(model: Model, lifeline_id: str) -> EvaluationResult:
    return evaluate(RULE_LIFELINE_UNDEF_TYPE, model, lifeline_id)


def check_private_call(model: Model, message_id: str) -> EvaluationResult:
    return evaluate(RULE_MSG_PRIVATE_OP, model, message_id)


def check_structure(model: Model, element_id: str) -> EvaluationResult:
    return evaluate(RULE_STRUCT_WELLFORMED, model, element_id)


_REFERENCE_EXAMPLES = {
    RULE_MSG_UNNAMED: "a sync message with an empty or whitespace-only name",
    RULE_MSG_UNDEF_OP: "message `pay` sent to a lifeline of class `Order` that only defines `place` and `cancel`",
    RULE_MSG_PARAM_MISMATCH: "message `place` with no arguments calling `place(itemId)`",
    RULE_MSG_NO_ASSOC: "message from `Customer` to `Shipper` with no association between them",
    RULE_LIFELINE_UNDEF_TYPE: "a lifeline whose type name matches two classes",
    RULE_MSG_PRIVATE_OP: "message from `Customer` calling private `Order.cancel`",
    RULE_STRUCT_WELLFORMED: "an association end referencing a class id that does not exist",
}


def reference_markdown() -> str:
    """Rule reference document generated from the catalog."""
    lines = ["# Consistency rules", ""]
    for entry in catalog():
        kinds = ", ".join(k.value for k in entry.subject_kinds)
        lines += [
            f"## {entry.rule_id}",
            "",
            f"**{entry.title}** — severity `{entry.severity.value}`, subjects: {kinds}.",
            "",
            entry.description,
            "",
            f"Example: {_REFERENCE_EXAMPLES[entry.rule_id]}.",
            "",
        ]
    return "\n".join(lines)
