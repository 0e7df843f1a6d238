"""Incremental rule evaluation driven by change events.

The :class:`Engine` holds one model's evaluation state: the latest snapshot,
one :class:`~hv.rules.EvaluationResult` per (rule, live subject) pair, and
the dependency index mapping every read key to the pairs that read it.
Processing an event batch applies the events, derives the touched keys,
re-evaluates exactly the affected pairs on the new snapshot and returns the
diagnostic delta.

:func:`full_check` is the stateless batch oracle: it evaluates every pair
from scratch without touching any cached state.  After any processed batch,
``engine.current()`` must equal ``full_check(engine.snapshot)`` as a
multiset; the simulation harness asserts exactly that.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from hv import rules
from hv.diffing import ChangeEvent, EventKind, apply
from hv.errors import ResyncRequiredError
from hv.model import (
    CHILD_KINDS,
    DEP_ASSOC_TOPOLOGY,
    DEP_CLASS_NAMES,
    ElementKind,
    Model,
    ModelIndex,
)
from hv.rules import Diagnostic, EvaluationResult


@dataclass(frozen=True, slots=True)
class DiagnosticDelta:
    """Diagnostics added/removed by one event batch."""

    revision: int
    added: tuple[Diagnostic, ...] = ()
    removed: tuple[Diagnostic, ...] = ()

    @property
    def is_empty(self) -> bool:
        return not self.added and not self.removed

    def to_dict(self) -> dict:
        return {
            "revision": self.revision,
            "added": [d.to_dict() for d in self.added],
            "removed": [d.to_dict() for d in self.removed],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DiagnosticDelta":
        return cls(
            revision=data["revision"],
            added=tuple(Diagnostic.from_dict(d) for d in data.get("added", ())),
            removed=tuple(Diagnostic.from_dict(d) for d in data.get("removed", ())),
        )


def _touched_keys(event: ChangeEvent, pre: Model) -> set[str]:
    """Dependency keys an event invalidates.

    Child events touch their owner as well (rules depend on an owner's
    child list through the owner's id); class and association membership or
    retargeting touches the derived-map keys that name/pair lookups record.
    """
    keys = {event.element_id}
    if event.element_kind in CHILD_KINDS:
        owner = event.owner_id
        if owner is None:
            entry = pre.idx.entry(event.element_id)
            owner = entry[2] if entry is not None else None
        if owner is not None:
            keys.add(owner)
    if event.element_kind is ElementKind.CLASS:
        if event.kind is not EventKind.CHANGED or event.property == "name":
            keys.add(DEP_CLASS_NAMES)
    elif event.element_kind is ElementKind.ASSOCIATION:
        if event.kind is not EventKind.CHANGED or event.property in ("endA", "endB"):
            keys.add(DEP_ASSOC_TOPOLOGY)
    return keys


def _is_live(model: Model, rule_id: str, subject_id: str) -> bool:
    entry = model.idx.entry(subject_id)
    return entry is not None and entry[0] in rules.descriptor(rule_id).subject_kinds


class Engine:
    """Single-writer evaluation state for one model.

    ``process`` calls must be serialized by the caller; ``current`` reads a
    fully published state and may run concurrently with other readers.
    """

    def __init__(self, model: Model):
        self.snapshot = model
        self.last_seq = 0
        self.eval_counter = 0
        self.results: dict[tuple[str, str], EvaluationResult] = {}
        self._dep: dict[str, set[tuple[str, str]]] = {}
        for rule_id in rules.RULE_IDS:
            for subject_id in rules.subjects_of(rule_id, model):
                if _is_live(model, rule_id, subject_id):
                    self._evaluate_into((rule_id, subject_id), model)

    @property
    def revision(self) -> int:
        return self.snapshot.revision

    def _evaluate_into(self, pair: tuple[str, str], model: Model) -> EvaluationResult:
        result = rules.evaluate(pair[0], model, pair[1])
        self.eval_counter += 1
        self.results[pair] = result
        for key in result.read_set:
            self._dep.setdefault(key, set()).add(pair)
        return result

    def _drop_result(self, pair: tuple[str, str]) -> EvaluationResult | None:
        result = self.results.pop(pair, None)
        if result is not None:
            for key in result.read_set:
                bucket = self._dep.get(key)
                if bucket is not None:
                    bucket.discard(pair)
                    if not bucket:
                        del self._dep[key]
        return result

    def current(self) -> list[Diagnostic]:
        """All live diagnostics, sorted like :func:`full_check` output."""
        out = [d for result in self.results.values() for d in result.diagnostics]
        out.sort(key=lambda d: d.sort_key)
        return out

    def process(self, events) -> DiagnosticDelta:
        """Apply one event batch and return the diagnostic delta.

        Events with ``seq <= last_seq`` are dropped as at-least-once
        duplicates; the remaining ones must continue ``last_seq`` without a
        gap or the whole batch is rejected with ``ResyncRequiredError`` and
        the state stays untouched.  An inapplicable event raises
        ``StaleEventError`` (also leaving the state untouched).  The
        revision advances by one per batch that applies at least one event.
        """
        fresh = [e for e in events if e.seq > self.last_seq]
        expected = self.last_seq
        for event in fresh:
            expected += 1
            if event.seq != expected:
                raise ResyncRequiredError(
                    f"event seq {event.seq} does not continue {expected - 1}; resync required"
                )
        if not fresh:
            return DiagnosticDelta(revision=self.revision)

        pre = self.snapshot
        snapshot = pre
        touched: set[str] = set()
        affected: set[tuple[str, str]] = set()
        property_only = True
        for event in fresh:
            touched |= _touched_keys(event, snapshot)
            snapshot = apply(snapshot, event)
            if event.kind is not EventKind.CHANGED:
                property_only = False
                for rule_id in rules.RULES_BY_SUBJECT_KIND.get(event.element_kind, ()):
                    affected.add((rule_id, event.element_id))
        snapshot = replace(snapshot, revision=pre.revision + 1)
        if property_only:
            # Membership is unchanged: patch the previous index instead of
            # rebuilding it (linear in model size otherwise).
            patched = ModelIndex.patched_from(
                pre.idx,
                snapshot,
                [(e.element_kind, e.element_id, e.owner_id) for e in fresh],
            )
            if patched is not None:
                snapshot.__dict__["idx"] = patched

        for key in touched:
            affected |= self._dep.get(key, set())

        old_diags: list[Diagnostic] = []
        new_diags: list[Diagnostic] = []
        for pair in sorted(affected):
            old = self._drop_result(pair)
            if old is not None:
                old_diags.extend(old.diagnostics)
            if _is_live(snapshot, *pair):
                new_diags.extend(self._evaluate_into(pair, snapshot).diagnostics)

        old_map = {d.identity: d for d in old_diags}
        new_map = {d.identity: d for d in new_diags}
        added = sorted(
            (d for key, d in new_map.items() if key not in old_map),
            key=lambda d: d.sort_key,
        )
        removed = sorted(
            (d for key, d in old_map.items() if key not in new_map),
            key=lambda d: d.sort_key,
        )

        self.snapshot = snapshot
        self.last_seq = fresh[-1].seq
        return DiagnosticDelta(
            revision=snapshot.revision, added=tuple(added), removed=tuple(removed)
        )

    def audit(self) -> None:
        """Verify the index-inversion and subject-liveness invariants.

        Intended for tests and debugging; raises ``AssertionError`` with a
        description of the first violation found.
        """
        rebuilt: dict[str, set[tuple[str, str]]] = {}
        for pair, result in self.results.items():
            for key in result.read_set:
                rebuilt.setdefault(key, set()).add(pair)
        if rebuilt != self._dep:
            extra = {k: v for k, v in self._dep.items() if rebuilt.get(k) != v}
            missing = {k: v for k, v in rebuilt.items() if self._dep.get(k) != v}
            raise AssertionError(
                f"dependency index out of sync: extra={extra!r} missing={missing!r}"
            )
        expected = {
            (rule_id, subject_id)
            for rule_id in rules.RULE_IDS
            for subject_id in rules.subjects_of(rule_id, self.snapshot)
            if _is_live(self.snapshot, rule_id, subject_id)
        }
        actual = set(self.results.keys())
        if expected != actual:
            raise AssertionError(
                f"stale result entries: extra={actual - expected!r} "
                f"missing={expected - actual!r}"
            )
        for pair, result in self.results.items():
            if pair[1] not in result.read_set:
                raise AssertionError(f"{pair}: read-set lost its subject")


def full_check(model: Model, rule_ids=None) -> list[Diagnostic]:
    """Stateless evaluation of every (rule, subject) pair.

    The ground truth for the incremental engine: no result caching, no
    dependency bookkeeping, every rule re-run against the snapshot.  The
    snapshot is re-wrapped so its element index and derived lookup tables
    are rebuilt from scratch: the oracle shares no cached state with the
    engine that produced the snapshot.  Walks the element table once (same
    first-occurrence identity as the engine) so duplicate-id pathologies
    check out identically.  Sorted by (rule id, element id, message).
    """
    model = replace(model)  # drops the cached index
    out: list[Diagnostic] = []
    if rule_ids is not None:
        wanted = set(rule_ids)
        for subject_id, (kind, _, _) in model.idx.elements.items():
            for rule_id in rules.RULES_BY_SUBJECT_KIND.get(kind, ()):
                if rule_id in wanted:
                    out.extend(rules.diagnostics_for(rule_id, model, subject_id))
        out.sort(key=lambda d: d.sort_key)
        return out
    message_cores = rules.MESSAGE_CORES
    struct_core = rules._struct_core
    lifeline_core = rules._lifeline_core
    for kind, element, owner in model.idx.elements.values():
        if kind is ElementKind.MESSAGE:
            for core in message_cores:
                out.extend(core(model, element, owner, None))
            out.extend(struct_core(model, kind, element, owner, None))
        elif kind is ElementKind.LIFELINE:
            out.extend(lifeline_core(model, element, owner, None))
        elif kind is ElementKind.CLASS or kind is ElementKind.ASSOCIATION:
            out.extend(struct_core(model, kind, element, owner, None))
    out.sort(key=lambda d: d.sort_key)
    return out


def full_check_evaluation_count(model: Model) -> int:
    """How many evaluations one full check performs, computed arithmetically."""
    message_count = sum(len(i.messages) for i in model.interactions)
    lifeline_count = sum(len(i.lifelines) for i in model.interactions)
    class_count = len(model.classes)
    association_count = len(model.associations)
    # Five message rules + the lifeline rule + structural checks on
    # classes, associations and messages.
    return 5 * message_count + lifeline_count + (
        class_count + association_count + message_count
    )
