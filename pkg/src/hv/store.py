"""Revisioned diagnostic storage with aggregation queries.

The store keeps, per model, the current diagnostic set, a recomputed
summary and a bounded ring of recent deltas for stream catch-up.  It sits
on a narrow key-value backend contract (get / put / delete / atomic
multi-key swap) whose default implementation is in-memory; an external
cache server can be slotted in behind the same contract without touching
the store logic.

Writers follow the same single-writer-per-model discipline as the engine;
reads only ever observe fully swapped states.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Protocol

from hv.engine import DiagnosticDelta
from hv.errors import DeltaInconsistentError, ResyncRequiredError
from hv.rules import Diagnostic, Severity


class KeyValueBackend(Protocol):
    """Minimal storage contract: string keys, opaque immutable values."""

    def get(self, key: str): ...

    def put(self, key: str, value) -> None: ...

    def delete(self, key: str) -> None: ...

    def swap(self, updates: dict) -> None:
        """Apply several puts/deletes atomically (None value = delete)."""


class MemoryBackend:
    def __init__(self) -> None:
        self._data: dict[str, object] = {}
        self._lock = threading.Lock()

    def get(self, key: str):
        with self._lock:
            return self._data.get(key)

    def put(self, key: str, value) -> None:
        with self._lock:
            self._data[key] = value

    def delete(self, key: str) -> None:
        with self._lock:
            self._data.pop(key, None)

    def swap(self, updates: dict) -> None:
        with self._lock:
            for key, value in updates.items():
                if value is None:
                    self._data.pop(key, None)
                else:
                    self._data[key] = value


@dataclass(frozen=True, slots=True)
class Summary:
    model_id: str
    revision: int
    total: int
    by_rule: dict = field(default_factory=dict)
    by_severity: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "modelId": self.model_id,
            "revision": self.revision,
            "total": self.total,
            "byRule": dict(self.by_rule),
            "bySeverity": dict(self.by_severity),
        }


def summarize(model_id: str, revision: int, diagnostics) -> Summary:
    by_rule: dict[str, int] = {}
    by_severity: dict[str, int] = {}
    total = 0
    for diag in diagnostics:
        total += 1
        by_rule[diag.rule_id] = by_rule.get(diag.rule_id, 0) + 1
        severity = diag.severity.value
        by_severity[severity] = by_severity.get(severity, 0) + 1
    return Summary(
        model_id=model_id,
        revision=revision,
        total=total,
        by_rule=dict(sorted(by_rule.items())),
        by_severity=dict(sorted(by_severity.items())),
    )


_SEP = "\x00"  # model ids are free-form; NUL cannot appear in sane ids


class DiagnosticStore:
    """Per-model current set + summary + delta ring buffer."""

    def __init__(self, backend: KeyValueBackend | None = None, ring_size: int = 256):
        self.backend: KeyValueBackend = backend if backend is not None else MemoryBackend()
        self.ring_size = ring_size
        self._locks: dict[str, threading.RLock] = {}
        self._registry_lock = threading.Lock()

    def _lock_for(self, model_id: str) -> threading.RLock:
        with self._registry_lock:
            lock = self._locks.get(model_id)
            if lock is None:
                lock = self._locks[model_id] = threading.RLock()
            return lock

    @staticmethod
    def _key(model_id: str, part: str) -> str:
        return f"{model_id}{_SEP}{part}"

    def revision_of(self, model_id: str) -> int | None:
        meta = self.backend.get(self._key(model_id, "meta"))
        return meta["revision"] if meta else None

    def reset(self, model_id: str, revision: int, diagnostics) -> None:
        """Replace all state for a model (fresh snapshot was checked)."""
        with self._lock_for(model_id):
            current = {d.identity: d for d in diagnostics}
            self.backend.swap(
                {
                    self._key(model_id, "meta"): {"revision": revision},
                    self._key(model_id, "current"): current,
                    self._key(model_id, "summary"): summarize(
                        model_id, revision, current.values()
                    ),
                    self._key(model_id, "deltas"): (),
                }
            )

    def put_delta(self, model_id: str, revision: int, delta: DiagnosticDelta) -> None:
        """Fold one delta into the current set; revisions must be contiguous."""
        with self._lock_for(model_id):
            stored = self.revision_of(model_id)
            if stored is not None and revision != stored + 1:
                raise ResyncRequiredError(
                    f"delta revision {revision} does not continue stored revision {stored}"
                )
            current = dict(self.backend.get(self._key(model_id, "current")) or {})
            for diag in delta.removed:
                if diag.identity not in current:
                    raise DeltaInconsistentError(
                        f"delta removes diagnostic not in current set: {diag.identity!r}"
                    )
                del current[diag.identity]
            for diag in delta.added:
                if diag.identity in current:
                    raise DeltaInconsistentError(
                        f"delta adds diagnostic already in current set: {diag.identity!r}"
                    )
                current[diag.identity] = diag
            deltas = tuple(self.backend.get(self._key(model_id, "deltas")) or ())
            deltas = (deltas + (delta,))[-self.ring_size :]
            self.backend.swap(
                {
                    self._key(model_id, "meta"): {"revision": revision},
                    self._key(model_id, "current"): current,
                    self._key(model_id, "summary"): summarize(
                        model_id, revision, current.values()
                    ),
                    self._key(model_id, "deltas"): deltas,
                }
            )

    def get_current(
        self,
        model_id: str,
        *,
        rule_id: str | None = None,
        severity: Severity | str | None = None,
        interaction_id: str | None = None,
    ) -> tuple[int, list[Diagnostic]]:
        """(revision, diagnostics) filtered and sorted; unknown model -> (0, [])."""
        revision = self.revision_of(model_id)
        if revision is None:
            return 0, []
        current = self.backend.get(self._key(model_id, "current")) or {}
        wanted_severity = Severity(severity) if severity is not None else None
        out = [
            diag
            for diag in current.values()
            if (rule_id is None or diag.rule_id == rule_id)
            and (wanted_severity is None or diag.severity is wanted_severity)
            and (interaction_id is None or diag.interaction_id == interaction_id)
        ]
        out.sort(key=lambda d: d.sort_key)
        return revision, out

    def get_summary(self, model_id: str) -> Summary:
        summary = self.backend.get(self._key(model_id, "summary"))
        if summary is None:
            return Summary(model_id=model_id, revision=0, total=0)
        return summary

    def get_deltas_since(self, model_id: str, revision: int) -> list[DiagnosticDelta]:
        """Contiguous deltas newer than ``revision``, if still buffered.

        Raises ``ResyncRequiredError`` when the model is unknown, the
        caller is ahead of the store, or the required history has been
        evicted from the ring.
        """
        stored = self.revision_of(model_id)
        if stored is None:
            raise ResyncRequiredError(f"unknown model {model_id!r}; resync required")
        if revision > stored:
            raise ResyncRequiredError(
                f"revision {revision} is ahead of stored revision {stored}; resync required"
            )
        if revision == stored:
            return []
        deltas = tuple(self.backend.get(self._key(model_id, "deltas")) or ())
        wanted = [d for d in deltas if d.revision > revision]
        if not wanted or wanted[0].revision != revision + 1:
            raise ResyncRequiredError(
                f"deltas after revision {revision} were evicted; resync required"
            )
        return wanted
