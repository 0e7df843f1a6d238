"""Seeded workload generation and the incremental-vs-batch equivalence harness.

Everything here is deterministic in the seed: the random stream is a
splitmix64 generator (documented below) so the same parameters reproduce
the same models, the same edit scripts and the same evaluation counts on
any platform.  Wall-clock percentiles are the only non-deterministic
report fields.

``verify_equivalence`` is the package's primary correctness harness: it
feeds generated event batches through an :class:`~hv.engine.Engine` and
asserts after every step that the incrementally maintained diagnostics
equal a stateless :func:`~hv.engine.full_check` of the same snapshot.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

from hv import canonical
from hv.diffing import ChangeEvent, EventKind, apply
from hv.engine import Engine, full_check, full_check_evaluation_count
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

_MASK = (1 << 64) - 1


class Rng:
    """splitmix64: state += 0x9E3779B97F4A7C15; two xor-shift multiplies.

    Chosen for trivial cross-language reproducibility.  ``below`` reduces by
    modulo (the bias is irrelevant for workload generation and keeps the
    stream portable).
    """

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        return self.next_u64() % n

    def in_range(self, bounds: tuple[int, int]) -> int:
        lo, hi = bounds
        return lo if hi <= lo else lo + self.below(hi - lo + 1)

    def choice(self, seq):
        return seq[self.below(len(seq))]

    def chance(self, per_mille: int) -> bool:
        """True with probability per_mille/1000 (fixed-point for portability)."""
        return self.below(1000) < per_mille


EDIT_KINDS = (
    "renameOp",
    "addOp",
    "removeOp",
    "renameMsg",
    "addMsg",
    "removeMsg",
    "retargetLifeline",
    "addAssoc",
    "removeAssoc",
    "changeParams",
)

DEFAULT_EDIT_MIX = {
    "renameOp": 3,
    "addOp": 2,
    "removeOp": 1,
    "renameMsg": 3,
    "addMsg": 2,
    "removeMsg": 1,
    "retargetLifeline": 1,
    "addAssoc": 1,
    "removeAssoc": 1,
    "changeParams": 2,
}


@dataclass(slots=True)
class SimParams:
    seed: int = 42
    classes: int = 30
    ops_per_class: tuple[int, int] = (1, 6)
    interactions: int = 8
    messages_per_interaction: tuple[int, int] = (2, 10)
    steps: int = 200
    batch_size: tuple[int, int] = (1, 4)
    edit_mix: dict = field(default_factory=lambda: dict(DEFAULT_EDIT_MIX))
    undefined_op_per_mille: int = 200  # P(named message targets no operation)
    structural_fault_per_mille: int = 0
    inject_fault_step: int | None = None  # test mode: force one comparison to fail

    def validate(self) -> None:
        if not self.edit_mix or any(w < 0 for w in self.edit_mix.values()):
            raise ValueError("edit mix weights must be non-negative")
        if not any(self.edit_mix.values()):
            raise ValueError("at least one edit mix weight must be positive")
        unknown = set(self.edit_mix) - set(EDIT_KINDS)
        if unknown:
            raise ValueError(f"unknown edit kinds in mix: {sorted(unknown)}")


@dataclass(slots=True)
class SimReport:
    seed: int
    steps: int
    equivalence_ok: bool
    first_failure_step: int | None
    incremental_evals: int
    batch_evals_equivalent: int
    speedup_ratio: float
    final_diagnostics: int
    p50_ms: float
    p95_ms: float
    total_seconds: float

    def deterministic_fields(self) -> dict:
        return {
            "seed": self.seed,
            "steps": self.steps,
            "equivalence": "pass" if self.equivalence_ok else "fail",
            "firstFailureStep": self.first_failure_step,
            "incrementalEvals": self.incremental_evals,
            "batchEvalsEquivalent": self.batch_evals_equivalent,
            "speedupRatio": round(self.speedup_ratio, 3),
            "finalDiagnostics": self.final_diagnostics,
        }

    def to_dict(self) -> dict:
        out = self.deterministic_fields()
        out["wallTimes"] = {
            "p50Ms": round(self.p50_ms, 3),
            "p95Ms": round(self.p95_ms, 3),
            "totalSeconds": round(self.total_seconds, 3),
        }
        return out

    def to_text(self) -> str:
        status = "PASS" if self.equivalence_ok else f"FAIL at step {self.first_failure_step}"
        return "\n".join(
            [
                f"seed={self.seed} steps={self.steps} equivalence={status}",
                f"incremental_evals={self.incremental_evals} "
                f"batch_evals_equivalent={self.batch_evals_equivalent} "
                f"speedup={self.speedup_ratio:.1f}x",
                f"final_diagnostics={self.final_diagnostics}",
                f"process_latency_ms p50={self.p50_ms:.3f} p95={self.p95_ms:.3f} "
                f"total_s={self.total_seconds:.2f}",
            ]
        )


_TYPE_NAMES = ("int", "string", "bool", "Date")
_MULTIPLICITIES = ("1", "0..1", "0..*", "1..*")


def _op_name_pool(params: SimParams) -> int:
    return max(4, params.classes * 2)


def generate_model(params: SimParams, model_id: str = "sim") -> Model:
    """Deterministic model for a seed; structurally clean unless faults are on."""
    rng = Rng(params.seed)
    pool = _op_name_pool(params)

    classes: list[Class] = []
    class_names: list[str] = []
    for k in range(params.classes):
        if k > 0 and rng.chance(50):
            name = class_names[rng.below(len(class_names))]  # deliberate duplicate
        else:
            name = f"Class{k}"
        class_names.append(name)
        supers: tuple[str, ...] = ()
        if k > 0 and rng.chance(300):
            supers = (f"c{rng.below(k):04d}",)
        if params.structural_fault_per_mille and rng.chance(params.structural_fault_per_mille):
            supers = supers + (f"missing{k}",)
        ops = []
        for j in range(rng.in_range(params.ops_per_class)):
            op_params = tuple(
                Parameter(
                    name=f"p{i}",
                    type_name=rng.choice(_TYPE_NAMES),
                    direction=(
                        ParameterDirection.IN
                        if rng.chance(800)
                        else rng.choice((ParameterDirection.INOUT, ParameterDirection.OUT))
                    ),
                )
                for i in range(rng.below(4))
            )
            roll = rng.below(1000)
            if roll < 700:
                visibility = Visibility.PUBLIC
            elif roll < 850:
                visibility = Visibility.PRIVATE
            elif roll < 950:
                visibility = Visibility.PROTECTED
            else:
                visibility = Visibility.PACKAGE
            ops.append(
                Operation(
                    id=f"c{k:04d}-o{j}",
                    name=f"op{rng.below(pool)}",
                    visibility=visibility,
                    parameters=op_params,
                    return_type_name="int" if rng.chance(300) else None,
                )
            )
        attrs = tuple(
            Attribute(id=f"c{k:04d}-t{j}", name=f"attr{j}", type_name=rng.choice(_TYPE_NAMES))
            for j in range(rng.below(3))
        )
        classes.append(
            Class(
                id=f"c{k:04d}",
                name=name,
                is_abstract=rng.chance(100),
                superclass_ids=supers,
                attributes=attrs,
                operations=tuple(ops),
            )
        )

    enums = tuple(
        Enumeration(
            id=f"e{k:04d}",
            name=f"Enum{k}",
            literals=tuple(f"LIT{i}" for i in range(2 + rng.below(3))),
        )
        for k in range(max(1, params.classes // 10))
    )

    class_by_id = {c.id: c for c in classes}
    interactions: list[Interaction] = []
    message_pairs: list[tuple[str, str]] = []
    seen_pairs: set[tuple[str, str]] = set()
    for i in range(params.interactions):
        lifelines: list[Lifeline] = []
        lifeline_class: dict[str, str | None] = {}
        for j in range(rng.in_range((2, 5))):
            lifeline_id = f"i{i:04d}-l{j}"
            type_ref = type_name = None
            resolved: str | None = None
            roll = rng.below(1000)
            if classes and roll < 850:
                resolved = rng.choice(classes).id
                type_ref = resolved
            elif classes and roll < 900:
                cls = rng.choice(classes)
                type_name = cls.name
                resolved = cls.id
            elif roll < 950:
                type_name = f"Ghost{rng.below(1000)}"
            lifelines.append(
                Lifeline(id=lifeline_id, name=f"p{j}", type_ref=type_ref, type_name=type_name)
            )
            lifeline_class[lifeline_id] = resolved

        messages: list[Message] = []
        for j in range(rng.in_range(params.messages_per_interaction)):
            source = rng.choice(lifelines)
            target = source if rng.chance(100) else rng.choice(lifelines)
            target_class = lifeline_class.get(target.id)
            name, arguments = _draw_call(rng, params, class_by_id, target_class, pool)
            roll = rng.below(1000)
            if roll < 600:
                sort = MessageSort.SYNC
            elif roll < 850:
                sort = MessageSort.ASYNC
            elif roll < 950:
                sort = MessageSort.REPLY
            else:
                sort = MessageSort.CREATE
            messages.append(
                Message(
                    id=f"i{i:04d}-m{j}",
                    name=name,
                    sort=sort,
                    source_lifeline_id=source.id,
                    target_lifeline_id=target.id,
                    arguments=arguments,
                )
            )
            source_class = lifeline_class.get(source.id)
            if source_class and target_class and source_class != target_class:
                pair = tuple(sorted((source_class, target_class)))
                if pair not in seen_pairs:
                    seen_pairs.add(pair)
                    message_pairs.append(pair)
        interactions.append(
            Interaction(
                id=f"i{i:04d}",
                name=f"Scenario{i}",
                lifelines=tuple(lifelines),
                messages=tuple(messages),
            )
        )

    associations: list[Association] = []
    for pair in message_pairs:
        if rng.chance(700):
            associations.append(_make_assoc(rng, f"a{len(associations):04d}", pair[0], pair[1]))
    for _ in range(params.classes // 5):
        if len(classes) >= 2:
            a = rng.choice(classes).id
            b = rng.choice(classes).id
            associations.append(_make_assoc(rng, f"a{len(associations):04d}", a, b))

    return Model(
        model_id=model_id,
        revision=0,
        classes=tuple(classes),
        enumerations=enums,
        associations=tuple(associations),
        interactions=tuple(interactions),
    )


def _draw_call(rng: Rng, params: SimParams, class_by_id, target_class, pool):
    """Message name + arguments, biased toward real operations of the target."""
    if rng.chance(50):
        return "", ()
    ops = _reachable_ops(class_by_id, target_class)
    if ops and not rng.chance(params.undefined_op_per_mille):
        op = rng.choice(ops)
        arity = op.input_arity()
        if rng.chance(150):
            arity += 1
        return op.name, tuple(f"arg{i}" for i in range(arity))
    return f"op{rng.below(pool)}", tuple(f"arg{i}" for i in range(rng.below(3)))


def _reachable_ops(class_by_id, class_id) -> list[Operation]:
    ops: list[Operation] = []
    seen: set[str] = set()
    queue = [class_id] if class_id else []
    while queue:
        current = queue.pop(0)
        if current in seen:
            continue
        seen.add(current)
        cls = class_by_id.get(current)
        if cls is None:
            continue
        ops.extend(cls.operations)
        queue.extend(cls.superclass_ids)
    return ops


def _make_assoc(rng: Rng, assoc_id: str, class_a: str, class_b: str) -> Association:
    return Association(
        id=assoc_id,
        end_a=AssociationEnd(class_a, rng.choice(_MULTIPLICITIES), rng.chance(800)),
        end_b=AssociationEnd(class_b, rng.choice(_MULTIPLICITIES), rng.chance(800)),
    )


# --- edit generation ------------------------------------------------------------


@dataclass(slots=True)
class SimState:
    """Rolling edit-stream state (rng, sequence numbers, fresh-id counter)."""

    rng: Rng
    next_seq: int = 1
    gen_counter: int = 0

    def fresh_id(self, tag: str) -> str:
        self.gen_counter += 1
        return f"gen{self.gen_counter:06d}-{tag}"


def edit_rng_seed(seed: int) -> int:
    """The edit stream gets its own documented offset of the model seed."""
    return (seed ^ 0x9E3779B97F4A7C15) & _MASK


def _all_ops(model: Model) -> list[tuple[str, Operation]]:
    return [(c.id, op) for c in model.classes for op in c.operations]


def _all_messages(model: Model) -> list[tuple[str, Message]]:
    return [(i.id, m) for i in model.interactions for m in i.messages]


def _all_lifelines(model: Model) -> list[tuple[str, Lifeline]]:
    return [(i.id, l) for i in model.interactions for l in i.lifelines]


def _message_name_pool(rng: Rng, model: Model, params: SimParams) -> str:
    messages = _all_messages(model)
    if messages and rng.chance(500):
        name = rng.choice(messages)[1].name
        if name:
            return name
    return f"op{rng.below(_op_name_pool(params))}"


class _EditFactory:
    """Builds applicable events against a rolling snapshot."""

    def __init__(self, params: SimParams, state: SimState):
        self.params = params
        self.state = state

    def _event(self, model: Model, **kwargs) -> ChangeEvent:
        event = ChangeEvent(
            seq=self.state.next_seq,
            model_id=model.model_id,
            revision=model.revision + 1,
            **kwargs,
        )
        self.state.next_seq += 1
        return event

    def build(self, kind: str, model: Model) -> ChangeEvent | list[ChangeEvent] | None:
        return getattr(self, "_" + kind)(model)

    def _renameOp(self, model: Model):
        ops = _all_ops(model)
        if not ops:
            return None
        rng = self.state.rng
        owner, op = rng.choice(ops)
        new_name = _message_name_pool(rng, model, self.params)
        if new_name == op.name:
            new_name = f"{new_name}_r{rng.below(100)}"
        return self._event(
            model,
            kind=EventKind.CHANGED,
            element_kind=ElementKind.OPERATION,
            element_id=op.id,
            owner_id=owner,
            property="name",
            old_value=op.name,
            new_value=new_name,
        )

    def _addOp(self, model: Model):
        if not model.classes:
            return None
        rng = self.state.rng
        cls = rng.choice(model.classes)
        op = Operation(
            id=self.state.fresh_id("op"),
            name=_message_name_pool(rng, model, self.params),
            visibility=Visibility.PUBLIC if rng.chance(800) else Visibility.PRIVATE,
            parameters=tuple(
                Parameter(name=f"p{i}", type_name=rng.choice(_TYPE_NAMES))
                for i in range(rng.below(3))
            ),
        )
        return self._event(
            model,
            kind=EventKind.ADDED,
            element_kind=ElementKind.OPERATION,
            element_id=op.id,
            owner_id=cls.id,
            payload=canonical.operation_to_dict(op),
        )

    def _removeOp(self, model: Model):
        ops = _all_ops(model)
        if not ops:
            return None
        owner, op = self.state.rng.choice(ops)
        return self._event(
            model,
            kind=EventKind.REMOVED,
            element_kind=ElementKind.OPERATION,
            element_id=op.id,
            owner_id=owner,
        )

    def _renameMsg(self, model: Model):
        messages = _all_messages(model)
        if not messages:
            return None
        rng = self.state.rng
        owner, message = rng.choice(messages)
        if rng.chance(100):
            new_name = ""
        else:
            new_name = _message_name_pool(rng, model, self.params)
        if new_name == message.name:
            return None
        return self._event(
            model,
            kind=EventKind.CHANGED,
            element_kind=ElementKind.MESSAGE,
            element_id=message.id,
            owner_id=owner,
            property="name",
            old_value=message.name,
            new_value=new_name,
        )

    def _addMsg(self, model: Model):
        candidates = [i for i in model.interactions if i.lifelines]
        if not candidates:
            return None
        rng = self.state.rng
        inter = rng.choice(candidates)
        source = rng.choice(inter.lifelines)
        target = rng.choice(inter.lifelines)
        message = Message(
            id=self.state.fresh_id("msg"),
            name=_message_name_pool(rng, model, self.params) if not rng.chance(100) else "",
            sort=MessageSort.SYNC if rng.chance(700) else MessageSort.ASYNC,
            source_lifeline_id=source.id,
            target_lifeline_id=target.id,
            arguments=tuple(f"arg{i}" for i in range(rng.below(3))),
        )
        return self._event(
            model,
            kind=EventKind.ADDED,
            element_kind=ElementKind.MESSAGE,
            element_id=message.id,
            owner_id=inter.id,
            payload=canonical.message_to_dict(message),
        )

    def _removeMsg(self, model: Model):
        messages = _all_messages(model)
        if not messages:
            return None
        owner, message = self.state.rng.choice(messages)
        return self._event(
            model,
            kind=EventKind.REMOVED,
            element_kind=ElementKind.MESSAGE,
            element_id=message.id,
            owner_id=owner,
        )

    def _retargetLifeline(self, model: Model):
        lifelines = _all_lifelines(model)
        if not lifelines:
            return None
        rng = self.state.rng
        owner, lifeline = rng.choice(lifelines)
        roll = rng.below(1000)
        new_ref: str | None = None
        new_name: str | None = None
        if model.classes and roll < 600:
            new_ref = rng.choice(model.classes).id
        elif roll < 800:
            new_ref = f"ghost{rng.below(1000)}"
        elif model.classes and roll < 900:
            new_name = rng.choice(model.classes).name
        events = []
        if lifeline.type_ref != new_ref:
            events.append(
                self._event(
                    model,
                    kind=EventKind.CHANGED,
                    element_kind=ElementKind.LIFELINE,
                    element_id=lifeline.id,
                    owner_id=owner,
                    property="typeRef",
                    old_value=lifeline.type_ref,
                    new_value=new_ref,
                )
            )
        if lifeline.type_name != new_name:
            events.append(
                self._event(
                    model,
                    kind=EventKind.CHANGED,
                    element_kind=ElementKind.LIFELINE,
                    element_id=lifeline.id,
                    owner_id=owner,
                    property="typeName",
                    old_value=lifeline.type_name,
                    new_value=new_name,
                )
            )
        return events or None

    def _addAssoc(self, model: Model):
        if not model.classes:
            return None
        rng = self.state.rng
        assoc = _make_assoc(
            rng,
            self.state.fresh_id("as"),
            rng.choice(model.classes).id,
            rng.choice(model.classes).id,
        )
        return self._event(
            model,
            kind=EventKind.ADDED,
            element_kind=ElementKind.ASSOCIATION,
            element_id=assoc.id,
            payload=canonical.association_to_dict(assoc),
        )

    def _removeAssoc(self, model: Model):
        if not model.associations:
            return None
        assoc = self.state.rng.choice(model.associations)
        return self._event(
            model,
            kind=EventKind.REMOVED,
            element_kind=ElementKind.ASSOCIATION,
            element_id=assoc.id,
        )

    def _changeParams(self, model: Model):
        ops = _all_ops(model)
        if not ops:
            return None
        rng = self.state.rng
        owner, op = rng.choice(ops)
        new_params = tuple(
            Parameter(name=f"p{i}", type_name=rng.choice(_TYPE_NAMES))
            for i in range(rng.below(4))
        )
        old_value = [canonical.parameter_to_dict(p) for p in op.parameters]
        new_value = [canonical.parameter_to_dict(p) for p in new_params]
        if old_value == new_value:
            return None
        return self._event(
            model,
            kind=EventKind.CHANGED,
            element_kind=ElementKind.OPERATION,
            element_id=op.id,
            owner_id=owner,
            property="parameterList",
            old_value=old_value,
            new_value=new_value,
        )

    # Fallback when 16 weighted draws produced nothing applicable.
    def fallback(self, model: Model):
        for kind in ("renameOp", "renameMsg"):
            built = self.build(kind, model)
            if built is not None:
                return built
        for inter in model.interactions:
            return self._event(
                model,
                kind=EventKind.CHANGED,
                element_kind=ElementKind.INTERACTION,
                element_id=inter.id,
                property="name",
                old_value=inter.name,
                new_value=f"{inter.name}_r{self.state.rng.below(100)}",
            )
        cls = Class(id=self.state.fresh_id("cls"), name="Fallback")
        return self._event(
            model,
            kind=EventKind.ADDED,
            element_kind=ElementKind.CLASS,
            element_id=cls.id,
            payload=canonical.class_to_dict(cls),
        )


def generate_edits(params: SimParams, state: SimState, model: Model) -> tuple[list[ChangeEvent], Model]:
    """One applicable event batch; returns it plus the post-batch snapshot."""
    factory = _EditFactory(params, state)
    rng = state.rng
    mix = [(kind, weight) for kind, weight in sorted(params.edit_mix.items()) if weight > 0]
    total_weight = sum(weight for _, weight in mix)
    batch: list[ChangeEvent] = []
    for _ in range(rng.in_range(params.batch_size)):
        built = None
        for _attempt in range(16):
            roll = rng.below(total_weight)
            for kind, weight in mix:
                if roll < weight:
                    built = factory.build(kind, model)
                    break
                roll -= weight
            if built is not None:
                break
        if built is None:
            built = factory.fallback(model)
        events = built if isinstance(built, list) else [built]
        for event in events:
            model = apply(model, event)
            batch.append(event)
    return batch, model


# --- harness --------------------------------------------------------------------


def _comparable(diag) -> tuple:
    # model_revision is bookkeeping, not content: incremental evaluation
    # legitimately keeps older revisions on untouched diagnostics.
    return (
        diag.rule_id,
        diag.severity.value,
        diag.element_id,
        diag.interaction_id,
        diag.related_element_ids,
        diag.message,
    )


def _percentile(values: list[float], q: float) -> float:
    if not values:
        return 0.0
    ordered = sorted(values)
    rank = max(0, math.ceil(q * len(ordered)) - 1)
    return ordered[rank]


def verify_equivalence(params: SimParams) -> SimReport:
    """Run the generated workload, asserting current == full_check per step."""
    params.validate()
    started = time.perf_counter()
    model = generate_model(params)
    engine = Engine(model)
    init_evals = engine.eval_counter
    state = SimState(Rng(edit_rng_seed(params.seed)))

    equivalence_ok = True
    first_failure: int | None = None
    batch_equivalent = 0
    durations: list[float] = []
    from collections import Counter

    for step in range(1, params.steps + 1):
        batch, _ = generate_edits(params, state, engine.snapshot)
        t0 = time.perf_counter()
        engine.process(batch)
        durations.append((time.perf_counter() - t0) * 1000.0)
        batch_equivalent += full_check_evaluation_count(engine.snapshot)
        current = [_comparable(d) for d in engine.current()]
        oracle = [_comparable(d) for d in full_check(engine.snapshot)]
        if params.inject_fault_step == step:
            current = current[1:] if current else [("injected", "error", "x", None, (), "fault")]
        # Both sides are sorted the same way, so list equality is the multiset
        # check; Counter only arbitrates genuine mismatches.
        if current != oracle and Counter(current) != Counter(oracle):
            equivalence_ok = False
            first_failure = step
            break

    incremental = engine.eval_counter - init_evals
    speedup = (batch_equivalent / incremental) if incremental else 1.0
    return SimReport(
        seed=params.seed,
        steps=params.steps,
        equivalence_ok=equivalence_ok,
        first_failure_step=first_failure,
        incremental_evals=incremental,
        batch_evals_equivalent=batch_equivalent,
        speedup_ratio=speedup,
        final_diagnostics=len(engine.current()),
        p50_ms=_percentile(durations, 0.50),
        p95_ms=_percentile(durations, 0.95),
        total_seconds=time.perf_counter() - started,
    )


def benchmark(params: SimParams) -> SimReport:
    """Same run as :func:`verify_equivalence`; kept as the timing entry point."""
    return verify_equivalence(params)


def report_json(report: SimReport) -> str:
    return json.dumps(report.to_dict(), indent=2) + "\n"
