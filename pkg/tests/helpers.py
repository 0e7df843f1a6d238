"""Shared test machinery: seeded model pairs with structural mutations.

The simulation module's edit vocabulary deliberately never adds or removes
classes, enumerations or interactions; tests that exercise ``diff`` need
pairs covering those too, plus declaration-order shuffles.  Mutations here
work directly on snapshots and are deterministic in the seed.
"""

from __future__ import annotations

import dataclasses

from hv.model import (
    Attribute,
    Class,
    Enumeration,
    Interaction,
    Lifeline,
    Message,
    Model,
    Operation,
    Parameter,
)
from hv.sim import Rng


def _shuffled(rng: Rng, items: tuple) -> tuple:
    out = list(items)
    for i in range(len(out) - 1, 0, -1):
        j = rng.below(i + 1)
        out[i], out[j] = out[j], out[i]
    return tuple(out)


def _mutate_add_class(rng: Rng, model: Model, n: int) -> Model:
    ops = tuple(
        Operation(id=f"mut{n}-op{i}", name=f"op{rng.below(40)}")
        for i in range(rng.below(3))
    )
    attrs = tuple(
        Attribute(id=f"mut{n}-at{i}", name=f"attr{i}", type_name="int")
        for i in range(rng.below(2))
    )
    cls = Class(id=f"mut{n}-cls", name=f"Added{n}", operations=ops, attributes=attrs)
    return dataclasses.replace(model, classes=model.classes + (cls,))


def _mutate_remove_class(rng: Rng, model: Model, n: int) -> Model | None:
    if not model.classes:
        return None
    victim = rng.choice(model.classes)
    remaining = tuple(c for c in model.classes if c.id != victim.id)
    return dataclasses.replace(model, classes=remaining)


def _mutate_rename_class(rng: Rng, model: Model, n: int) -> Model | None:
    if not model.classes:
        return None
    victim = rng.choice(model.classes)
    renamed = dataclasses.replace(victim, name=f"Renamed{n}")
    classes = tuple(renamed if c.id == victim.id else c for c in model.classes)
    return dataclasses.replace(model, classes=classes)


def _mutate_enum(rng: Rng, model: Model, n: int) -> Model:
    if model.enumerations and rng.chance(500):
        victim = rng.choice(model.enumerations)
        changed = dataclasses.replace(victim, literals=victim.literals + (f"LIT_X{n}",))
        enums = tuple(changed if e.id == victim.id else e for e in model.enumerations)
        return dataclasses.replace(model, enumerations=enums)
    enum = Enumeration(id=f"mut{n}-enum", name=f"E{n}", literals=("A", "B"))
    return dataclasses.replace(model, enumerations=model.enumerations + (enum,))


def _mutate_interaction(rng: Rng, model: Model, n: int) -> Model:
    if model.interactions and rng.chance(400):
        victim = rng.choice(model.interactions)
        remaining = tuple(i for i in model.interactions if i.id != victim.id)
        return dataclasses.replace(model, interactions=remaining)
    lifelines = (Lifeline(id=f"mut{n}-lf0", name="p0"),)
    messages = (
        Message(
            id=f"mut{n}-ms0",
            name="ping",
            source_lifeline_id=f"mut{n}-lf0",
            target_lifeline_id=f"mut{n}-lf0",
        ),
    )
    inter = Interaction(id=f"mut{n}-int", name=f"Mut{n}", lifelines=lifelines, messages=messages)
    return dataclasses.replace(model, interactions=model.interactions + (inter,))


def _mutate_shuffle_ops(rng: Rng, model: Model, n: int) -> Model | None:
    candidates = [c for c in model.classes if len(c.operations) > 1]
    if not candidates:
        return None
    victim = rng.choice(candidates)
    shuffled = dataclasses.replace(victim, operations=_shuffled(rng, victim.operations))
    classes = tuple(shuffled if c.id == victim.id else c for c in model.classes)
    return dataclasses.replace(model, classes=classes)


def _mutate_shuffle_messages(rng: Rng, model: Model, n: int) -> Model | None:
    candidates = [i for i in model.interactions if len(i.messages) > 1]
    if not candidates:
        return None
    victim = rng.choice(candidates)
    shuffled = dataclasses.replace(victim, messages=_shuffled(rng, victim.messages))
    interactions = tuple(shuffled if i.id == victim.id else i for i in model.interactions)
    return dataclasses.replace(model, interactions=interactions)


def _mutate_move_operation(rng: Rng, model: Model, n: int) -> Model | None:
    donors = [c for c in model.classes if c.operations]
    if not donors or len(model.classes) < 2:
        return None
    donor = rng.choice(donors)
    op = rng.choice(donor.operations)
    receiver = rng.choice([c for c in model.classes if c.id != donor.id])
    classes = []
    for c in model.classes:
        if c.id == donor.id:
            c = dataclasses.replace(c, operations=tuple(o for o in c.operations if o.id != op.id))
        if c.id == receiver.id:
            c = dataclasses.replace(c, operations=c.operations + (op,))
        classes.append(c)
    return dataclasses.replace(model, classes=tuple(classes))


def _mutate_op_params(rng: Rng, model: Model, n: int) -> Model | None:
    donors = [c for c in model.classes if c.operations]
    if not donors:
        return None
    donor = rng.choice(donors)
    op = rng.choice(donor.operations)
    changed = dataclasses.replace(
        op,
        parameters=tuple(Parameter(name=f"q{i}", type_name="bool") for i in range(rng.below(3))),
        return_type_name="bool" if rng.chance(500) else None,
    )
    ops = tuple(changed if o.id == op.id else o for o in donor.operations)
    classes = tuple(
        dataclasses.replace(c, operations=ops) if c.id == donor.id else c for c in model.classes
    )
    return dataclasses.replace(model, classes=classes)


_MUTATORS = (
    _mutate_add_class,
    _mutate_remove_class,
    _mutate_rename_class,
    _mutate_enum,
    _mutate_interaction,
    _mutate_shuffle_ops,
    _mutate_shuffle_messages,
    _mutate_move_operation,
    _mutate_op_params,
)


def mutate_model(seed: int, model: Model, count: int = 4) -> Model:
    """Apply ``count`` seeded structural mutations, returning a new snapshot."""
    rng = Rng(seed)
    n = 0
    applied = 0
    while applied < count:
        n += 1
        if n > count * 16:
            break
        mutated = _MUTATORS[rng.below(len(_MUTATORS))](rng, model, n)
        if mutated is not None:
            model = mutated
            applied += 1
    return model
