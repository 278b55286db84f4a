"""User preference embeddings (global and time-aware) and preference
matching scores.

A user's global preference vector is the plain arithmetic mean of the
embeddings of the distinct programs they watched in training. The time-aware
variant keeps one mean per (user, slot) over the programs watched in that
slot, capturing accounts shared by several household members with different
habits; slots without history fall back to the global vector so that every
program can be scored.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .datamodel import InteractionTensor, ProgramMeta
from .errors import DataError
from .textenc import Embedding, dot, mean_embedding
from .timegrid import TimeGrid, slot_of

MODES = ("global", "time-aware")


@dataclass(frozen=True)
class PreferenceModel:
    mode: str
    global_prefs: Mapping[str, Embedding]
    slot_prefs: Mapping[str, Mapping[int, Embedding]]
    item_embeddings: Mapping[str, Embedding]


def build(
    tensor: InteractionTensor,
    embeddings: Mapping[str, Embedding],
    mode: str = "global",
) -> PreferenceModel:
    """Build per-user preference vectors from the interaction tensor.

    Membership in a user's item set means any positive count; repeated
    viewing of one program does not up-weight it (distinct-item semantics).
    Time-aware mode additionally builds the per-slot means and always keeps
    the global means as the fallback. Items are averaged in sorted order so
    the result is independent of log ordering, bit for bit.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    referenced = {item for cells in tensor.by_user.values() for (item, _, _) in cells}
    missing = sorted(referenced - embeddings.keys())
    if missing:
        shown = ", ".join(missing[:10])
        more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
        raise DataError(f"{len(missing)} tensor item(s) lack embeddings: {shown}{more}")

    global_prefs: dict[str, Embedding] = {}
    slot_prefs: dict[str, dict[int, Embedding]] = {}
    for user, cells in tensor.by_user.items():
        items = sorted({item for (item, _, _) in cells})
        global_prefs[user] = mean_embedding(embeddings[i] for i in items)
        if mode == "time-aware":
            by_slot: dict[int, set[str]] = {}
            for (item, slot, _) in cells:
                by_slot.setdefault(slot, set()).add(item)
            slot_prefs[user] = {
                slot: mean_embedding(embeddings[i] for i in sorted(slot_items))
                for slot, slot_items in sorted(by_slot.items())
            }
    return PreferenceModel(
        mode=mode,
        global_prefs=global_prefs,
        slot_prefs=slot_prefs,
        item_embeddings=dict(embeddings),
    )


def user_vector(model: PreferenceModel, user: str, slot: int | None = None) -> Embedding:
    """Resolve the preference vector used to score a program starting in
    ``slot`` (global vector when slot is None, the model is global, or the
    user has no history in that slot)."""
    gv = model.global_prefs.get(user)
    if gv is None:
        raise DataError(f"user {user!r} is not in the preference model")
    if model.mode == "time-aware" and slot is not None:
        return model.slot_prefs.get(user, {}).get(slot, gv)
    return gv


def score(model: PreferenceModel, user: str, meta: ProgramMeta, grid: TimeGrid) -> float:
    """Preference matching score: dot product between the user vector and the
    program embedding; the time-aware variant keys on the slot in which the
    program begins playing."""
    emb = model.item_embeddings.get(meta.program)
    if emb is None:
        raise DataError(f"program {meta.program!r} has no embedding")
    slot = slot_of(meta.start, grid) if model.mode == "time-aware" else None
    return dot(user_vector(model, user, slot), emb)
