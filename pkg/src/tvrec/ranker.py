"""Ranking strategies over the candidate program set: behavior-only,
preference-only, two-stage, and (weighted) reciprocal rank fusion.

All rankers consume a prebuilt :class:`Candidates` index so that per-user
inference touches only precomputed arrays, mirroring a production setup where
everything derivable from the schedule is indexed in advance. Every ranker is
deterministic: score ties break by earlier start time, then by program id.

Two-stage ranking scans the behavior-ordered candidates and collapses each
maximal consecutive run sharing one (slot, channel) group key down to the run
member with the highest preference score. Preference scores are evaluated
lazily during the scan, so only a small prefix of the candidate set ever
incurs a dot product; the evaluation count is exposed via
:class:`TwoStageStats`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Collection, Iterable, Mapping, Sequence

import numpy as np

from .behavior import BehaviorMatrix
from .datamodel import ProgramMeta
from .errors import DataError
from .preference import PreferenceModel
from .textenc import dot
from .timegrid import TimeGrid, slot_of, slots_of_span

RankedList = list[tuple[str, float]]
GroupKey = tuple[int, str]

DEFAULT_RRF_ETA = 60.0  # customary damping constant when no tuning is run


@dataclass
class TwoStageStats:
    """Instrumentation for the two-stage scan."""

    preference_evals: int = 0


@dataclass(frozen=True)
class Candidates:
    """Precomputed index over candidate programs on a fixed slot grid.

    Rows are ordered by (start, program id). ``span_flat`` concatenates each
    program's (slot, channel) cells as flat offsets into a dense
    slots-by-channels grid; ``seg_starts``/``span_lens`` delimit the
    per-program segments.
    """

    n_slots: int
    ids: tuple[str, ...]
    pos: Mapping[str, int]
    channels: tuple[str, ...]
    chan_col_of: Mapping[str, int]
    starts: np.ndarray
    id_rank: np.ndarray
    chan_col: np.ndarray
    span_flat: np.ndarray
    span_slots: np.ndarray
    span_lens: np.ndarray
    seg_starts: np.ndarray
    start_slots: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.ids)


def build_candidates(
    metas: Iterable[ProgramMeta], grid: TimeGrid, channels: Collection[str] = ()
) -> Candidates:
    """Index candidate programs for ranking.

    ``channels`` should include every channel present in the training tensor;
    channels appearing only in the metadata are added automatically so that
    distinct channels never share a grid column.
    """
    ms = sorted(metas, key=lambda m: (m.start, m.program))
    ids = tuple(m.program for m in ms)
    if len(set(ids)) != len(ids):
        raise DataError("candidate set contains duplicate program ids")
    all_channels = tuple(sorted(set(channels) | {m.channel for m in ms}))
    col_of = {c: i for i, c in enumerate(all_channels)}
    ncols = max(len(all_channels), 1)

    flat: list[int] = []
    span_slots: list[int] = []
    span_lens: list[int] = []
    chan_col: list[int] = []
    for m in ms:
        col = col_of[m.channel]
        span = slots_of_span(m.start, m.end, grid)
        flat.extend((s - 1) * ncols + col for s in span)
        span_slots.extend(span)
        span_lens.append(len(span))
        chan_col.append(col)

    lens = np.asarray(span_lens, dtype=np.int64)
    seg_starts = np.zeros(len(ms), dtype=np.int64)
    if len(ms) > 1:
        np.cumsum(lens[:-1], out=seg_starts[1:])
    order_of_id = {pid: r for r, pid in enumerate(sorted(ids))}
    return Candidates(
        n_slots=grid.n,
        ids=ids,
        pos={pid: i for i, pid in enumerate(ids)},
        channels=all_channels,
        chan_col_of=col_of,
        starts=np.asarray([m.start for m in ms], dtype=np.int64),
        id_rank=np.asarray([order_of_id[pid] for pid in ids], dtype=np.int64),
        chan_col=np.asarray(chan_col, dtype=np.int64),
        span_flat=np.asarray(flat, dtype=np.int64),
        span_slots=np.asarray(span_slots, dtype=np.int64),
        span_lens=lens,
        seg_starts=seg_starts,
        start_slots=tuple(slot_of(m.start, grid) for m in ms),
    )


@dataclass(frozen=True)
class ItemIndex:
    """Candidate embeddings pre-extracted in candidate row order and
    zero-padded for batched scoring, with candidate rows grouped by start
    slot for time-aware preference lookup.

    Pad cells carry weight 0, so they never contribute to a dot product.
    """

    dim: int
    idx: np.ndarray
    weights: np.ndarray
    rows_by_slot: Mapping[int, np.ndarray]


def build_item_index(embeddings: Mapping[str, Mapping[int, float]], cand: Candidates) -> ItemIndex:
    """Extract candidate embeddings into padded arrays for fast scoring."""
    missing = sorted(pid for pid in cand.ids if pid not in embeddings)
    if missing:
        shown = ", ".join(missing[:10])
        more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
        raise DataError(f"{len(missing)} candidate(s) lack embeddings: {shown}{more}")
    vecs = [embeddings[pid] for pid in cand.ids]
    n = len(vecs)
    width = max((len(v) for v in vecs), default=0) or 1
    idx = np.zeros((n, width), dtype=np.int64)
    weights = np.zeros((n, width))
    dim = 1
    for row, vec in enumerate(vecs):
        if not vec:
            continue
        keys = np.fromiter(vec.keys(), dtype=np.int64, count=len(vec))
        idx[row, : len(vec)] = keys
        weights[row, : len(vec)] = np.fromiter(vec.values(), dtype=np.float64, count=len(vec))
        dim = max(dim, int(keys.max()) + 1)
    by_slot: dict[int, list[int]] = {}
    for row, slot in enumerate(cand.start_slots):
        by_slot.setdefault(slot, []).append(row)
    rows_by_slot = {slot: np.asarray(rows, dtype=np.int64) for slot, rows in by_slot.items()}
    return ItemIndex(dim=dim, idx=idx, weights=weights, rows_by_slot=rows_by_slot)


def _dense_user_vec(vec: Mapping[int, float], dim: int) -> np.ndarray:
    # Components beyond dim cannot match any candidate dimension; drop them.
    dense = np.zeros(dim)
    if vec:
        keys = np.fromiter(vec.keys(), dtype=np.int64, count=len(vec))
        vals = np.fromiter(vec.values(), dtype=np.float64, count=len(vec))
        in_range = keys < dim
        dense[keys[in_range]] = vals[in_range]
    return dense


def _indexed_pref_scores(
    model: PreferenceModel, user: str, cand: Candidates, index: ItemIndex
) -> np.ndarray:
    gv = model.global_prefs.get(user)
    if gv is None:
        raise DataError(f"user {user!r} is not in the preference model")
    dense = _dense_user_vec(gv, index.dim)
    scores = (dense[index.idx] * index.weights).sum(axis=1)
    if model.mode == "time-aware":
        for slot, vec in (model.slot_prefs.get(user) or {}).items():
            rows = index.rows_by_slot.get(slot)
            if rows is None:
                continue
            slot_dense = _dense_user_vec(vec, index.dim)
            scores[rows] = (slot_dense[index.idx[rows]] * index.weights[rows]).sum(axis=1)
    return scores


def _dense_grid(bm: BehaviorMatrix, cand: Candidates) -> np.ndarray:
    ncols = max(len(cand.channels), 1)
    dense = np.zeros(cand.n_slots * ncols)
    col_of = cand.chan_col_of
    for (slot, channel), p in bm.probs.items():
        if not 1 <= slot <= cand.n_slots:
            raise DataError(f"behavior matrix slot {slot} outside grid of {cand.n_slots}")
        col = col_of.get(channel)
        if col is not None:  # channels without candidates can never match
            dense[(slot - 1) * ncols + col] = p
    return dense


def _behavior_scores(bm: BehaviorMatrix, cand: Candidates) -> np.ndarray:
    vals = _dense_grid(bm, cand)[cand.span_flat]
    return np.maximum.reduceat(vals, cand.seg_starts)


def _behavior_scores_groups(bm: BehaviorMatrix, cand: Candidates) -> tuple[np.ndarray, np.ndarray]:
    # Argmax slot per segment with earliest-slot tie-break: take the first
    # span position whose value equals the segment maximum.
    vals = _dense_grid(bm, cand)[cand.span_flat]
    scores = np.maximum.reduceat(vals, cand.seg_starts)
    seg_max = np.repeat(scores, cand.span_lens)
    positions = np.arange(vals.size)
    first = np.minimum.reduceat(
        np.where(vals == seg_max, positions, vals.size), cand.seg_starts
    )
    return scores, cand.span_slots[first]


def _stage_one_order(cand: Candidates, scores: np.ndarray) -> np.ndarray:
    # Primary key last in lexsort: score desc, then start asc, then id asc.
    return np.lexsort((cand.id_rank, cand.starts, -scores))


def _materialize(cand: Candidates, scores: np.ndarray, order: np.ndarray) -> RankedList:
    ids = cand.ids
    vals = scores.tolist()
    return [(ids[i], vals[i]) for i in order.tolist()]


def _pref_scorer(model: PreferenceModel, user: str, cand: Candidates):
    """Row-wise preference score function, resolving time-aware fallback."""
    gv = model.global_prefs.get(user)
    if gv is None:
        raise DataError(f"user {user!r} is not in the preference model")
    embs = model.item_embeddings
    ids = cand.ids
    if model.mode == "time-aware":
        by_slot = model.slot_prefs.get(user) or {}
        get_vec = by_slot.get
        start_slots = cand.start_slots

        def score_row(row: int) -> float:
            return dot(get_vec(start_slots[row], gv), embs[ids[row]])

    else:

        def score_row(row: int) -> float:
            return dot(gv, embs[ids[row]])

    return score_row


def rank_behavior(bm: BehaviorMatrix, cand: Candidates) -> RankedList:
    """Rank all candidates by behavior score, descending."""
    if not cand.ids:
        return []
    scores = _behavior_scores(bm, cand)
    return _materialize(cand, scores, _stage_one_order(cand, scores))


def rank_preference(
    model: PreferenceModel, user: str, cand: Candidates, index: ItemIndex | None = None
) -> RankedList:
    """Rank all candidates by preference score, descending.

    Pass a prebuilt :class:`ItemIndex` to score all candidates in one batched
    pass; without one, candidates are scored one dot product at a time.
    """
    if not cand.ids:
        return []
    if index is not None:
        if index.idx.shape[0] != len(cand.ids):
            raise ValueError("item index does not match the candidate set")
        scores = _indexed_pref_scores(model, user, cand, index)
    else:
        score_row = _pref_scorer(model, user, cand)
        try:
            scores = np.fromiter(
                (score_row(i) for i in range(len(cand.ids))), dtype=np.float64, count=len(cand.ids)
            )
        except KeyError as exc:
            raise DataError(f"candidate program {exc.args[0]!r} has no embedding") from exc
    return _materialize(cand, scores, _stage_one_order(cand, scores))


def two_stage(
    bm: BehaviorMatrix,
    model: PreferenceModel,
    cand: Candidates,
    k: int,
    stats: TwoStageStats | None = None,
) -> RankedList:
    """Two-stage ranking: behavior-ordered scan with per-(slot, channel)-run
    preference dedup.

    Scanning the behavior order, maximal consecutive runs sharing one group
    key (the behavior argmax slot plus the program channel) collapse to the
    single member with the highest preference score; run-internal preference
    ties break to the earlier start, then id. Winners are emitted in run
    order until ``k`` items are out. When the scan exhausts the candidates
    with a run still pending, that run is flushed, so the output only falls
    short of ``k`` when the candidate groups themselves run out. Emitted
    scores are the winners' behavior scores.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not cand.ids:
        return []
    score_row = _pref_scorer(model, bm.user, cand)
    scores, group_slots = _behavior_scores_groups(bm, cand)
    order = _stage_one_order(cand, scores)
    starts = cand.starts
    id_rank = cand.id_rank
    chan_col = cand.chan_col

    winners: list[int] = []
    run_key: tuple[int, int] | None = None
    best_row = -1
    best_key: tuple[float, int, int] | None = None
    evals = 0
    for np_row in order:
        row = int(np_row)
        key = (int(group_slots[row]), int(chan_col[row]))
        if best_row >= 0 and key != run_key:
            winners.append(best_row)
            best_row = -1
            if len(winners) == k:
                break
        run_key = key
        sp = score_row(row)
        evals += 1
        entry = (-sp, int(starts[row]), int(id_rank[row]))
        if best_row < 0 or entry < best_key:
            best_key = entry
            best_row = row
    if best_row >= 0 and len(winners) < k:
        winners.append(best_row)  # flush the pending run
    if stats is not None:
        stats.preference_evals += evals
    vals = scores
    return [(cand.ids[r], float(vals[r])) for r in winners]


def _positions(ranked: Sequence[tuple[str, float]], cand: Candidates, name: str) -> np.ndarray:
    if len(ranked) != len(cand.ids):
        raise ValueError(
            f"{name} ranking covers {len(ranked)} items, expected {len(cand.ids)}"
        )
    pos = np.zeros(len(cand.ids))
    row_of = cand.pos
    for rank, (pid, _) in enumerate(ranked, 1):
        row = row_of.get(pid)
        if row is None:
            raise ValueError(f"{name} ranking contains unknown program {pid!r}")
        if pos[row]:
            raise ValueError(f"{name} ranking lists program {pid!r} twice")
        pos[row] = rank
    return pos


def _fuse(
    kappa_b: RankedList,
    kappa_p: RankedList,
    cand: Candidates,
    eta: float,
    w_b: float,
    w_p: float,
) -> RankedList:
    pb = _positions(kappa_b, cand, "behavior")
    pp = _positions(kappa_p, cand, "preference")
    scores = w_b / (pb + eta) + w_p / (pp + eta)
    return _materialize(cand, scores, _stage_one_order(cand, scores))


def rrf(kappa_b: RankedList, kappa_p: RankedList, cand: Candidates, eta: float = DEFAULT_RRF_ETA) -> RankedList:
    """Reciprocal rank fusion of the two rankings: sum of 1/(rank + eta)."""
    if eta < 0:
        raise ValueError("eta must be non-negative")
    return _fuse(kappa_b, kappa_p, cand, eta, 1.0, 1.0)


def rrf_weighted(
    kappa_b: RankedList,
    kappa_p: RankedList,
    cand: Candidates,
    eta: float = DEFAULT_RRF_ETA,
    xi: float = 0.5,
) -> RankedList:
    """Weighted RRF: xi/(rank_b + eta) + (1 - xi)/(rank_p + eta)."""
    if eta < 0:
        raise ValueError("eta must be non-negative")
    if not 0.0 <= xi <= 1.0:
        raise ValueError("xi must lie in [0, 1]")
    return _fuse(kappa_b, kappa_p, cand, eta, xi, 1.0 - xi)


def tune_rrf(
    rankings: Mapping[str, tuple[RankedList, RankedList]],
    truths: Mapping[str, Collection[str]],
    cand: Candidates,
    eta_grid: Iterable[float] | None = None,
    xi_grid: Iterable[float] | None = None,
    cutoff: int = 30,
) -> tuple[float, float]:
    """Grid-search (eta, xi) maximizing mean recall at ``cutoff`` over the
    development users; ties resolve to the smallest eta, then smallest xi.

    ``rankings`` maps each development user to their (behavior, preference)
    rankings over the full candidate set.
    """
    etas = sorted(eta_grid) if eta_grid is not None else list(range(1, 101))
    xis = sorted(xi_grid) if xi_grid is not None else [i / 10 for i in range(11)]
    if not etas or not xis:
        raise ValueError("hyperparameter grids must be non-empty")

    per_user = []
    for user in sorted(rankings):
        truth = truths.get(user)
        if not truth:
            continue
        kb, kp = rankings[user]
        mask = np.zeros(len(cand.ids), dtype=bool)
        for pid in truth:
            row = cand.pos.get(pid)
            if row is not None:
                mask[row] = True
        per_user.append((_positions(kb, cand, "behavior"), _positions(kp, cand, "preference"), mask, len(truth)))
    if not per_user:
        raise ValueError("development set is empty or has no ground truth")

    id_rank = cand.id_rank
    starts = cand.starts
    best_score = -1.0
    best = (etas[0], xis[0])
    for eta in etas:
        inv = [(1.0 / (pb + eta), 1.0 / (pp + eta), mask, tsize) for pb, pp, mask, tsize in per_user]
        for xi in xis:
            total = 0.0
            for inv_b, inv_p, mask, tsize in inv:
                scores = xi * inv_b + (1.0 - xi) * inv_p
                top = np.lexsort((id_rank, starts, -scores))[:cutoff]
                total += mask[top].sum() / tsize
            mean_recall = total / len(inv)
            if mean_recall > best_score:
                best_score = mean_recall
                best = (eta, xi)
    return best
