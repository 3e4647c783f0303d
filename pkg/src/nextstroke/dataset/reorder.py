"""Human-like reordering of stroke sequences.

The cost of a sequence sums, over consecutive stroke pairs, squared jumps in
position, color and size plus a penalty for switching subjects. Minimizing it
subject to keeping every overlapping pair in its original relative order is a
Sequential Ordering Problem; we solve small instances exactly by subset DP
and larger ones by feasible greedy insertion plus randomized local search.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..render import stroke_alpha
from ..strokes import BrushPrimitive, StrokeSequence, default_primitive

PRECEDENCE_RASTER = 128
_EXACT_SOLVE_MAX = 11


@dataclass(frozen=True)
class ReorderWeights:
    """Non-negative weights for the reorder cost terms."""

    lambda_ord_x: float = 1.0
    lambda_ord_rho: float = 1.0
    lambda_ord_sigma: float = 1.0
    lambda_obj: float = 2.0

    def __post_init__(self):
        if min(self.lambda_ord_x, self.lambda_ord_rho, self.lambda_ord_sigma, self.lambda_obj) < 0:
            raise ValueError("reorder weights must be non-negative")

    def to_dict(self):
        return {
            "lambda_ord_x": self.lambda_ord_x,
            "lambda_ord_rho": self.lambda_ord_rho,
            "lambda_ord_sigma": self.lambda_ord_sigma,
            "lambda_obj": self.lambda_obj,
        }

    @classmethod
    def from_dict(cls, d) -> "ReorderWeights":
        return cls(**d)


def _subject_ids(seq: StrokeSequence, mask) -> np.ndarray:
    if seq.subject_ids is not None:
        return seq.subject_ids
    if mask is None:
        return np.zeros(len(seq), dtype=np.int64)
    from .decompose import assign_subjects

    return assign_subjects(seq, mask).subject_ids


def pair_cost_matrix(seq: StrokeSequence, mask, weights: ReorderWeights) -> np.ndarray:
    """Symmetric matrix of transition costs between any two strokes."""
    p = seq.params
    sids = _subject_ids(seq, mask)
    dx = p[:, None, 0:2] - p[None, :, 0:2]
    drho = p[:, None, 2:5] - p[None, :, 2:5]
    dsig = p[:, None, 5:7] - p[None, :, 5:7]
    chi = (sids[:, None] != sids[None, :]).astype(np.float64)
    return (
        weights.lambda_ord_x * (dx**2).sum(-1)
        + weights.lambda_ord_rho * (drho**2).sum(-1)
        + weights.lambda_ord_sigma * (dsig**2).sum(-1)
        + weights.lambda_obj * chi
    )


def permutation_cost(matrix: np.ndarray, perm) -> float:
    perm = np.asarray(perm, dtype=np.int64)
    if perm.size < 2:
        return 0.0
    return float(matrix[perm[:-1], perm[1:]].sum())


def reorder_cost(seq: StrokeSequence, mask=None, weights: ReorderWeights | None = None) -> float:
    """Cost of the sequence in its current order."""
    weights = weights or ReorderWeights()
    if len(seq) < 1:
        raise ValueError("sequence must contain at least one stroke")
    matrix = pair_cost_matrix(seq, mask, weights)
    return permutation_cost(matrix, np.arange(len(seq)))


class PrecedenceGraph:
    """Must-precede relation over stroke indices; edges always point forward (i < j)."""

    def __init__(self, before: np.ndarray):
        before = np.asarray(before, dtype=bool)
        if before.ndim != 2 or before.shape[0] != before.shape[1]:
            raise ValueError("precedence matrix must be square")
        if np.tril(before).any():
            raise ValueError("precedence edges must satisfy i < j")
        self.before = before

    @property
    def n(self) -> int:
        return self.before.shape[0]

    @property
    def edges(self):
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(self.before))]

    def is_feasible(self, perm) -> bool:
        pos = np.empty(self.n, dtype=np.int64)
        pos[np.asarray(perm, dtype=np.int64)] = np.arange(self.n)
        ii, jj = np.nonzero(self.before)
        return bool(np.all(pos[ii] < pos[jj]))

    @classmethod
    def empty(cls, n: int) -> "PrecedenceGraph":
        return cls(np.zeros((n, n), dtype=bool))


def build_precedence(
    seq: StrokeSequence,
    primitive: BrushPrimitive | None = None,
    raster: int = PRECEDENCE_RASTER,
) -> PrecedenceGraph:
    """Edge (i -> j) for every earlier stroke i whose alpha support intersects j's.

    Supports are rasterized at ``raster`` x ``raster`` and packed into bitsets;
    the pairwise intersection test is a bitwise AND.
    """
    n = len(seq)
    primitive = primitive or default_primitive()
    bits = np.zeros((n, raster * raster // 64 + 1), dtype=np.uint64)
    boxes = np.zeros((n, 4), dtype=np.int64)
    buf = np.zeros((raster, raster), dtype=np.float64)
    for i, row in enumerate(seq.params):
        stroke_alpha(row, raster, raster, primitive, out=buf)
        support = buf > 0.0
        packed = np.packbits(support.reshape(-1))
        padded = np.zeros(bits.shape[1] * 8, dtype=np.uint8)
        padded[: packed.size] = packed
        bits[i] = padded.view(np.uint64)
        ys, xs = np.nonzero(support)
        if ys.size:
            boxes[i] = (ys.min(), ys.max(), xs.min(), xs.max())
        else:
            boxes[i] = (-1, -1, -1, -1)
    before = np.zeros((n, n), dtype=bool)
    for i in range(n - 1):
        if boxes[i, 0] < 0:
            continue
        later = np.arange(i + 1, n)
        box_ok = (
            (boxes[later, 0] <= boxes[i, 1])
            & (boxes[later, 1] >= boxes[i, 0])
            & (boxes[later, 2] <= boxes[i, 3])
            & (boxes[later, 3] >= boxes[i, 2])
            & (boxes[later, 0] >= 0)
        )
        cand = later[box_ok]
        if cand.size:
            overlap = np.any(bits[cand] & bits[i][None, :], axis=1)
            before[i, cand[overlap]] = True
    return PrecedenceGraph(before)


def _exact_sop(matrix: np.ndarray, before: np.ndarray) -> np.ndarray:
    """Held-Karp subset DP over (visited set, last), honoring precedence."""
    n = matrix.shape[0]
    pred_mask = np.zeros(n, dtype=np.int64)
    for i, j in zip(*np.nonzero(before)):
        pred_mask[j] |= 1 << int(i)
    full = (1 << n) - 1
    best = {}
    parent = {}
    for j in range(n):
        if pred_mask[j] == 0:
            best[(1 << j, j)] = 0.0
            parent[(1 << j, j)] = -1
    for s in range(1, full + 1):
        for last in range(n):
            key = (s, last)
            if key not in best:
                continue
            base = best[key]
            for j in range(n):
                if s & (1 << j):
                    continue
                if pred_mask[j] & ~s:
                    continue
                cand = base + matrix[last, j]
                nkey = (s | (1 << j), j)
                if cand < best.get(nkey, np.inf):
                    best[nkey] = cand
                    parent[nkey] = last
    end = min(range(n), key=lambda j: best.get((full, j), np.inf))
    perm = [end]
    s, last = full, end
    while parent[(s, last)] != -1:
        prev = parent[(s, last)]
        s &= ~(1 << last)
        perm.append(prev)
        last = prev
    return np.asarray(perm[::-1], dtype=np.int64)


def _greedy_insertion(matrix: np.ndarray, before: np.ndarray) -> np.ndarray:
    n = matrix.shape[0]
    perm = [0]
    for j in range(1, n):
        preds = np.nonzero(before[:j, j])[0]
        min_pos = 0
        if preds.size:
            where = {node: p for p, node in enumerate(perm)}
            min_pos = max(where[int(i)] for i in preds) + 1
        best_p, best_delta = len(perm), matrix[perm[-1], j]
        for p in range(min_pos, len(perm) + 1):
            if p == 0:
                delta = matrix[j, perm[0]]
            elif p == len(perm):
                delta = matrix[perm[-1], j]
            else:
                delta = matrix[perm[p - 1], j] + matrix[j, perm[p]] - matrix[perm[p - 1], perm[p]]
            if delta < best_delta:
                best_p, best_delta = p, delta
        perm.insert(best_p, j)
    return np.asarray(perm, dtype=np.int64)


def _local_search(matrix, before, perm, budget, rng):
    n = perm.size
    cur = perm.copy()
    cur_cost = permutation_cost(matrix, cur)
    for _ in range(budget):
        kind = rng.integers(0, 3)
        if kind == 2:  # reverse a short run
            a = int(rng.integers(0, n - 1))
            b = int(min(n - 1, a + rng.integers(1, 6)))
            seg = cur[a : b + 1]
            if before[np.ix_(seg, seg)].any():
                continue
            cand = cur.copy()
            cand[a : b + 1] = cand[a : b + 1][::-1]
        else:  # relocate a segment of length 1..3
            seg_len = 1 if kind == 0 else int(rng.integers(2, 4))
            if n <= seg_len:
                continue
            a = int(rng.integers(0, n - seg_len))
            b = int(rng.integers(0, n - seg_len))
            if a == b:
                continue
            seg = cur[a : a + seg_len]
            if b > a:
                passed = cur[a + seg_len : b + seg_len]
                if before[np.ix_(seg, passed)].any():
                    continue
            else:
                passed = cur[b:a]
                if before[np.ix_(passed, seg)].any():
                    continue
            rest = np.concatenate([cur[:a], cur[a + seg_len :]])
            cand = np.concatenate([rest[:b], seg, rest[b:]])
        cand_cost = permutation_cost(matrix, cand)
        if cand_cost < cur_cost - 1e-15:
            cur, cur_cost = cand, cand_cost
    return cur, cur_cost


def reorder_sequence(
    seq: StrokeSequence,
    mask=None,
    weights: ReorderWeights | None = None,
    budget: int = 4000,
    rng: np.random.Generator | None = None,
    precedence: PrecedenceGraph | None = None,
    primitive: BrushPrimitive | None = None,
) -> np.ndarray:
    """Permutation minimizing the reorder cost, feasible w.r.t. overlap precedence.

    Never returns anything costlier than the identity ordering, and ties
    break toward the identity.
    """
    weights = weights or ReorderWeights()
    rng = rng if rng is not None else np.random.default_rng(0)
    n = len(seq)
    identity = np.arange(n, dtype=np.int64)
    if n <= 2:
        return identity
    graph = precedence if precedence is not None else build_precedence(seq, primitive)
    matrix = pair_cost_matrix(seq, mask, weights)
    identity_cost = permutation_cost(matrix, identity)

    if n <= _EXACT_SOLVE_MAX:
        perm = _exact_sop(matrix, graph.before)
        return perm if permutation_cost(matrix, perm) < identity_cost - 1e-15 else identity

    start = _greedy_insertion(matrix, graph.before)
    if permutation_cost(matrix, start) > identity_cost:
        start = identity
    perm, cost = _local_search(matrix, graph.before, start, budget, rng)
    return perm if cost < identity_cost - 1e-15 else identity
