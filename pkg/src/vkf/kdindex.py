"""Binary kd-tree over 256-bit descriptors.

Decision nodes test a single bit: vectors with the bit set go left, the rest
go right. The bit is the one whose 0/1 split over the node's vectors is most
balanced (maximum binary entropy), smallest index on ties. Leaves hold up to
``leaf_cap`` vectors.

Search descends greedily, pushing the untaken child of every decision onto a
FIFO queue. Each of the ``B`` backtracks pops the queue front and descends
again from there, so subtrees near the root are revisited first.
"""

from __future__ import annotations

import math
import struct
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from vkf.descriptor import DESC_BITS, DESC_BYTES, hamming_to_many, unpack_bits
from vkf.errors import CorruptIndex

MAGIC = b"VKFI"
VERSION = 1
DEFAULT_LEAF_CAP = 100
DEFAULT_BACKTRACKS = 50

_HEADER = struct.Struct("<4sIIQQ")
_DECISION = struct.Struct("<HQQ")
_LEAF = struct.Struct("<I")
_TABLE_DTYPE = np.dtype([("id", "<u8"), ("desc", "u1", (DESC_BYTES,)), ("shot", "<u8")])
TAG_DECISION = 0
TAG_LEAF = 1


@dataclass(frozen=True)
class SearchBudget:
    backtracks: int = DEFAULT_BACKTRACKS
    k: int = 1

    def __post_init__(self):
        if self.backtracks < 0:
            raise ValueError(f"backtracks must be >= 0, got {self.backtracks}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")


@dataclass(frozen=True)
class DecisionNode:
    dim: int
    left: int
    right: int


@dataclass(frozen=True)
class Leaf:
    ids: tuple[int, ...]


def binary_entropy(ones: int, n: int) -> float:
    if n == 0 or ones == 0 or ones == n:
        return 0.0
    p = ones / n
    return -(p * math.log2(p) + (1 - p) * math.log2(1 - p))


def split_dim(bits: np.ndarray) -> int | None:
    """Most balanced bit over the rows of ``bits``; ``None`` if every bit is constant.

    Entropy is strictly increasing in balance, so comparing ``|2 * ones - n|``
    picks the same dimension without floating-point ties.
    """
    n = len(bits)
    ones = bits.sum(axis=0, dtype=np.int64)
    usable = (ones > 0) & (ones < n)
    if not usable.any():
        return None
    imbalance = np.where(usable, np.abs(2 * ones - n), n + 1)
    return int(np.argmin(imbalance))


class KdTree:
    """Immutable after construction; safe for concurrent searches."""

    def __init__(self, leaf_cap, dims, lefts, rights, leaf_start, leaf_count, ids, desc, shot_ids):
        self.leaf_cap = int(leaf_cap)
        # Per node: dim >= 0 for decision nodes, -1 for leaves. Pre-order, root at 0.
        self._dim = list(dims)
        self._left = list(lefts)
        self._right = list(rights)
        self._leaf_start = list(leaf_start)
        self._leaf_count = list(leaf_count)
        # Vector table in leaf order, so every leaf is a contiguous row range.
        self.ids = np.asarray(ids, dtype=np.int64)
        self.desc = np.ascontiguousarray(desc, dtype=np.uint8).reshape(-1, DESC_BYTES)
        self.shot_ids = np.asarray(shot_ids, dtype=np.int64)

    # -- structure -----------------------------------------------------------

    @property
    def n_indexed(self) -> int:
        return len(self.ids)

    @property
    def n_nodes(self) -> int:
        return len(self._dim)

    @property
    def n_decision_nodes(self) -> int:
        return sum(1 for d in self._dim if d >= 0)

    @property
    def root(self) -> int | None:
        return 0 if self._dim else None

    def node(self, i: int) -> DecisionNode | Leaf:
        if self._dim[i] >= 0:
            return DecisionNode(self._dim[i], self._left[i], self._right[i])
        a = self._leaf_start[i]
        return Leaf(tuple(int(x) for x in self.ids[a:a + self._leaf_count[i]]))

    @property
    def nodes(self) -> list[DecisionNode | Leaf]:
        return [self.node(i) for i in range(self.n_nodes)]

    def leaf_rows(self, i: int) -> slice:
        a = self._leaf_start[i]
        return slice(a, a + self._leaf_count[i])

    def subtree_rows(self, i: int) -> np.ndarray:
        """Rows of every vector stored below node ``i``."""
        out, stack = [], [i]
        while stack:
            n = stack.pop()
            if self._dim[n] >= 0:
                stack.extend((self._right[n], self._left[n]))
            else:
                s = self.leaf_rows(n)
                out.append(np.arange(s.start, s.stop))
        return np.concatenate(out) if out else np.zeros(0, np.intp)

    def shot_of(self) -> dict[int, int]:
        return dict(zip(self.ids.tolist(), self.shot_ids.tolist()))

    # -- search --------------------------------------------------------------

    def visit_leaves(self, q: np.ndarray, backtracks: int) -> list[int]:
        """Leaf nodes examined for query ``q`` under a FIFO budget of ``backtracks`` pops."""
        if not self._dim:
            return []
        qbits = unpack_bits(q)[0].tolist()
        dims, lefts, rights = self._dim, self._left, self._right
        queue: deque[int] = deque()
        leaves = []

        def descend(node):
            while True:
                d = dims[node]
                if d < 0:
                    leaves.append(node)
                    return
                if qbits[d]:
                    queue.append(rights[node])
                    node = lefts[node]
                else:
                    queue.append(lefts[node])
                    node = rights[node]

        descend(0)
        for _ in range(backtracks):
            if not queue:
                break
            descend(queue.popleft())
        return leaves

    def examined_rows(self, q: np.ndarray, backtracks: int) -> np.ndarray:
        leaves = self.visit_leaves(q, backtracks)
        if not leaves:
            return np.zeros(0, np.intp)
        starts = np.fromiter((self._leaf_start[n] for n in leaves), np.intp, len(leaves))
        counts = np.fromiter((self._leaf_count[n] for n in leaves), np.intp, len(leaves))
        total = int(counts.sum())
        # Concatenated aranges without a Python loop.
        offsets = np.repeat(starts - np.concatenate(([0], np.cumsum(counts)[:-1])), counts)
        return np.arange(total, dtype=np.intp) + offsets

    def examined_ids(self, q: np.ndarray, backtracks: int) -> set[int]:
        return set(self.ids[self.examined_rows(q, backtracks)].tolist())

    def search(self, q: np.ndarray, budget: SearchBudget = SearchBudget()) -> list[tuple[int, int]]:
        """``budget.k`` nearest examined vectors as ``(id, distance)``, ordered by distance then id."""
        rows = self.examined_rows(q, budget.backtracks)
        if rows.size == 0:
            return []
        dist = hamming_to_many(q, self.desc[rows])
        ids = self.ids[rows]
        order = np.lexsort((ids, dist))[:budget.k]
        return [(int(ids[o]), int(dist[o])) for o in order]

    def nearest_rows(self, queries: np.ndarray, backtracks: int) -> tuple[np.ndarray, np.ndarray]:
        """k = 1 search for many queries; returns ``(row, distance)``, row -1 when nothing was examined."""
        queries = np.ascontiguousarray(queries, np.uint8).reshape(-1, DESC_BYTES)
        nq = len(queries)
        best_row = np.full(nq, -1, dtype=np.int64)
        best_dist = np.full(nq, DESC_BITS + 1, dtype=np.int64)
        if nq == 0 or not self._dim:
            return best_row, best_dist
        per_query = [self.examined_rows(q, backtracks) for q in queries]
        counts = np.fromiter((len(r) for r in per_query), np.intp, nq)
        rows = np.concatenate(per_query)
        owner = np.repeat(np.arange(nq), counts)
        starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
        wd = self.desc.view(np.uint64)[rows]
        wq = queries.view(np.uint64)
        dist = np.zeros(len(rows), dtype=np.int64)
        for k in range(wq.shape[1]):
            dist += np.bitwise_count(wd[:, k] ^ np.repeat(wq[:, k], counts))
        # Smallest distance per query, then smallest id among the tied rows.
        seg_min = np.minimum.reduceat(dist, starts)
        ids = self.ids[rows]
        tied_ids = np.where(dist == seg_min[owner], ids, np.iinfo(np.int64).max)
        seg_id = np.minimum.reduceat(tied_ids, starts)
        first = np.nonzero(tied_ids == seg_id[owner])[0]
        best_row[owner[first]] = rows[first]
        best_dist[owner[first]] = dist[first]
        return best_row, best_dist


def build(
    ids: Sequence[int],
    descriptors: np.ndarray,
    leaf_cap: int = DEFAULT_LEAF_CAP,
    shot_ids: Sequence[int] | None = None,
) -> KdTree:
    """Build a tree over ``descriptors`` (``(n, 32)`` uint8) labelled by unique ``ids``."""
    if leaf_cap < 1:
        raise ValueError(f"leaf_cap must be >= 1, got {leaf_cap}")
    ids = np.asarray(ids, dtype=np.int64).reshape(-1)
    desc = np.ascontiguousarray(descriptors, dtype=np.uint8).reshape(-1, DESC_BYTES)
    if len(ids) != len(desc):
        raise ValueError("ids and descriptors differ in length")
    if len(np.unique(ids)) != len(ids):
        raise ValueError("ids must be unique")
    if ids.size and ids.min() < 0:
        raise ValueError("ids must be non-negative")
    shots = np.full(len(ids), 0, np.int64) if shot_ids is None else np.asarray(shot_ids, np.int64).reshape(-1)
    if len(shots) != len(ids):
        raise ValueError("shot_ids and ids differ in length")

    dims, lefts, rights, leaf_start, leaf_count = [], [], [], [], []
    order: list[np.ndarray] = []
    n_ordered = 0
    if len(ids) == 0:
        return KdTree(leaf_cap, dims, lefts, rights, leaf_start, leaf_count, ids, desc, shots)

    bits = unpack_bits(desc)

    def new_node():
        dims.append(-1)
        lefts.append(-1)
        rights.append(-1)
        leaf_start.append(0)
        leaf_count.append(0)
        return len(dims) - 1

    def grow(rows: np.ndarray) -> int:
        nonlocal n_ordered
        node = new_node()
        dim = split_dim(bits[rows]) if len(rows) > leaf_cap else None
        if dim is None:
            leaf_start[node] = n_ordered
            leaf_count[node] = len(rows)
            order.append(rows)
            n_ordered += len(rows)
            return node
        dims[node] = dim
        mask = bits[rows, dim].astype(bool)
        lefts[node] = grow(rows[mask])
        rights[node] = grow(rows[~mask])
        return node

    grow(np.arange(len(ids)))
    perm = np.concatenate(order)
    return KdTree(leaf_cap, dims, lefts, rights, leaf_start, leaf_count, ids[perm], desc[perm], shots[perm])


def search(tree: KdTree, q: np.ndarray, budget: SearchBudget = SearchBudget()) -> list[tuple[int, int]]:
    return tree.search(q, budget)


def linear_search(ids, descriptors, q, k: int = 1) -> list[tuple[int, int]]:
    """Exhaustive k-NN with the same (distance, id) ordering as :meth:`KdTree.search`."""
    ids = np.asarray(ids, np.int64)
    if ids.size == 0:
        return []
    dist = hamming_to_many(q, descriptors)
    order = np.lexsort((ids, dist))[:k]
    return [(int(ids[o]), int(dist[o])) for o in order]


# ---------------------------------------------------------------------------
# Persistence


def serialize(tree: KdTree) -> bytes:
    out = bytearray(_HEADER.pack(MAGIC, VERSION, tree.leaf_cap, tree.n_indexed, tree.n_nodes))
    for i in range(tree.n_nodes):
        if tree._dim[i] >= 0:
            out.append(TAG_DECISION)
            out += _DECISION.pack(tree._dim[i], tree._left[i], tree._right[i])
        else:
            out.append(TAG_LEAF)
            out += _LEAF.pack(tree._leaf_count[i])
            out += tree.ids[tree.leaf_rows(i)].astype("<u8").tobytes()
    table = np.empty(tree.n_indexed, dtype=_TABLE_DTYPE)
    table["id"] = tree.ids
    table["desc"] = tree.desc
    table["shot"] = tree.shot_ids
    out += table.tobytes()
    return bytes(out)


def deserialize(data: bytes) -> KdTree:
    data = memoryview(data)
    if len(data) < _HEADER.size:
        raise CorruptIndex("truncated header")
    magic, version, leaf_cap, n_indexed, n_nodes = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise CorruptIndex(f"bad magic {bytes(magic)!r}")
    if version != VERSION:
        raise CorruptIndex(f"unsupported version {version}")
    if leaf_cap < 1:
        raise CorruptIndex("leaf capacity must be >= 1")
    # Each node needs at least 5 octets, each table row 48.
    if n_nodes * 5 + n_indexed * _TABLE_DTYPE.itemsize > len(data) - _HEADER.size:
        raise CorruptIndex("declared sizes exceed stream length")
    pos = _HEADER.size
    dims, lefts, rights, leaf_ids = [], [], [], []
    try:
        for i in range(n_nodes):
            tag = data[pos]
            pos += 1
            if tag == TAG_DECISION:
                dim, left, right = _DECISION.unpack_from(data, pos)
                pos += _DECISION.size
                if dim >= DESC_BITS:
                    raise CorruptIndex(f"node {i}: dim {dim} out of range")
                if not (i < left < n_nodes and i < right < n_nodes) or left == right:
                    raise CorruptIndex(f"node {i}: child reference out of range")
                dims.append(dim)
                lefts.append(left)
                rights.append(right)
                leaf_ids.append(None)
            elif tag == TAG_LEAF:
                (count,) = _LEAF.unpack_from(data, pos)
                pos += _LEAF.size
                if pos + 8 * count > len(data):
                    raise CorruptIndex(f"node {i}: leaf runs past end of stream")
                leaf_ids.append(np.frombuffer(data, "<u8", count=count, offset=pos).astype(np.int64))
                pos += 8 * count
                dims.append(-1)
                lefts.append(-1)
                rights.append(-1)
            else:
                raise CorruptIndex(f"node {i}: unknown tag {tag}")
    except (struct.error, IndexError) as exc:
        raise CorruptIndex(f"truncated node section: {exc}") from None

    if len(data) - pos != n_indexed * _TABLE_DTYPE.itemsize:
        raise CorruptIndex("vector table length mismatch")
    table = np.frombuffer(data, _TABLE_DTYPE, count=n_indexed, offset=pos)

    if n_nodes == 0:
        if n_indexed:
            raise CorruptIndex("vectors present but no nodes")
        return KdTree(leaf_cap, [], [], [], [], [], np.zeros(0, np.int64), np.zeros((0, DESC_BYTES), np.uint8), np.zeros(0, np.int64))

    # Every non-root node must be referenced exactly once.
    seen = np.zeros(n_nodes, dtype=np.int64)
    for lft, rgt in zip(lefts, rights):
        if lft >= 0:
            seen[lft] += 1
            seen[rgt] += 1
    if seen[0] != 0 or (seen[1:] != 1).any():
        raise CorruptIndex("node references do not form a tree")

    table_ids = table["id"].astype(np.int64)
    row_of = {int(v): r for r, v in enumerate(table_ids)}
    if len(row_of) != n_indexed:
        raise CorruptIndex("duplicate ids in vector table")
    leaf_start = [0] * n_nodes
    leaf_count = [0] * n_nodes
    perm = []
    n = 0
    for i, li in enumerate(leaf_ids):
        if li is None:
            continue
        leaf_start[i] = n
        leaf_count[i] = len(li)
        for v in li.tolist():
            r = row_of.get(v)
            if r is None:
                raise CorruptIndex(f"leaf {i} references unknown id {v}")
            perm.append(r)
        n += len(li)
    if n != n_indexed or len(set(perm)) != n_indexed:
        raise CorruptIndex("leaves do not partition the vector table")
    perm = np.asarray(perm, dtype=np.intp)
    return KdTree(
        leaf_cap, dims, lefts, rights, leaf_start, leaf_count,
        table_ids[perm], table["desc"][perm], table["shot"].astype(np.int64)[perm],
    )


def save(path, tree: KdTree) -> None:
    with open(path, "wb") as f:
        f.write(serialize(tree))


def load(path) -> KdTree:
    with open(path, "rb") as f:
        return deserialize(f.read())
