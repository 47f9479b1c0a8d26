"""Training pipeline assembly and the query path: shot voting then per-shot frame ranking."""

from __future__ import annotations

import logging
import os
import struct
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from vkf import kdindex
from vkf.catalog import Catalog, ProductItem
from vkf.config import EngineConfig
from vkf.descriptor import (
    DESC_BITS,
    DESC_BYTES,
    DUMP_DTYPE,
    FeatureSet,
    GrayImage,
    extract_features,
    hamming_matrix,
    records_to_featureset,
)
from vkf.errors import CorruptIndex, EmptyIndex, EmptyQuery, TooFewFeatures
from vkf.kdindex import KdTree, SearchBudget
from vkf.shotgen import KeyFeature, Shot, build_shots
from vkf.tracker import track_video

log = logging.getLogger(__name__)

FS_MAGIC = b"VKFS"
FS_VERSION = 1
_FS_HEADER = struct.Struct("<4sIQ")
_FS_SHOT = struct.Struct("<QQ")
_FS_FRAME = struct.Struct("<QI")
_FS_ENTRY = struct.Struct("<QQQQQH")
_FS_FOOTER = struct.Struct("<QQ")

# Cap on query x frame-descriptor cells scored at once while ranking frames.
_RANK_BLOCK = 4_000_000


@dataclass(frozen=True)
class ShotEntry:
    shot_id: int
    video_id: str
    start_frame: int
    end_frame: int
    n_features: int
    offset: int = 0

    @property
    def n_frames(self) -> int:
        return self.end_frame - self.start_frame + 1


class FrameStore:
    """Full per-frame feature lists, grouped by shot, for the final ranking stage.

    Either held in memory (``frames`` given) or backed by a VKFS file read
    one shot at a time. Reads open their own handle, so concurrent queries
    never share a file cursor.
    """

    def __init__(
        self,
        entries: Iterable[ShotEntry],
        frames: dict[int, list[FeatureSet]] | None = None,
        path=None,
        table_offset: int = 0,
    ):
        self.entries: dict[int, ShotEntry] = {e.shot_id: e for e in entries}
        self._frames = frames
        self.path = path
        self._spans: dict[int, tuple[int, int]] = {}
        if path is not None:
            offs = sorted((e.offset, e.shot_id) for e in self.entries.values())
            ends = [o for o, _ in offs[1:]] + [table_offset]
            self._spans = {sid: (o, end) for (o, sid), end in zip(offs, ends)}

    @classmethod
    def from_shots(cls, shots: Sequence[Shot], frames_by_video: dict[str, Sequence[FeatureSet]]) -> "FrameStore":
        entries, frames = [], {}
        for s in shots:
            fl = list(frames_by_video[s.video_id][s.start_frame:s.end_frame + 1])
            if len(fl) != s.n_frames:
                raise ValueError(f"shot {s.id} covers frames missing from video {s.video_id!r}")
            frames[s.id] = fl
            entries.append(ShotEntry(s.id, s.video_id, s.start_frame, s.end_frame, sum(len(f) for f in fl)))
        return cls(entries, frames)

    @property
    def n_shots(self) -> int:
        return len(self.entries)

    @property
    def n_frames(self) -> int:
        return sum(e.n_frames for e in self.entries.values())

    @property
    def n_features(self) -> int:
        return sum(e.n_features for e in self.entries.values())

    def shot_frames(self, shot_id: int) -> list[tuple[int, FeatureSet]]:
        e = self.entries[shot_id]
        if self._frames is not None:
            fl = self._frames[shot_id]
        else:
            fl = self._read_shot(shot_id)
        return list(zip(range(e.start_frame, e.end_frame + 1), fl))

    def _read_shot(self, shot_id: int) -> list[FeatureSet]:
        start, end = self._spans[shot_id]
        with open(self.path, "rb") as f:
            f.seek(start)
            blob = f.read(end - start)
        if len(blob) != end - start or len(blob) < _FS_SHOT.size:
            raise CorruptIndex(f"shot {shot_id} truncated")
        sid, n_frames = _FS_SHOT.unpack_from(blob, 0)
        e = self.entries[shot_id]
        if sid != shot_id or n_frames != e.n_frames:
            raise CorruptIndex(f"shot {shot_id} record header does not match the offset table")
        pos = _FS_SHOT.size
        out = []
        for k in range(n_frames):
            if pos + _FS_FRAME.size > len(blob):
                raise CorruptIndex(f"shot {shot_id} truncated at frame {k}")
            fidx, cnt = _FS_FRAME.unpack_from(blob, pos)
            pos += _FS_FRAME.size
            if fidx != e.start_frame + k or pos + cnt * DUMP_DTYPE.itemsize > len(blob):
                raise CorruptIndex(f"shot {shot_id} frame {k} is malformed")
            rec = np.frombuffer(blob, DUMP_DTYPE, count=cnt, offset=pos)
            out.append(records_to_featureset(rec))
            pos += cnt * DUMP_DTYPE.itemsize
        return out

    # -- persistence ---------------------------------------------------------

    def to_bytes(self) -> bytes:
        out = bytearray(_FS_HEADER.pack(FS_MAGIC, FS_VERSION, self.n_shots))
        table = []
        for sid in sorted(self.entries):
            e = self.entries[sid]
            table.append((e, len(out)))
            out += _FS_SHOT.pack(sid, e.n_frames)
            for fidx, fs in self.shot_frames(sid):
                rec = np.empty(len(fs), dtype=DUMP_DTYPE)
                rec["x"], rec["y"] = fs.xy[:, 0], fs.xy[:, 1]
                rec["response"] = fs.response
                rec["desc"] = fs.desc
                out += _FS_FRAME.pack(fidx, len(fs))
                out += rec.tobytes()
        table_offset = len(out)
        for e, off in table:
            vid = e.video_id.encode("utf-8")
            out += _FS_ENTRY.pack(e.shot_id, off, e.start_frame, e.end_frame, e.n_features, len(vid))
            out += vid
        out += _FS_FOOTER.pack(len(table), table_offset)
        return bytes(out)

    def save(self, path) -> None:
        with open(path, "wb") as f:
            f.write(self.to_bytes())

    @classmethod
    def open(cls, path) -> "FrameStore":
        """Read the header and offset table; shot payloads stay on disk."""
        size = os.path.getsize(path)
        with open(path, "rb") as f:
            head = f.read(_FS_HEADER.size)
            if len(head) < _FS_HEADER.size:
                raise CorruptIndex("frame store header truncated")
            magic, version, n_shots = _FS_HEADER.unpack(head)
            if magic != FS_MAGIC:
                raise CorruptIndex(f"bad frame store magic {magic!r}")
            if version != FS_VERSION:
                raise CorruptIndex(f"unsupported frame store version {version}")
            if size < _FS_HEADER.size + _FS_FOOTER.size:
                raise CorruptIndex("frame store truncated")
            f.seek(size - _FS_FOOTER.size)
            n_entries, table_offset = _FS_FOOTER.unpack(f.read(_FS_FOOTER.size))
            if n_entries != n_shots or not _FS_HEADER.size <= table_offset <= size - _FS_FOOTER.size:
                raise CorruptIndex("frame store footer inconsistent with header")
            f.seek(table_offset)
            table = f.read(size - _FS_FOOTER.size - table_offset)
        entries = []
        pos = 0
        try:
            for _ in range(n_entries):
                sid, off, start, end, nfeat, vlen = _FS_ENTRY.unpack_from(table, pos)
                pos += _FS_ENTRY.size
                vid = table[pos:pos + vlen]
                if len(vid) != vlen:
                    raise CorruptIndex("offset table truncated")
                pos += vlen
                if not _FS_HEADER.size <= off < table_offset or start > end:
                    raise CorruptIndex(f"offset table entry for shot {sid} out of range")
                entries.append(ShotEntry(sid, vid.decode("utf-8"), start, end, nfeat, off))
        except struct.error:
            raise CorruptIndex("offset table truncated") from None
        except UnicodeDecodeError:
            raise CorruptIndex("offset table holds a malformed video id") from None
        if pos != len(table):
            raise CorruptIndex("trailing octets after offset table")
        return cls(entries, None, path, table_offset)


# ---------------------------------------------------------------------------
# Engine


@dataclass
class QueryResult:
    video_id: str
    frame_idx: int
    shot_id: int
    votes: int
    frame_score: int
    products: list[ProductItem] = field(default_factory=list)


@dataclass
class Stats:
    n_frames: int
    n_features: int
    n_shots: int
    n_key_features: int
    compression: float
    key_feature_bytes: int
    framestore_bytes: int | None = None

    def rows(self) -> list[tuple[str, object]]:
        rows = [
            ("n_frames", self.n_frames),
            ("n_features", self.n_features),
            ("n_shots", self.n_shots),
            ("n_key_features", self.n_key_features),
            ("compression", f"{self.compression:.4f}"),
            ("key_feature_bytes", self.key_feature_bytes),
        ]
        if self.framestore_bytes is not None:
            rows.append(("framestore_bytes", self.framestore_bytes))
        return rows


@dataclass
class Engine:
    tree: KdTree
    store: FrameStore
    catalog: Catalog = field(default_factory=Catalog)
    config: EngineConfig = field(default_factory=EngineConfig)

    @property
    def shots(self) -> dict[int, ShotEntry]:
        return self.store.entries

    @classmethod
    def load(cls, index_path, store_path, catalog: Catalog | None = None, config: EngineConfig | None = None) -> "Engine":
        return cls(kdindex.load(index_path), FrameStore.open(store_path), catalog or Catalog(), config or EngineConfig())


def build_engine(
    videos: Sequence[tuple[str, Sequence[FeatureSet]]],
    config: EngineConfig = EngineConfig(),
    catalog: Catalog | None = None,
) -> tuple[Engine, list[Shot], list[KeyFeature]]:
    """Track, segment and index every video. Shot and key-feature ids are global across videos."""
    all_shots: list[Shot] = []
    all_keys: list[KeyFeature] = []
    frames_by_video = {}
    for video_id, frames in videos:
        if video_id in frames_by_video:
            raise ValueError(f"duplicate video id {video_id!r}")
        frames_by_video[video_id] = frames
        tracks = track_video(frames, config.max_ham, config.max_px)
        shots, keys = build_shots(
            tracks, len(frames), video_id, config.min_track_len,
            first_shot_id=len(all_shots), first_key_id=len(all_keys),
        )
        log.debug("%s: %d frames, %d tracks, %d shots, %d key features",
                  video_id, len(frames), len(tracks), len(shots), len(keys))
        all_shots.extend(shots)
        all_keys.extend(keys)
    if all_keys:
        desc = np.stack([k.descriptor for k in all_keys])
    else:
        desc = np.zeros((0, DESC_BYTES), np.uint8)
    tree = kdindex.build([k.id for k in all_keys], desc, config.leaf_cap, [k.shot_id for k in all_keys])
    store = FrameStore.from_shots(all_shots, frames_by_video)
    return Engine(tree, store, catalog or Catalog(), config), all_shots, all_keys


def tally(query: FeatureSet, tree: KdTree, budget: SearchBudget) -> dict[int, tuple[int, int]]:
    """shot_id -> (votes, summed Hamming distance of those votes)."""
    desc = query.desc if isinstance(query, FeatureSet) else FeatureSet.from_features(query).desc
    acc: dict[int, list[int]] = defaultdict(lambda: [0, 0])
    if budget.k == 1:
        rows, dist = tree.nearest_rows(desc, budget.backtracks)
        ok = rows >= 0
        for s, d in zip(tree.shot_ids[rows[ok]].tolist(), dist[ok].tolist()):
            a = acc[s]
            a[0] += 1
            a[1] += d
    else:
        shot_of = tree.shot_of()
        for q in desc:
            for vid, d in tree.search(q, budget):
                a = acc[shot_of[vid]]
                a[0] += 1
                a[1] += d
    return {s: (v, d) for s, (v, d) in acc.items()}


def vote(query: FeatureSet, tree: KdTree, budget: SearchBudget = SearchBudget()) -> tuple[int, dict[int, int]]:
    """Winning shot and the vote histogram.

    Ties on votes go to the smaller summed distance, then the smaller shot id.
    """
    if len(query) == 0:
        raise EmptyQuery("no query features")
    t = tally(query, tree, budget)
    if not t:
        raise EmptyIndex("no key features examined")
    winner = min(t, key=lambda s: (-t[s][0], t[s][1], s))
    return winner, {s: v for s, (v, _) in sorted(t.items())}


def frame_scores(query: FeatureSet, shot_frames: Sequence[tuple[int, FeatureSet]]) -> list[tuple[int, int]]:
    """``(frame_idx, score)`` for every frame; score sums each query descriptor's nearest distance."""
    nq = len(query)
    scores = np.full(len(shot_frames), DESC_BITS * nq, dtype=np.int64)
    block: list[int] = []
    cells = 0

    def flush():
        if not block:
            return
        descs = np.concatenate([shot_frames[k][1].desc for k in block])
        d = hamming_matrix(query.desc, descs)
        counts = np.array([len(shot_frames[k][1]) for k in block])
        starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
        mins = np.minimum.reduceat(d, starts, axis=1)
        scores[block] = mins.sum(axis=0)
        block.clear()

    for k, (_, fs) in enumerate(shot_frames):
        if len(fs) == 0 or nq == 0:
            continue
        block.append(k)
        cells += nq * len(fs)
        if cells >= _RANK_BLOCK:
            flush()
            cells = 0
    flush()
    return [(fidx, int(s)) for (fidx, _), s in zip(shot_frames, scores)]


def rank_frames(query: FeatureSet, shot_frames: Sequence[tuple[int, FeatureSet]]) -> tuple[int, int]:
    """Frame with the lowest score; ties go to the smallest frame index."""
    if not shot_frames:
        raise ValueError("shot has no frames")
    return min(frame_scores(query, shot_frames), key=lambda fs: (fs[1], fs[0]))


def query_features(engine: Engine, query: FeatureSet, backtracks: int | None = None) -> QueryResult:
    cfg = engine.config
    if engine.tree.n_indexed == 0:
        raise EmptyIndex("index holds no key features")
    if len(query) < cfg.min_query_features:
        raise TooFewFeatures(f"{len(query)} query features, need {cfg.min_query_features}")
    b = cfg.backtracks if backtracks is None else backtracks
    shot_id, hist = vote(query, engine.tree, SearchBudget(b, 1))
    frame_idx, score = rank_frames(query, engine.store.shot_frames(shot_id))
    log.debug("query: %d features, %d shots voted, winner %d with %d votes, frame %d score %d",
              len(query), len(hist), shot_id, hist[shot_id], frame_idx, score)
    video_id = engine.shots[shot_id].video_id
    return QueryResult(video_id, frame_idx, shot_id, hist[shot_id], score, engine.catalog.lookup(video_id, frame_idx))


def query_image(engine: Engine, image: GrayImage) -> QueryResult:
    cfg = engine.config
    if engine.tree.n_indexed == 0:
        raise EmptyIndex("index holds no key features")
    feats = extract_features(image, cfg.fast_threshold, cfg.max_features_per_frame, cfg.width)
    return query_features(engine, feats)


def stats(engine: Engine) -> Stats:
    n_feat = engine.store.n_features
    n_key = engine.tree.n_indexed
    fs_bytes = os.path.getsize(engine.store.path) if engine.store.path else None
    return Stats(
        n_frames=engine.store.n_frames,
        n_features=n_feat,
        n_shots=engine.store.n_shots,
        n_key_features=n_key,
        compression=n_feat / n_key if n_key else 0.0,
        key_feature_bytes=n_key * DESC_BYTES,
        framestore_bytes=fs_bytes,
    )
