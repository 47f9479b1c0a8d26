"""Mutual-nearest-neighbour feature tracking across consecutive frames."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from vkf.descriptor import DESC_BYTES, Feature, FeatureSet, Keypoint, hamming_matrix

DEFAULT_MAX_HAM = 20
DEFAULT_MAX_PX = 100.0


def _first_per_group(group: np.ndarray, *keys: np.ndarray) -> np.ndarray:
    """Positions of the lexicographically smallest ``keys`` within each ``group`` value."""
    order = np.lexsort((*reversed(keys), group))
    g = group[order]
    head = np.ones(len(g), dtype=bool)
    head[1:] = g[1:] != g[:-1]
    return order[head]


def match_frames(
    prev: FeatureSet,
    curr: FeatureSet,
    max_ham: int = DEFAULT_MAX_HAM,
    max_px: float = DEFAULT_MAX_PX,
) -> list[tuple[int, int]]:
    """Mutual nearest neighbours between two frames under strict Hamming and pixel gates.

    Nearest means lowest Hamming distance, then lowest pixel distance, then
    lowest index on the other side. The pixel gate filters the mutual pairs
    rather than the candidates, so tightening either gate never creates a
    new pair. Returns ``(i, j)`` pairs sorted by ``i``.
    """
    if len(prev) == 0 or len(curr) == 0:
        return []
    ham = hamming_matrix(prev.desc, curr.desc)
    ii, jj = np.nonzero(ham < max_ham)
    if ii.size == 0:
        return []
    d = ham[ii, jj]
    a = prev.xy[ii].astype(np.float64)
    b = curr.xy[jj].astype(np.float64)
    px = np.hypot(a[:, 0] - b[:, 0], a[:, 1] - b[:, 1])
    # Row and column minima under the Hamming gate are the unrestricted minima.
    fwd = _first_per_group(ii, d, px, jj)
    bwd = _first_per_group(jj, d, px, ii)
    best_j = dict(zip(ii[fwd].tolist(), jj[fwd].tolist()))
    best_i = dict(zip(jj[bwd].tolist(), ii[bwd].tolist()))
    near = dict(zip(ii[fwd].tolist(), (px[fwd] < max_px).tolist()))
    return [(i, j) for i, j in sorted(best_j.items()) if best_i[j] == i and near[i]]


@dataclass(eq=False)
class Track:
    """Features matched across consecutive frames ``start_frame .. end_frame``.

    ``feature_idx[k]`` is the index of the member feature inside frame
    ``start_frame + k`` (``-1`` when the track was built by hand).
    """

    id: int
    start_frame: int
    desc: np.ndarray
    xy: np.ndarray = None
    feature_idx: np.ndarray = None

    def __post_init__(self):
        self.desc = np.ascontiguousarray(self.desc, dtype=np.uint8).reshape(-1, DESC_BYTES)
        n = len(self.desc)
        if n == 0:
            raise ValueError("a track needs at least one entry")
        self.xy = np.zeros((n, 2), np.float32) if self.xy is None else np.asarray(self.xy, np.float32).reshape(n, 2)
        if self.feature_idx is None:
            self.feature_idx = np.full(n, -1, dtype=np.int64)
        else:
            self.feature_idx = np.asarray(self.feature_idx, np.int64)

    def __len__(self) -> int:
        return len(self.desc)

    @property
    def end_frame(self) -> int:
        return self.start_frame + len(self) - 1

    @property
    def entries(self) -> list[tuple[int, Feature]]:
        return [
            (self.start_frame + k, Feature(Keypoint(float(x), float(y)), self.desc[k].copy()))
            for k, (x, y) in enumerate(self.xy)
        ]


@dataclass
class _Live:
    id: int
    start_frame: int
    idx: list[int]


@dataclass
class TrackerState:
    """Tracking state for one video. Single writer: feed frames in order."""

    max_ham: int = DEFAULT_MAX_HAM
    max_px: float = DEFAULT_MAX_PX
    current_frame: int = -1
    finished: list[Track] = field(default_factory=list)
    n_started: int = 0
    _live: list[_Live] = field(default_factory=list, repr=False)
    _frames: list[FeatureSet] = field(default_factory=list, repr=False)

    def _materialise(self, live: _Live) -> Track:
        frames = self._frames[live.start_frame:live.start_frame + len(live.idx)]
        idx = np.asarray(live.idx, dtype=np.int64)
        if len(idx) == 1:
            fs = frames[0]
            return Track(live.id, live.start_frame, fs.desc[idx], fs.xy[idx], idx)
        desc = np.stack([fs.desc[i] for fs, i in zip(frames, live.idx)])
        xy = np.stack([fs.xy[i] for fs, i in zip(frames, live.idx)])
        return Track(live.id, live.start_frame, desc, xy, idx)

    @property
    def active(self) -> list[Track]:
        return [self._materialise(lv) for lv in self._live]

    @property
    def n_active(self) -> int:
        return len(self._live)

    def advance(self, frame_features: FeatureSet) -> "TrackerState":
        if not isinstance(frame_features, FeatureSet):
            frame_features = FeatureSet.from_features(frame_features)
        frame = self.current_frame + 1
        matched_new = np.zeros(len(frame_features), dtype=bool)
        still_live: list[_Live] = []
        if self._live and len(frame_features):
            prev_frame = self._frames[-1]
            rows = np.array([lv.idx[-1] for lv in self._live], dtype=np.intp)
            pairs = match_frames(prev_frame[rows], frame_features, self.max_ham, self.max_px)
            extended = {i: j for i, j in pairs}
        else:
            extended = {}
        for k, lv in enumerate(self._live):
            j = extended.get(k)
            if j is None:
                self.finished.append(self._materialise(lv))
            else:
                lv.idx.append(j)
                matched_new[j] = True
                still_live.append(lv)
        self._frames.append(frame_features)
        for j in np.nonzero(~matched_new)[0]:
            still_live.append(_Live(self.n_started, frame, [int(j)]))
            self.n_started += 1
        self._live = still_live
        self.current_frame = frame
        return self


def advance(state: TrackerState, frame_features: FeatureSet) -> TrackerState:
    return state.advance(frame_features)


def finish(state: TrackerState) -> list[Track]:
    """Close every live track and return all tracks sorted by ``(start_frame, id)``."""
    state.finished.extend(state._materialise(lv) for lv in state._live)
    state._live = []
    return sorted(state.finished, key=lambda t: (t.start_frame, t.id))


def track_video(
    frames: Sequence[FeatureSet],
    max_ham: int = DEFAULT_MAX_HAM,
    max_px: float = DEFAULT_MAX_PX,
) -> list[Track]:
    state = TrackerState(max_ham=max_ham, max_px=max_px)
    for fs in frames:
        state.advance(fs)
    return finish(state)
