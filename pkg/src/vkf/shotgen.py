"""Shot boundaries from track discontinuities and majority-vote key features."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from vkf.descriptor import pack_bits, unpack_bits
from vkf.errors import InconsistentTracks
from vkf.tracker import Track

DEFAULT_MIN_TRACK_LEN = 8


@dataclass
class Shot:
    id: int
    video_id: str
    start_frame: int
    end_frame: int
    key_feature_ids: list[int] = field(default_factory=list)

    @property
    def n_frames(self) -> int:
        return self.end_frame - self.start_frame + 1

    def __contains__(self, frame_idx: int) -> bool:
        return self.start_frame <= frame_idx <= self.end_frame


@dataclass(eq=False)
class KeyFeature:
    id: int
    descriptor: np.ndarray
    shot_id: int
    track_len: int


def detect_boundaries(tracks: Sequence[Track], n_frames: int) -> list[int]:
    """Frames ``t`` such that no track contains both ``t - 1`` and ``t``."""
    if n_frames <= 1:
        return []
    # shared[t] counts tracks covering the transition (t-1 -> t).
    delta = np.zeros(n_frames + 1, dtype=np.int64)
    for t in tracks:
        if len(t) < 2:
            continue
        if t.start_frame < 0 or t.end_frame > n_frames - 1:
            raise ValueError(f"track {t.id} spans frames outside [0, {n_frames - 1}]")
        delta[t.start_frame + 1] += 1
        delta[t.end_frame + 1] -= 1
    shared = np.cumsum(delta)[:n_frames]
    return [int(t) for t in np.nonzero(shared[1:] == 0)[0] + 1]


def majority_descriptor(desc: np.ndarray) -> np.ndarray:
    """Per-bit majority; an exact tie copies the first descriptor's bit."""
    bits = unpack_bits(desc)
    ones = bits.sum(axis=0, dtype=np.int64) * 2
    n = len(bits)
    out = (ones > n).astype(np.uint8)
    tie = ones == n
    out[tie] = bits[0, tie]
    return pack_bits(out)[0]


def aggregate_track(track: Track, min_len: int = DEFAULT_MIN_TRACK_LEN) -> KeyFeature | None:
    """Key feature for ``track``, or ``None`` for tracks shorter than ``min_len``.

    The returned feature carries placeholder ``id`` and ``shot_id`` of -1;
    :func:`build_shots` assigns the real ones.
    """
    if len(track) < min_len:
        return None
    return KeyFeature(-1, majority_descriptor(track.desc), -1, len(track))


def shots_from_boundaries(boundaries: Sequence[int], n_frames: int, video_id: str, first_id: int = 0) -> list[Shot]:
    edges = [0, *boundaries, n_frames]
    return [Shot(first_id + k, video_id, a, b - 1) for k, (a, b) in enumerate(zip(edges[:-1], edges[1:]))]


def build_shots(
    tracks: Sequence[Track],
    n_frames: int,
    video_id: str,
    min_len: int = DEFAULT_MIN_TRACK_LEN,
    first_shot_id: int = 0,
    first_key_id: int = 0,
) -> tuple[list[Shot], list[KeyFeature]]:
    """Partition one video into shots and attach each surviving key feature to its shot.

    ``first_shot_id`` and ``first_key_id`` offset the dense id ranges so that
    several videos can share one index.
    """
    if n_frames < 1:
        return [], []
    shots = shots_from_boundaries(detect_boundaries(tracks, n_frames), n_frames, video_id, first_shot_id)
    starts = np.array([s.start_frame for s in shots])

    per_shot: list[list[tuple[int, int, KeyFeature]]] = [[] for _ in shots]
    for t in tracks:
        k = int(np.searchsorted(starts, t.start_frame, side="right")) - 1
        shot = shots[k]
        if t.end_frame not in shot:
            raise InconsistentTracks(
                f"track {t.id} spans frames {t.start_frame}-{t.end_frame} across shot boundary at {shot.end_frame + 1}"
            )
        kf = aggregate_track(t, min_len)
        if kf is not None:
            per_shot[k].append((t.start_frame, t.id, kf))

    keys: list[KeyFeature] = []
    next_id = first_key_id
    for shot, items in zip(shots, per_shot):
        for _, _, kf in sorted(items, key=lambda it: (it[0], it[1])):
            kf.id = next_id
            kf.shot_id = shot.id
            shot.key_feature_ids.append(next_id)
            keys.append(kf)
            next_id += 1
    return shots, keys
