"""Evaluation: visual-match scoring, confusion rates, accuracy, and a synthetic video generator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from vkf.descriptor import BORDER_MARGIN, DESC_BITS, DESC_BYTES, FeatureSet, pack_bits
from vkf.errors import DegenerateDenominator, NoQueries, TooFewFeatures
from vkf.config import EngineConfig
from vkf.retrieval import Engine, build_engine, query_features, stats
from vkf.shotgen import Shot
from vkf.tracker import DEFAULT_MAX_HAM, match_frames

DEFAULT_TAU = 0.15
FRAME_SLACK = 5


@dataclass(frozen=True)
class EvalParams:
    tau: float = DEFAULT_TAU
    match_ham: int = DEFAULT_MAX_HAM

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class SynthConfig:
    n_shots: int = 20
    frames_per_shot: int = 250
    feats_per_frame: int = 300
    bit_flip_rate: float = 0.01
    feature_dropout: float = 0.05
    drift_px: float = 2.0
    seed: int = 0
    width: int = 720
    height: int = 405

    def __post_init__(self):
        for name in ("n_shots", "frames_per_shot", "feats_per_frame"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("bit_flip_rate", "feature_dropout"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.drift_px < 0:
            raise ValueError("drift_px must be >= 0")
        if self.width <= 2 * BORDER_MARGIN or self.height <= 2 * BORDER_MARGIN:
            raise ValueError("frame is too small for the border margin")


# ---------------------------------------------------------------------------
# Scoring and rates


def visual_match_score(a: FeatureSet, b: FeatureSet, params: EvalParams = EvalParams()) -> float:
    """Fraction of the smaller feature set that has a mutual Hamming match in the other."""
    pairs = match_frames(a, b, params.match_ham, math.inf)
    return len(pairs) / max(1, min(len(a), len(b)))


def confusion_rates(counts: ConfusionCounts) -> tuple[float, float]:
    """``(TP / (TP + FN), FP / (FP + TN))``."""
    if counts.tp + counts.fn == 0:
        raise DegenerateDenominator("TP + FN is zero")
    if counts.fp + counts.tn == 0:
        raise DegenerateDenominator("FP + TN is zero")
    return counts.tp / (counts.tp + counts.fn), counts.fp / (counts.fp + counts.tn)


def accuracy(n_visual_matches: int, n_queries: int) -> float:
    if n_queries < 1:
        raise NoQueries("accuracy needs at least one query")
    if not 0 <= n_visual_matches <= n_queries:
        raise ValueError(f"{n_visual_matches} matches out of {n_queries} queries")
    return n_visual_matches / n_queries


def confusion_at(annotated: Sequence[tuple[float, bool]], tau: float) -> ConfusionCounts:
    """Positives are pairs scoring strictly above ``tau``."""
    tp = fp = tn = fn = 0
    for score, label in annotated:
        if score > tau:
            if label:
                tp += 1
            else:
                fp += 1
        elif label:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, tn, fn)


def threshold_sweep(annotated: Sequence[tuple[float, bool]], taus: Iterable[float]) -> list[tuple[float, float, float]]:
    """``(tau, TPR, FPR)`` per threshold. An empty class contributes a rate of 0."""
    scores = np.array([s for s, _ in annotated], dtype=np.float64)
    labels = np.array([bool(lb) for _, lb in annotated], dtype=bool)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    out = []
    for tau in taus:
        above = scores > tau
        tp = int((above & labels).sum())
        fp = int((above & ~labels).sum())
        out.append((float(tau), tp / n_pos if n_pos else 0.0, fp / n_neg if n_neg else 0.0))
    return out


def read_annotations(path) -> list[tuple[str, str, float, bool]]:
    """TSV rows ``frame_a_ref, frame_b_ref, score, label``; a header row is optional."""
    rows = []
    with open(path, encoding="utf-8") as f:
        for n, line in enumerate(f, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValueError(f"{path}:{n}: expected 4 tab-separated fields")
            if n == 1 and parts[2] == "score":
                continue
            label = parts[3].strip().lower()
            if label not in ("0", "1", "true", "false"):
                raise ValueError(f"{path}:{n}: label must be 0/1/true/false, got {parts[3]!r}")
            rows.append((parts[0], parts[1], float(parts[2]), label in ("1", "true")))
    return rows


def write_annotations(path, rows: Iterable[tuple[str, str, float, bool]]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("frame_a\tframe_b\tscore\tlabel\n")
        for a, b, s, lb in rows:
            f.write(f"{a}\t{b}\t{s!r}\t{int(bool(lb))}\n")


# ---------------------------------------------------------------------------
# Synthetic data


def synth_sequence(config: SynthConfig, video_id: str = "synth") -> tuple[list[FeatureSet], list[Shot]]:
    """Shots of persistent random features with per-frame bit noise, jitter and dropout.

    Every frame of a shot re-samples its noise around the shot's base
    descriptors and positions, so consecutive frames stay close while
    different shots are independent.
    """
    rng = np.random.default_rng(config.seed)
    nf = config.feats_per_frame
    lo = float(BORDER_MARGIN)
    frames: list[FeatureSet] = []
    shots: list[Shot] = []
    for s in range(config.n_shots):
        base_desc = rng.integers(0, 256, size=(nf, DESC_BYTES), dtype=np.uint8)
        base_xy = np.stack(
            [rng.uniform(lo, config.width - 1 - lo, nf), rng.uniform(lo, config.height - 1 - lo, nf)], axis=1
        )
        base_resp = rng.uniform(1.0, 100.0, nf)
        start = len(frames)
        for _ in range(config.frames_per_shot):
            flips = pack_bits(rng.random((nf, DESC_BITS)) < config.bit_flip_rate)
            jitter = rng.uniform(-config.drift_px, config.drift_px, (nf, 2))
            keep = rng.random(nf) >= config.feature_dropout
            xy = np.clip(base_xy + jitter, lo, [config.width - 1 - lo, config.height - 1 - lo])
            frames.append(FeatureSet(xy[keep], base_resp[keep], (base_desc ^ flips)[keep]))
        shots.append(Shot(s, video_id, start, len(frames) - 1))
    return frames, shots


def synth_query(frame_features: FeatureSet, flip_rate: float, dropout: float, seed: int) -> FeatureSet:
    """Perturb a frame: drop each feature with ``dropout``, flip each surviving bit with ``flip_rate``."""
    if not (0.0 <= flip_rate <= 1.0 and 0.0 <= dropout <= 1.0):
        raise ValueError("rates must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    n = len(frame_features)
    keep = rng.random(n) >= dropout
    kept = frame_features[keep]
    flips = pack_bits(rng.random((len(kept), DESC_BITS)) < flip_rate)
    return FeatureSet(kept.xy, kept.response, kept.desc ^ flips)


# ---------------------------------------------------------------------------
# Synthetic retrieval experiments


@dataclass(frozen=True)
class SynthQuery:
    video_id: str
    frame_idx: int
    features: FeatureSet


@dataclass
class EvalReport:
    n_queries: int
    n_matches: int
    outcomes: list[bool] = field(default_factory=list)

    @property
    def accuracy(self) -> float:
        return accuracy(self.n_matches, self.n_queries)


def sample_queries(
    videos: dict[str, Sequence[FeatureSet]],
    n: int,
    flip_rate: float,
    dropout: float,
    seed: int,
    video_ids: Sequence[str] | None = None,
) -> list[SynthQuery]:
    """``n`` perturbed copies of uniformly chosen frames from ``video_ids`` (default: all)."""
    rng = np.random.default_rng(seed)
    pool = list(video_ids if video_ids is not None else videos)
    out = []
    for k in range(n):
        vid = pool[int(rng.integers(len(pool)))]
        fidx = int(rng.integers(len(videos[vid])))
        sub_seed = int(rng.integers(2**63))
        out.append(SynthQuery(vid, fidx, synth_query(videos[vid][fidx], flip_rate, dropout, sub_seed)))
    return out


def shot_containing(shots: Sequence[Shot], frame_idx: int) -> Shot:
    for s in shots:
        if frame_idx in s:
            return s
    raise KeyError(f"frame {frame_idx} is not covered by any shot")


def is_visual_match(
    retrieved_video: str,
    retrieved_frame: int,
    q: SynthQuery,
    videos: dict[str, Sequence[FeatureSet]],
    gt_shots: dict[str, Sequence[Shot]],
    params: EvalParams = EvalParams(),
) -> bool:
    """Same ground-truth shot within +-5 frames, or a visual-match score above ``tau``."""
    if retrieved_video == q.video_id:
        gt = shot_containing(gt_shots[q.video_id], q.frame_idx)
        if retrieved_frame in gt and abs(retrieved_frame - q.frame_idx) <= FRAME_SLACK:
            return True
    score = visual_match_score(videos[retrieved_video][retrieved_frame], videos[q.video_id][q.frame_idx], params)
    return score > params.tau


def evaluate(
    engine: Engine,
    queries: Sequence[SynthQuery],
    videos: dict[str, Sequence[FeatureSet]],
    gt_shots: dict[str, Sequence[Shot]],
    params: EvalParams = EvalParams(),
    backtracks: int | None = None,
) -> EvalReport:
    """Run every query through ``engine`` and count visual matches."""
    outcomes = []
    for q in queries:
        try:
            res = query_features(engine, q.features, backtracks)
        except TooFewFeatures:
            outcomes.append(False)
            continue
        outcomes.append(is_visual_match(res.video_id, res.frame_idx, q, videos, gt_shots, params))
    return EvalReport(len(queries), sum(outcomes), outcomes)


@dataclass
class BenchReport:
    stats: object
    accuracy_by_b: dict[int, float]
    n_queries: int


def synth_videos(config: SynthConfig, n_videos: int) -> tuple[dict[str, list[FeatureSet]], dict[str, list[Shot]]]:
    """``n_videos`` independent sequences; video ``k`` uses seed ``config.seed + k``."""
    videos, shots = {}, {}
    for k in range(n_videos):
        vid = f"video{k:03d}"
        frames, gt = synth_sequence(replace(config, seed=config.seed + k), vid)
        videos[vid], shots[vid] = frames, gt
    return videos, shots


def bench(
    synth: SynthConfig,
    engine_config: EngineConfig,
    n_queries: int,
    seed: int,
    backtracks: Sequence[int] | None = None,
    n_videos: int = 1,
    query_flip: float = 0.05,
    query_dropout: float = 0.2,
    params: EvalParams | None = None,
) -> BenchReport:
    """Generate, index and query a synthetic collection; accuracy per backtracking budget."""
    videos, gt = synth_videos(synth, n_videos)
    engine, _, _ = build_engine(list(videos.items()), engine_config)
    queries = sample_queries(videos, n_queries, query_flip, query_dropout, seed)
    params = params or EvalParams(tau=engine_config.tau, match_ham=engine_config.max_ham)
    budgets = list(backtracks) if backtracks else [engine_config.backtracks]
    acc = {b: evaluate(engine, queries, videos, gt, params, b).accuracy for b in budgets}
    return BenchReport(stats(engine), acc, n_queries)
