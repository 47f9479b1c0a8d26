import numpy as np
import pytest

from vkf import kdindex
from vkf.catalog import Catalog, ProductItem
from vkf.config import EngineConfig
from vkf.descriptor import FeatureSet, GrayImage, extract_features
from vkf.errors import CorruptIndex, EmptyIndex, EmptyQuery, TooFewFeatures
from vkf.evalkit import SynthConfig, synth_sequence
from vkf.kdindex import SearchBudget
from vkf.retrieval import (
    Engine,
    FrameStore,
    build_engine,
    frame_scores,
    query_features,
    query_image,
    rank_frames,
    stats,
    vote,
)

from conftest import block_scene, random_desc, random_features, scene_frame


def popcount_dist(a, b):
    return bin(int.from_bytes(bytes(a), "little") ^ int.from_bytes(bytes(b), "little")).count("1")


def as_query(desc):
    desc = np.asarray(desc, np.uint8).reshape(-1, 32)
    return FeatureSet(np.zeros((len(desc), 2)), np.zeros(len(desc)), desc)


def flip(d, bits):
    d = d.copy()
    for b in bits:
        d[b // 8] ^= 1 << (b % 8)
    return d


def vote_oracle(query_desc, ids, desc, shots):
    """Exhaustive nearest key feature per query descriptor, then the vote tie rules."""
    tally = {}
    for q in query_desc:
        best = min(range(len(ids)), key=lambda r: (popcount_dist(q, desc[r]), ids[r]))
        v, s = tally.get(shots[best], (0, 0))
        tally[shots[best]] = (v + 1, s + popcount_dist(q, desc[best]))
    return min(tally, key=lambda s: (-tally[s][0], tally[s][1], s)), {s: v for s, (v, _) in tally.items()}


def score_oracle(query_desc, frame_desc):
    if len(frame_desc) == 0:
        return 256 * len(query_desc)
    return sum(min(popcount_dist(q, f) for f in frame_desc) for q in query_desc)


@pytest.fixture(scope="module")
def synth_engine():
    cfg = SynthConfig(n_shots=3, frames_per_shot=30, feats_per_frame=60, seed=1)
    frames, gt = synth_sequence(cfg, "clip")
    engine, shots, keys = build_engine([("clip", frames)])
    return engine, frames, gt, shots, keys


# -- vote --------------------------------------------------------------------


def test_vote_unanimous(rng):
    desc = random_desc(rng, 40)
    shots = np.repeat(np.arange(5), 8)
    tree = kdindex.build(range(40), desc, 4, shots)
    q = as_query(desc[24:32])
    winner, hist = vote(q, tree, SearchBudget(tree.n_decision_nodes))
    assert winner == 3 and hist == {3: 8}


def test_vote_empty_query(rng):
    tree = kdindex.build(range(5), random_desc(rng, 5))
    with pytest.raises(EmptyQuery):
        vote(FeatureSet(), tree)


def test_vote_tie_broken_by_distance(rng):
    base = random_desc(rng, 4)
    tree = kdindex.build([0, 1, 2, 3], base, 1, [7, 7, 2, 2])
    # Two votes each; shot 7's matches cost 20 + 20, shot 2's cost 25 + 30.
    q = as_query([flip(base[0], range(20)), flip(base[1], range(20)), flip(base[2], range(25)), flip(base[3], range(30))])
    winner, hist = vote(q, tree, SearchBudget(tree.n_decision_nodes))
    assert hist == {2: 2, 7: 2}
    assert winner == 7
    # Equal votes and equal distances: smaller shot id.
    q = as_query([base[0], base[2]])
    assert vote(q, tree, SearchBudget(tree.n_decision_nodes))[0] == 2


def test_vote_matches_exhaustive_oracle():
    rng = np.random.default_rng(11)
    for trial in range(20):
        n = int(rng.integers(5, 300))
        desc = random_desc(rng, n)
        ids = rng.permutation(n * 2)[:n]
        shots = rng.integers(0, 6, n)
        tree = kdindex.build(ids, desc, int(rng.integers(1, 20)), shots)
        qd = desc[rng.integers(0, n, 15)] ^ np.packbits(rng.random((15, 256)) < 0.1, axis=1, bitorder="little")
        qd = np.concatenate([qd, random_desc(rng, 5)])
        got = vote(as_query(qd), tree, SearchBudget(tree.n_decision_nodes))
        assert got == vote_oracle(qd, ids.tolist(), desc, shots.tolist())
        assert sum(got[1].values()) == len(qd)


def test_vote_k_greater_than_one(rng):
    desc = random_desc(rng, 30)
    tree = kdindex.build(range(30), desc, 5, np.arange(30) // 10)
    _, hist = vote(as_query(desc[:4]), tree, SearchBudget(tree.n_decision_nodes, k=3))
    assert sum(hist.values()) == 12


# -- rank_frames -------------------------------------------------------------


def test_rank_exact_frame(rng):
    frames = [(50 + k, random_features(rng, 20)) for k in range(10)]
    q = frames[7][1]
    assert rank_frames(q, frames) == (57, 0)


def test_rank_single_frame(rng):
    frames = [(9, random_features(rng, 20))]
    idx, score = rank_frames(random_features(rng, 5), frames)
    assert idx == 9 and score > 0


def test_rank_hand_built_three_frames():
    z = np.zeros(32, np.uint8)
    q = as_query([z, flip(z, range(8))])
    frames = [
        (0, as_query([flip(z, [0, 1, 2])])),                  # 3 + 5 = 8
        (1, as_query([flip(z, [8, 9]), flip(z, range(8, 16))])),  # min(2, 8) + min(10, 16) = 12
        (2, as_query([flip(z, range(6))])),                    # 6 + 2 = 8
    ]
    assert frame_scores(q, frames) == [(0, 8), (1, 12), (2, 8)]
    assert rank_frames(q, frames) == (0, 8)


def test_rank_empty_frame_scores_worst(rng):
    q = random_features(rng, 4)
    frames = [(0, FeatureSet()), (1, random_features(rng, 3))]
    scores = dict(frame_scores(q, frames))
    assert scores[0] == 256 * 4
    assert rank_frames(q, [(0, FeatureSet())]) == (0, 1024)


def test_frame_scores_match_oracle():
    rng = np.random.default_rng(12)
    q = random_features(rng, 25)
    frames = [(k, random_features(rng, int(rng.integers(0, 40)))) for k in range(12)]
    got = frame_scores(q, frames)
    assert got == [(k, score_oracle(q.desc, fs.desc)) for k, fs in frames]
    for _, s in got:
        assert 0 <= s <= 256 * len(q)


# -- query -------------------------------------------------------------------


def test_self_retrieval_synthetic(synth_engine):
    engine, frames, gt, _, _ = synth_engine
    for f in range(0, len(frames), 7):
        res = query_features(engine, frames[f])
        assert res.frame_score == 0
        shot = next(s for s in gt if s.start_frame <= f <= s.end_frame)
        assert shot.start_frame <= res.frame_idx <= shot.end_frame
        assert res.votes >= 1 and res.video_id == "clip"
        assert query_features(engine, frames[f]) == res


def test_too_few_features(synth_engine):
    engine = synth_engine[0]
    with pytest.raises(TooFewFeatures):
        query_features(engine, engine.store.shot_frames(0)[0][1][:9])
    with pytest.raises(TooFewFeatures):
        query_image(engine, GrayImage(np.full((120, 160), 128, np.uint8)))


def test_empty_index(rng):
    engine, shots, keys = build_engine([("v", [random_features(rng, 20) for _ in range(5)])])
    assert keys == [] and len(shots) == 5
    with pytest.raises(EmptyIndex):
        query_features(engine, random_features(rng, 20))


def test_query_image_self_retrieval():
    base = block_scene(3)
    imgs = [scene_frame(base, t, 30 + t) for t in range(16)]
    cfg = EngineConfig()
    feats = [extract_features(im, cfg.fast_threshold, cfg.max_features_per_frame, cfg.width) for im in imgs]
    catalog = Catalog([ProductItem("b", "Coat", "http://x/b", "cam", 4, 9), ProductItem("a", "Hat", "http://x/a", "cam", 0, 5)])
    engine, shots, keys = build_engine([("cam", feats)], cfg, catalog)
    assert len(shots) == 1 and len(keys) > 50
    for t in (0, 5, 11):
        res = query_image(engine, imgs[t])
        assert (res.frame_idx, res.frame_score) == (t, 0)
        assert [p.item_id for p in res.products] == [p.item_id for p in catalog.lookup("cam", t)]
    assert [p.item_id for p in query_image(engine, imgs[5]).products] == ["a", "b"]


# -- stats and persistence ---------------------------------------------------


def test_stats_empty():
    engine, _, _ = build_engine([])
    s = stats(engine)
    assert (s.n_frames, s.n_features, s.n_shots, s.n_key_features, s.compression) == (0, 0, 0, 0, 0.0)


def test_stats_counts(synth_engine):
    engine, frames, gt, shots, keys = synth_engine
    s = stats(engine)
    assert s.n_frames == len(frames) == 90
    assert s.n_features == sum(len(f) for f in frames)
    assert s.n_shots == len(gt) == 3
    assert [(x.start_frame, x.end_frame) for x in shots] == [(x.start_frame, x.end_frame) for x in gt]
    assert s.n_key_features == len(keys)
    assert s.compression == pytest.approx(s.n_features / s.n_key_features)


def test_persisted_engine_matches(synth_engine, tmp_path):
    engine, frames, *_ = synth_engine
    kdindex.save(tmp_path / "i", engine.tree)
    engine.store.save(tmp_path / "s")
    back = Engine.load(tmp_path / "i", tmp_path / "s")
    s0, s1 = stats(engine), stats(back)
    assert (s0.n_frames, s0.n_features, s0.n_shots, s0.n_key_features) == (s1.n_frames, s1.n_features, s1.n_shots, s1.n_key_features)
    for sid in engine.store.entries:
        a, b = engine.store.shot_frames(sid), back.store.shot_frames(sid)
        assert [k for k, _ in a] == [k for k, _ in b]
        for (_, x), (_, y) in zip(a, b):
            assert x == y
    for f in (0, 31, 89):
        assert query_features(back, frames[f]) == query_features(engine, frames[f])


def test_framestore_roundtrip_bytes(synth_engine, tmp_path):
    store = synth_engine[0].store
    store.save(tmp_path / "s")
    assert FrameStore.open(tmp_path / "s").to_bytes() == store.to_bytes()


def test_framestore_corruption(synth_engine, tmp_path):
    data = synth_engine[0].store.to_bytes()
    path = tmp_path / "bad"
    for bad in (b"XKFS" + data[4:], data[:4] + b"\x09" + data[5:], data[:10], data[:-3]):
        path.write_bytes(bad)
        with pytest.raises(CorruptIndex):
            FrameStore.open(path)
    # Payload damage surfaces when the shot is read.
    path.write_bytes(data[:20] + b"\xff" * 8 + data[28:])
    store = FrameStore.open(path)
    with pytest.raises(CorruptIndex):
        store.shot_frames(0)


def test_framestore_fuzzed_bytes(synth_engine, tmp_path):
    data = bytearray(synth_engine[0].store.to_bytes())
    rng = np.random.default_rng(13)
    path = tmp_path / "fuzz"
    # Damage the trailing offset table, where every octet matters to open().
    tail = len(data) - 200
    for _ in range(200):
        bad = bytearray(data)
        for pos in rng.integers(tail, len(data), 3):
            bad[pos] = int(rng.integers(256))
        path.write_bytes(bytes(bad))
        try:
            store = FrameStore.open(path)
            for sid in store.entries:
                store.shot_frames(sid)
        except CorruptIndex:
            pass
