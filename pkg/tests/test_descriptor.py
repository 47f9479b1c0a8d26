import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vkf._brief_pattern import BRIEF_PAIRS
from vkf.descriptor import (
    FeatureSet,
    GrayImage,
    Keypoint,
    detect_fast,
    dump_bytes,
    encode_pgm,
    extract_brief,
    fast_response_map,
    generate_brief_pattern,
    hamming,
    hamming_matrix,
    load_pgm,
    parse_dump,
    scale_to_width,
    write_dump,
)
from vkf.errors import ImageTooSmall, Truncated, UnsupportedFormat

from conftest import random_desc, random_features

# Independent copy of the radius-3 Bresenham circle.
CIRCLE = [(0, -3), (1, -3), (2, -2), (3, -1), (3, 0), (3, 1), (2, 2), (1, 3),
          (0, 3), (-1, 3), (-2, 2), (-3, 1), (-3, 0), (-3, -1), (-2, -2), (-1, -3)]


def segment_test_oracle(px, x, y, t):
    """Arc-sum response at (x, y) by direct evaluation, 0 if not a corner."""
    c = int(px[y][x])
    ring = [int(px[y + dy][x + dx]) for dx, dy in CIRCLE]
    for sign in (1, -1):
        flags = [(v - c) * sign > t for v in ring]
        covered = set()
        for s in range(16):
            if all(flags[(s + k) % 16] for k in range(9)):
                covered.update((s + k) % 16 for k in range(9))
        if covered:
            return sum(abs(ring[k] - c) for k in covered)
    return 0


def oracle_response_map(img, t):
    px = img.pixels.tolist()
    out = np.zeros((img.height, img.width))
    for y in range(3, img.height - 3):
        for x in range(3, img.width - 3):
            out[y, x] = segment_test_oracle(px, x, y, t)
    return out


def square_image(size=64, lo=20, hi=200, x0=20, y0=20, side=11):
    px = np.full((size, size), lo, np.uint8)
    px[y0:y0 + side, x0:x0 + side] = hi
    return GrayImage(px)


# -- PGM ---------------------------------------------------------------------


def test_load_pgm_exact_pixels():
    img = load_pgm(b"P5\n2 2\n255\n" + bytes([0, 255, 128, 64]))
    assert (img.width, img.height) == (2, 2)
    assert img.pixels.ravel().tolist() == [0, 255, 128, 64]


def test_load_pgm_with_comment_and_roundtrip():
    img = load_pgm(b"P5\n# made by hand\n3 1\n255\n" + bytes([1, 2, 3]))
    assert img.pixels.tolist() == [[1, 2, 3]]
    assert load_pgm(encode_pgm(img)) == img


def test_load_pgm_rejects_ascii():
    with pytest.raises(UnsupportedFormat):
        load_pgm(b"P2\n2 2\n255\n0 1 2 3\n")


def test_load_pgm_rejects_16bit():
    with pytest.raises(UnsupportedFormat):
        load_pgm(b"P5\n1 1\n65535\n\x00\x01")


def test_load_pgm_truncated():
    with pytest.raises(Truncated):
        load_pgm(b"P5\n4 4\n255\n" + bytes(8))


# -- rescale -----------------------------------------------------------------


def test_scale_noop_at_target():
    img = GrayImage(np.zeros((10, 720), np.uint8))
    assert scale_to_width(img) is img


def test_scale_halves():
    rng = np.random.default_rng(0)
    img = GrayImage(rng.integers(0, 256, (720, 1440)).astype(np.uint8))
    out = scale_to_width(img, 720)
    assert (out.width, out.height) == (720, 360)
    # Exact 2x downscale samples the midpoint of each 2x2 block.
    expect = np.floor(img.pixels.reshape(360, 2, 720, 2).mean(axis=(1, 3)) + 0.5)
    np.testing.assert_array_equal(out.pixels, expect.astype(np.uint8))


def test_scale_never_upscales():
    img = GrayImage(np.zeros((480, 640), np.uint8))
    out = scale_to_width(img, 720)
    assert (out.width, out.height) == (640, 480)


@settings(max_examples=40, deadline=None)
@given(w=st.integers(1, 60), h=st.integers(1, 40), target=st.integers(1, 50), seed=st.integers(0, 2**32 - 1))
def test_scale_idempotent(w, h, target, seed):
    img = GrayImage(np.random.default_rng(seed).integers(0, 256, (h, w)).astype(np.uint8))
    once = scale_to_width(img, target)
    twice = scale_to_width(once, target)
    assert np.array_equal(once.pixels, twice.pixels)
    assert once.width == min(w, target)


# -- FAST --------------------------------------------------------------------


def test_fast_uniform_image_is_empty():
    assert detect_fast(GrayImage(np.full((64, 64), 77, np.uint8))) == []


def test_fast_too_small():
    with pytest.raises(ImageTooSmall):
        detect_fast(GrayImage(np.zeros((31, 64), np.uint8)))


def test_fast_response_map_matches_segment_test_oracle():
    rng = np.random.default_rng(3)
    px = rng.integers(0, 256, (40, 48)).astype(np.uint8)
    px[10:21, 12:23] = 230
    img = GrayImage(px)
    np.testing.assert_array_equal(fast_response_map(img, 20), oracle_response_map(img, 20))


def test_fast_square_corners():
    img = square_image()
    oracle = oracle_response_map(img, 20)
    np.testing.assert_array_equal(fast_response_map(img, 20), oracle)
    kps = detect_fast(img, 20, 500)
    pts = [(k.x, k.y) for k in kps]
    for cx, cy in [(20, 20), (30, 20), (20, 30), (30, 30)]:
        assert any(max(abs(x - cx), abs(y - cy)) <= 2 for x, y in pts), (cx, cy)
    assert not any(23 <= x <= 27 and 23 <= y <= 27 for x, y in pts)
    for k in kps:
        assert k.response == oracle[int(k.y), int(k.x)] > 0


def test_fast_sorted_and_truncated_to_strongest():
    px = np.full((80, 80), 20, np.uint8)
    px[10:21, 10:21] = 90
    px[45:56, 45:56] = 250
    img = GrayImage(px)
    oracle = oracle_response_map(img, 20)
    ys, xs = np.nonzero(oracle)
    best = min(zip(-oracle[ys, xs], ys, xs))
    top = detect_fast(img, 20, max_n=1)
    assert len(top) == 1
    assert (top[0].y, top[0].x) == (best[1], best[2])
    assert top[0].x >= 45  # the higher-contrast square
    all_kps = detect_fast(img, 20, 500)
    keys = [(-k.response, k.y, k.x) for k in all_kps]
    assert keys == sorted(keys)


def test_fast_invariant_to_small_brightness_offset():
    rng = np.random.default_rng(8)
    px = rng.integers(40, 200, (48, 48)).astype(np.uint8)
    a = detect_fast(GrayImage(px), 20, 500)
    b = detect_fast(GrayImage(px + 15), 20, 500)
    assert a == b


# -- BRIEF -------------------------------------------------------------------


def test_frozen_pattern_matches_seeded_generator():
    assert generate_brief_pattern(0x42).tolist() == [list(p) for p in BRIEF_PAIRS]
    pat = np.asarray(BRIEF_PAIRS)
    assert pat.shape == (256, 4)
    assert pat.min() >= -15 and pat.max() <= 15


def brief_oracle(img, kp):
    """Bit i = box5(p_i) < box5(q_i) with edge clamping, via explicit loops."""
    px = img.pixels.astype(int)
    h, w = px.shape

    def box(x, y):
        return sum(px[min(max(y + dy, 0), h - 1), min(max(x + dx, 0), w - 1)]
                   for dy in range(-2, 3) for dx in range(-2, 3))

    x, y = int(kp.x), int(kp.y)
    bits = [1 if box(x + px_, y + py_) < box(x + qx, y + qy) else 0 for px_, py_, qx, qy in BRIEF_PAIRS]
    out = bytearray(32)
    for i, b in enumerate(bits):
        out[i // 8] |= b << (i % 8)
    return np.frombuffer(bytes(out), np.uint8)


def test_brief_matches_loop_oracle():
    rng = np.random.default_rng(21)
    img = GrayImage(rng.integers(0, 256, (60, 70)).astype(np.uint8))
    kps = [Keypoint(16, 16), Keypoint(53, 43), Keypoint(30, 25), Keypoint(40.4, 30.6)]
    fs = extract_brief(img, kps)
    assert len(fs) == 4
    for k, d in zip(kps, fs.desc):
        rounded = Keypoint(np.floor(k.x + 0.5), np.floor(k.y + 0.5))
        np.testing.assert_array_equal(d, brief_oracle(img, rounded))


def test_brief_drops_border_keypoints():
    img = GrayImage(np.random.default_rng(0).integers(0, 256, (100, 720)).astype(np.uint8))
    fs = extract_brief(img, [Keypoint(5, 50), Keypoint(100, 50), Keypoint(704, 50), Keypoint(703, 50)])
    assert fs.xy[:, 0].tolist() == [100, 703]


def test_brief_constant_image_all_zero():
    img = GrayImage(np.full((64, 64), 99, np.uint8))
    fs = extract_brief(img, [Keypoint(32, 32)])
    assert not fs.desc.any()


def test_brief_identical_patches_identical_descriptors():
    rng = np.random.default_rng(1)
    patch = rng.integers(0, 256, (40, 40)).astype(np.uint8)
    px = np.zeros((60, 120), np.uint8)
    px[10:50, 5:45] = patch
    px[10:50, 70:110] = patch
    fs = extract_brief(GrayImage(px), [Keypoint(25, 30), Keypoint(90, 30)])
    np.testing.assert_array_equal(fs.desc[0], fs.desc[1])


def test_brief_deterministic():
    rng = np.random.default_rng(4)
    img = GrayImage(rng.integers(0, 256, (120, 160)).astype(np.uint8))
    kps = detect_fast(img)
    assert extract_brief(img, kps) == extract_brief(img, kps)


# -- Hamming -----------------------------------------------------------------


def test_hamming_examples():
    zeros = np.zeros(32, np.uint8)
    ones = np.full(32, 255, np.uint8)
    assert hamming(zeros, zeros) == 0
    assert hamming(ones, zeros) == 256
    a = np.full(32, 0b01010101, np.uint8)  # LSB-first 1010...
    b = np.full(32, 0b01010110, np.uint8)  # bits 0 and 1 swapped
    per_bit = sum(((int(x) >> k) & 1) != ((int(y) >> k) & 1) for x, y in zip(a, b) for k in range(8))
    assert per_bit == 64
    assert hamming(a, b) == 64


def test_hamming_metric_exhaustive_on_octets():
    v = np.arange(256, dtype=np.uint8)
    d = np.array([[bin(x ^ y).count("1") for y in range(256)] for x in range(256)])
    assert (np.diag(d) == 0).all() and (d == d.T).all()
    assert ((d > 0) | np.eye(256, dtype=bool)).all()
    # d[a, c] <= d[a, b] + d[b, c] for every triple.
    assert (d[:, None, :] <= d[:, :, None] + d[None, :, :]).all()
    # Same table through the 256-bit path, embedding each octet in position 0.
    emb = np.zeros((256, 32), np.uint8)
    emb[:, 0] = v
    np.testing.assert_array_equal(hamming_matrix(emb, emb), d)


@settings(max_examples=200, deadline=None)
@given(st.binary(min_size=32, max_size=32), st.binary(min_size=32, max_size=32), st.binary(min_size=32, max_size=32))
def test_hamming_metric_sampled(a, b, c):
    a, b, c = (np.frombuffer(x, np.uint8) for x in (a, b, c))
    assert hamming(a, b) == hamming(b, a)
    assert hamming(a, c) <= hamming(a, b) + hamming(b, c)
    assert hamming(a, b) == bin(int.from_bytes(bytes(a), "little") ^ int.from_bytes(bytes(b), "little")).count("1")


def test_hamming_matrix_agrees_with_scalar(rng):
    a, b = random_desc(rng, 7), random_desc(rng, 9)
    m = hamming_matrix(a, b)
    assert m.shape == (7, 9)
    for i in range(7):
        for j in range(9):
            assert m[i, j] == hamming(a[i], b[j])


# -- descriptor dump ---------------------------------------------------------


def test_dump_roundtrip(rng):
    frames = [random_features(rng, 5), FeatureSet(), random_features(rng, 3)]
    data = dump_bytes(frames)
    assert len(data) == 3 * 4 + 8 * 44
    back = parse_dump(data)
    assert len(back) == 3
    for a, b in zip(frames, back):
        assert a == b


def test_dump_layout_little_endian():
    fs = FeatureSet([[1.5, 2.0]], [3.0], np.arange(32, dtype=np.uint8)[None])
    buf = io.BytesIO()
    write_dump(buf, [fs])
    data = buf.getvalue()
    assert data[:4] == b"\x01\x00\x00\x00"
    assert np.frombuffer(data[4:16], "<f4").tolist() == [1.5, 2.0, 3.0]
    assert data[16:] == bytes(range(32))


def test_dump_truncated(rng):
    data = dump_bytes([random_features(rng, 2)])
    with pytest.raises(Truncated):
        parse_dump(data[:-1])
