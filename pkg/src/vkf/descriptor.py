"""Grayscale image I/O, FAST-9 corners, 256-bit BRIEF descriptors and Hamming distance.

Descriptors are stored as ``(n, 32)`` uint8 arrays. Bit ``i`` lives in octet
``i // 8`` at position ``i % 8`` counting from the least significant bit,
which is what ``np.packbits(..., bitorder="little")`` produces.
"""

from __future__ import annotations

import io
import re
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Iterator, Sequence

import numpy as np

from vkf._brief_pattern import BRIEF_PAIRS
from vkf.errors import ImageTooSmall, Truncated, UnsupportedFormat

DESC_BYTES = 32
DESC_BITS = 256
BORDER_MARGIN = 16
PATCH_SIZE = 31
BRIEF_SEED = 0x42
DEFAULT_WIDTH = 720
DEFAULT_FAST_THRESHOLD = 20
DEFAULT_MAX_FEATURES = 500

# Bresenham circle of radius 3, clockwise from 12 o'clock, as (dx, dy).
FAST_CIRCLE = (
    (0, -3), (1, -3), (2, -2), (3, -1), (3, 0), (3, 1), (2, 2), (1, 3),
    (0, 3), (-1, 3), (-2, 2), (-3, 1), (-3, 0), (-3, -1), (-2, -2), (-1, -3),
)
FAST_ARC = 9

_PAIRS = np.asarray(BRIEF_PAIRS, dtype=np.intp)

# One record of the descriptor dump: f32 x, f32 y, f32 response, 32 descriptor octets.
DUMP_DTYPE = np.dtype([("x", "<f4"), ("y", "<f4"), ("response", "<f4"), ("desc", "u1", (DESC_BYTES,))])


@dataclass(frozen=True)
class GrayImage:
    """8-bit luminance image; ``pixels`` has shape ``(height, width)``."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"pixels must be a non-empty 2-D array, got shape {px.shape}")
        if px.dtype != np.uint8:
            if px.size and (px.min() < 0 or px.max() > 255):
                raise ValueError("pixel values must lie in [0, 255]")
            px = px.astype(np.uint8)
        object.__setattr__(self, "pixels", px)

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    __hash__ = None

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def from_flat(cls, width: int, height: int, values: Sequence[int]) -> "GrayImage":
        values = np.asarray(values)
        if values.size != width * height:
            raise ValueError(f"expected {width * height} pixels, got {values.size}")
        return cls(values.reshape(height, width))


@dataclass(frozen=True)
class Keypoint:
    x: float
    y: float
    response: float = 0.0


@dataclass(frozen=True, eq=False)
class Feature:
    keypoint: Keypoint
    descriptor: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, Feature):
            return NotImplemented
        return self.keypoint == other.keypoint and np.array_equal(self.descriptor, other.descriptor)


@dataclass(eq=False)
class FeatureSet:
    """Columnar list of features from one frame.

    Behaves like a sequence of :class:`Feature` but keeps positions,
    responses and descriptors in contiguous arrays so matching can be
    vectorised.
    """

    xy: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), np.float32))
    response: np.ndarray = field(default_factory=lambda: np.zeros(0, np.float32))
    desc: np.ndarray = field(default_factory=lambda: np.zeros((0, DESC_BYTES), np.uint8))

    def __post_init__(self):
        self.xy = np.ascontiguousarray(self.xy, dtype=np.float32).reshape(-1, 2)
        self.desc = np.ascontiguousarray(self.desc, dtype=np.uint8).reshape(-1, DESC_BYTES)
        self.response = np.ascontiguousarray(self.response, dtype=np.float32).reshape(-1)
        n = len(self.desc)
        if len(self.xy) != n or len(self.response) != n:
            raise ValueError("xy, response and desc must have the same length")

    def __len__(self) -> int:
        return len(self.desc)

    def __getitem__(self, i):
        if isinstance(i, (slice, np.ndarray, list)):
            return FeatureSet(self.xy[i], self.response[i], self.desc[i])
        x, y = self.xy[i]
        return Feature(Keypoint(float(x), float(y), float(self.response[i])), self.desc[i].copy())

    def __iter__(self) -> Iterator[Feature]:
        return (self[i] for i in range(len(self)))

    def __eq__(self, other):
        if not isinstance(other, FeatureSet):
            return NotImplemented
        return (
            np.array_equal(self.xy, other.xy)
            and np.array_equal(self.response, other.response)
            and np.array_equal(self.desc, other.desc)
        )

    @classmethod
    def from_features(cls, features: Iterable[Feature]) -> "FeatureSet":
        features = list(features)
        if not features:
            return cls()
        xy = [(f.keypoint.x, f.keypoint.y) for f in features]
        resp = [f.keypoint.response for f in features]
        desc = np.stack([np.asarray(f.descriptor, np.uint8) for f in features])
        return cls(xy, resp, desc)

    @classmethod
    def concat(cls, sets: Sequence["FeatureSet"]) -> "FeatureSet":
        if not sets:
            return cls()
        return cls(
            np.concatenate([s.xy for s in sets]),
            np.concatenate([s.response for s in sets]),
            np.concatenate([s.desc for s in sets]),
        )


# ---------------------------------------------------------------------------
# PGM


_PGM_HEADER = re.compile(rb"\A(P\d)(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)\s")


def load_pgm(data: bytes) -> GrayImage:
    """Decode a binary (P5) PGM with maxval <= 255."""
    if data[:2] != b"P5":
        raise UnsupportedFormat(f"expected P5 magic, got {data[:2]!r}")
    m = _PGM_HEADER.match(data)
    if m is None:
        raise Truncated("incomplete PGM header")
    width, height, maxval = (int(g) for g in m.groups()[1:])
    if maxval > 255 or maxval < 1:
        raise UnsupportedFormat(f"maxval {maxval} not supported")
    if width < 1 or height < 1:
        raise UnsupportedFormat(f"bad dimensions {width}x{height}")
    payload = data[m.end():]
    need = width * height
    if len(payload) < need:
        raise Truncated(f"expected {need} pixels, got {len(payload)}")
    pixels = np.frombuffer(payload, dtype=np.uint8, count=need).reshape(height, width)
    return GrayImage(pixels.copy())


def read_pgm(path) -> GrayImage:
    with open(path, "rb") as f:
        return load_pgm(f.read())


def encode_pgm(img: GrayImage) -> bytes:
    header = b"P5\n%d %d\n255\n" % (img.width, img.height)
    return header + img.pixels.tobytes()


def write_pgm(path, img: GrayImage) -> None:
    with open(path, "wb") as f:
        f.write(encode_pgm(img))


# ---------------------------------------------------------------------------
# Rescaling


def scale_to_width(img: GrayImage, target: int = DEFAULT_WIDTH) -> GrayImage:
    """Bilinear downscale so the width equals ``target``; narrower images pass through."""
    w, h = img.width, img.height
    if w <= target:
        return img
    new_h = max(1, int(np.floor(h * target / w + 0.5)))
    src = img.pixels.astype(np.float64)

    def coords(n_out, n_in):
        c = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        c = np.clip(c, 0, n_in - 1)
        lo = np.floor(c).astype(np.intp)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, c - lo

    x0, x1, fx = coords(target, w)
    y0, y1, fy = coords(new_h, h)
    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bot = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    out = top * (1 - fy)[:, None] + bot * fy[:, None]
    return GrayImage(np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8))


# ---------------------------------------------------------------------------
# FAST-9


def _arc_windows(mask: np.ndarray) -> np.ndarray:
    """``mask`` is (16, n). Returns (16, n): circle pixels covered by some run of >= 9."""
    n_circ = mask.shape[0]
    covered = np.zeros_like(mask)
    for s in range(n_circ):
        run = mask[s].copy()
        for k in range(1, FAST_ARC):
            run &= mask[(s + k) % n_circ]
        if not run.any():
            continue
        for k in range(FAST_ARC):
            covered[(s + k) % n_circ] |= run
    return covered


def fast_response_map(img: GrayImage, threshold: int = DEFAULT_FAST_THRESHOLD) -> np.ndarray:
    """Arc-sum FAST-9 response per pixel (0 where the segment test fails)."""
    px = img.pixels.astype(np.int16)
    h, w = px.shape
    resp = np.zeros((h, w), dtype=np.float64)
    if h < 7 or w < 7:
        return resp
    center = px[3:h - 3, 3:w - 3]
    circ = np.stack([px[3 + dy:h - 3 + dy, 3 + dx:w - 3 + dx] for dx, dy in FAST_CIRCLE])
    brighter = circ > center + threshold
    darker = circ < center - threshold
    cand = (brighter.sum(0) >= FAST_ARC) | (darker.sum(0) >= FAST_ARC)
    rows, cols = np.nonzero(cand)
    if rows.size == 0:
        return resp
    c = center[rows, cols].astype(np.int32)
    ring = circ[:, rows, cols].astype(np.int32)
    arc = _arc_windows(brighter[:, rows, cols]) | _arc_windows(darker[:, rows, cols])
    score = (np.abs(ring - c) * arc).sum(0)
    keep = arc.any(0)
    resp[rows[keep] + 3, cols[keep] + 3] = score[keep]
    return resp


def detect_fast(
    img: GrayImage,
    threshold: int = DEFAULT_FAST_THRESHOLD,
    max_n: int = DEFAULT_MAX_FEATURES,
) -> list[Keypoint]:
    """FAST-9 corners with 3x3 non-maximum suppression.

    Sorted by descending response, ties by ``(y, x)``; at most ``max_n``.
    """
    if img.width < 32 or img.height < 32:
        raise ImageTooSmall(f"{img.width}x{img.height} is below the 32x32 minimum")
    resp = fast_response_map(img, threshold)
    padded = np.pad(resp, 1, mode="constant")
    h, w = resp.shape
    neighbourhood = np.max(
        np.stack([padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w] for dy in (-1, 0, 1) for dx in (-1, 0, 1)]),
        axis=0,
    )
    ys, xs = np.nonzero((resp > 0) & (resp >= neighbourhood))
    r = resp[ys, xs]
    order = np.lexsort((xs, ys, -r))[:max_n]
    return [Keypoint(float(xs[i]), float(ys[i]), float(r[i])) for i in order]


# ---------------------------------------------------------------------------
# BRIEF


def generate_brief_pattern(seed: int = BRIEF_SEED) -> np.ndarray:
    """Regenerate the sampling table frozen in ``_brief_pattern``.

    Offsets are drawn from an isotropic Gaussian with sigma = 31/5, rounded to
    integers and clipped to the 31x31 patch.
    """
    rng = np.random.default_rng(seed)
    half = PATCH_SIZE // 2
    pts = np.rint(rng.normal(0.0, PATCH_SIZE / 5, size=(DESC_BITS, 4)))
    return np.clip(pts, -half, half).astype(np.intp)


def box_smooth(img: GrayImage, size: int = 5) -> np.ndarray:
    """Sum over a ``size`` x ``size`` window (edge-replicated), via an integral image."""
    r = size // 2
    padded = np.pad(img.pixels.astype(np.int32), r, mode="edge")
    ii = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1), dtype=np.int32)
    ii[1:, 1:] = padded.cumsum(0).cumsum(1)
    h, w = img.height, img.width
    return ii[size:size + h, size:size + w] - ii[:h, size:size + w] - ii[size:size + h, :w] + ii[:h, :w]


def extract_brief(img: GrayImage, keypoints: Sequence[Keypoint]) -> FeatureSet:
    """256-bit BRIEF descriptors; keypoints inside the 16 px border margin are dropped."""
    if not keypoints:
        return FeatureSet()
    kx = np.array([k.x for k in keypoints], dtype=np.float64)
    ky = np.array([k.y for k in keypoints], dtype=np.float64)
    kr = np.array([k.response for k in keypoints], dtype=np.float64)
    ix = np.floor(kx + 0.5).astype(np.intp)
    iy = np.floor(ky + 0.5).astype(np.intp)
    inside = (
        (ix >= BORDER_MARGIN) & (ix <= img.width - 1 - BORDER_MARGIN)
        & (iy >= BORDER_MARGIN) & (iy <= img.height - 1 - BORDER_MARGIN)
    )
    if not inside.any():
        return FeatureSet()
    ix, iy = ix[inside], iy[inside]
    smooth = box_smooth(img)
    p = smooth[iy[:, None] + _PAIRS[:, 1], ix[:, None] + _PAIRS[:, 0]]
    q = smooth[iy[:, None] + _PAIRS[:, 3], ix[:, None] + _PAIRS[:, 2]]
    desc = np.packbits(p < q, axis=1, bitorder="little")
    return FeatureSet(np.stack([kx[inside], ky[inside]], axis=1), kr[inside], desc)


def extract_features(
    img: GrayImage,
    threshold: int = DEFAULT_FAST_THRESHOLD,
    max_n: int = DEFAULT_MAX_FEATURES,
    width: int = DEFAULT_WIDTH,
) -> FeatureSet:
    """Rescale, detect and describe: the per-frame front end."""
    img = scale_to_width(img, width)
    return extract_brief(img, detect_fast(img, threshold, max_n))


# ---------------------------------------------------------------------------
# Hamming distance


def _words(desc: np.ndarray) -> np.ndarray:
    desc = np.ascontiguousarray(desc, dtype=np.uint8)
    return desc.view(np.uint64)


def hamming(a: np.ndarray, b: np.ndarray) -> int:
    """Number of differing bits between two 32-octet descriptors."""
    return int(np.bitwise_count(np.bitwise_xor(_words(a), _words(b))).sum())


def hamming_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise Hamming distances between ``(n, 32)`` and ``(m, 32)`` descriptor arrays."""
    wa = _words(np.asarray(a).reshape(-1, DESC_BYTES))
    wb = np.ascontiguousarray(_words(np.asarray(b).reshape(-1, DESC_BYTES)).T)
    shape = (len(wa), wb.shape[1])
    out = np.zeros(shape, dtype=np.uint16)
    xor = np.empty(shape, dtype=np.uint64)
    count = np.empty(shape, dtype=np.uint8)
    for k in range(wa.shape[1]):
        np.bitwise_xor(wa[:, k, None], wb[k][None, :], out=xor)
        np.bitwise_count(xor, out=count)
        out += count
    return out


def hamming_to_many(q: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances from one descriptor to each row of ``b``."""
    wq = _words(q).reshape(1, -1)
    wb = _words(np.asarray(b).reshape(-1, DESC_BYTES))
    return np.bitwise_count(wb ^ wq).sum(axis=1, dtype=np.int32)


def unpack_bits(desc: np.ndarray) -> np.ndarray:
    """``(n, 32)`` octets -> ``(n, 256)`` bits in canonical order."""
    return np.unpackbits(np.asarray(desc, np.uint8).reshape(-1, DESC_BYTES), axis=1, bitorder="little")


def pack_bits(bits: np.ndarray) -> np.ndarray:
    return np.packbits(np.asarray(bits, np.uint8).reshape(-1, DESC_BITS), axis=1, bitorder="little")


# ---------------------------------------------------------------------------
# Descriptor dump


def write_dump(f: BinaryIO, frames: Iterable[FeatureSet]) -> None:
    """Write frames as ``u32 count`` followed by ``count`` 44-octet records each."""
    for fs in frames:
        rec = np.empty(len(fs), dtype=DUMP_DTYPE)
        rec["x"] = fs.xy[:, 0]
        rec["y"] = fs.xy[:, 1]
        rec["response"] = fs.response
        rec["desc"] = fs.desc
        f.write(np.uint32(len(fs)).astype("<u4").tobytes())
        f.write(rec.tobytes())


def dump_bytes(frames: Iterable[FeatureSet]) -> bytes:
    buf = io.BytesIO()
    write_dump(buf, frames)
    return buf.getvalue()


def records_to_featureset(rec: np.ndarray) -> FeatureSet:
    return FeatureSet(np.stack([rec["x"], rec["y"]], axis=1), rec["response"], rec["desc"])


def parse_dump(data: bytes) -> list[FeatureSet]:
    """Inverse of :func:`write_dump`. Raises :class:`Truncated` on short input."""
    frames = []
    pos = 0
    size = DUMP_DTYPE.itemsize
    while pos < len(data):
        if pos + 4 > len(data):
            raise Truncated(f"dangling {len(data) - pos} octets at offset {pos}")
        n = int(np.frombuffer(data, "<u4", count=1, offset=pos)[0])
        pos += 4
        if pos + n * size > len(data):
            raise Truncated(f"frame {len(frames)} declares {n} features past end of data")
        rec = np.frombuffer(data, DUMP_DTYPE, count=n, offset=pos)
        frames.append(records_to_featureset(rec))
        pos += n * size
    return frames


def read_dump(path) -> list[FeatureSet]:
    with open(path, "rb") as f:
        return parse_dump(f.read())
