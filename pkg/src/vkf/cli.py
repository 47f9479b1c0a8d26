"""Command-line interface. Every command writes tab-separated output to stdout.

Exit codes: 0 ok, 1 usage or input error, 2 too few query features,
3 empty index, 4 corrupt index or frame store.
"""

from __future__ import annotations

import argparse
import logging
import re
import sys
from pathlib import Path

import numpy as np

from vkf import kdindex
from vkf.catalog import Catalog, ProductItem
from vkf.config import EngineConfig
from vkf.descriptor import extract_features, read_dump, read_pgm, write_dump
from vkf.errors import CorruptIndex, EmptyIndex, TooFewFeatures, VkfError
from vkf.evalkit import SynthConfig, bench, read_annotations, threshold_sweep
from vkf.retrieval import Engine, FrameStore, build_engine, query_image, stats

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_TOO_FEW = 2
EXIT_EMPTY_INDEX = 3
EXIT_CORRUPT = 4

_DIGITS = re.compile(r"(\d+)")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _frame_sort_key(path: Path):
    nums = _DIGITS.findall(path.stem)
    return (int(nums[-1]) if nums else -1, path.name)


def _fail(code: int, exc: Exception) -> int:
    # Written directly so diagnostics survive an already-configured logging setup.
    sys.stderr.write(f"vkf: error: {exc}\n")
    return code


def _emit(rows, out=None):
    out = out or sys.stdout
    for row in rows:
        out.write("\t".join(str(v) for v in row) + "\n")


def _product_row(p: ProductItem):
    return ("product", p.item_id, p.label, p.url, p.video_id, p.frame_start, p.frame_end)


# ---------------------------------------------------------------------------
# Commands


def cmd_extract(frames_dir, out_path, config: EngineConfig) -> int:
    frames_dir = Path(frames_dir)
    if not frames_dir.is_dir():
        raise UsageError(f"{frames_dir}: not a directory")
    paths = sorted((p for p in frames_dir.iterdir() if p.suffix.lower() == ".pgm"), key=_frame_sort_key)
    if not paths:
        raise UsageError(f"{frames_dir}: no frames")
    feats = []
    for p in paths:
        feats.append(extract_features(read_pgm(p), config.fast_threshold, config.max_features_per_frame, config.width))
    with open(out_path, "wb") as f:
        write_dump(f, feats)
    _emit([("frames", len(feats)), ("features", sum(len(f) for f in feats))])
    return EXIT_OK


def cmd_build(feature_files, index_path, store_path, config: EngineConfig) -> int:
    videos = []
    for path in feature_files:
        path = Path(path)
        videos.append((path.stem, read_dump(path)))
    engine, _, _ = build_engine(videos, config)
    kdindex.save(index_path, engine.tree)
    engine.store.save(store_path)
    engine.store = FrameStore.open(store_path)
    _emit(stats(engine).rows())
    return EXIT_OK


def cmd_query(index_path, store_path, catalog_path, image_path, config: EngineConfig) -> int:
    catalog = Catalog.load(catalog_path) if catalog_path else Catalog()
    engine = Engine.load(index_path, store_path, catalog, config)
    res = query_image(engine, read_pgm(image_path))
    _emit([
        ("video_id", res.video_id),
        ("frame_idx", res.frame_idx),
        ("shot_id", res.shot_id),
        ("votes", res.votes),
        ("frame_score", res.frame_score),
    ])
    _emit(_product_row(p) for p in res.products)
    return EXIT_OK


def cmd_catalog_add(catalog_path, item: ProductItem) -> int:
    path = Path(catalog_path)
    catalog = Catalog.load(path) if path.exists() else Catalog()
    catalog.add(item)
    catalog.save(path)
    return EXIT_OK


def cmd_catalog_lookup(catalog_path, video_id, frame_idx) -> int:
    _emit(_product_row(p) for p in Catalog.load(catalog_path).lookup(video_id, frame_idx))
    return EXIT_OK


def cmd_stats(index_path, store_path) -> int:
    engine = Engine(kdindex.load(index_path), FrameStore.open(store_path))
    _emit(stats(engine).rows())
    return EXIT_OK


def cmd_bench(synth: SynthConfig, config: EngineConfig, n_queries: int, seed: int, backtracks, n_videos: int,
              query_flip: float, query_dropout: float) -> int:
    rep = bench(synth, config, n_queries, seed, backtracks, n_videos, query_flip, query_dropout)
    _emit(rep.stats.rows())
    _emit([("n_queries", rep.n_queries)])
    _emit((f"accuracy_B{b}", f"{acc:.4f}") for b, acc in rep.accuracy_by_b.items())
    return EXIT_OK


def cmd_sweep(annotations_path, taus) -> int:
    rows = read_annotations(annotations_path)
    _emit([("tau", "TPR", "FPR")])
    _emit((f"{t:.6f}", f"{tpr:.6f}", f"{fpr:.6f}") for t, tpr, fpr in threshold_sweep([(s, lb) for _, _, s, lb in rows], taus))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="key=value file overriding engine defaults")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = _Parser(prog="vkf", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("extract", parents=[common], help="PGM frame directory -> descriptor dump")
    s.add_argument("frames_dir")
    s.add_argument("out")

    s = sub.add_parser("build", parents=[common], help="descriptor dumps -> index + frame store")
    s.add_argument("features", nargs="+", help="one dump per video; the file stem is the video id")
    s.add_argument("--index", required=True)
    s.add_argument("--framestore", required=True)

    s = sub.add_parser("query", parents=[common], help="retrieve the frame matching a PGM photo")
    s.add_argument("image")
    s.add_argument("--index", required=True)
    s.add_argument("--framestore", required=True)
    s.add_argument("--catalog")

    s = sub.add_parser("catalog-add", parents=[common], help="append a product record")
    s.add_argument("--catalog", required=True)
    s.add_argument("--item-id", required=True)
    s.add_argument("--label", default="")
    s.add_argument("--url", default="")
    s.add_argument("--video-id", required=True)
    s.add_argument("--start", type=int, required=True)
    s.add_argument("--end", type=int, required=True)

    s = sub.add_parser("catalog-lookup", parents=[common], help="products visible in a frame")
    s.add_argument("--catalog", required=True)
    s.add_argument("--video-id", required=True)
    s.add_argument("--frame", type=int, required=True)

    s = sub.add_parser("stats", parents=[common], help="index and frame store counts")
    s.add_argument("--index", required=True)
    s.add_argument("--framestore", required=True)

    s = sub.add_parser("bench", parents=[common], help="synthetic end-to-end accuracy benchmark")
    d = SynthConfig()
    s.add_argument("--shots", type=int, default=d.n_shots)
    s.add_argument("--frames-per-shot", type=int, default=d.frames_per_shot)
    s.add_argument("--feats", type=int, default=d.feats_per_frame)
    s.add_argument("--flip", type=float, default=d.bit_flip_rate, help="per-frame bit flip rate")
    s.add_argument("--dropout", type=float, default=d.feature_dropout, help="per-frame feature dropout")
    s.add_argument("--drift", type=float, default=d.drift_px)
    s.add_argument("--videos", type=int, default=1)
    s.add_argument("--queries", type=int, default=200)
    s.add_argument("--query-flip", type=float, default=0.05)
    s.add_argument("--query-dropout", type=float, default=0.2)
    s.add_argument("--backtracks", type=_int_list, help="comma-separated budgets, e.g. 10,50,100,250")

    s = sub.add_parser("sweep", parents=[common], help="TPR/FPR over visual-match thresholds")
    s.add_argument("annotations", help="TSV: frame_a, frame_b, score, label")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--n-taus", type=int, default=406, help="evenly spaced thresholds in [0, 1]")
    g.add_argument("--taus", type=lambda t: [float(x) for x in t.split(",")])
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    seed = getattr(args, "seed", 0)
    try:
        config = EngineConfig.load(args.config) if getattr(args, "config", None) else EngineConfig()
        cmd = args.command
        if cmd == "extract":
            return cmd_extract(args.frames_dir, args.out, config)
        if cmd == "build":
            return cmd_build(args.features, args.index, args.framestore, config)
        if cmd == "query":
            return cmd_query(args.index, args.framestore, args.catalog, args.image, config)
        if cmd == "catalog-add":
            item = ProductItem(args.item_id, args.label, args.url, args.video_id, args.start, args.end)
            return cmd_catalog_add(args.catalog, item)
        if cmd == "catalog-lookup":
            return cmd_catalog_lookup(args.catalog, args.video_id, args.frame)
        if cmd == "stats":
            return cmd_stats(args.index, args.framestore)
        if cmd == "bench":
            synth = SynthConfig(args.shots, args.frames_per_shot, args.feats, args.flip, args.dropout, args.drift, seed)
            return cmd_bench(synth, config, args.queries, seed, args.backtracks, args.videos,
                             args.query_flip, args.query_dropout)
        if cmd == "sweep":
            taus = args.taus if args.taus else np.linspace(0.0, 1.0, args.n_taus).tolist()
            return cmd_sweep(args.annotations, taus)
    except TooFewFeatures as exc:
        return _fail(EXIT_TOO_FEW, exc)
    except EmptyIndex as exc:
        return _fail(EXIT_EMPTY_INDEX, exc)
    except CorruptIndex as exc:
        return _fail(EXIT_CORRUPT, exc)
    except (UsageError, VkfError, ValueError, OSError) as exc:
        return _fail(EXIT_USAGE, exc)
    parser.error(f"unknown command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
