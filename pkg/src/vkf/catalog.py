"""Product catalog: fashion items attached to frame ranges of a video.

Stored as UTF-8 TSV with a header line::

    item_id  label  url  video_id  frame_start  frame_end
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, fields
from typing import Iterable

from vkf.errors import DuplicateRecord, InvalidRange, InvalidRecord

HEADER = ("item_id", "label", "url", "video_id", "frame_start", "frame_end")


@dataclass(frozen=True, order=True)
class ProductItem:
    item_id: str
    label: str
    url: str
    video_id: str
    frame_start: int
    frame_end: int

    def validate(self) -> None:
        if not self.item_id:
            raise InvalidRecord("item_id must be non-empty")
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, str) and ("\t" in v or "\n" in v or "\r" in v):
                raise InvalidRecord(f"{f.name} contains a tab or newline")
        if self.frame_start < 0:
            raise InvalidRange(f"frame_start {self.frame_start} is negative")
        if self.frame_start > self.frame_end:
            raise InvalidRange(f"frame_start {self.frame_start} > frame_end {self.frame_end}")

    @property
    def key(self) -> tuple:
        return (self.item_id, self.video_id, self.frame_start, self.frame_end)


class Catalog:
    """Append-only record list with a per-video interval index for lookups."""

    def __init__(self, items: Iterable[ProductItem] = ()):
        self._items: list[ProductItem] = []
        self._keys: set[tuple] = set()
        # video_id -> (sorted frame_starts, items in the same order)
        self._by_video: dict[str, tuple[list[int], list[ProductItem]]] = {}
        for it in items:
            self.add(it)

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    @property
    def items(self) -> list[ProductItem]:
        return list(self._items)

    def add(self, item: ProductItem) -> "Catalog":
        item.validate()
        if item.key in self._keys:
            raise DuplicateRecord(f"{item.item_id} already covers {item.video_id}:{item.frame_start}-{item.frame_end}")
        self._keys.add(item.key)
        self._items.append(item)
        starts, its = self._by_video.setdefault(item.video_id, ([], []))
        pos = bisect.bisect_right(starts, item.frame_start)
        starts.insert(pos, item.frame_start)
        its.insert(pos, item)
        return self

    def lookup(self, video_id: str, frame_idx: int) -> list[ProductItem]:
        """Items of ``video_id`` whose inclusive range contains ``frame_idx``, sorted by item_id."""
        entry = self._by_video.get(video_id)
        if entry is None:
            return []
        starts, its = entry
        stop = bisect.bisect_right(starts, frame_idx)
        hits = [it for it in its[:stop] if it.frame_end >= frame_idx]
        return sorted(hits, key=lambda it: (it.item_id, it.label, it.url, it.frame_start, it.frame_end))

    # -- persistence ---------------------------------------------------------

    def dumps(self) -> str:
        lines = ["\t".join(HEADER)]
        for it in self._items:
            lines.append("\t".join([it.item_id, it.label, it.url, it.video_id, str(it.frame_start), str(it.frame_end)]))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "Catalog":
        lines = text.split("\n")
        if lines == [""]:
            return cls()
        if tuple(lines[0].split("\t")) != HEADER:
            raise InvalidRecord(f"unexpected catalog header {lines[0]!r}")
        cat = cls()
        for n, line in enumerate(lines[1:], start=2):
            if line == "":
                continue
            parts = line.split("\t")
            if len(parts) != len(HEADER):
                raise InvalidRecord(f"line {n}: expected {len(HEADER)} fields, got {len(parts)}")
            try:
                start, end = int(parts[4]), int(parts[5])
            except ValueError:
                raise InvalidRecord(f"line {n}: frame range is not an integer") from None
            cat.add(ProductItem(parts[0], parts[1], parts[2], parts[3], start, end))
        return cat

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.dumps())

    @classmethod
    def load(cls, path) -> "Catalog":
        with open(path, encoding="utf-8", newline="") as f:
            return cls.loads(f.read())


def add(catalog: Catalog, item: ProductItem) -> Catalog:
    return catalog.add(item)


def lookup(catalog: Catalog, video_id: str, frame_idx: int) -> list[ProductItem]:
    return catalog.lookup(video_id, frame_idx)
