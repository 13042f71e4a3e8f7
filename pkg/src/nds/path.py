"""Segmented test-error-pattern blocks and the statistics-ordered
decoding path.

The K most reliable positions are split into q segments; a block is the
set of all K-bit patterns with a prescribed Hamming weight per segment.
Blocks are ranked by how often observed error patterns land in them,
normalized by block size, so frequent-but-cheap blocks are searched
first.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np

from .gf2 import BitVector


@dataclass(frozen=True)
class SegmentLayout:
    """Partition of the K reliability-ordered positions into q segments."""

    k: int
    q: int
    sizes: tuple

    @property
    def offsets(self) -> tuple:
        out, acc = [], 0
        for s in self.sizes:
            out.append(acc)
            acc += s
        return tuple(out)


def segment_layout(k: int, q: int) -> SegmentLayout:
    """Evenly sized segments, remainder merged into the last one."""
    if not 1 <= q <= k:
        raise ValueError(f"need 1 <= q <= k, got q={q}, k={k}")
    base = k // q
    sizes = [base] * (q - 1) + [k - base * (q - 1)]
    return SegmentLayout(k=k, q=q, sizes=tuple(sizes))


def enumerate_blocks(p: int, layout: SegmentLayout) -> list:
    """All weight tuples with total weight <= p, lexicographic order."""
    if p < 0:
        raise ValueError("p must be nonnegative")
    out = []
    for w in itertools.product(range(p + 1), repeat=layout.q):
        if sum(w) <= p:
            out.append(w)
    return out


def block_size(w, layout: SegmentLayout) -> int:
    """Number of patterns in a block: product of per-segment counts."""
    if len(w) != layout.q:
        raise ValueError("weight tuple length != q")
    size = 1
    for wi, si in zip(w, layout.sizes):
        if wi > si:
            raise ValueError(f"segment weight {wi} exceeds segment size {si} (empty block)")
        size *= comb(si, wi)
    return size


def classify_error(e, layout: SegmentLayout, p: int):
    """Per-segment weight tuple of a K-bit pattern, or None when the
    total weight exceeds p (overflow)."""
    bits = e.bits if isinstance(e, BitVector) else np.asarray(e, dtype=np.uint8)
    if bits.size != layout.k:
        raise ValueError(f"pattern length {bits.size} != K={layout.k}")
    w = []
    for off, size in zip(layout.offsets, layout.sizes):
        w.append(int(bits[off:off + size].sum()))
    if sum(w) > p:
        return None
    return tuple(w)


@lru_cache(maxsize=512)
def tep_flip_indices(w: tuple, layout: SegmentLayout) -> np.ndarray:
    """Flip-position array for every pattern of a block.

    Shape (block_size, total_weight); rows enumerate the per-segment
    combinations in lexicographic position order with the last segment
    varying fastest. Cached because the same blocks are swept for every
    frame.
    """
    per_segment = []
    for off, size, wi in zip(layout.offsets, layout.sizes, w):
        if wi > size:
            raise ValueError(f"segment weight {wi} exceeds segment size {size} (empty block)")
        per_segment.append(list(itertools.combinations(range(off, off + size), wi)))
    rows = [sum(combo, ()) for combo in itertools.product(*per_segment)]
    return np.array(rows, dtype=np.int64).reshape(len(rows), sum(w))


def enumerate_teps(w, layout: SegmentLayout):
    """Yield every K-bit pattern of a block exactly once."""
    flips = tep_flip_indices(tuple(w), layout)
    for row in flips:
        bits = np.zeros(layout.k, dtype=np.uint8)
        bits[row] = 1
        yield BitVector(bits)


@dataclass
class TepBlock:
    w: tuple
    size: int
    counter: int = 0

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.counter, self.size)


@dataclass
class DecodingPath:
    """Priority-ordered sequence of pattern blocks.

    ``blocks`` is sorted by counter/size descending; a truncated path is
    a prefix of that order. ``overflow_count`` records how many observed
    patterns exceeded total weight p and were discarded.
    """

    layout: SegmentLayout
    p: int
    blocks: list = field(default_factory=list)
    overflow_count: int = 0

    @property
    def nominal_len(self) -> int:
        return comb(self.p + self.layout.q, self.layout.q)

    def __len__(self) -> int:
        return len(self.blocks)

    def truncate(self, lp_hat: int) -> "DecodingPath":
        if not 1 <= lp_hat <= len(self.blocks):
            raise ValueError(f"truncation length {lp_hat} outside 1..{len(self.blocks)}")
        return DecodingPath(layout=self.layout, p=self.p, blocks=self.blocks[:lp_hat],
                            overflow_count=self.overflow_count)

    def total_teps(self) -> int:
        return sum(b.size for b in self.blocks)


def feasible_blocks(p: int, layout: SegmentLayout) -> list:
    """Weight tuples of nonempty blocks: total weight <= p and every
    segment weight within its segment size. Equal to enumerate_blocks
    whenever p fits in the smallest segment."""
    return [w for w in enumerate_blocks(p, layout)
            if all(wi <= si for wi, si in zip(w, layout.sizes))]


def _sorted_blocks(counters: dict, layout: SegmentLayout, p: int) -> list:
    blocks = [TepBlock(w=w, size=block_size(w, layout), counter=counters.get(w, 0))
              for w in feasible_blocks(p, layout)]
    # descending ratio; ties by smaller total weight, then lexicographic
    blocks.sort(key=lambda b: (-b.ratio, sum(b.w), b.w))
    return blocks


def build_path(errors, layout: SegmentLayout, p: int) -> DecodingPath:
    """Accumulate block counters from observed K-bit error patterns and
    return the prioritized path. Patterns heavier than p are discarded
    but tallied in ``overflow_count``."""
    counters: dict = {}
    total = 0
    overflow = 0
    for e in errors:
        total += 1
        w = classify_error(e, layout, p)
        if w is None:
            overflow += 1
        else:
            counters[w] = counters.get(w, 0) + 1
    if total == 0:
        raise ValueError("cannot build a path from zero observations")
    return DecodingPath(layout=layout, p=p, blocks=_sorted_blocks(counters, layout, p),
                        overflow_count=overflow)


def save_path(path: DecodingPath, fname) -> None:
    with open(fname, "wt", encoding="ascii") as f:
        f.write(f"ndspath v1 {path.layout.k} {path.layout.q} {path.p}\n")
        for b in path.blocks:
            ws = " ".join(str(x) for x in b.w)
            f.write(f"{ws} {b.counter} {b.size}\n")


def load_path(fname) -> DecodingPath:
    with open(fname, "rt", encoding="ascii") as f:
        header = f.readline().split()
        if len(header) != 5 or header[0] != "ndspath" or header[1] != "v1":
            raise ValueError("not an ndspath v1 file")
        k, q, p = int(header[2]), int(header[3]), int(header[4])
        layout = segment_layout(k, q)
        blocks = []
        for line in f:
            parts = line.split()
            if not parts:
                continue
            if len(parts) != q + 2:
                raise ValueError(f"bad path line: {line!r}")
            w = tuple(int(x) for x in parts[:q])
            counter, size = int(parts[q]), int(parts[q + 1])
            if size != block_size(w, layout):
                raise ValueError(f"stored size {size} for block {w} disagrees with the layout")
            blocks.append(TepBlock(w=w, size=size, counter=counter))
    return DecodingPath(layout=layout, p=p, blocks=blocks)
