"""Quantized orientations and unit-width line partitions of a rectangular patch.

An orientation is the direction from the fixed anchor pixel
``C = (m // 2, ceil(n / 2))`` to a candidate border pixel ``O`` taken from the
top row and then the right column. Pixels are binned into unit-width strips
parallel to ``C -> O`` by the floor of their signed distance along the normal.
This binning rule is normative for the codestream: every quantity here is
computed with integer arithmetic plus one correctly rounded IEEE-754 sqrt and
division per pixel, so encoder and decoder agree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .pixel_grid import as_array

MIN_MODEL_SIZE = 4
# line-id maps for shapes up to this many pixels are memoized
_CACHE_PIXELS = 64 * 64


@dataclass(frozen=True)
class OrientationSet:
    m: int
    n: int
    anchor: tuple[int, int]
    candidates: tuple[tuple[int, int], ...]

    def __len__(self):
        return len(self.candidates)

    @property
    def index_bits(self) -> int:
        return bits_for(len(self.candidates))

    def direction(self, index: int) -> tuple[int, int]:
        o = self.candidates[index]
        return (o[0] - self.anchor[0], o[1] - self.anchor[1])


def bits_for(count: int) -> int:
    """Bits needed to send an index in ``range(count)``."""
    return max(0, (count - 1).bit_length())


@lru_cache(maxsize=None)
def orientations(m: int, n: int) -> OrientationSet:
    if m < 2 or n < 2:
        raise ValueError(f"patch too small for orientations: {m}x{n}")
    anchor = (m // 2, (n + 1) // 2)
    raw = [(0, y) for y in range(n)] + [(x, n - 1) for x in range(1, m)]
    return OrientationSet(m, n, anchor, tuple(o for o in raw if o != anchor))


def _line_ids(m: int, n: int, index: int) -> tuple[np.ndarray, int]:
    oset = orientations(m, n)
    dr, dc = oset.direction(index)
    cr, cc = oset.anchor
    norm = math.sqrt(dr * dr + dc * dc)
    r = np.arange(m, dtype=np.int64)[:, None] - cr
    c = np.arange(n, dtype=np.int64)[None, :] - cc
    dot = (r * -dc + c * dr).astype(np.float64)
    ids = np.floor(dot / norm).astype(np.int64)
    ids -= ids.min()
    ids = ids.ravel()
    p = int(ids.max()) + 1
    ids = ids.astype(np.int32)
    ids.setflags(write=False)
    return ids, p


_cached_line_ids = lru_cache(maxsize=8192)(_line_ids)


def line_ids(m: int, n: int, index: int) -> tuple[np.ndarray, int]:
    """Flat (row-major) line id per pixel and the line count ``p``."""
    if m * n <= _CACHE_PIXELS:
        return _cached_line_ids(m, n, index)
    return _line_ids(m, n, index)


def line_count(m: int, n: int, index: int) -> int:
    return line_ids(m, n, index)[1]


@dataclass(frozen=True, eq=False)
class LinePartition:
    """Pixels of one patch grouped into parallel unit-width lines.

    ``counts[i]`` and ``sums[i]`` are the pixel count and gray sum of line i;
    ``sumsq`` holds the per-line sums of squared grays.
    """

    shape: tuple[int, int]
    orientation: int
    line_index: np.ndarray
    p: int
    counts: np.ndarray
    sums: np.ndarray
    sumsq: np.ndarray

    @property
    def total(self) -> int:
        return int(self.sums.sum())

    @property
    def second_moment(self) -> int:
        return int(self.sumsq.sum())


def partition(patch, orientation: int) -> LinePartition:
    x = as_array(patch).astype(np.int64)
    m, n = x.shape
    oset = orientations(m, n)
    if not 0 <= orientation < len(oset):
        raise ValueError(f"orientation {orientation} out of range for {m}x{n}")
    ids, p = line_ids(m, n, orientation)
    flat = x.ravel()
    counts = np.bincount(ids, minlength=p).astype(np.int64)
    sums = np.bincount(ids, weights=flat, minlength=p).astype(np.int64)
    sumsq = np.bincount(ids, weights=flat * flat, minlength=p).astype(np.int64)
    return LinePartition((m, n), orientation, ids.reshape(m, n), p, counts, sums, sumsq)
