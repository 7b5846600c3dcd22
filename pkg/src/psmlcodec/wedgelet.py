"""Wedgelet leaf model: the best two-region split of a patch by a beamlet.

Beamlet vertices are the border pixel centers of the patch, listed clockwise
from the top-left pixel. A beamlet joins two vertices that do not share a
border side. Each beamlet ``(v1, v2)`` defines the integer line function
``h(r, c) = a r + b c + e`` whose normal points toward the upper-right corner;
pixels with ``h >= 0`` (including those on the line) form side 1.

Dictionary index 0 is the constant atom; beamlet ``t`` has index ``t + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import bits_for
from .pixel_grid import as_array
from .psml import _class_sse_array

_TOP, _RIGHT, _BOTTOM, _LEFT = 1, 2, 4, 8
_CHUNK = 1 << 22


@dataclass(frozen=True)
class Beamlet:
    v1: tuple[int, int]
    v2: tuple[int, int]


@dataclass(frozen=True)
class WedgeletModel:
    index: int
    ca: float
    cb: float


def border_vertices(m: int, n: int) -> list[tuple[int, int]]:
    top = [(0, c) for c in range(n)]
    right = [(r, n - 1) for r in range(1, m)]
    bottom = [(m - 1, c) for c in range(n - 2, -1, -1)]
    left = [(r, 0) for r in range(m - 2, 0, -1)]
    return top + right + bottom + left


@dataclass(frozen=True, eq=False)
class Dictionary:
    m: int
    n: int
    vertices: np.ndarray
    pairs: np.ndarray
    a: np.ndarray
    b: np.ndarray
    e: np.ndarray

    @property
    def size(self) -> int:
        """Number of beamlets ``M_W`` (the constant atom excluded)."""
        return len(self.a)

    @property
    def index_bits(self) -> int:
        return bits_for(self.size + 1)


def _side_flags(v: np.ndarray, m: int, n: int) -> np.ndarray:
    r, c = v[:, 0], v[:, 1]
    return ((r == 0) * _TOP | (c == n - 1) * _RIGHT | (r == m - 1) * _BOTTOM
            | (c == 0) * _LEFT)


@lru_cache(maxsize=256)
def dictionary(m: int, n: int) -> Dictionary:
    if m < 2 or n < 2:
        raise ValueError(f"patch too small for wedgelets: {m}x{n}")
    v = np.array(border_vertices(m, n), dtype=np.int64)
    flags = _side_flags(v, m, n)
    i, j = np.triu_indices(len(v), k=1)
    keep = (flags[i] & flags[j]) == 0
    i, j = i[keep], j[keep]
    dr = v[j, 0] - v[i, 0]
    dc = v[j, 1] - v[i, 1]
    a, b = -dc, dr.copy()
    toward = b - a
    flip = (toward < 0) | ((toward == 0) & (a > 0))
    a = np.where(flip, -a, a)
    b = np.where(flip, -b, b)
    e = -(a * v[i, 0] + b * v[i, 1])
    pairs = np.stack([i, j], axis=1)
    for arr in (v, pairs, a, b, e):
        arr.setflags(write=False)
    return Dictionary(m, n, v, pairs, a, b, e)


def enumerate_beamlets(m: int, n: int) -> list[Beamlet]:
    d = dictionary(m, n)
    return [Beamlet(tuple(int(x) for x in d.vertices[i]), tuple(int(x) for x in d.vertices[j]))
            for i, j in d.pairs]


def _row_intervals(a, b, e, m: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Column interval [lo, hi) of side-1 pixels in every row, shape (M, m)."""
    r = np.arange(m, dtype=np.int64)[None, :]
    a, b, e = a[:, None], b[:, None], e[:, None]
    t = -(a * r + e)
    safe = np.where(b == 0, 1, b)
    lo = np.where(b > 0, -((-t) // safe), 0)
    hi = np.where(b < 0, t // safe + 1, n)
    lo = np.where((b == 0) & (t > 0), n, lo)
    lo = np.clip(lo, 0, n)
    hi = np.clip(hi, 0, n)
    return np.minimum(lo, hi), hi


@lru_cache(maxsize=256)
def _side_counts(m: int, n: int) -> np.ndarray:
    d = dictionary(m, n)
    out = np.empty(d.size, dtype=np.int64)
    step = max(1, _CHUNK // m)
    for s in range(0, d.size, step):
        lo, hi = _row_intervals(d.a[s:s + step], d.b[s:s + step], d.e[s:s + step], m, n)
        out[s:s + step] = (hi - lo).sum(axis=1)
    out.setflags(write=False)
    return out


def side_mask(m: int, n: int, index: int) -> np.ndarray:
    """Boolean (m, n) mask of side-1 pixels for dictionary ``index``."""
    if index == 0:
        return np.zeros((m, n), dtype=bool)
    d = dictionary(m, n)
    t = index - 1
    r = np.arange(m)[:, None]
    c = np.arange(n)[None, :]
    return d.a[t] * r + d.b[t] * c + d.e[t] >= 0


@dataclass(eq=False)
class BatchWedgeletFit:
    index: np.ndarray
    sse: np.ndarray
    n0: np.ndarray
    s0: np.ndarray
    q0: np.ndarray
    n1: np.ndarray
    s1: np.ndarray
    q1: np.ndarray
    ca: np.ndarray
    cb: np.ndarray


def fit_wedgelets(batch: np.ndarray) -> BatchWedgeletFit:
    """Best dictionary atom for each patch of a (B, m, n) stack."""
    batch = np.asarray(batch)
    B, m, n = batch.shape
    d = dictionary(m, n)
    mn = m * n
    X = batch.reshape(B, m, n).astype(np.int64)
    total = X.reshape(B, -1).sum(axis=1)
    second = (X * X).reshape(B, -1).sum(axis=1)
    rowcum = np.zeros((B, m, n + 1), dtype=np.int64)
    np.cumsum(X, axis=2, out=rowcum[:, :, 1:])
    counts = _side_counts(m, n)

    costs = np.empty((B, d.size + 1), dtype=np.float64)
    costs[:, 0] = _class_sse_array(total, mn, 0, 0, second)
    sums = np.empty((B, d.size), dtype=np.int64)
    rows = np.arange(m)[None, :]
    step = max(1, _CHUNK // (m * B))
    for s in range(0, d.size, step):
        lo, hi = _row_intervals(d.a[s:s + step], d.b[s:s + step], d.e[s:s + step], m, n)
        part = (rowcum[:, rows, hi] - rowcum[:, rows, lo]).sum(axis=2)
        sums[:, s:s + step] = part
    nc1 = counts[None, :]
    costs[:, 1:] = _class_sse_array(total[:, None] - sums, mn - nc1, sums, nc1, second[:, None])

    index = np.argmin(costs, axis=1)
    best = costs[np.arange(B), index]
    beam = index - 1
    has = index > 0
    s1 = np.where(has, sums[np.arange(B), np.maximum(beam, 0)], 0)
    n1 = np.where(has, counts[np.maximum(beam, 0)], 0)
    r = np.arange(m)[None, :, None]
    c = np.arange(n)[None, None, :]
    bt = np.maximum(beam, 0)
    mask = (d.a[bt][:, None, None] * r + d.b[bt][:, None, None] * c
            + d.e[bt][:, None, None] >= 0) & has[:, None, None]
    q1 = ((X * X) * mask).reshape(B, -1).sum(axis=1)
    n0, s0 = mn - n1, total - s1
    ca = s0 / np.maximum(n0, 1)
    cb = np.where(n1 > 0, s1 / np.maximum(n1, 1), ca)
    ca = np.where(n0 > 0, ca, cb)
    return BatchWedgeletFit(index, best, n0, s0, second - q1, n1, s1, q1, ca, cb)


def fit_wedgelet(patch) -> tuple[WedgeletModel, float]:
    x = as_array(patch)
    f = fit_wedgelets(x[None])
    return WedgeletModel(int(f.index[0]), float(f.ca[0]), float(f.cb[0])), float(f.sse[0])


def render_wedgelet(shape: tuple[int, int], model: WedgeletModel, rounding: bool = False) -> np.ndarray:
    mask = side_mask(shape[0], shape[1], model.index)
    values = np.where(mask, model.cb, model.ca)
    if rounding:
        return np.floor(values + 0.5).astype(np.int64)
    return values
