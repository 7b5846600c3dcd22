"""8-bit grayscale rasters, PGM I/O and image metrics."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

PEAK = 255


class PgmError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PixelGrid:
    """Row-major 8-bit image. ``samples`` has shape (height, width)."""

    samples: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.samples)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError(f"expected a non-empty 2-D raster, got shape {a.shape}")
        if a.dtype != np.uint8:
            if a.size and (a.min() < 0 or a.max() > PEAK):
                raise ValueError("sample values must lie in [0, 255]")
            a = a.astype(np.uint8)
        a = np.ascontiguousarray(a)
        a.setflags(write=False)
        object.__setattr__(self, "samples", a)

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.samples.shape

    def patch(self, row: int, col: int, height: int, width: int) -> PatchView:
        return PatchView(self, row, col, height, width)

    def __eq__(self, other):
        if not isinstance(other, PixelGrid):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.samples, other.samples))

    def __repr__(self):
        return f"PixelGrid({self.height}x{self.width})"


@dataclass(frozen=True)
class PatchView:
    grid: PixelGrid
    row: int
    col: int
    height: int
    width: int

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError("patch must be non-empty")
        if (self.row < 0 or self.col < 0 or self.row + self.height > self.grid.height
                or self.col + self.width > self.grid.width):
            raise ValueError("patch extends outside the parent grid")

    @property
    def array(self) -> np.ndarray:
        return self.grid.samples[self.row:self.row + self.height, self.col:self.col + self.width]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)


def as_array(patch) -> np.ndarray:
    """Accept a PatchView, PixelGrid or 2-D array-like and return the raster."""
    if isinstance(patch, PatchView):
        return patch.array
    if isinstance(patch, PixelGrid):
        return patch.samples
    a = np.asarray(patch)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D patch, got shape {a.shape}")
    return a


# ---------------------------------------------------------------- PGM

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*([^\s#]+)")


def _header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    tokens = []
    pos = 0
    for _ in range(count):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise PgmError("malformed header")
        tokens.append(m.group(1))
        pos = m.end()
    return tokens, pos


def read_pgm(data: bytes) -> PixelGrid:
    """Parse a P5 (binary) or P2 (ASCII) PGM with maxval <= 255."""
    data = bytes(data)
    if data[:2] not in (b"P5", b"P2"):
        raise PgmError("malformed header: not a P2/P5 PGM")
    try:
        tokens, pos = _header_tokens(data[2:], 3)
        width, height, maxval = (int(t) for t in tokens)
    except (PgmError, ValueError):
        raise PgmError("malformed header") from None
    if width < 1 or height < 1 or maxval < 1:
        raise PgmError("malformed header")
    if maxval > PEAK:
        raise PgmError(f"maxval > 255 ({maxval}) is not supported")
    pos += 2
    count = width * height
    if data[:2] == b"P5":
        # exactly one whitespace byte separates the header from the raster
        if pos >= len(data) or not data[pos:pos + 1].isspace():
            if count:
                raise PgmError("truncated payload")
        payload = data[pos + 1:pos + 1 + count]
        if len(payload) < count:
            raise PgmError("truncated payload")
        samples = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    else:
        body = re.sub(rb"#[^\n]*", b"", data[pos:]).split()
        if len(body) < count:
            raise PgmError("truncated payload")
        try:
            values = np.array([int(v) for v in body[:count]], dtype=np.int64)
        except ValueError:
            raise PgmError("malformed payload") from None
        samples = values.reshape(height, width)
    if samples.max() > maxval:
        raise PgmError("sample exceeds maxval")
    return PixelGrid(samples.astype(np.uint8))


def write_pgm(grid: PixelGrid) -> bytes:
    header = f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii")
    return header + grid.samples.tobytes()


def load_pgm(path: str | Path) -> PixelGrid:
    return read_pgm(Path(path).read_bytes())


def save_pgm(grid: PixelGrid, path: str | Path) -> None:
    Path(path).write_bytes(write_pgm(grid))


# ---------------------------------------------------------------- metrics

def sse(a, b) -> int:
    x = as_array(a).astype(np.int64)
    y = as_array(b).astype(np.int64)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return int(((x - y) ** 2).sum())


def mse(a, b) -> float:
    x = as_array(a)
    return sse(a, b) / x.size


def psnr_from_sse(total_sse: float, pixels: int) -> float:
    if total_sse <= 0:
        return math.inf
    return 10.0 * math.log10(PEAK * PEAK * pixels / total_sse)


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` for identical images."""
    x = as_array(a)
    return psnr_from_sse(sse(a, b), x.size)


# ---------------------------------------------------------------- synthetic data

def synth_ridge(height: int, width: int, period: float, angle: float,
                contrast: float, seed: int = 0, noise: float = 0.0) -> PixelGrid:
    """Oriented sinusoidal ridge pattern.

    The intensity varies along the unit normal ``(cos angle, sin angle)`` in
    (row, col) coordinates, so ``angle=0`` gives rows that repeat every
    ``period`` pixels with each row constant. ``seed`` fixes the phase and
    the optional Gaussian ``noise`` (standard deviation in gray levels).
    """
    if period < 2:
        raise ValueError("period must be >= 2 pixels")
    rng = np.random.default_rng(seed)
    phase = rng.uniform(0.0, 2.0 * math.pi)
    r, c = np.mgrid[0:height, 0:width].astype(np.float64)
    t = r * math.cos(angle) + c * math.sin(angle)
    values = 127.5 + 0.5 * contrast * np.cos(2.0 * math.pi * t / period + phase)
    if noise > 0:
        values = values + rng.normal(0.0, noise, size=values.shape)
    return PixelGrid(np.clip(np.floor(values + 0.5), 0, PEAK).astype(np.uint8))
