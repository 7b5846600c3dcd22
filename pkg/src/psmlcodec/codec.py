"""Quadtree encoder/decoder with PSML or wedgelet leaves.

Pipeline: :func:`decompose` fits every node of the full quadtree once,
:func:`prune` runs the bottom-up Lagrangian dynamic program for one
``(lambda, q)`` pair, and :func:`encode` picks the gray depth (and, for a
target rate, ``lambda``) before serializing.

Bit cost of a node (``K``):

* 1 split flag if the node may split (depth < max_depth, both sides >= 4)
* leaves: 1 model flag if a model fits the node's size, then either
  ``q`` bits for a constant gray, or the model structure
  (PSML: orientation index + ``p`` bits of ``G``; wedgelet: atom index)
  plus ``2q`` bits of grays.

Gray bits are counted at ``q`` each inside ``K``; the codestream then replaces
them with the entropy-coded form, so the exact stream size is computed
separately by :func:`stream_bits`.

Codestream layout, MSB first::

    "PSML" | version u8 | codec u8 | width u16 | height u16
    | q u4 | max_depth u4 | k0 u5 | k1 u5
    | tree in preorder (TL, TR, BL, BR)
    | raw flag + class-0 gray stream | raw flag + class-1 gray stream
    | zero padding to a byte
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import entropy
from .bitstream import BitReader, BitWriter, TruncatedStreamError
from .geometry import MIN_MODEL_SIZE, line_ids, orientations
from .pixel_grid import PixelGrid, psnr_from_sse
from .psml import fit_patches
from .wedgelet import dictionary, fit_wedgelets, side_mask

MAGIC = b"PSML"
VERSION = 1
CODECS = {"psml": 0, "wedgelet": 1}
CODEC_NAMES = {v: k for k, v in CODECS.items()}
HEADER_BITS = 32 + 8 + 8 + 16 + 16 + 4 + 4 + 5 + 5
FLAG_BITS = 2
GRAY_BITS = range(3, 9)
LOG_LAMBDA_RANGE = (-8.0, 16.0)
MAX_BISECTIONS = 40
RATE_TOLERANCE = 0.10

CONST, MODEL, SPLIT = 0, 1, 2


class CodestreamError(ValueError):
    pass


class RateError(ValueError):
    def __init__(self, target: float, floor_bpp: float):
        super().__init__(f"target rate {target:g} bpp is below the header floor {floor_bpp:.6f} bpp")
        self.target = target
        self.floor_bpp = floor_bpp


@dataclass(frozen=True)
class EncoderConfig:
    codec: str = "psml"
    max_depth: int = 7
    gray_bits: int | str = "auto"
    lam: float | None = None
    target_bpp: float | None = None
    entropy: bool = True

    def __post_init__(self):
        if self.codec not in CODECS:
            raise ValueError(f"unknown codec {self.codec!r}")
        if not 0 <= self.max_depth <= 15:
            raise ValueError("max_depth must be in [0, 15]")
        if self.gray_bits != "auto" and self.gray_bits not in GRAY_BITS:
            raise ValueError("gray_bits must be 3..8 or 'auto'")
        if (self.lam is None) == (self.target_bpp is None):
            raise ValueError("give exactly one of lam or target_bpp")
        if self.lam is not None and self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.target_bpp is not None and self.target_bpp <= 0:
            raise ValueError("target bpp must be positive")

    @property
    def gray_choices(self) -> list[int]:
        if self.gray_bits == "auto":
            return list(range(8, 2, -1))
        return [int(self.gray_bits)]


# ---------------------------------------------------------------- gray quantization

def quantize_code(c, q: int):
    levels = (1 << q) - 1
    return np.floor(np.asarray(c, dtype=np.float64) * levels / 255.0 + 0.5).astype(np.int64)


def dequantize(code, q: int):
    levels = (1 << q) - 1
    return (2 * np.asarray(code, dtype=np.int64) * 255 + levels) // (2 * levels)


def quantize_gray(c: float, q: int) -> tuple[int, int]:
    """q-bit code of gray ``c`` and the integer gray the decoder restores."""
    if not 3 <= q <= 8:
        raise ValueError("q must be in [3, 8]")
    code = int(quantize_code(c, q))
    return code, int(dequantize(code, q))


# ---------------------------------------------------------------- tree geometry

def can_split(height: int, width: int, depth: int, max_depth: int) -> bool:
    return depth < max_depth and min(height, width) >= MIN_MODEL_SIZE


def model_allowed(height: int, width: int, codec: str) -> bool:
    if codec == "psml":
        return min(height, width) >= MIN_MODEL_SIZE
    return min(height, width) >= 2


def split_rect(row: int, col: int, height: int, width: int):
    """Children in TL, TR, BL, BR order; the first half takes the ceiling."""
    h0, w0 = (height + 1) // 2, (width + 1) // 2
    return [(row, col, h0, w0), (row, col + w0, h0, width - w0),
            (row + h0, col, height - h0, w0), (row + h0, col + w0, height - h0, width - w0)]


@dataclass(frozen=True, eq=False)
class LeafModel:
    kind: str
    index: int
    bits: np.ndarray | None
    struct_bits: int
    n0: int
    s0: int
    q0: int
    n1: int
    s1: int
    q1: int
    gray0: float
    gray1: float
    sse: float


@dataclass(eq=False)
class QuadtreeNode:
    row: int
    col: int
    height: int
    width: int
    depth: int
    index: int
    splittable: bool
    n: int = 0
    s: int = 0
    sq: int = 0
    model: LeafModel | None = None
    children: list = field(default_factory=list)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def mean(self) -> float:
        return self.s / self.n

    @property
    def const_sse(self) -> float:
        return self.sq - self.s * self.s / self.n


@dataclass(eq=False)
class DecomposedTree:
    """The full quadtree with candidate fits for every node, in preorder."""

    image: PixelGrid
    codec: str
    max_depth: int
    nodes: list
    fit_seconds: float = 0.0
    _arrays: dict = field(default_factory=dict, repr=False)
    _per_q: dict = field(default_factory=dict, repr=False)

    @property
    def root(self) -> QuadtreeNode:
        return self.nodes[0]

    @property
    def pixels(self) -> int:
        return self.image.width * self.image.height

    def arrays(self) -> dict:
        if not self._arrays:
            self._arrays.update(_tree_arrays(self))
        return self._arrays

    def gray_tables(self, q: int) -> dict:
        if q not in self._per_q:
            self._per_q[q] = _gray_tables(self.arrays(), q)
        return self._per_q[q]


def _integral(a: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0] + 1, a.shape[1] + 1), dtype=np.int64)
    np.cumsum(np.cumsum(a, axis=0), axis=1, out=out[1:, 1:])
    return out


def decompose(image: PixelGrid, config: EncoderConfig) -> DecomposedTree:
    """Build the full quadtree and fit the constant and model leaf of every node."""
    codec = config.codec
    if codec == "psml" and min(image.height, image.width) < MIN_MODEL_SIZE:
        raise ValueError(f"image too small for the PSML codec: {image.height}x{image.width}")
    if image.height > 0xFFFF or image.width > 0xFFFF:
        raise ValueError("image dimensions must fit in 16 bits")
    start = time.perf_counter()
    nodes: list[QuadtreeNode] = []

    def build(row, col, height, width, depth):
        node = QuadtreeNode(row, col, height, width, depth, len(nodes),
                            can_split(height, width, depth, config.max_depth))
        nodes.append(node)
        if node.splittable:
            node.children = [build(*rect, depth + 1) for rect in split_rect(row, col, height, width)]
        return node

    build(0, 0, image.height, image.width, 0)

    x = image.samples.astype(np.int64)
    sat = _integral(x)
    sat2 = _integral(x * x)
    for node in nodes:
        r0, c0, r1, c1 = node.row, node.col, node.row + node.height, node.col + node.width
        node.n = node.height * node.width
        node.s = int(sat[r1, c1] - sat[r0, c1] - sat[r1, c0] + sat[r0, c0])
        node.sq = int(sat2[r1, c1] - sat2[r0, c1] - sat2[r1, c0] + sat2[r0, c0])

    groups: dict[tuple[int, int], list[QuadtreeNode]] = {}
    for node in nodes:
        if model_allowed(node.height, node.width, codec):
            groups.setdefault(node.shape, []).append(node)
    for (m, n), members in groups.items():
        batch = np.stack([x[v.row:v.row + m, v.col:v.col + n] for v in members])
        if codec == "psml":
            _attach_psml(members, batch, m, n)
        else:
            _attach_wedgelet(members, batch, m, n)
    return DecomposedTree(image, codec, config.max_depth, nodes, time.perf_counter() - start)


def _attach_psml(members, batch, m, n):
    f = fit_patches(batch)
    obits = orientations(m, n).index_bits
    for i, node in enumerate(members):
        o = int(f.orientation[i])
        bits = f.bits[i]
        bits.setflags(write=False)
        node.model = LeafModel("psml", o, bits, obits + len(bits),
                               int(f.n0[i]), int(f.s0[i]), int(f.q0[i]),
                               int(f.n1[i]), int(f.s1[i]), int(f.q1[i]),
                               float(f.c1[i]), float(f.c2[i]), float(f.sse[i]))


def _attach_wedgelet(members, batch, m, n):
    f = fit_wedgelets(batch)
    ibits = dictionary(m, n).index_bits
    for i, node in enumerate(members):
        node.model = LeafModel("wedgelet", int(f.index[i]), None, ibits,
                               int(f.n0[i]), int(f.s0[i]), int(f.q0[i]),
                               int(f.n1[i]), int(f.s1[i]), int(f.q1[i]),
                               float(f.ca[i]), float(f.cb[i]), float(f.sse[i]))


def _tree_arrays(tree: DecomposedTree) -> dict:
    nodes = tree.nodes
    N = len(nodes)
    a = {
        "depth": np.array([v.depth for v in nodes]),
        "split_bit": np.array([int(v.splittable) for v in nodes]),
        "has_model": np.array([v.model is not None for v in nodes]),
        "child": np.full((N, 4), -1, dtype=np.int64),
    }
    for v in nodes:
        if v.children:
            a["child"][v.index] = [c.index for c in v.children]
    for key in ("n", "s", "sq"):
        a[key] = np.array([getattr(v, key) for v in nodes], dtype=np.int64)
    zero = LeafModel("", 0, None, 0, 0, 0, 0, 0, 0, 0, 0.0, 0.0, 0.0)
    ms = [v.model or zero for v in nodes]
    for key in ("struct_bits", "n0", "s0", "q0", "n1", "s1", "q1"):
        a[key] = np.array([getattr(mm, key) for mm in ms], dtype=np.int64)
    a["gray0"] = np.array([mm.gray0 for mm in ms])
    a["gray1"] = np.array([mm.gray1 for mm in ms])
    internal = a["child"][:, 0] >= 0
    a["levels"] = [np.nonzero(internal & (a["depth"] == d))[0]
                   for d in range(int(a["depth"].max()), -1, -1)]
    return a


def _class_distortion(n, s, sq, v):
    return sq - 2 * v * s + n * v * v


def _gray_tables(a: dict, q: int) -> dict:
    code_c = quantize_code(a["s"] / a["n"], q)
    v = dequantize(code_c, q)
    code0 = quantize_code(a["gray0"], q)
    code1 = quantize_code(a["gray1"], q)
    v0, v1 = dequantize(code0, q), dequantize(code1, q)
    has = a["has_model"]
    type_bit = has.astype(np.int64)
    return {
        "code_c": code_c, "code0": code0, "code1": code1,
        "d_const": _class_distortion(a["n"], a["s"], a["sq"], v),
        "d_model": np.where(has, _class_distortion(a["n0"], a["s0"], a["q0"], v0)
                            + _class_distortion(a["n1"], a["s1"], a["q1"], v1), 0),
        "k_const": a["split_bit"] + type_bit + q,
        "k_model": a["split_bit"] + 1 + a["struct_bits"] + 2 * q,
    }


# ---------------------------------------------------------------- pruning

@dataclass(eq=False)
class PrunedQuadtree:
    tree: DecomposedTree
    lam: float
    q: int
    decision: np.ndarray
    cost: np.ndarray
    bits: np.ndarray
    distortion: np.ndarray

    @property
    def K(self) -> int:
        return int(self.bits[0])

    @property
    def D(self) -> int:
        return int(self.distortion[0])

    @property
    def objective(self) -> float:
        return float(self.cost[0])

    def leaves(self) -> np.ndarray:
        """Preorder indices of the leaves reached from the root."""
        child = self.tree.arrays()["child"]
        out = []
        stack = [0]
        while stack:
            i = stack.pop()
            if self.decision[i] == SPLIT:
                stack.extend(reversed(child[i].tolist()))
            else:
                out.append(i)
        return np.array(out, dtype=np.int64)


def prune(tree: DecomposedTree, lam: float, q: int) -> PrunedQuadtree:
    """Bottom-up minimization of ``D + lam**2 K`` over all prunings at gray depth q.

    Ties keep the leaf, and a constant leaf over a model leaf.
    """
    a = tree.arrays()
    g = tree.gray_tables(q)
    lam2 = float(lam) * float(lam)
    cost_c = g["d_const"] + lam2 * g["k_const"]
    cost_m = np.where(a["has_model"], g["d_model"] + lam2 * g["k_model"], np.inf)
    use_model = cost_m < cost_c
    decision = np.where(use_model, MODEL, CONST)
    cost = np.where(use_model, cost_m, cost_c)
    bits = np.where(use_model, g["k_model"], g["k_const"])
    dist = np.where(use_model, g["d_model"], g["d_const"])
    child = a["child"]
    for idx in a["levels"]:
        ch = child[idx]
        split_cost = lam2 + cost[ch].sum(axis=1)
        better = split_cost < cost[idx]
        sel = idx[better]
        chs = ch[better]
        decision[sel] = SPLIT
        cost[sel] = split_cost[better]
        bits[sel] = 1 + bits[chs].sum(axis=1)
        dist[sel] = dist[chs].sum(axis=1)
    return PrunedQuadtree(tree, float(lam), q, decision, cost, bits, dist)


def best_pruning(tree: DecomposedTree, lam: float, qs) -> PrunedQuadtree:
    best = None
    for q in qs:
        cand = prune(tree, lam, q)
        if best is None or cand.objective < best.objective:
            best = cand
    return best


# ---------------------------------------------------------------- rate accounting

def _gray_streams(pruned: PrunedQuadtree):
    g = pruned.tree.gray_tables(pruned.q)
    leaves = pruned.leaves()
    dec = pruned.decision[leaves]
    is_model = dec == MODEL
    stream0 = np.where(is_model, g["code0"][leaves], g["code_c"][leaves])
    stream1 = g["code1"][leaves[is_model]]
    return leaves, stream0, stream1


def stream_bits(pruned: PrunedQuadtree, use_entropy: bool = True) -> int:
    """Exact codestream length in bits before byte padding."""
    _, s0, s1 = _gray_streams(pruned)
    p0 = entropy.plan_stream(s0, pruned.q, use_entropy)
    p1 = entropy.plan_stream(s1, pruned.q, use_entropy)
    structure = pruned.K - pruned.q * (len(s0) + len(s1))
    return HEADER_BITS + structure + FLAG_BITS + p0.payload_bits + p1.payload_bits


def _padded(bits: int) -> int:
    return (bits + 7) // 8 * 8


@dataclass(frozen=True)
class RateDistortionPoint:
    lam: float
    total_bits: int
    bpp: float
    sse: int
    psnr: float
    q: int
    stream_bits: int = 0
    target_bpp: float | None = None
    granularity_limited: bool = False


@dataclass(eq=False)
class Encoding:
    stream: bytes
    point: RateDistortionPoint
    pruned: PrunedQuadtree

    def __iter__(self):
        return iter((self.stream, self.point))

    def reconstruction(self) -> PixelGrid:
        return render_leaves(self.pruned.tree.image.shape, leaf_records(self.pruned))


def _point(pruned: PrunedQuadtree, use_entropy: bool, target=None) -> RateDistortionPoint:
    raw = stream_bits(pruned, use_entropy)
    total = _padded(raw)
    pixels = pruned.tree.pixels
    return RateDistortionPoint(pruned.lam, total, total / pixels, pruned.D,
                               psnr_from_sse(pruned.D, pixels), pruned.q, raw, target)


def search_rate(tree: DecomposedTree, target_bpp: float, qs, use_entropy: bool = True):
    """Bisection on ln(lambda), run separately for every gray depth in ``qs``.

    Among all evaluated points, those within 10% of the target compete on
    PSNR, points not above the target first; when none is that close, the
    point nearest the target wins (ties to the lower rate). Raises
    :class:`RateError` when the target is below the rate of a lone constant
    leaf at every allowed gray depth.
    """
    evaluated = []

    def run(log_lam, q):
        pruned = prune(tree, math.exp(log_lam), q)
        pt = _point(pruned, use_entropy, target_bpp)
        evaluated.append((pruned, pt))
        return pt.bpp

    lo0, hi0 = LOG_LAMBDA_RANGE
    floors = [run(hi0, q) for q in qs]
    if target_bpp < min(floors):
        raise RateError(target_bpp, min(floors))
    for q, floor_bpp in zip(qs, floors):
        if floor_bpp > target_bpp:
            continue
        lo, hi = lo0, hi0
        if run(lo, q) <= target_bpp:
            continue
        for _ in range(MAX_BISECTIONS):
            mid = 0.5 * (lo + hi)
            rate = run(mid, q)
            if rate == target_bpp:
                break
            if rate > target_bpp:
                lo = mid
            else:
                hi = mid

    tol = RATE_TOLERANCE * target_bpp
    close = [e for e in evaluated if abs(e[1].bpp - target_bpp) <= tol]
    if close:
        pruned, pt = min(close, key=lambda e: (e[1].bpp > target_bpp, -e[1].psnr, e[1].bpp))
    else:
        pruned, pt = min(evaluated, key=lambda e: (abs(e[1].bpp - target_bpp), e[1].bpp > target_bpp))
    limited = abs(pt.bpp - target_bpp) > tol
    pt = RateDistortionPoint(pt.lam, pt.total_bits, pt.bpp, pt.sse, pt.psnr, pt.q,
                             pt.stream_bits, target_bpp, limited)
    return pruned, pt


def encode(image: PixelGrid, config: EncoderConfig, tree: DecomposedTree | None = None) -> Encoding:
    """Encode ``image``; ``tree`` reuses an earlier :func:`decompose` result."""
    if tree is None:
        tree = decompose(image, config)
    elif tree.codec != config.codec or tree.max_depth != config.max_depth:
        raise ValueError("decomposed tree does not match the configuration")
    if config.lam is not None:
        pruned = best_pruning(tree, config.lam, config.gray_choices)
        point = _point(pruned, config.entropy)
    else:
        pruned, point = search_rate(tree, config.target_bpp, config.gray_choices, config.entropy)
    stream = serialize(pruned, config.entropy)
    return Encoding(stream, point, pruned)


# ---------------------------------------------------------------- leaves and rendering

@dataclass(frozen=True, eq=False)
class LeafRecord:
    row: int
    col: int
    height: int
    width: int
    kind: str
    index: int
    bits: np.ndarray | None
    q: int
    code0: int
    code1: int


def leaf_records(pruned: PrunedQuadtree) -> list[LeafRecord]:
    tree = pruned.tree
    g = tree.gray_tables(pruned.q)
    out = []
    for i in pruned.leaves():
        node = tree.nodes[i]
        if pruned.decision[i] == MODEL:
            mdl = node.model
            out.append(LeafRecord(node.row, node.col, node.height, node.width, mdl.kind, mdl.index,
                                  mdl.bits, pruned.q, int(g["code0"][i]), int(g["code1"][i])))
        else:
            out.append(LeafRecord(node.row, node.col, node.height, node.width, "const", 0, None,
                                  pruned.q, int(g["code_c"][i]), 0))
    return out


def render_leaves(shape, leaves) -> PixelGrid:
    out = np.zeros(shape, dtype=np.uint8)
    for leaf in leaves:
        v0 = int(dequantize(leaf.code0, leaf.q))
        view = out[leaf.row:leaf.row + leaf.height, leaf.col:leaf.col + leaf.width]
        if leaf.kind == "const":
            view[...] = v0
            continue
        v1 = int(dequantize(leaf.code1, leaf.q))
        if leaf.kind == "psml":
            ids, _ = line_ids(leaf.height, leaf.width, leaf.index)
            mask = np.asarray(leaf.bits, dtype=bool)[ids].reshape(leaf.height, leaf.width)
        else:
            mask = side_mask(leaf.height, leaf.width, leaf.index)
        view[...] = np.where(mask, v1, v0)
    return PixelGrid(out)


# ---------------------------------------------------------------- codestream

def _bits_to_int(bits) -> int:
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    return value


def serialize(pruned: PrunedQuadtree, use_entropy: bool = True) -> bytes:
    tree = pruned.tree
    q = pruned.q
    leaves, s0, s1 = _gray_streams(pruned)
    plan0 = entropy.plan_stream(s0, q, use_entropy)
    plan1 = entropy.plan_stream(s1, q, use_entropy)
    w = BitWriter()
    for byte in MAGIC:
        w.write(byte, 8)
    w.write(VERSION, 8)
    w.write(CODECS[tree.codec], 8)
    w.write(tree.image.width, 16)
    w.write(tree.image.height, 16)
    w.write(q, 4)
    w.write(tree.max_depth, 4)
    w.write(plan0.k, 5)
    w.write(plan1.k, 5)

    nodes = tree.nodes
    child = tree.arrays()["child"]

    def emit(i):
        node = nodes[i]
        if node.splittable:
            w.write_bit(pruned.decision[i] == SPLIT)
            if pruned.decision[i] == SPLIT:
                for c in child[i]:
                    emit(int(c))
                return
        if node.model is None:
            return
        is_model = pruned.decision[i] == MODEL
        w.write_bit(is_model)
        if is_model:
            mdl = node.model
            if mdl.kind == "psml":
                w.write(mdl.index, orientations(node.height, node.width).index_bits)
                w.write(_bits_to_int(mdl.bits), len(mdl.bits))
            else:
                w.write(mdl.index, dictionary(node.height, node.width).index_bits)

    emit(0)
    entropy.write_stream(w, s0, q, plan0)
    entropy.write_stream(w, s1, q, plan1)
    assert len(w) == stream_bits(pruned, use_entropy)
    return w.getvalue()


@dataclass(frozen=True)
class StreamHeader:
    codec: str
    width: int
    height: int
    q: int
    max_depth: int
    k0: int
    k1: int


def read_header(reader: BitReader) -> StreamHeader:
    try:
        magic = bytes(reader.read(8) for _ in range(4))
        if magic != MAGIC:
            raise CodestreamError("bad magic")
        version = reader.read(8)
        if version != VERSION:
            raise CodestreamError(f"version mismatch: {version}")
        codec_id = reader.read(8)
        width, height = reader.read(16), reader.read(16)
        q, max_depth = reader.read(4), reader.read(4)
        k0, k1 = reader.read(5), reader.read(5)
    except TruncatedStreamError:
        raise CodestreamError("truncated stream") from None
    if codec_id not in CODEC_NAMES:
        raise CodestreamError(f"unknown codec id {codec_id}")
    if width < 1 or height < 1:
        raise CodestreamError("empty image dimensions")
    if q not in GRAY_BITS:
        raise CodestreamError(f"invalid gray depth {q}")
    return StreamHeader(CODEC_NAMES[codec_id], width, height, q, max_depth, k0, k1)


def decode(stream: bytes) -> PixelGrid:
    reader = BitReader(stream)
    hdr = read_header(reader)
    codec = hdr.codec
    shapes = []

    def parse(row, col, height, width, depth):
        if can_split(height, width, depth, hdr.max_depth) and reader.read_bit():
            for rect in split_rect(row, col, height, width):
                parse(*rect, depth + 1)
            return
        if model_allowed(height, width, codec) and reader.read_bit():
            if codec == "psml":
                oset = orientations(height, width)
                o = reader.read(oset.index_bits)
                if o >= len(oset):
                    raise CodestreamError(f"orientation index {o} out of range")
                p = line_ids(height, width, o)[1]
                value = reader.read(p)
                bits = np.array([(value >> (p - 1 - i)) & 1 for i in range(p)], dtype=np.uint8)
                shapes.append((row, col, height, width, "psml", o, bits))
            else:
                d = dictionary(height, width)
                idx = reader.read(d.index_bits)
                if idx > d.size:
                    raise CodestreamError(f"wedgelet index {idx} out of range")
                shapes.append((row, col, height, width, "wedgelet", idx, None))
        else:
            shapes.append((row, col, height, width, "const", 0, None))

    try:
        parse(0, 0, hdr.height, hdr.width, 0)
    except TruncatedStreamError:
        raise CodestreamError("tree-bit overrun") from None
    n_model = sum(1 for s in shapes if s[4] != "const")
    try:
        codes0 = entropy.read_stream(reader, len(shapes), hdr.q, hdr.k0)
        codes1 = entropy.read_stream(reader, n_model, hdr.q, hdr.k1)
    except TruncatedStreamError:
        raise CodestreamError("truncated stream") from None
    except ValueError as exc:
        raise CodestreamError(str(exc)) from None
    leaves = []
    j = 0
    for i, (row, col, height, width, kind, index, bits) in enumerate(shapes):
        code1 = 0
        if kind != "const":
            code1 = int(codes1[j])
            j += 1
        leaves.append(LeafRecord(row, col, height, width, kind, index, bits, hdr.q, int(codes0[i]), code1))
    return render_leaves((hdr.height, hdr.width), leaves)
