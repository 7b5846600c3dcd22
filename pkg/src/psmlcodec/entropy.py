"""Lossless coding of leaf gray codes: previous-value prediction + Golomb-Rice.

Each gray class forms its own stream of q-bit codes in leaf preorder. A code
is predicted by the previous code of the same stream (the first one by
``2**(q-1)``), the signed residual is zigzag mapped to a nonnegative integer,
and that is Rice coded with one parameter ``k`` per stream. A stream whose
Rice form would be longer than its raw form is sent raw; a one-bit flag in
front of each stream payload says which.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bitstream import BitReader, BitWriter

MAX_K = 31


def predict(stream, position: int, q: int) -> int:
    if position == 0:
        return 1 << (q - 1)
    return int(stream[position - 1])


def zigzag(e):
    e = np.asarray(e, dtype=np.int64)
    return np.where(e >= 0, 2 * e, -2 * e - 1)


def unzigzag(u):
    u = np.asarray(u, dtype=np.int64)
    return np.where(u & 1, -((u + 1) >> 1), u >> 1)


def residuals(codes, q: int) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    if codes.size == 0:
        return codes
    pred = np.concatenate(([1 << (q - 1)], codes[:-1]))
    return zigzag(codes - pred)


def reconstruct(res, q: int) -> np.ndarray:
    e = unzigzag(res)
    if e.size == 0:
        return e
    e = e.copy()
    e[0] += 1 << (q - 1)
    return np.cumsum(e)


def rice_encode(value: int, k: int) -> list[int]:
    """Rice codeword as a bit list: ``value >> k`` in unary, then k low bits."""
    if value < 0 or not 0 <= k <= MAX_K:
        raise ValueError("rice_encode needs value >= 0 and 0 <= k <= 31")
    quotient = value >> k
    bits = [1] * quotient + [0]
    bits += [(value >> i) & 1 for i in range(k - 1, -1, -1)]
    return bits


def write_rice(writer: BitWriter, value: int, k: int) -> None:
    writer.write_unary(value >> k)
    writer.write(value & ((1 << k) - 1), k)


def read_rice(reader: BitReader, k: int) -> int:
    quotient = reader.read_unary()
    return (quotient << k) | reader.read(k)


def rice_decode(bits, k: int) -> int:
    bits = list(bits)
    quotient = bits.index(0)
    value = quotient
    for b in bits[quotient + 1:quotient + 1 + k]:
        value = (value << 1) | b
    return value


def rice_length(values, k: int) -> int:
    values = np.asarray(values, dtype=np.int64)
    return int((values >> k).sum()) + values.size * (k + 1)


def choose_k(res, q: int) -> int:
    """Rice parameter in [0, q+1] with the fewest coded bits (ties: smaller k)."""
    res = np.asarray(res, dtype=np.int64)
    if res.size == 0:
        return 0
    lengths = [rice_length(res, k) for k in range(0, q + 2)]
    return int(np.argmin(lengths))


@dataclass(frozen=True)
class StreamPlan:
    k: int
    raw: bool
    payload_bits: int


def plan_stream(codes, q: int, entropy: bool = True) -> StreamPlan:
    """Parameter choice and exact payload size (flag bit excluded)."""
    codes = np.asarray(codes, dtype=np.int64)
    raw_bits = codes.size * q
    if not entropy or codes.size == 0:
        return StreamPlan(0, not entropy, raw_bits)
    res = residuals(codes, q)
    k = choose_k(res, q)
    rice_bits = rice_length(res, k)
    if rice_bits > raw_bits:
        return StreamPlan(k, True, raw_bits)
    return StreamPlan(k, False, rice_bits)


def write_stream(writer: BitWriter, codes, q: int, plan: StreamPlan) -> None:
    writer.write_bit(plan.raw)
    if plan.raw:
        for c in codes:
            writer.write(int(c), q)
    else:
        for r in residuals(codes, q):
            write_rice(writer, int(r), plan.k)


def read_stream(reader: BitReader, count: int, q: int, k: int) -> np.ndarray:
    raw = reader.read_bit()
    if raw:
        return np.array([reader.read(q) for _ in range(count)], dtype=np.int64)
    res = np.array([read_rice(reader, k) for _ in range(count)], dtype=np.int64)
    codes = reconstruct(res, q)
    if codes.size and (codes.min() < 0 or codes.max() >= 1 << q):
        raise ValueError("decoded gray code out of range")
    return codes
