import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from psmlcodec.bitstream import BitReader, BitWriter, TruncatedStreamError
from psmlcodec.entropy import (choose_k, plan_stream, predict, read_rice, read_stream, reconstruct,
                               residuals, rice_decode, rice_encode, rice_length, unzigzag,
                               write_rice, write_stream, zigzag)


def test_bit_identity_long():
    rng = np.random.default_rng(0)
    bits = rng.integers(0, 2, 10**6)
    w = BitWriter()
    for chunk in np.split(bits, 1000):
        w.write(int("".join(map(str, chunk)), 2), chunk.size)
    assert len(w) == bits.size
    data = w.getvalue()
    assert len(data) == bits.size // 8
    r = BitReader(data)
    back = [r.read(1000) for _ in range(1000)]
    assert back == [int("".join(map(str, c)), 2) for c in np.split(bits, 1000)]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 40), st.integers(0, 2**40)), max_size=60))
def test_bit_identity_fields(fields):
    fields = [(n, v & ((1 << n) - 1)) for n, v in fields]
    w = BitWriter()
    for n, v in fields:
        w.write(v, n)
    assert len(w) == sum(n for n, _ in fields)
    r = BitReader(w.getvalue())
    assert [r.read(n) for n, _ in fields] == [v for _, v in fields]
    assert r.remaining < 8


def test_writer_rejects_wide_values():
    with pytest.raises(ValueError):
        BitWriter().write(4, 2)


def test_zero_padding():
    w = BitWriter()
    w.write(0b101, 3)
    assert w.getvalue() == bytes([0b10100000])


def test_reader_truncation():
    r = BitReader(b"\xff")
    r.read(5)
    with pytest.raises(TruncatedStreamError):
        r.read(4)


def test_unary_long_runs():
    w = BitWriter()
    for count in (0, 1, 31, 32, 33, 100):
        w.write_unary(count)
    r = BitReader(w.getvalue())
    assert [r.read_unary() for _ in range(6)] == [0, 1, 31, 32, 33, 100]


def test_predict():
    assert predict([100, 101, 99], 1, 8) == 100
    assert predict([100, 101, 99], 0, 8) == 128
    assert predict([3], 0, 3) == 4


def test_zigzag():
    assert zigzag([0, -1, 1, -2, 2]).tolist() == [0, 1, 2, 3, 4]
    e = np.arange(-300, 300)
    assert np.array_equal(unzigzag(zigzag(e)), e)


def test_rice_examples():
    assert rice_encode(5, 1) == [1, 1, 0, 1]
    assert rice_encode(0, 0) == [0]
    assert rice_decode([1, 1, 0, 1], 1) == 5


def test_rice_bad_args():
    with pytest.raises(ValueError):
        rice_encode(-1, 0)
    with pytest.raises(ValueError):
        rice_encode(3, 32)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 5000), min_size=1, max_size=50), st.integers(0, 10))
def test_rice_round_trip(values, k):
    for v in values:
        bits = rice_encode(v, k)
        assert rice_decode(bits, k) == v
        assert len(bits) == (v >> k) + 1 + k
    w = BitWriter()
    for v in values:
        write_rice(w, v, k)
    assert len(w) == rice_length(values, k)
    r = BitReader(w.getvalue())
    assert [read_rice(r, k) for _ in values] == values


def test_choose_k_all_zero():
    assert choose_k([0] * 20, 8) == 0


@pytest.mark.parametrize("q", range(3, 9))
def test_choose_k_saturated(q):
    res = [2**q - 1] * 16
    k = choose_k(res, q)
    assert abs(k - q) <= 1
    assert rice_length(res, k) == min(rice_length(res, j) for j in range(q + 2))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 600), min_size=1, max_size=40), st.integers(3, 8))
def test_choose_k_is_minimal(res, q):
    k = choose_k(res, q)
    # independent bit count from the codeword lists
    counts = [sum(len(rice_encode(v, j)) for v in res) for j in range(q + 2)]
    assert counts[k] == min(counts)
    assert k == counts.index(min(counts))


@settings(max_examples=100, deadline=None)
@given(st.integers(3, 8), st.data())
def test_stream_round_trip(q, data):
    codes = data.draw(st.lists(st.integers(0, 2**q - 1), max_size=80))
    want_entropy = data.draw(st.booleans())
    assert np.array_equal(reconstruct(residuals(codes, q), q), np.array(codes, dtype=np.int64))
    plan = plan_stream(codes, q, want_entropy)
    w = BitWriter()
    write_stream(w, codes, q, plan)
    assert len(w) == 1 + plan.payload_bits
    assert plan.payload_bits <= len(codes) * q
    if not want_entropy:
        assert plan.raw
    back = read_stream(BitReader(w.getvalue()), len(codes), q, plan.k)
    assert back.tolist() == codes


def test_smooth_stream_compresses():
    codes = list(range(100, 140)) + list(range(140, 100, -1))
    plan = plan_stream(codes, 8)
    assert not plan.raw and plan.payload_bits < 8 * len(codes)


def test_read_stream_out_of_range():
    # a rice stream whose reconstruction leaves the code range
    w = BitWriter()
    w.write_bit(0)
    write_rice(w, int(zigzag(-5)), 2)  # 4 - 5 < 0 at q = 3
    with pytest.raises(ValueError):
        read_stream(BitReader(w.getvalue()), 1, 3, 2)
