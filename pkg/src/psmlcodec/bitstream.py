"""MSB-first bit writer and reader."""

from __future__ import annotations


class TruncatedStreamError(EOFError):
    pass


class BitWriter:
    def __init__(self):
        self._buf = bytearray()
        self._acc = 0
        self._fill = 0
        self._count = 0

    def write(self, value: int, nbits: int) -> None:
        """Append the ``nbits`` low bits of ``value``, most significant first."""
        if nbits <= 0:
            if nbits < 0:
                raise ValueError("negative bit count")
            return
        if value < 0 or value >> nbits:
            raise ValueError(f"value {value} does not fit in {nbits} bits")
        self._acc = (self._acc << nbits) | value
        self._fill += nbits
        self._count += nbits
        while self._fill >= 8:
            self._fill -= 8
            self._buf.append((self._acc >> self._fill) & 0xFF)
        self._acc &= (1 << self._fill) - 1

    def write_bit(self, bit: int) -> None:
        self.write(1 if bit else 0, 1)

    def write_bits(self, bits) -> None:
        for b in bits:
            self.write_bit(b)

    def write_unary(self, count: int) -> None:
        """``count`` one bits followed by a zero."""
        while count >= 32:
            self.write(0xFFFFFFFF, 32)
            count -= 32
        self.write(((1 << count) - 1) << 1, count + 1)

    def __len__(self) -> int:
        return self._count

    def getvalue(self) -> bytes:
        """Bytes written so far, the final byte zero padded."""
        if self._fill:
            return bytes(self._buf) + bytes([(self._acc << (8 - self._fill)) & 0xFF])
        return bytes(self._buf)


class BitReader:
    def __init__(self, data: bytes, start_bit: int = 0):
        self._data = bytes(data)
        self._pos = start_bit
        self._size = len(self._data) * 8

    @property
    def position(self) -> int:
        return self._pos

    @property
    def remaining(self) -> int:
        return self._size - self._pos

    def read(self, nbits: int) -> int:
        if nbits == 0:
            return 0
        end = self._pos + nbits
        if end > self._size:
            raise TruncatedStreamError(f"need {nbits} bits at offset {self._pos}, {self.remaining} left")
        first = self._pos >> 3
        last = (end + 7) >> 3
        chunk = int.from_bytes(self._data[first:last], "big")
        chunk >>= (last << 3) - end
        self._pos = end
        return chunk & ((1 << nbits) - 1)

    def read_bit(self) -> int:
        return self.read(1)

    def read_unary(self) -> int:
        count = 0
        while self.read(1):
            count += 1
        return count
