"""Bit-level I/O over entropy-coded scan data.

Decoding works on a *prepared* view of the raw scan bytes: byte stuffing is
stripped once up front and every marker-like byte pair is recorded as an
event at its bit address.  Events act as walls for the entropy decoder —
a codeword can never span a marker — which keeps the hot decode loop free
of per-bit stuffing checks and gives the resilient decoder cheap random
access at arbitrary bit offsets.

Bit addresses index the unstuffed stream, most significant bit first.
``raw_offsets`` maps them back to byte positions in the original stream.
"""

from __future__ import annotations

import dataclasses

import numpy as np

EV_RST = "rst"
EV_EOI = "eoi"
EV_MARKER = "marker"
EV_FILL = "fill"
EV_DANGLING = "dangling-ff"


@dataclasses.dataclass(frozen=True)
class ScanEvent:
    bit_pos: int
    kind: str
    code: int


@dataclasses.dataclass
class ScanBits:
    data: bytes            # unstuffed scan bytes
    padded: bytes          # data + guard zeros so windowed reads never slice short
    nbits: int
    events: list           # ScanEvent, ascending bit_pos
    event_bits: list       # bit positions only, for bisect
    raw_offsets: np.ndarray  # raw byte index per unstuffed byte

    def raw_bit_address(self, bit_pos: int) -> int:
        """Map an unstuffed bit address back to the raw scan stream."""
        if len(self.raw_offsets) == 0:
            return bit_pos
        byte = min(bit_pos >> 3, len(self.raw_offsets) - 1)
        return int(self.raw_offsets[byte]) * 8 + (bit_pos & 7)


def prepare_scan(raw: bytes) -> ScanBits:
    """Unstuff scan bytes and index marker events."""
    out = bytearray()
    offsets = []
    events = []
    i, n = 0, len(raw)
    while i < n:
        b = raw[i]
        if b != 0xFF:
            out.append(b)
            offsets.append(i)
            i += 1
            continue
        if i + 1 >= n:
            events.append(ScanEvent(len(out) * 8, EV_DANGLING, 0xFF))
            i += 1
            continue
        nxt = raw[i + 1]
        if nxt == 0x00:
            out.append(0xFF)
            offsets.append(i)
            i += 2
        elif 0xD0 <= nxt <= 0xD7:
            events.append(ScanEvent(len(out) * 8, EV_RST, nxt & 7))
            i += 2
        elif nxt == 0xD9:
            events.append(ScanEvent(len(out) * 8, EV_EOI, nxt))
            i += 2
        elif nxt == 0xFF:
            # fill byte; the next 0xFF may still introduce a marker
            events.append(ScanEvent(len(out) * 8, EV_FILL, 0xFF))
            i += 1
        else:
            events.append(ScanEvent(len(out) * 8, EV_MARKER, nxt))
            i += 2
    return ScanBits(
        data=bytes(out),
        padded=bytes(out) + b"\x00" * 8,
        nbits=len(out) * 8,
        events=events,
        event_bits=[e.bit_pos for e in events],
        raw_offsets=np.asarray(offsets, dtype=np.uint32),
    )


def stuff_bytes(data: bytes) -> bytes:
    """Insert a 0x00 after every 0xFF (encoder side)."""
    return data.replace(b"\xff", b"\xff\x00")


def unstuff_bytes(data: bytes) -> bytes:
    """Inverse of :func:`stuff_bytes` for well-formed streams."""
    return data.replace(b"\xff\x00", b"\xff")


class BitWriter:
    """MSB-first bit accumulator with JPEG byte stuffing."""

    def __init__(self):
        self.buf = bytearray()
        self._acc = 0
        self._nacc = 0

    def write(self, value: int, nbits: int) -> None:
        if nbits == 0:
            return
        self._acc = (self._acc << nbits) | (value & ((1 << nbits) - 1))
        self._nacc += nbits
        while self._nacc >= 8:
            self._nacc -= 8
            byte = (self._acc >> self._nacc) & 0xFF
            self.buf.append(byte)
            if byte == 0xFF:
                self.buf.append(0x00)
        self._acc &= (1 << self._nacc) - 1

    def align(self) -> None:
        """Pad to a byte boundary with 1-bits."""
        if self._nacc:
            self.write((1 << (8 - self._nacc)) - 1, 8 - self._nacc)

    def write_marker(self, code: int) -> None:
        self.align()
        self.buf.append(0xFF)
        self.buf.append(code)

    def getvalue(self) -> bytes:
        self.align()
        return bytes(self.buf)
