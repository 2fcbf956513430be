"""Canonical Huffman code tables with a flat 16-bit decode lookup.

Decode speed matters: the resilient decoder re-attempts entropy decoding
at single-bit offsets, so symbol decode is a single list index on the next
16 bits of the stream instead of a bit-by-bit tree walk.
"""

from __future__ import annotations

from ..errors import JpegError


class HuffmanTable:
    """One DC or AC code table.

    ``code_lengths`` are the 16 per-length code counts; ``symbols`` the
    values in code order.  Codes are assigned canonically (increasing,
    shorter first), which also proves the table prefix-free: a length
    overflowing its available code space raises.
    """

    __slots__ = ("code_lengths", "symbols", "encode_map", "lut", "max_symbol_bits")

    def __init__(self, code_lengths, symbols):
        code_lengths = tuple(int(c) for c in code_lengths)
        symbols = tuple(int(s) for s in symbols)
        if len(code_lengths) != 16:
            raise JpegError("need exactly 16 code-length counts")
        if sum(code_lengths) != len(symbols):
            raise JpegError(
                f"code counts {sum(code_lengths)} != symbol count {len(symbols)}"
            )
        if not symbols:
            raise JpegError("empty Huffman table")
        self.code_lengths = code_lengths
        self.symbols = symbols

        self.encode_map = {}
        # lut maps the next 16 stream bits to (symbol << 5) | code_length,
        # -1 where no code matches.
        lut = [-1] * 65536
        code = 0
        idx = 0
        for length in range(1, 17):
            count = code_lengths[length - 1]
            if count and code + count > (1 << length):
                raise JpegError(f"code space overflow at length {length}")
            for _ in range(count):
                sym = symbols[idx]
                self.encode_map[sym] = (code, length)
                base = code << (16 - length)
                fill = 1 << (16 - length)
                packed = (sym << 5) | length
                lut[base : base + fill] = [packed] * fill
                code += 1
                idx += 1
            code <<= 1
        self.lut = lut
        self.max_symbol_bits = max(
            (l for l, c in zip(range(1, 17), code_lengths) if c), default=0
        )

    def decode_prefix(self, peek16: int):
        """Return (symbol, length) for the 16-bit window, or None."""
        packed = self.lut[peek16]
        if packed < 0:
            return None
        return packed >> 5, packed & 31

    def encode(self, symbol: int):
        """Return (code, length) for a symbol; KeyError if absent."""
        return self.encode_map[symbol]

    def __contains__(self, symbol):
        return symbol in self.encode_map

    def __repr__(self):
        return f"HuffmanTable({len(self.symbols)} symbols)"
