"""Sector-encrypted corruption channel.

Models what unreliable storage does to a full-disk-encrypted JPEG: the
file is encrypted sector by sector (AES-128-CBC with an ESSIV derived
from the key and sector number), random bits flip on the *ciphertext*,
and decryption turns every flipped bit into two damaged plaintext blocks
confined to its sector — one block fully re-randomized, the next carrying
the same single-bit flip.

Flip sampling is deterministic and platform-portable: a Philox counter
stream keyed by the seed yields one uniform draw per ciphertext bit
(consumed in fixed chunks of 2**20), flipped where the draw falls below
the bit error rate.  Protected byte ranges are exempted after sampling,
so protection never changes which other bits flip.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .errors import CipherError

_SAMPLE_CHUNK_BITS = 1 << 20


@dataclasses.dataclass(frozen=True)
class CorruptionSpec:
    """Channel parameters.  The secret key is assumed known."""

    ber: float
    seed: int
    key: bytes = b"\x00" * 16
    sector_size: int = 512
    cipher_block_size: int = 16
    protected_byte_ranges: tuple = ()   # (offset, length) pairs exempt from flips

    def __post_init__(self):
        if not 0.0 <= self.ber <= 1.0:
            raise ValueError(f"ber must be within [0, 1], got {self.ber}")
        if self.sector_size % self.cipher_block_size:
            raise ValueError("sector_size must be a multiple of cipher_block_size")
        if len(self.key) not in (16, 24, 32):
            raise CipherError(f"AES key must be 16/24/32 bytes, got {len(self.key)}")
        if self.cipher_block_size != 16:
            raise CipherError("AES block size is 16 bytes")


@dataclasses.dataclass
class FlipLog:
    """Exact record of the bit positions flipped in one corruption run."""

    ber: float
    seed: int
    sector_size: int
    positions: list            # absolute ciphertext bit indices, ascending
    sector_indices: list       # distinct sectors containing flips, ascending

    def __len__(self):
        return len(self.positions)

    def to_json(self) -> str:
        return json.dumps(
            {
                "ber": self.ber,
                "seed": self.seed,
                "sector_size": self.sector_size,
                "flip_count": len(self.positions),
                "bit_positions": self.positions,
                "sector_indices": self.sector_indices,
            },
            indent=2,
        )


def essiv_key(key: bytes) -> bytes:
    """ESSIV salt: SHA-256 of the volume key, truncated to the key length."""
    return hashlib.sha256(key).digest()[: len(key)]


def essiv_iv(key: bytes, sector_number: int) -> bytes:
    """IV for a sector: AES-ECB of the little-endian sector number."""
    if sector_number < 0:
        raise ValueError("sector_number must be non-negative")
    block = sector_number.to_bytes(16, "little")
    enc = Cipher(algorithms.AES(essiv_key(key)), modes.ECB()).encryptor()
    return enc.update(block) + enc.finalize()


def encrypt_sector(key: bytes, sector_number: int, plaintext: bytes,
                   sector_size: int = 512) -> bytes:
    if len(plaintext) != sector_size:
        raise CipherError(f"sector must be {sector_size} bytes, got {len(plaintext)}")
    iv = essiv_iv(key, sector_number)
    enc = Cipher(algorithms.AES(key), modes.CBC(iv)).encryptor()
    return enc.update(plaintext) + enc.finalize()


def decrypt_sector(key: bytes, sector_number: int, ciphertext: bytes,
                   sector_size: int = 512) -> bytes:
    if len(ciphertext) != sector_size:
        raise CipherError(f"sector must be {sector_size} bytes, got {len(ciphertext)}")
    iv = essiv_iv(key, sector_number)
    dec = Cipher(algorithms.AES(key), modes.CBC(iv)).decryptor()
    return dec.update(ciphertext) + dec.finalize()


def _encrypt_volume(key: bytes, data: bytes, sector_size: int) -> bytes:
    out = bytearray()
    for s in range(len(data) // sector_size):
        out += encrypt_sector(
            key, s, data[s * sector_size : (s + 1) * sector_size], sector_size
        )
    return bytes(out)


def _decrypt_volume(key: bytes, data: bytes, sector_size: int) -> bytes:
    out = bytearray()
    for s in range(len(data) // sector_size):
        out += decrypt_sector(
            key, s, data[s * sector_size : (s + 1) * sector_size], sector_size
        )
    return bytes(out)


def _protected_bit_mask(nbits: int, ranges) -> np.ndarray | None:
    if not ranges:
        return None
    mask = np.zeros(nbits, dtype=bool)
    for off, length in ranges:
        lo = max(0, off * 8)
        hi = min(nbits, (off + length) * 8)
        if lo < hi:
            mask[lo:hi] = True
    return mask


def inject_bit_errors(data: bytes, spec: CorruptionSpec):
    """Flip each unprotected bit independently with probability ``spec.ber``.

    Bit index convention: bit 0 is the most significant bit of byte 0.
    Returns (corrupted bytes, FlipLog).
    """
    nbits = len(data) * 8
    rng = np.random.Generator(np.random.Philox(key=spec.seed))
    flips = []
    if spec.ber > 0.0:
        for start in range(0, nbits, _SAMPLE_CHUNK_BITS):
            count = min(_SAMPLE_CHUNK_BITS, nbits - start)
            draws = rng.random(count)
            hits = np.nonzero(draws < spec.ber)[0]
            if len(hits):
                flips.append(hits + start)
    positions = (
        np.concatenate(flips) if flips else np.empty(0, dtype=np.int64)
    ).astype(np.int64)

    mask = _protected_bit_mask(nbits, spec.protected_byte_ranges)
    if mask is not None and len(positions):
        positions = positions[~mask[positions]]

    out = bytearray(data)
    for pos in positions:
        out[pos >> 3] ^= 0x80 >> (pos & 7)

    sectors = sorted({int(p) // (spec.sector_size * 8) for p in positions})
    log = FlipLog(
        ber=spec.ber,
        seed=spec.seed,
        sector_size=spec.sector_size,
        positions=[int(p) for p in positions],
        sector_indices=sectors,
    )
    return bytes(out), log


def default_protected_ranges(jpeg_bytes: bytes, cipher_block_size: int = 16):
    """Protect every byte before the entropy-coded scan data.

    The range is rounded up to a cipher-block boundary: a flip inside the
    block straddling the header/scan boundary would garble header bytes.
    """
    from .jpeg.parse import parse_headers

    header = parse_headers(jpeg_bytes)
    end = -(-header.scan_offset // cipher_block_size) * cipher_block_size
    return ((0, end),)


def corrupt_jpeg(jpeg_bytes: bytes, spec: CorruptionSpec):
    """Run a JPEG file through the full channel: encrypt, flip, decrypt.

    If ``spec.protected_byte_ranges`` is empty, the header (all bytes
    before the scan data, thumbnail included) is protected by default.
    Returns (corrupted file bytes, FlipLog).
    """
    ranges = spec.protected_byte_ranges
    if not ranges:
        ranges = default_protected_ranges(jpeg_bytes, spec.cipher_block_size)
        spec = dataclasses.replace(spec, protected_byte_ranges=tuple(ranges))

    true_len = len(jpeg_bytes)
    pad = (-true_len) % spec.sector_size
    padded = jpeg_bytes + b"\x00" * pad

    ciphertext = _encrypt_volume(spec.key, padded, spec.sector_size)
    corrupted, log = inject_bit_errors(ciphertext, spec)
    plaintext = _decrypt_volume(spec.key, corrupted, spec.sector_size)
    return plaintext[:true_len], log
