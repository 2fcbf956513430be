"""Baseline JFIF encoder used to synthesize test corpora.

Output sticks to the interchange defaults (standard quantization bases,
standard Huffman tables, 4:2:0 or 4:4:4 sampling) so any conformant
decoder reads the files and their code statistics look like camera output.
"""

from __future__ import annotations

import numpy as np

from ..image import ImageBuffer
from .bitio import BitWriter
from .dct import fdct_blocks, round_half_away
from .huffman import HuffmanTable
from .tables import (
    AC_CHROMA_BITS,
    AC_CHROMA_VALS,
    AC_LUMA_BITS,
    AC_LUMA_VALS,
    BASE_QUANT_CHROMA,
    BASE_QUANT_LUMA,
    DC_CHROMA_BITS,
    DC_CHROMA_VALS,
    DC_LUMA_BITS,
    DC_LUMA_VALS,
    ZIGZAG_TO_NATURAL,
    scaled_quant_table,
)

_DC_LUMA = HuffmanTable(DC_LUMA_BITS, DC_LUMA_VALS)
_DC_CHROMA = HuffmanTable(DC_CHROMA_BITS, DC_CHROMA_VALS)
_AC_LUMA = HuffmanTable(AC_LUMA_BITS, AC_LUMA_VALS)
_AC_CHROMA = HuffmanTable(AC_CHROMA_BITS, AC_CHROMA_VALS)


def _segment(marker: int, payload: bytes) -> bytes:
    return bytes([0xFF, marker]) + (len(payload) + 2).to_bytes(2, "big") + payload


def rgb_to_ycbcr(samples: np.ndarray):
    s = samples.astype(np.float64)
    r, g, b = s[:, :, 0], s[:, :, 1], s[:, :, 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0
    cr = 0.5 * r - 0.418688 * g - 0.081312 * b + 128.0
    return y, cb, cr


def _pad_plane(plane: np.ndarray, multiple: int) -> np.ndarray:
    h, w = plane.shape
    ph = (-h) % multiple
    pw = (-w) % multiple
    if ph or pw:
        plane = np.pad(plane, ((0, ph), (0, pw)), mode="edge")
    return plane


def _plane_blocks(plane: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    return plane.reshape(h // 8, 8, w // 8, 8).transpose(0, 2, 1, 3)


def _quantize(plane: np.ndarray, qtable: np.ndarray) -> np.ndarray:
    blocks = _plane_blocks(plane) - 128.0
    coeffs = fdct_blocks(blocks)
    q = qtable.reshape(8, 8).astype(np.float64)
    return round_half_away(coeffs / q).astype(np.int32)


def _size_of(value: int) -> int:
    return int(value).bit_length() if value else 0


def _encode_block(writer, zz, pred, dc_table, ac_table):
    dc = int(zz[0])
    diff = dc - pred
    size = _size_of(abs(diff))
    code, length = dc_table.encode(size)
    writer.write(code, length)
    if size:
        v = diff if diff > 0 else diff + (1 << size) - 1
        writer.write(v, size)

    run = 0
    for k in range(1, 64):
        v = int(zz[k])
        if v == 0:
            run += 1
            continue
        while run > 15:
            code, length = ac_table.encode(0xF0)  # ZRL
            writer.write(code, length)
            run -= 16
        size = _size_of(abs(v))
        code, length = ac_table.encode((run << 4) | size)
        writer.write(code, length)
        if v < 0:
            v += (1 << size) - 1
        writer.write(v, size)
        run = 0
    if run:
        code, length = ac_table.encode(0x00)  # EOB
        writer.write(code, length)
    return dc


def encode_baseline(
    image: ImageBuffer,
    quality: int = 90,
    thumbnail: ImageBuffer | None = None,
    subsampling: str = "4:2:0",
    restart_interval: int | None = None,
) -> bytes:
    """Encode a display-domain raster as a baseline sequential JFIF stream.

    ``thumbnail`` is embedded in a JFXX APP0 extension segment as a nested
    JPEG payload, separate from the scan data.
    """
    disp = image.to_display()
    if subsampling not in ("4:2:0", "4:4:4"):
        raise ValueError(f"unsupported subsampling {subsampling!r}")
    gray = disp.channels == 1
    if gray:
        subsampling = "4:4:4"
    h, w = disp.height, disp.width

    q_luma = scaled_quant_table(BASE_QUANT_LUMA, quality)
    q_chroma = scaled_quant_table(BASE_QUANT_CHROMA, quality)

    if gray:
        y = disp.samples[:, :, 0].astype(np.float64)
        planes = [y]
    else:
        planes = list(rgb_to_ycbcr(disp.samples))

    if subsampling == "4:2:0" and not gray:
        mcu = 16
        y = _pad_plane(planes[0], mcu)
        chroma = []
        for p in planes[1:]:
            p = _pad_plane(p, mcu)
            ph, pw = p.shape
            p = p.reshape(ph // 2, 2, pw // 2, 2).mean(axis=(1, 3))
            chroma.append(p)
        planes = [y] + chroma
        samplings = [(2, 2), (1, 1), (1, 1)]
    else:
        mcu = 8
        planes = [_pad_plane(p, mcu) for p in planes]
        samplings = [(1, 1)] * len(planes)

    qtables = [q_luma] + [q_chroma] * (len(planes) - 1)
    coeff_grids = [_quantize(p, q) for p, q in zip(planes, qtables)]
    zz_index = list(ZIGZAG_TO_NATURAL)
    zz_grids = [
        g.reshape(g.shape[0], g.shape[1], 64)[:, :, zz_index] for g in coeff_grids
    ]

    mcus_x = planes[0].shape[1] // (8 * samplings[0][0])
    mcus_y = planes[0].shape[0] // (8 * samplings[0][1])

    dc_tables = [_DC_LUMA] + [_DC_CHROMA] * (len(planes) - 1)
    ac_tables = [_AC_LUMA] + [_AC_CHROMA] * (len(planes) - 1)

    writer = BitWriter()
    preds = [0] * len(planes)
    rst_index = 0
    mcu_index = 0
    for my in range(mcus_y):
        for mx in range(mcus_x):
            if restart_interval and mcu_index and mcu_index % restart_interval == 0:
                writer.write_marker(0xD0 + rst_index)
                rst_index = (rst_index + 1) & 7
                preds = [0] * len(planes)
            for ci, (sh, sv) in enumerate(samplings):
                for dy in range(sv):
                    for dx in range(sh):
                        zz = zz_grids[ci][my * sv + dy, mx * sh + dx]
                        preds[ci] = _encode_block(
                            writer, zz, preds[ci], dc_tables[ci], ac_tables[ci]
                        )
            mcu_index += 1
    scan = writer.getvalue()

    out = bytearray(b"\xff\xd8")  # SOI
    out += _segment(0xE0, b"JFIF\x00\x01\x01\x00" + b"\x00\x01\x00\x01" + b"\x00\x00")
    if thumbnail is not None:
        thumb_jpeg = encode_baseline(thumbnail, quality=max(quality, 75))
        if len(thumb_jpeg) > 65527:
            raise ValueError("thumbnail too large for an APP0 segment")
        out += _segment(0xE0, b"JFXX\x00\x10" + thumb_jpeg)

    dqt = bytearray()
    dqt += bytes([0x00]) + bytes(int(q_luma[i]) for i in ZIGZAG_TO_NATURAL)
    if not gray:
        dqt += bytes([0x01]) + bytes(int(q_chroma[i]) for i in ZIGZAG_TO_NATURAL)
    out += _segment(0xDB, bytes(dqt))

    ncomp = len(planes)
    sof = bytearray([8]) + h.to_bytes(2, "big") + w.to_bytes(2, "big") + bytes([ncomp])
    for ci, (sh, sv) in enumerate(samplings):
        sof += bytes([ci + 1, (sh << 4) | sv, 0 if ci == 0 else 1])
    out += _segment(0xC0, bytes(sof))

    dht = bytearray()
    dht += bytes([0x00]) + bytes(DC_LUMA_BITS) + bytes(DC_LUMA_VALS)
    dht += bytes([0x10]) + bytes(AC_LUMA_BITS) + bytes(AC_LUMA_VALS)
    if not gray:
        dht += bytes([0x01]) + bytes(DC_CHROMA_BITS) + bytes(DC_CHROMA_VALS)
        dht += bytes([0x11]) + bytes(AC_CHROMA_BITS) + bytes(AC_CHROMA_VALS)
    out += _segment(0xC4, bytes(dht))

    if restart_interval:
        out += _segment(0xDD, int(restart_interval).to_bytes(2, "big"))

    sos = bytearray([ncomp])
    for ci in range(ncomp):
        tid = 0 if ci == 0 else 1
        sos += bytes([ci + 1, (tid << 4) | tid])
    sos += bytes([0, 63, 0])
    out += _segment(0xDA, bytes(sos))

    out += scan
    out += b"\xff\xd9"  # EOI
    return bytes(out)
