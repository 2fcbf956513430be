"""Baseline scan decoding and pixel reconstruction.

``decode_scan_standard`` has standard-decoder semantics: the first decode
failure aborts the whole scan.  The resilient path reuses the same MCU
decode core (see :mod:`bitsalvage.robust`) so the two pipelines cannot
drift apart on clean input.
"""

from __future__ import annotations

import numpy as np

from ..errors import (
    BITSTREAM_EXHAUSTED,
    COEFFICIENT_OVERFLOW,
    INVALID_CODEWORD,
    UNEXPECTED_MARKER,
    CorruptThumbnail,
    JpegError,
    ScanDecodeError,
)
from ..image import DISPLAY, WORKING, ImageBuffer
from .bitio import EV_RST, ScanBits, prepare_scan
from .dct import idct_blocks, round_half_away
from .parse import JpegHeader, ScanLayout, parse_headers, scan_layout
from .tables import ZIGZAG_TO_NATURAL

_ZN = ZIGZAG_TO_NATURAL


class McuDecodeFailure(Exception):
    """Internal signal: one MCU attempt failed (not an abort by itself)."""

    __slots__ = ("kind", "bit_address", "unit_index")

    def __init__(self, kind, bit_address, unit_index=0):
        self.kind = kind
        self.bit_address = bit_address
        self.unit_index = unit_index
        super().__init__(f"{kind} at bit {bit_address}")


def unit_tables(header: JpegHeader, layout: ScanLayout):
    """Per-MCU-unit (comp_index, dc_lut, ac_lut) tuples for the hot loop."""
    out = []
    for unit in layout.units:
        comp = header.components[unit.comp_index]
        dc = header.huffman_tables[("dc", comp.dc_table_id)].lut
        ac = header.huffman_tables[("ac", comp.ac_table_id)].lut
        out.append((unit.comp_index, dc, ac))
    return out


def decode_mcu(scan: ScanBits, pos, barrier, barrier_kind, tables, preds):
    """Decode one interleaved MCU starting at bit ``pos``.

    Returns (blocks, new_pos, new_preds); blocks are 64-length lists in
    natural order with the DC already DPCM-accumulated.  Raises
    :class:`McuDecodeFailure` without touching ``preds``.
    """
    data = scan.padded
    preds = list(preds)
    blocks = []
    for unit_idx, (comp_idx, dc_lut, ac_lut) in enumerate(tables):
        block = [0] * 64

        # DC coefficient
        bytepos = pos >> 3
        window = int.from_bytes(data[bytepos : bytepos + 6], "big")
        shift = pos & 7
        packed = dc_lut[(window >> (32 - shift)) & 0xFFFF]
        if packed < 0:
            if barrier - pos >= 16:
                raise McuDecodeFailure(INVALID_CODEWORD, pos, unit_idx)
            raise McuDecodeFailure(barrier_kind, pos, unit_idx)
        length = packed & 31
        if pos + length > barrier:
            raise McuDecodeFailure(barrier_kind, pos, unit_idx)
        size = packed >> 5
        pos += length
        if size:
            if size > 11:
                # baseline DC categories stop at 11
                raise McuDecodeFailure(INVALID_CODEWORD, pos, unit_idx)
            if pos + size > barrier:
                raise McuDecodeFailure(barrier_kind, pos, unit_idx)
            value = (window >> (48 - shift - length - size)) & ((1 << size) - 1)
            pos += size
            if value < (1 << (size - 1)):
                value -= (1 << size) - 1
            preds[comp_idx] += value
        block[0] = preds[comp_idx]

        # AC coefficients
        k = 1
        while k < 64:
            bytepos = pos >> 3
            window = int.from_bytes(data[bytepos : bytepos + 6], "big")
            shift = pos & 7
            packed = ac_lut[(window >> (32 - shift)) & 0xFFFF]
            if packed < 0:
                if barrier - pos >= 16:
                    raise McuDecodeFailure(INVALID_CODEWORD, pos, unit_idx)
                raise McuDecodeFailure(barrier_kind, pos, unit_idx)
            length = packed & 31
            if pos + length > barrier:
                raise McuDecodeFailure(barrier_kind, pos, unit_idx)
            sym = packed >> 5
            run = sym >> 4
            size = sym & 15
            if size == 0:
                pos += length
                if run == 0:  # EOB
                    break
                if run == 15:  # ZRL
                    k += 16
                    if k > 64:
                        raise McuDecodeFailure(COEFFICIENT_OVERFLOW, pos, unit_idx)
                    continue
                # run 1..14 with size 0 only exists in progressive streams
                raise McuDecodeFailure(INVALID_CODEWORD, pos, unit_idx)
            k += run
            if k > 63:
                raise McuDecodeFailure(COEFFICIENT_OVERFLOW, pos, unit_idx)
            if pos + length + size > barrier:
                raise McuDecodeFailure(barrier_kind, pos, unit_idx)
            value = (window >> (48 - shift - length - size)) & ((1 << size) - 1)
            pos += length + size
            if value < (1 << (size - 1)):
                value -= (1 << size) - 1
            block[_ZN[k]] = value
            k += 1

        blocks.append(block)
    return blocks, pos, preds


def decode_scan_standard(header: JpegHeader, scan_bytes: bytes):
    """Decode a full scan, aborting on the first failure.

    Returns a list of int32 coefficient grids, one per component, shaped
    (blocks_y, blocks_x, 64) in natural coefficient order.
    """
    scan = prepare_scan(scan_bytes)
    layout = scan_layout(header)
    tables = unit_tables(header, layout)
    grids = [np.zeros(shape + (64,), dtype=np.int32) for shape in layout.grid_shapes]
    preds = [0] * len(header.components)
    units = layout.units

    events = scan.events
    n_events = len(events)
    event_idx = 0
    pos = 0
    restart = header.restart_interval
    expected_rst = 0

    for mcu in range(layout.mcu_count):
        if restart and mcu and mcu % restart == 0:
            pos = (pos + 7) & ~7
            ev = events[event_idx] if event_idx < n_events else None
            if ev is None or ev.bit_pos != pos or ev.kind != EV_RST or ev.code != expected_rst:
                raise ScanDecodeError(
                    UNEXPECTED_MARKER, pos, f"restart marker RST{expected_rst} missing"
                )
            event_idx += 1
            expected_rst = (expected_rst + 1) & 7
            preds = [0] * len(preds)
        if event_idx < n_events:
            barrier, barrier_kind = events[event_idx].bit_pos, UNEXPECTED_MARKER
        else:
            barrier, barrier_kind = scan.nbits, BITSTREAM_EXHAUSTED
        try:
            blocks, pos, preds = decode_mcu(scan, pos, barrier, barrier_kind, tables, preds)
        except McuDecodeFailure as fail:
            raise ScanDecodeError(fail.kind, fail.bit_address, f"MCU {mcu}") from None
        my, mx = divmod(mcu, layout.mcus_x)
        for unit, block in zip(units, blocks):
            comp = header.components[unit.comp_index]
            by = my * comp.v_sampling + unit.block_dy
            bx = mx * comp.h_sampling + unit.block_dx
            grids[unit.comp_index][by, bx] = block
    return grids


def reconstruct_pixels(grids, header: JpegHeader, domain: str = DISPLAY) -> ImageBuffer:
    """Dequantize, inverse-transform and color-convert coefficient grids.

    ``domain="working"`` keeps signed int32 samples (no [0, 255] clamp) so
    downstream restoration sees decode-induced DC excursions unmodified.
    """
    layout = scan_layout(header)
    planes = []
    for ci, comp in enumerate(header.components):
        grid = grids[ci]
        by, bx = grid.shape[:2]
        q = header.quant_natural(comp.quant_table_id).astype(np.float64)
        coeffs = grid.reshape(-1, 64).astype(np.float64) * q
        samples = idct_blocks(coeffs.reshape(-1, 8, 8)) + 128.0
        plane = (
            samples.reshape(by, bx, 8, 8)
            .transpose(0, 2, 1, 3)
            .reshape(by * 8, bx * 8)
        )
        # replicate subsampled chroma up to full resolution
        ry = layout.v_max // comp.v_sampling
        rx = layout.h_max // comp.h_sampling
        if ry > 1:
            plane = np.repeat(plane, ry, axis=0)
        if rx > 1:
            plane = np.repeat(plane, rx, axis=1)
        planes.append(plane[: header.height, : header.width])

    if len(planes) == 1:
        out = round_half_away(planes[0])[:, :, None]
    else:
        y, cb, cr = planes
        r = y + 1.402 * (cr - 128.0)
        g = y - 0.344136 * (cb - 128.0) - 0.714136 * (cr - 128.0)
        b = y + 1.772 * (cb - 128.0)
        out = round_half_away(np.stack([r, g, b], axis=2))

    if domain == WORKING:
        return ImageBuffer(out.astype(np.int32), WORKING)
    return ImageBuffer(np.clip(out, 0, 255).astype(np.uint8), DISPLAY)


def decode_jpeg(data: bytes, domain: str = DISPLAY) -> ImageBuffer:
    """Standard-decoder convenience: parse, decode, reconstruct."""
    header = parse_headers(data)
    grids = decode_scan_standard(header, data[header.scan_offset :])
    return reconstruct_pixels(grids, header, domain)


def extract_thumbnail(header: JpegHeader):
    """Decode the header-embedded thumbnail, or None if absent."""
    if header.thumbnail_bytes is None:
        return None
    if header.thumbnail_format == "jpeg":
        try:
            return decode_jpeg(header.thumbnail_bytes)
        except (JpegError, ValueError) as exc:
            raise CorruptThumbnail(f"embedded thumbnail failed to decode: {exc}")
    # raw RGB payload
    tw, th = header.thumbnail_dims
    expected = tw * th * 3
    if len(header.thumbnail_bytes) < expected:
        raise CorruptThumbnail("raw thumbnail shorter than declared dimensions")
    arr = np.frombuffer(header.thumbnail_bytes, dtype=np.uint8, count=expected)
    return ImageBuffer(arr.reshape(th, tw, 3).copy(), DISPLAY)
