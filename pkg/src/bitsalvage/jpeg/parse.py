"""JFIF marker-segment parsing into a decode-ready header."""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from ..errors import MissingSOI, TruncatedSegment, UnsupportedMode
from .huffman import HuffmanTable
from .tables import ZIGZAG_TO_NATURAL

# Marker codes
SOI = 0xD8
EOI = 0xD9
SOS = 0xDA
DQT = 0xDB
DRI = 0xDD
DHT = 0xC4
COM = 0xFE
TEM = 0x01
SOF0 = 0xC0
APP0 = 0xE0

_SOF_CODES = set(range(0xC0, 0xD0)) - {0xC4, 0xC8, 0xCC}
_PROGRESSIVE_SOFS = {0xC2, 0xC6, 0xCA, 0xCE}
_ARITHMETIC_SOFS = {0xC9, 0xCA, 0xCB, 0xCD, 0xCE, 0xCF}

THUMB_NONE = None
THUMB_JPEG = "jpeg"
THUMB_RGB = "rgb"


@dataclasses.dataclass
class ComponentInfo:
    id: int
    h_sampling: int
    v_sampling: int
    quant_table_id: int
    dc_table_id: int | None = None
    ac_table_id: int | None = None


@dataclasses.dataclass
class JpegHeader:
    width: int
    height: int
    components: list
    quant_tables: dict            # id -> 64 coefficients, zig-zag order
    huffman_tables: dict          # ("dc"|"ac", id) -> HuffmanTable
    restart_interval: int | None
    thumbnail_bytes: bytes | None
    thumbnail_format: str | None  # "jpeg" | "rgb"
    thumbnail_dims: tuple | None  # (w, h) for raw RGB payloads
    scan_offset: int              # byte offset of entropy-coded data

    def quant_natural(self, table_id: int) -> np.ndarray:
        zz = self.quant_tables[table_id]
        nat = np.zeros(64, dtype=np.int32)
        nat[list(ZIGZAG_TO_NATURAL)] = zz
        return nat


@dataclasses.dataclass
class McuUnit:
    """One 8x8 block slot inside an MCU."""
    comp_index: int
    block_dy: int
    block_dx: int


@dataclasses.dataclass
class ScanLayout:
    mcus_x: int
    mcus_y: int
    units: list          # McuUnit per block in MCU order
    grid_shapes: list    # per component: (blocks_y, blocks_x) padded grid
    h_max: int
    v_max: int

    @property
    def mcu_count(self):
        return self.mcus_x * self.mcus_y


def _u16(data, pos):
    return (data[pos] << 8) | data[pos + 1]


def parse_headers(data: bytes) -> JpegHeader:
    """Walk marker segments up to (and including) SOS.

    Only baseline sequential Huffman streams pass; progressive and
    arithmetic frames raise :class:`UnsupportedMode`.
    """
    if len(data) < 2 or data[0] != 0xFF or data[1] != SOI:
        raise MissingSOI("stream does not begin with an SOI marker")

    quant_tables = {}
    huffman_tables = {}
    components = []
    width = height = None
    restart_interval = None
    thumb_bytes = None
    thumb_format = None
    thumb_dims = None

    pos = 2
    n = len(data)
    while True:
        if pos + 1 >= n:
            raise TruncatedSegment("ran out of data before SOS")
        if data[pos] != 0xFF:
            raise TruncatedSegment(f"expected marker at byte {pos}")
        pos += 1
        while pos < n and data[pos] == 0xFF:  # fill bytes
            pos += 1
        if pos >= n:
            raise TruncatedSegment("dangling 0xFF at end of header")
        marker = data[pos]
        pos += 1

        if marker in (TEM,) or 0xD0 <= marker <= 0xD7:
            continue
        if marker == EOI:
            raise TruncatedSegment("EOI before any scan data")

        if pos + 2 > n:
            raise TruncatedSegment("marker segment missing length")
        seg_len = _u16(data, pos)
        if seg_len < 2 or pos + seg_len > n:
            raise TruncatedSegment(f"segment 0x{marker:02X} overruns stream")
        seg = data[pos + 2 : pos + seg_len]
        pos += seg_len

        if marker == APP0:
            t = _parse_app0(seg)
            if t is not None:
                thumb_format, thumb_bytes, thumb_dims = t
        elif marker == DQT:
            _parse_dqt(seg, quant_tables)
        elif marker == DHT:
            _parse_dht(seg, huffman_tables)
        elif marker == DRI:
            if len(seg) < 2:
                raise TruncatedSegment("DRI too short")
            restart_interval = _u16(seg, 0) or None
        elif marker in _SOF_CODES:
            if marker in _PROGRESSIVE_SOFS:
                raise UnsupportedMode("progressive JPEG is not supported")
            if marker in _ARITHMETIC_SOFS:
                raise UnsupportedMode("arithmetic coding is not supported")
            if marker != SOF0:
                raise UnsupportedMode(f"SOF 0x{marker:02X} is outside baseline")
            width, height, components = _parse_sof0(seg)
        elif marker == SOS:
            _parse_sos(seg, components)
            scan_offset = pos
            break
        # APPn / COM / anything else with a length: skipped

    if width is None:
        raise TruncatedSegment("SOS before SOF0")
    for comp in components:
        if comp.quant_table_id not in quant_tables:
            raise TruncatedSegment(
                f"component {comp.id} references missing quant table "
                f"{comp.quant_table_id}"
            )
        for cls, tid in (("dc", comp.dc_table_id), ("ac", comp.ac_table_id)):
            if (cls, tid) not in huffman_tables:
                raise TruncatedSegment(
                    f"component {comp.id} references missing {cls} table {tid}"
                )

    return JpegHeader(
        width=width,
        height=height,
        components=components,
        quant_tables=quant_tables,
        huffman_tables=huffman_tables,
        restart_interval=restart_interval,
        thumbnail_bytes=thumb_bytes,
        thumbnail_format=thumb_format,
        thumbnail_dims=thumb_dims,
        scan_offset=scan_offset,
    )


def _parse_app0(seg):
    if seg[:5] == b"JFIF\x00":
        if len(seg) < 14:
            raise TruncatedSegment("JFIF APP0 too short")
        tw, th = seg[12], seg[13]
        if tw and th:
            rgb = seg[14 : 14 + tw * th * 3]
            if len(rgb) < tw * th * 3:
                raise TruncatedSegment("JFIF thumbnail truncated")
            return THUMB_RGB, bytes(rgb), (tw, th)
        return None
    if seg[:5] == b"JFXX\x00":
        if len(seg) < 6:
            raise TruncatedSegment("JFXX APP0 too short")
        ext = seg[5]
        if ext == 0x10:  # JPEG-coded thumbnail
            return THUMB_JPEG, bytes(seg[6:]), None
        if ext == 0x13:  # RGB thumbnail: 1-byte dims then raw triples
            tw, th = seg[6], seg[7]
            return THUMB_RGB, bytes(seg[8 : 8 + tw * th * 3]), (tw, th)
        return None
    return None


def _parse_dqt(seg, quant_tables):
    pos = 0
    while pos < len(seg):
        pq = seg[pos] >> 4
        tid = seg[pos] & 0x0F
        if pq != 0:
            raise UnsupportedMode("16-bit quantization tables are not supported")
        if tid > 3:
            raise TruncatedSegment(f"quant table id {tid} out of range")
        if pos + 65 > len(seg):
            raise TruncatedSegment("DQT table truncated")
        quant_tables[tid] = np.frombuffer(
            seg, dtype=np.uint8, count=64, offset=pos + 1
        ).astype(np.int32)
        pos += 65


def _parse_dht(seg, huffman_tables):
    pos = 0
    while pos < len(seg):
        if pos + 17 > len(seg):
            raise TruncatedSegment("DHT header truncated")
        cls = seg[pos] >> 4
        tid = seg[pos] & 0x0F
        if cls > 1 or tid > 3:
            raise TruncatedSegment(f"bad DHT class/id {cls}/{tid}")
        counts = tuple(seg[pos + 1 : pos + 17])
        total = sum(counts)
        if pos + 17 + total > len(seg):
            raise TruncatedSegment("DHT symbols truncated")
        symbols = tuple(seg[pos + 17 : pos + 17 + total])
        huffman_tables[("dc" if cls == 0 else "ac", tid)] = HuffmanTable(
            counts, symbols
        )
        pos += 17 + total


def _parse_sof0(seg):
    if len(seg) < 6:
        raise TruncatedSegment("SOF0 too short")
    precision = seg[0]
    if precision != 8:
        raise UnsupportedMode(f"{precision}-bit samples are not supported")
    height = _u16(seg, 1)
    width = _u16(seg, 3)
    ncomp = seg[5]
    if width < 1 or height < 1:
        raise TruncatedSegment(f"bad frame dimensions {width}x{height}")
    if ncomp not in (1, 3):
        raise UnsupportedMode(f"{ncomp}-component frames are not supported")
    if len(seg) < 6 + 3 * ncomp:
        raise TruncatedSegment("SOF0 component list truncated")
    comps = []
    for i in range(ncomp):
        cid, samp, qid = seg[6 + 3 * i : 9 + 3 * i]
        h, v = samp >> 4, samp & 0x0F
        if h not in (1, 2) or v not in (1, 2):
            raise UnsupportedMode(f"sampling factors {h}x{v} are not supported")
        comps.append(ComponentInfo(cid, h, v, qid))
    factors = [(c.h_sampling, c.v_sampling) for c in comps]
    if len(comps) == 3 and factors not in (
        [(1, 1), (1, 1), (1, 1)],
        [(2, 2), (1, 1), (1, 1)],
    ):
        raise UnsupportedMode(f"sampling layout {factors} is not supported")
    return width, height, comps


def _parse_sos(seg, components):
    if not components:
        raise TruncatedSegment("SOS before SOF0")
    ncomp = seg[0]
    if ncomp != len(components):
        raise UnsupportedMode("non-interleaved multi-scan files are not supported")
    if len(seg) < 1 + 2 * ncomp + 3:
        raise TruncatedSegment("SOS too short")
    by_id = {c.id: c for c in components}
    for i in range(ncomp):
        cid = seg[1 + 2 * i]
        tbl = seg[2 + 2 * i]
        if cid not in by_id:
            raise TruncatedSegment(f"SOS references unknown component {cid}")
        by_id[cid].dc_table_id = tbl >> 4
        by_id[cid].ac_table_id = tbl & 0x0F
    ss, se, a = seg[1 + 2 * ncomp], seg[2 + 2 * ncomp], seg[3 + 2 * ncomp]
    if (ss, se, a) != (0, 63, 0):
        raise UnsupportedMode("spectral selection / successive approximation")


def scan_layout(header: JpegHeader) -> ScanLayout:
    """MCU geometry and in-MCU block order for an interleaved baseline scan."""
    comps = header.components
    h_max = max(c.h_sampling for c in comps)
    v_max = max(c.v_sampling for c in comps)
    mcus_x = math.ceil(header.width / (8 * h_max))
    mcus_y = math.ceil(header.height / (8 * v_max))
    units = []
    grid_shapes = []
    for ci, c in enumerate(comps):
        grid_shapes.append((mcus_y * c.v_sampling, mcus_x * c.h_sampling))
        for dy in range(c.v_sampling):
            for dx in range(c.h_sampling):
                units.append(McuUnit(ci, dy, dx))
    return ScanLayout(mcus_x, mcus_y, units, grid_shapes, h_max, v_max)
