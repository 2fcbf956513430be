"""Baseline sequential-DCT JPEG parsing, decoding, and encoding."""

from .bitio import ScanBits, prepare_scan, stuff_bytes, unstuff_bytes
from .decode import (
    decode_jpeg,
    decode_mcu,
    decode_scan_standard,
    extract_thumbnail,
    reconstruct_pixels,
    unit_tables,
)
from .encode import encode_baseline
from .huffman import HuffmanTable
from .parse import JpegHeader, ScanLayout, parse_headers, scan_layout

__all__ = [
    "HuffmanTable",
    "JpegHeader",
    "ScanBits",
    "ScanLayout",
    "decode_jpeg",
    "decode_mcu",
    "decode_scan_standard",
    "encode_baseline",
    "extract_thumbnail",
    "parse_headers",
    "prepare_scan",
    "reconstruct_pixels",
    "scan_layout",
    "stuff_bytes",
    "unit_tables",
    "unstuff_bytes",
]
