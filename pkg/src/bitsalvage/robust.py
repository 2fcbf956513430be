"""Error-resilient scan decoding.

Variable-length JPEG streams re-synchronize on their own after bit errors
(EOB codes dominate, so almost any alignment soon decodes *something*
consistent).  The standard decoder throws that property away by aborting;
this decoder exploits it: when an MCU fails to decode, its partial blocks
are discarded and decoding restarts one bit later, until the MCU decodes
cleanly or the stream runs out.  Every MCU slot is therefore filled, at
the price of DC offsets and block shifts that the restoration stages
remove afterwards.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np

from .errors import BITSTREAM_EXHAUSTED, UNEXPECTED_MARKER, NoSync
from .jpeg.bitio import EV_RST, ScanBits, prepare_scan
from .jpeg.decode import McuDecodeFailure, decode_mcu, unit_tables
from .jpeg.parse import JpegHeader, scan_layout


@dataclasses.dataclass(frozen=True)
class DecodeFailure:
    """One failed MCU decode attempt."""

    kind: str
    bit_address: int
    unit_index: int = 0

    def __str__(self):
        return f"{self.kind} at bit {self.bit_address} (unit {self.unit_index})"


@dataclasses.dataclass
class McuSyncRecord:
    mcu_index: int
    start_bit: int            # first attempted bit address
    end_bit: int | None       # address after the successful decode
    retry_count: int          # bits discarded before success
    failure_kinds: tuple = ()
    rst_resync: bool = False
    filled: bool = True


@dataclasses.dataclass
class SyncLog:
    """Per-MCU decode accounting for one resilient scan decode."""

    mcu_count: int
    entries: list = dataclasses.field(default_factory=list)
    mcus_decoded: int = 0
    mcus_unfilled: int = 0
    bits_discarded: int = 0
    sync_events: int = 0
    rst_resyncs: int = 0
    dc_overflow_blocks: int = 0

    def totals(self) -> dict:
        return {
            "mcu_count": self.mcu_count,
            "mcus_decoded": self.mcus_decoded,
            "mcus_unfilled": self.mcus_unfilled,
            "bits_discarded": self.bits_discarded,
            "sync_events": self.sync_events,
            "rst_resyncs": self.rst_resyncs,
            "dc_overflow_blocks": self.dc_overflow_blocks,
        }

    def to_json(self, include_mcus: bool = False) -> str:
        doc = {"totals": self.totals()}
        if include_mcus:
            doc["mcus"] = [dataclasses.asdict(e) for e in self.entries]
        else:
            doc["sync_mcus"] = [
                dataclasses.asdict(e)
                for e in self.entries
                if e.retry_count or e.rst_resync or not e.filled
            ]
        return json.dumps(doc, indent=2)


def robust_decode_scan(header: JpegHeader, scan_bytes: bytes):
    """Decode a scan with skip-and-retry error resilience.

    Returns (grids, SyncLog).  On clean input the grids are bit-identical
    to :func:`decode_scan_standard` and the log shows zero retries.
    """
    scan = prepare_scan(scan_bytes)
    layout = scan_layout(header)
    tables = unit_tables(header, layout)
    grids = [np.zeros(shape + (64,), dtype=np.int32) for shape in layout.grid_shapes]
    preds = [0] * len(header.components)
    units = layout.units
    log = SyncLog(mcu_count=layout.mcu_count)

    events = scan.events
    n_events = len(events)
    event_idx = 0
    nbits = scan.nbits
    pos = 0
    restart = header.restart_interval
    exhausted = False

    for mcu in range(layout.mcu_count):
        if exhausted or pos >= nbits:
            start = min(pos, nbits)
            log.entries.append(
                McuSyncRecord(mcu, start, None, 0, (), False, filled=False)
            )
            log.mcus_unfilled += 1
            exhausted = True
            continue

        # Clean-path restart handling: consume the expected RSTn exactly the
        # way the standard decoder does, so error-free decodes stay identical.
        if restart and mcu and mcu % restart == 0:
            aligned = (pos + 7) & ~7
            if (
                event_idx < n_events
                and events[event_idx].bit_pos == aligned
                and events[event_idx].kind == EV_RST
            ):
                pos = aligned
                event_idx += 1
                preds = [0] * len(preds)

        attempt = pos
        record = McuSyncRecord(mcu, attempt, None, 0)
        kinds = []
        rst_seen = False
        while True:
            if attempt >= nbits:
                record.filled = False
                record.failure_kinds = tuple(dict.fromkeys(kinds))
                record.rst_resync = rst_seen
                log.entries.append(record)
                log.mcus_unfilled += 1
                log.bits_discarded += record.retry_count
                if record.retry_count:
                    log.sync_events += 1
                exhausted = True
                break

            # Consume marker events the retry cursor has reached.  An RSTn
            # is a free synchronization point: predictors reset there.
            while event_idx < n_events and events[event_idx].bit_pos <= attempt:
                if events[event_idx].kind == EV_RST:
                    preds = [0] * len(preds)
                    rst_seen = True
                    log.rst_resyncs += 1
                event_idx += 1

            if event_idx < n_events:
                barrier, barrier_kind = events[event_idx].bit_pos, UNEXPECTED_MARKER
            else:
                barrier, barrier_kind = nbits, BITSTREAM_EXHAUSTED

            try:
                blocks, new_pos, new_preds = decode_mcu(
                    scan, attempt, barrier, barrier_kind, tables, preds
                )
            except McuDecodeFailure as fail:
                kinds.append(fail.kind)
                record.retry_count += 1
                attempt += 1
                continue

            my, mx = divmod(mcu, layout.mcus_x)
            for unit, block in zip(units, blocks):
                comp = header.components[unit.comp_index]
                by = my * comp.v_sampling + unit.block_dy
                bx = mx * comp.h_sampling + unit.block_dx
                grids[unit.comp_index][by, bx] = block
                if abs(block[0]) > 2047:
                    log.dc_overflow_blocks += 1
            preds = new_preds
            pos = new_pos
            record.end_bit = new_pos
            record.failure_kinds = tuple(dict.fromkeys(kinds))
            record.rst_resync = rst_seen
            log.entries.append(record)
            log.mcus_decoded += 1
            log.bits_discarded += record.retry_count
            if record.retry_count:
                log.sync_events += 1
            break

    return grids, log


def decode_mcu_attempt(scan: ScanBits, header: JpegHeader, bit_cursor: int,
                       dc_predictors):
    """Attempt to decode a single MCU at ``bit_cursor``.

    Returns (blocks, end_bit_address, new_predictors) on success, or a
    :class:`DecodeFailure` describing why the attempt failed.  The supplied
    predictors are never mutated.
    """
    layout = scan_layout(header)
    tables = unit_tables(header, layout)
    idx = np.searchsorted(np.asarray(scan.event_bits, dtype=np.int64), bit_cursor, "right")
    if idx < len(scan.events):
        barrier, kind = scan.events[int(idx)].bit_pos, UNEXPECTED_MARKER
    else:
        barrier, kind = scan.nbits, BITSTREAM_EXHAUSTED
    if bit_cursor >= scan.nbits:
        return DecodeFailure(BITSTREAM_EXHAUSTED, bit_cursor, 0)
    try:
        blocks, pos, preds = decode_mcu(
            scan, bit_cursor, barrier, kind, tables, list(dc_predictors)
        )
    except McuDecodeFailure as fail:
        return DecodeFailure(fail.kind, fail.bit_address, fail.unit_index)
    return blocks, pos, preds


def block_sequence(grids, header: JpegHeader) -> np.ndarray:
    """Flatten coefficient grids into decode order: one row per block."""
    layout = scan_layout(header)
    seq = []
    for mcu in range(layout.mcu_count):
        my, mx = divmod(mcu, layout.mcus_x)
        for unit in layout.units:
            comp = header.components[unit.comp_index]
            by = my * comp.v_sampling + unit.block_dy
            bx = mx * comp.h_sampling + unit.block_dx
            seq.append(grids[unit.comp_index][by, bx])
    return np.asarray(seq, dtype=np.int32)


def synchronization_distance(original, decoded, max_offset: int = 8) -> int:
    """Blocks from the first corrupted block until AC sequences re-match.

    DC coefficients are excluded (DC errors propagate forever); block
    shifts are allowed via a bounded index offset.  Raises :class:`NoSync`
    when no suffix of ``decoded`` matches any aligned suffix of
    ``original``.
    """
    a = np.asarray(original, dtype=np.int64)[:, 1:]
    b = np.asarray(decoded, dtype=np.int64)[:, 1:]
    n = min(len(a), len(b))
    if n == 0:
        return 0
    mismatch = np.nonzero((a[:n] != b[:n]).any(axis=1))[0]
    if len(mismatch) == 0 and len(a) == len(b):
        return 0
    first = int(mismatch[0]) if len(mismatch) else n
    for j in range(first, len(b)):
        for off in range(-max_offset, max_offset + 1):
            src = j + off
            if src < 0 or src >= len(a):
                continue
            span = min(len(b) - j, len(a) - src)
            if span <= 0:
                continue
            if np.array_equal(b[j : j + span], a[src : src + span]):
                return j - first
    raise NoSync("sequences never re-match")
