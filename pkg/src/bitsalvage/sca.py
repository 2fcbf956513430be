"""Training-free self-compensation and alignment.

A resynchronized decode leaves two artifacts: runs of blocks sharing one
constant DC offset (color cast per *segment*) and rows whose blocks sit a
few positions left or right of where they belong.  Both are visible as
content discontinuities along 8-pixel block seams, so both are undone
from image content alone:

1. find the segment boundaries from seam similarity (row ED, then the
   coherence of ED across a candidate split column),
2. re-center each segment's colors and rescale for display,
3. shift each block row into the alignment that best matches the row
   above.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np

from .image import DISPLAY, ImageBuffer


@dataclasses.dataclass(frozen=True, order=True)
class SegmentPoint:
    """Raster position where a new constant-DC-shift segment starts."""

    h: int  # pixel row, multiple of 8
    v: int  # pixel column, multiple of 8

    def __post_init__(self):
        if self.h % 8 or self.v % 8:
            raise ValueError(f"segment point ({self.h}, {self.v}) not block-aligned")
        if self.h < 0 or self.v < 0:
            raise ValueError(f"segment point ({self.h}, {self.v}) negative")


@dataclasses.dataclass
class SegmentMap:
    width: int
    height: int
    points: list                      # SegmentPoint, raster order
    color_offsets: list | None = None  # per segment, per channel means removed
    block_shifts: list | None = None   # per block row, circular shift applied

    @property
    def block_shape(self):
        return self.height // 8, self.width // 8

    def segment_ranges(self):
        """Half-open block-index ranges [(start, end), ...] in raster order."""
        hb, wb = self.block_shape
        total = hb * wb
        cuts = sorted(
            min((p.h // 8) * wb + p.v // 8, total) for p in self.points
        )
        bounds = [0] + [c for c in cuts if 0 < c < total] + [total]
        return [
            (a, b) for a, b in zip(bounds[:-1], bounds[1:]) if a < b
        ]

    def block_segment_ids(self) -> np.ndarray:
        hb, wb = self.block_shape
        ids = np.zeros(hb * wb, dtype=np.int32)
        for seg, (a, b) in enumerate(self.segment_ranges()):
            ids[a:b] = seg
        return ids.reshape(hb, wb)

    def to_json(self) -> str:
        return json.dumps(
            {
                "width": self.width,
                "height": self.height,
                "points": [[p.h, p.v] for p in self.points],
                "color_offsets": self.color_offsets,
                "block_shifts": self.block_shifts,
            },
            indent=2,
        )


def _as_float(image: ImageBuffer) -> np.ndarray:
    return image.samples.astype(np.float64)


def _seam_sq(arr: np.ndarray, h: int) -> np.ndarray:
    """Per-column squared difference between rows h and h+1, channels summed."""
    d = arr[h + 1] - arr[h]
    return (d * d).sum(axis=-1)


def row_ed(image: ImageBuffer, h: int) -> float:
    """Seam similarity between pixel rows h and h+1 (lower = more similar).

    Root of the summed squared RGB differences across the row, divided by
    the image width.
    """
    arr = _as_float(image)
    height, width = arr.shape[:2]
    if not 0 <= h < height - 1:
        raise ValueError(f"row {h} out of range for height {height}")
    return float(np.sqrt(_seam_sq(arr, h).sum()) / width)


def _ed_profile(arr: np.ndarray) -> np.ndarray:
    d = arr[1:] - arr[:-1]
    return np.sqrt((d * d).sum(axis=(1, 2))) / arr.shape[1]


def _outlier_threshold(values: np.ndarray, sigma: float) -> float:
    """Robust outlier cut: median + sigma * scaled MAD.

    A mean/std rule breaks down here: two or three comparable spikes
    inflate the standard deviation enough to mask one another.  The
    median absolute deviation keeps its scale with up to half the seams
    corrupted, so every spike is judged against clean-content statistics.
    """
    med = float(np.median(values))
    mad = 1.4826 * float(np.median(np.abs(values - med)))
    return med + sigma * mad


def detect_horizontal_candidates(image: ImageBuffer, sigma: float = 8.0):
    """Block-row seams whose ED stands out; returns segment-start rows.

    A seam between block rows r-1 and r sits at pixel rows (8r-1, 8r);
    the returned coordinate is the segment-start row 8r.  ``sigma`` is the
    robust z-score a seam must exceed.
    """
    arr = _as_float(image)
    height = arr.shape[0]
    if height < 16:
        return []
    eds = _ed_profile(arr)
    seam_eds = eds[7 : height - 8 : 8]  # seams (8r-1, 8r), r = 1..Hb-1
    if len(seam_eds) == 0:
        return []
    threshold = _outlier_threshold(seam_eds, sigma)
    return [int(8 * (r + 1)) for r in np.nonzero(seam_eds > threshold)[0]]


def _split_ed(arr: np.ndarray, h: int, v_grid: np.ndarray) -> np.ndarray:
    """Two-part split ED for all v in v_grid, at segment-start row h.

    Columns >= v contribute the seam above row h; columns < v contribute
    the seam one block-row lower (rows h+7, h+8).
    """
    width = arr.shape[1]
    upper = _seam_sq(arr, h - 1)
    lower = _seam_sq(arr, h + 7)
    up_suffix = np.concatenate([np.cumsum(upper[::-1])[::-1], [0.0]])
    low_prefix = np.concatenate([[0.0], np.cumsum(lower)])
    return np.sqrt(up_suffix[v_grid] + low_prefix[v_grid]) / width


def ced(image: ImageBuffer, h: int, v: int) -> float:
    """Coherence of ED at candidate point (h, v).

    Absolute difference between the split ED evaluated at the candidate
    block row and one block row lower; maximal when (h, v) is the true
    segment start.
    """
    arr = _as_float(image)
    height, width = arr.shape[:2]
    if h % 8 or not 8 <= h <= height - 17:
        raise ValueError(f"candidate row {h} out of range")
    if v % 8 or not 0 <= v <= width:
        raise ValueError(f"split column {v} out of range")
    grid = np.array([v])
    return float(abs(_split_ed(arr, h + 8, grid) - _split_ed(arr, h, grid))[0])


def _ced_curve(arr: np.ndarray, h: int, v_grid: np.ndarray):
    ed_here = _split_ed(arr, h, v_grid)
    ed_below = _split_ed(arr, h + 8, v_grid)
    return np.abs(ed_below - ed_here), ed_here


def detect_segments(image: ImageBuffer, sigma: float = 8.0) -> SegmentMap:
    """Locate constant-DC-shift segment starts (h, v).

    Every outlier seam is explained by one of two hypotheses: it is the
    upper boundary of a segment starting this block row (columns >= v
    changed), or the *lower* boundary of a segment that started one block
    row earlier at a split column v > 0 (columns < v changed).  Each
    hypothesis is scored by its CED weighted by its own split-ED evidence;
    the winning points are deduplicated across seams.
    """
    arr = _as_float(image)
    height, width = arr.shape[:2]
    if height < 16:
        return SegmentMap(width=width, height=height, points=[])
    eds = _ed_profile(arr)
    seam_eds = eds[7 : height - 8 : 8]
    if len(seam_eds) == 0:
        return SegmentMap(width=width, height=height, points=[])
    threshold = _outlier_threshold(seam_eds, sigma)
    candidates = [int(8 * (r + 1)) for r in np.nonzero(seam_eds > threshold)[0]]
    proposals = {}

    def propose(point, score, evidence):
        # Evidence gate: a real segment start shows boundary discontinuity
        # on the same (1/W)*sqrt(sum) scale the candidate threshold uses.
        if evidence <= threshold:
            return
        key = (point.h, point.v)
        if key not in proposals or proposals[key] < score:
            proposals[key] = score

    v_grid_a = np.arange(0, width, 8)
    v_grid_b = np.arange(8, width, 8)
    for start in candidates:
        best = None
        if 8 <= start <= height - 17:
            curve, evidence = _ced_curve(arr, start, v_grid_a)
            i = int(np.argmax(curve * evidence))
            best = (
                float(curve[i] * evidence[i]),
                SegmentPoint(start, int(v_grid_a[i])),
                float(evidence[i]),
            )
        else:
            # too close to the frame edge for CED; fall back to a row split
            best = (np.inf, SegmentPoint(start, 0), np.inf)
        prev = start - 8
        if prev >= 8 and prev <= height - 17 and len(v_grid_b):
            curve, evidence = _ced_curve(arr, prev, v_grid_b)
            i = int(np.argmax(curve * evidence))
            score = float(curve[i] * evidence[i])
            if score > best[0]:
                best = (score, SegmentPoint(prev, int(v_grid_b[i])), float(evidence[i]))
        propose(best[1], best[0], best[2])

    # one split column per block row: keep the strongest
    by_row = {}
    for (h, v), score in proposals.items():
        if h not in by_row or by_row[h][0] < score:
            by_row[h] = (score, v)
    points = sorted(SegmentPoint(h, v) for h, (_, v) in by_row.items())
    return SegmentMap(width=width, height=height, points=points)


def normalize_segments(image: ImageBuffer, segmap: SegmentMap,
                       clip_limit: float = 150.0) -> ImageBuffer:
    """Re-center each segment's colors and rescale the image for display.

    Per segment and channel the mean is subtracted (undoing the constant
    DC shift), outliers are clipped to [-clip_limit, clip_limit], and one
    global min-max rescale maps the whole image back to [0, 255].
    """
    arr = _as_float(image)
    height, width, channels = arr.shape
    ids = np.repeat(np.repeat(segmap.block_segment_ids(), 8, 0), 8, 1)
    ids = ids[:height, :width]
    nseg = int(ids.max()) + 1
    flat_ids = ids.ravel()
    counts = np.bincount(flat_ids, minlength=nseg).astype(np.float64)

    offsets = []
    for c in range(channels):
        sums = np.bincount(flat_ids, weights=arr[:, :, c].ravel(), minlength=nseg)
        means = sums / np.maximum(counts, 1)
        arr[:, :, c] -= means[ids]
        offsets.append(means)
    segmap.color_offsets = [
        [float(offsets[c][s]) for c in range(channels)] for s in range(nseg)
    ]

    np.clip(arr, -clip_limit, clip_limit, out=arr)
    lo, hi = arr.min(), arr.max()
    if hi - lo < 1e-12:
        out = np.full_like(arr, 128.0)
    else:
        out = (arr - lo) * (255.0 / (hi - lo))
    out = np.clip(np.rint(out), 0, 255).astype(np.uint8)
    return ImageBuffer(out, DISPLAY)


def align_blocks(image: ImageBuffer, max_shift: int | None = None):
    """Circularly shift each block row to match the row above.

    Rows are processed top to bottom; each row takes the shift (in whole
    blocks) minimizing the seam ED against the already-aligned row above.
    Ties prefer the smallest |shift|, then the leftward one.  Returns the
    aligned image and the per-row shifts (positive = shifted right).
    """
    disp = image.to_display()
    arr = disp.samples.astype(np.float64)
    height, width = arr.shape[:2]
    if height % 8 or width % 8:
        raise ValueError("block alignment needs dimensions that are multiples of 8")
    hb, wb = height // 8, width // 8
    out = arr.copy()
    shifts = [0]
    for r in range(1, hb):
        prev_bottom = out[8 * r - 1]
        top = arr[8 * r]
        best = (np.inf, 0, 0, 0)
        for offset in range(wb):
            s = offset if offset <= wb // 2 else offset - wb
            if max_shift is not None and abs(s) > max_shift:
                continue
            cand = np.roll(top, 8 * s, axis=0)
            d = cand - prev_bottom
            ed = np.sqrt((d * d).sum()) / width
            key = (ed, abs(s), 0 if s < 0 else 1, s)
            if key < best:
                best = key
        s = best[3]
        shifts.append(int(s))
        out[8 * r : 8 * r + 8] = np.roll(arr[8 * r : 8 * r + 8], 8 * s, axis=1)
    return ImageBuffer(out.astype(np.uint8), DISPLAY), shifts


def sca_pipeline(image: ImageBuffer, sigma: float = 8.0,
                 clip_limit: float = 150.0, align: bool = True,
                 max_shift: int | None = None):
    """detect_segments -> normalize_segments -> align_blocks, composed."""
    segmap = detect_segments(image, sigma)
    normalized = normalize_segments(image, segmap, clip_limit)
    if align:
        aligned, shifts = align_blocks(normalized, max_shift)
        segmap.block_shifts = shifts
        return aligned, segmap
    segmap.block_shifts = [0] * (image.height // 8)
    return normalized, segmap
