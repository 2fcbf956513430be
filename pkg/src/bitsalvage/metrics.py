"""Restoration quality metrics: PSNR and SSIM on the luma channel."""

from __future__ import annotations

import dataclasses
import json
import math

import numpy as np
from scipy.signal import convolve2d

from .image import ImageBuffer


def _luma_pair(a: ImageBuffer, b: ImageBuffer):
    if (a.height, a.width) != (b.height, b.width):
        raise ValueError(
            f"dimension mismatch: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    return a.to_display().luma(), b.to_display().luma()


def psnr_y(a: ImageBuffer, b: ImageBuffer) -> float:
    """Peak signal-to-noise ratio over BT.601 luma, in dB.

    Identical images return +inf.
    """
    ya, yb = _luma_pair(a, b)
    mse = float(np.mean((ya - yb) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = (size - 1) / 2
    x = np.arange(size) - half
    g = np.exp(-(x**2) / (2 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


_SSIM_WINDOW = _gaussian_window()


def ssim_y(a: ImageBuffer, b: ImageBuffer) -> float:
    """Mean structural similarity over luma.

    11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03, L=255; the window
    radius is cropped from the border (valid-mode filtering).
    """
    ya, yb = _luma_pair(a, b)
    if min(ya.shape) < 11:
        raise ValueError("SSIM needs images at least 11 pixels on a side")
    w = _SSIM_WINDOW
    c1 = (0.01 * 255.0) ** 2
    c2 = (0.03 * 255.0) ** 2

    mu_a = convolve2d(ya, w, mode="valid")
    mu_b = convolve2d(yb, w, mode="valid")
    aa = convolve2d(ya * ya, w, mode="valid")
    bb = convolve2d(yb * yb, w, mode="valid")
    ab = convolve2d(ya * yb, w, mode="valid")

    var_a = aa - mu_a**2
    var_b = bb - mu_b**2
    cov = ab - mu_a * mu_b
    ssim_map = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    )
    return float(ssim_map.mean())


@dataclasses.dataclass
class MetricReport:
    """Per-image and corpus-mean quality numbers."""

    entries: list = dataclasses.field(default_factory=list)

    def add(self, name: str, psnr: float, ssim: float) -> None:
        self.entries.append({"name": name, "psnr_y": psnr, "ssim_y": ssim})

    def _finite_psnrs(self):
        return [e["psnr_y"] for e in self.entries if math.isfinite(e["psnr_y"])]

    def mean_psnr(self) -> float:
        vals = [e["psnr_y"] for e in self.entries]
        if not vals:
            return math.nan
        if any(math.isinf(v) for v in vals):
            finite = self._finite_psnrs()
            return math.inf if not finite else float(np.mean(finite))
        return float(np.mean(vals))

    def mean_ssim(self) -> float:
        if not self.entries:
            return math.nan
        return float(np.mean([e["ssim_y"] for e in self.entries]))

    def to_json(self) -> str:
        def enc(v):
            return "inf" if v == math.inf else v

        return json.dumps(
            {
                "images": [
                    {**e, "psnr_y": enc(e["psnr_y"])} for e in self.entries
                ],
                "mean": {"psnr_y": enc(self.mean_psnr()), "ssim_y": self.mean_ssim()},
            },
            indent=2,
        )

    def to_csv(self) -> str:
        lines = ["name,psnr_y,ssim_y"]
        for e in self.entries:
            lines.append(f"{e['name']},{e['psnr_y']:.6g},{e['ssim_y']:.6g}")
        lines.append(f"mean,{self.mean_psnr():.6g},{self.mean_ssim():.6g}")
        return "\n".join(lines) + "\n"
