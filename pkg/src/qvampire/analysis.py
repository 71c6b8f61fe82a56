"""Turn scan counts into verdicts: g2, ratio maps, flatness and shadow tests.

The shadow statistic lives on a ratio of two rate maps, never on raw
intensity, so it is blind to overall brightness: a heralded profile that
is everywhere twice the unconditional one is flat with best constant 2,
while real per-pixel loss shows up as a dip no rescaling removes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2 as chi2_dist

from .errors import (
    BandOutOfRange,
    EmptyRegion,
    GridMismatch,
    InsufficientCounts,
    InsufficientData,
)

TAG_INSIDE = "inside_mask_region"
TAG_OUTSIDE = "outside"
TAG_EXCLUDED = "excluded_low_signal"

SIGNAL_FLOOR_RELERR = 0.3
INSIDE_OVERLAP_THRESHOLD = 0.5


@dataclass(frozen=True)
class RatioMap:
    """Per-superpixel ratio with errors and region tags."""

    ratio: np.ndarray
    sigma: np.ndarray
    tags: np.ndarray

    def usable(self) -> np.ndarray:
        return self.tags != TAG_EXCLUDED


@dataclass(frozen=True)
class FlatnessResult:
    chi2: float
    dof: int
    p_value: float
    best_const: float


def g2_estimate(
    camera_counts: int, herald_counts: int, coincidences: int, n_bins: int
) -> tuple[float, float]:
    """Normalized coincidence rate g2 = cc * n / (cam * her) with its error."""
    if min(camera_counts, herald_counts, coincidences, n_bins) < 0:
        raise InsufficientCounts("counts must be non-negative")
    if camera_counts * herald_counts == 0:
        raise InsufficientCounts("need camera and herald singles for g2")
    g2 = coincidences * n_bins / (camera_counts * herald_counts)
    if coincidences == 0:
        return 0.0, n_bins / (camera_counts * herald_counts)
    rel2 = 1.0 / coincidences + 1.0 / camera_counts + 1.0 / herald_counts
    return g2, g2 * math.sqrt(rel2)


def ratio_map(
    numerator: np.ndarray,
    numerator_sigma: np.ndarray,
    denominator: np.ndarray,
    denominator_sigma: np.ndarray,
    region_frac: np.ndarray | None = None,
    signal_floor: float = SIGNAL_FLOOR_RELERR,
    inside_threshold: float = INSIDE_OVERLAP_THRESHOLD,
) -> RatioMap:
    """Elementwise rate ratio with propagated errors and exclusion tags.

    Superpixels whose denominator is zero or carries relative error above
    ``signal_floor`` are excluded (beam edges where ratios mean nothing).
    ``region_frac`` is the fraction of each superpixel's pixels inside
    the mask region and drives the inside/outside tagging.
    """
    num = np.asarray(numerator, dtype=float)
    den = np.asarray(denominator, dtype=float)
    num_s = np.asarray(numerator_sigma, dtype=float)
    den_s = np.asarray(denominator_sigma, dtype=float)
    if not (num.shape == den.shape == num_s.shape == den_s.shape):
        raise GridMismatch("rate maps live on different superpixel grids")
    if region_frac is None:
        region_frac = np.zeros_like(num)
    region_frac = np.asarray(region_frac, dtype=float)
    if region_frac.shape != num.shape:
        raise GridMismatch("region map grid differs from the rate maps")

    good = (den > 0) & np.isfinite(den_s) & (den_s <= signal_floor * den)
    ratio = np.zeros_like(num)
    sigma = np.full_like(num, np.inf)
    np.divide(num, den, out=ratio, where=good)
    rel2 = np.zeros_like(num)
    np.divide(num_s, num, out=rel2, where=good & (num > 0))
    rel2 = rel2**2
    drel = np.zeros_like(num)
    np.divide(den_s, den, out=drel, where=good)
    rel2 += drel**2
    sigma = np.where(good, np.abs(ratio) * np.sqrt(rel2), np.inf)
    # zero numerator still deserves a finite error bar: one count scale
    zero_num = good & (num <= 0)
    if zero_num.any():
        floor = np.zeros_like(num)
        np.divide(num_s, den, out=floor, where=zero_num)
        sigma = np.where(zero_num, floor, sigma)

    tags = np.where(
        good,
        np.where(region_frac >= inside_threshold, TAG_INSIDE, TAG_OUTSIDE),
        TAG_EXCLUDED,
    )
    return RatioMap(ratio=ratio, sigma=sigma, tags=tags)


def flatness_test(rmap: RatioMap) -> FlatnessResult:
    """Weighted least-squares fit of a constant plus a chi-square p-value."""
    use = rmap.usable()
    r = rmap.ratio[use]
    s = rmap.sigma[use]
    if r.size < 2:
        raise InsufficientData("flatness test needs at least two superpixels")
    w = 1.0 / s**2
    best = float((w * r).sum() / w.sum())
    chi2 = float((w * (r - best) ** 2).sum())
    dof = int(r.size - 1)
    return FlatnessResult(
        chi2=chi2, dof=dof, p_value=float(chi2_dist.sf(chi2, dof)), best_const=best
    )


def shadow_depth(rmap: RatioMap) -> tuple[float, float]:
    """Depth 1 - mean(inside)/mean(outside) with its significance z-score."""
    inside = rmap.tags == TAG_INSIDE
    outside = rmap.tags == TAG_OUTSIDE
    if not inside.any() or not outside.any():
        raise EmptyRegion("need usable superpixels both inside and outside")

    def wmean(sel):
        w = 1.0 / rmap.sigma[sel] ** 2
        m = float((w * rmap.ratio[sel]).sum() / w.sum())
        return m, math.sqrt(1.0 / float(w.sum()))

    m_in, s_in = wmean(inside)
    m_out, s_out = wmean(outside)
    depth = 1.0 - m_in / m_out
    s_depth = math.sqrt((s_in / m_out) ** 2 + (m_in * s_out / m_out**2) ** 2)
    return depth, depth / s_depth


def profile_cut(
    values: np.ndarray, sigmas: np.ndarray, row_lo: int, row_hi: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Column-wise average over a row band; returns (x, value, sigma)."""
    values = np.asarray(values, dtype=float)
    sigmas = np.asarray(sigmas, dtype=float)
    if values.shape != sigmas.shape:
        raise GridMismatch("values and sigmas differ in shape")
    n_rows = values.shape[0]
    if not (0 <= row_lo < row_hi <= n_rows):
        raise BandOutOfRange(f"band [{row_lo}, {row_hi}) outside 0..{n_rows}")
    band = values[row_lo:row_hi]
    band_s = sigmas[row_lo:row_hi]
    k = row_hi - row_lo
    x = np.arange(values.shape[1], dtype=float)
    return x, band.mean(axis=0), np.sqrt((band_s**2).sum(axis=0)) / k


def region_fraction_map(
    region: np.ndarray, superpixel: int, n_rows: int, n_cols: int
) -> np.ndarray:
    """Fraction of each superpixel's pixels lying inside a mask region."""
    region = np.asarray(region, dtype=bool)
    out = np.zeros((n_rows, n_cols))
    h, w = region.shape
    for row in range(n_rows):
        ys = slice(row * superpixel, min((row + 1) * superpixel, h))
        for col in range(n_cols):
            xs = slice(col * superpixel, min((col + 1) * superpixel, w))
            patch = region[ys, xs]
            if patch.size:
                out[row, col] = patch.mean()
    return out
