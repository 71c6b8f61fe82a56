"""Pixelated beam profiles, amplitude masks, and effective mode couplings.

A beam profile is the transverse amplitude of one spatial mode on a pixel
grid (real, non-negative, sum of squares 1).  A mask is a per-pixel
amplitude transmission in [0, 1]; the complementary per-pixel reflectivity
sqrt(1 - t^2) couples the beam to the heralding channel.  Reducing a
(profile, mask) pair yields the two numbers the single-mode physics needs:
the power fraction inside the masked region and the effective coupling
into the heralding mode.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateShape,
    DimensionMismatch,
    WeakCouplingViolated,
)
from .fock import StateStats

NORM_TOL = 1e-12
DEFAULT_GRID = (64, 48)  # width, height
WEAK_COUPLING_DEFAULT = 0.2


@dataclass(frozen=True)
class BeamProfile:
    """Normalized per-pixel modal amplitude, shape (height, width)."""

    amplitude: np.ndarray

    def __post_init__(self):
        arr = np.array(self.amplitude, dtype=float)
        if arr.ndim != 2:
            raise DegenerateShape("profile must be a 2-D array")
        if not np.isfinite(arr).all() or (arr < 0).any():
            raise DegenerateShape("amplitudes must be finite and non-negative")
        norm2 = float((arr * arr).sum())
        if abs(norm2 - 1.0) > NORM_TOL:
            raise DegenerateShape(f"profile power {norm2} != 1 beyond {NORM_TOL}")
        arr.setflags(write=False)
        object.__setattr__(self, "amplitude", arr)

    @property
    def height(self) -> int:
        return self.amplitude.shape[0]

    @property
    def width(self) -> int:
        return self.amplitude.shape[1]

    def power(self) -> np.ndarray:
        return self.amplitude**2


@dataclass(frozen=True)
class MaskSpec:
    """Per-pixel amplitude transmission in [0, 1], shape (height, width)."""

    transmission: np.ndarray

    def __post_init__(self):
        arr = np.array(self.transmission, dtype=float)
        if arr.ndim != 2:
            raise DegenerateShape("mask must be a 2-D array")
        if not np.isfinite(arr).all() or (arr < 0).any() or (arr > 1).any():
            raise DegenerateShape("transmissions must lie in [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "transmission", arr)

    @property
    def height(self) -> int:
        return self.transmission.shape[0]

    @property
    def width(self) -> int:
        return self.transmission.shape[1]

    def reflectivity(self) -> np.ndarray:
        return np.sqrt(np.clip(1.0 - self.transmission**2, 0.0, None))

    def active_region(self) -> np.ndarray:
        """Pixels with non-zero coupling into the heralding channel."""
        return self.transmission < 1.0


@dataclass(frozen=True)
class ModeReduction:
    """Single-mode summary of a (profile, mask) pair."""

    c_a: float  # amplitude fraction of the beam inside the active region
    r_eff: float  # effective coupling to the heralding mode
    transmitted_profile: BeamProfile
    reflected_profile: BeamProfile | None


def _normalized(amp: np.ndarray, what: str) -> BeamProfile:
    norm = math.sqrt(float((amp * amp).sum()))
    if norm <= 0.0:
        raise DegenerateShape(f"{what}: no power left to normalize")
    return BeamProfile(amp / norm)


# ---------------------------------------------------------------------------
# profile constructors


def _grid(width: int, height: int):
    if width < 1 or height < 1:
        raise DegenerateShape("grid dimensions must be positive")
    y, x = np.mgrid[0:height, 0:width]
    return x.astype(float), y.astype(float)


def ellipse_region(
    width: int,
    height: int,
    cx: float | None = None,
    cy: float | None = None,
    rx: float | None = None,
    ry: float | None = None,
) -> np.ndarray:
    """Boolean pixel set of an axis-aligned ellipse."""
    x, y = _grid(width, height)
    cx = (width - 1) / 2.0 if cx is None else cx
    cy = (height - 1) / 2.0 if cy is None else cy
    rx = 0.4 * width if rx is None else rx
    ry = 0.4 * height if ry is None else ry
    if rx <= 0 or ry <= 0:
        raise DegenerateShape("ellipse radii must be positive")
    return ((x - cx) / rx) ** 2 + ((y - cy) / ry) ** 2 <= 1.0


def rect_region(width: int, height: int, x0: int, y0: int, w: int, h: int) -> np.ndarray:
    """Boolean pixel set of an axis-aligned rectangle."""
    region = np.zeros((height, width), dtype=bool)
    region[max(y0, 0) : y0 + h, max(x0, 0) : x0 + w] = True
    return region


def silhouette_region(
    width: int,
    height: int,
    cx: float | None = None,
    cy: float | None = None,
    span: float | None = None,
) -> np.ndarray:
    """Stylized bat silhouette: head, body ellipse, two triangular wings.

    Purely a figure-parity shape; any pixel set works as a mask region.
    """
    cx = (width - 1) / 2.0 if cx is None else cx
    cy = (height - 1) / 2.0 if cy is None else cy
    span = 0.45 * width if span is None else span
    x, y = _grid(width, height)
    body = ((x - cx) / (0.16 * span)) ** 2 + ((y - cy) / (0.36 * span)) ** 2 <= 1.0
    head = ((x - cx) / (0.10 * span)) ** 2 + (
        (y - (cy - 0.42 * span)) / (0.12 * span)
    ) ** 2 <= 1.0

    def wing(sign: float) -> np.ndarray:
        # triangle: shoulder near body, tip outward, trailing corner below
        ax, ay = cx + sign * 0.10 * span, cy - 0.18 * span
        bx, by = cx + sign * 0.50 * span, cy - 0.30 * span
        dx, dy = cx + sign * 0.34 * span, cy + 0.22 * span
        d1 = (bx - ax) * (y - ay) - (by - ay) * (x - ax)
        d2 = (dx - bx) * (y - by) - (dy - by) * (x - bx)
        d3 = (ax - dx) * (y - dy) - (ay - dy) * (x - dx)
        neg = (d1 <= 0) & (d2 <= 0) & (d3 <= 0)
        pos = (d1 >= 0) & (d2 >= 0) & (d3 >= 0)
        return neg | pos

    region = body | head | wing(1.0) | wing(-1.0)
    if not region.any():
        raise DegenerateShape("silhouette does not intersect the grid")
    return region


def make_profile(kind: str, width: int, height: int, **params) -> BeamProfile:
    """Build a normalized profile: uniform_ellipse[_with_ring] or gaussian."""
    if kind == "uniform_ellipse":
        inside = ellipse_region(width, height, **params)
        if not inside.any():
            raise DegenerateShape("ellipse does not cover any pixel")
        return _normalized(inside.astype(float), "uniform_ellipse")
    if kind == "uniform_ellipse_with_ring":
        ring_gain = float(params.pop("ring_gain", 1.5))
        inside = ellipse_region(width, height, **params)
        if not inside.any():
            raise DegenerateShape("ellipse does not cover any pixel")
        amp = inside.astype(float)
        interior = (
            np.roll(inside, 1, 0)
            & np.roll(inside, -1, 0)
            & np.roll(inside, 1, 1)
            & np.roll(inside, -1, 1)
            & inside
        )
        # 1-pixel rim mimicking the bright diffraction contour of an iris
        amp[inside & ~interior] = ring_gain
        return _normalized(amp, "uniform_ellipse_with_ring")
    if kind == "gaussian":
        x, y = _grid(width, height)
        cx = float(params.get("cx", (width - 1) / 2.0))
        cy = float(params.get("cy", (height - 1) / 2.0))
        sx = float(params.get("sigma_x", 0.2 * width))
        sy = float(params.get("sigma_y", 0.2 * height))
        if sx <= 0 or sy <= 0:
            raise DegenerateShape("gaussian widths must be positive")
        amp = np.exp(-((x - cx) ** 2) / (2 * sx**2) - ((y - cy) ** 2) / (2 * sy**2))
        return _normalized(amp, "gaussian")
    raise ValueError(f"unknown profile kind {kind!r}")


# ---------------------------------------------------------------------------
# masks


def make_mask(
    kind: str,
    width: int,
    height: int,
    contrast: float = 0.0,
    region: np.ndarray | None = None,
) -> MaskSpec:
    """white: t = 1 everywhere.  vampire: per-pixel reflectivity = contrast
    inside the region (t = sqrt(1 - contrast^2)), t = 1 outside."""
    if kind == "white":
        return MaskSpec(np.ones((height, width)))
    if kind == "vampire":
        if not 0.0 <= contrast <= 1.0:
            raise ValueError("contrast must lie in [0, 1]")
        if region is None:
            raise ValueError("vampire mask needs a pixel region")
        region = np.asarray(region, dtype=bool)
        if region.shape != (height, width):
            raise DimensionMismatch("region shape does not match the grid")
        t = np.ones((height, width))
        t[region] = math.sqrt(1.0 - contrast * contrast)
        return MaskSpec(t)
    raise ValueError(f"unknown mask kind {kind!r}")


def contrast_for_herald_rate(
    profile: BeamProfile, region: np.ndarray, nbar: float, target: float
) -> float:
    """Uniform in-region contrast giving herald rate r_eff^2 * nbar = target."""
    frac = float(profile.power()[np.asarray(region, dtype=bool)].sum())
    if frac <= 0 or nbar <= 0:
        raise DegenerateShape("region carries no beam power or nbar = 0")
    c2 = target / (nbar * frac)
    if c2 > 1.0:
        raise ValueError(
            f"target herald rate {target} unreachable: needs contrast^2 = {c2:.3f}"
        )
    return math.sqrt(c2)


# ---------------------------------------------------------------------------
# reduction and analytic intensity maps


def reduce(profile: BeamProfile, mask: MaskSpec) -> ModeReduction:
    """Collapse a (profile, mask) pair to effective single-mode couplings."""
    if profile.amplitude.shape != mask.transmission.shape:
        raise DimensionMismatch(
            f"profile {profile.amplitude.shape} vs mask {mask.transmission.shape}"
        )
    u2 = profile.power()
    r = mask.reflectivity()
    r_eff = math.sqrt(float((r * r * u2).sum()))
    c_a = math.sqrt(float(u2[mask.active_region()].sum()))
    transmitted = _normalized(mask.transmission * profile.amplitude, "transmitted")
    reflected = _normalized(r * profile.amplitude, "reflected") if r_eff > 0 else None
    return ModeReduction(
        c_a=c_a, r_eff=r_eff, transmitted_profile=transmitted, reflected_profile=reflected
    )


def herald_rate(profile: BeamProfile, mask: MaskSpec, nbar: float) -> float:
    """Mean photon number per time mode in the heralding channel."""
    return reduce(profile, mask).r_eff ** 2 * nbar


def loss_profile(profile: BeamProfile, mask: MaskSpec, nbar: float) -> np.ndarray:
    """Unconditional transmitted intensity t^2 u^2 nbar (photons/mode/pixel)."""
    if profile.amplitude.shape != mask.transmission.shape:
        raise DimensionMismatch("profile and mask grids differ")
    return mask.transmission**2 * profile.power() * nbar


def subtracted_profile_analytic(
    profile: BeamProfile,
    mask: MaskSpec,
    input_stats: StateStats,
    nbar: float,
    weak_coupling_threshold: float = WEAK_COUPLING_DEFAULT,
) -> np.ndarray:
    """Heralded intensity in the weak-coupling limit: g2 * t^2 u^2 * nbar.

    The enhancement factor is the input g2, uniform across the profile:
    2 for thermal light, 1 for coherent, 1 - 1/n for a number state.
    """
    r_eff = reduce(profile, mask).r_eff
    if r_eff > weak_coupling_threshold:
        warnings.warn(
            f"r_eff = {r_eff:.3f} exceeds weak-coupling threshold "
            f"{weak_coupling_threshold}; analytic heralded profile is approximate",
            WeakCouplingViolated,
            stacklevel=2,
        )
    return input_stats.g2 * loss_profile(profile, mask, nbar)


# ---------------------------------------------------------------------------
# CSV / PGM serialization


def save_matrix_csv(path, arr: np.ndarray) -> None:
    """Row-major CSV with a 'width,height' header line."""
    arr = np.asarray(arr, dtype=float)
    h, w = arr.shape
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{w},{h}\n")
        for row in arr:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_matrix_csv(path) -> np.ndarray:
    with open(path, "r", encoding="ascii") as fh:
        w, h = (int(tok) for tok in fh.readline().strip().split(","))
        rows = [
            [float(tok) for tok in fh.readline().strip().split(",")] for _ in range(h)
        ]
    arr = np.array(rows, dtype=float)
    if arr.shape != (h, w):
        raise DimensionMismatch("CSV body does not match its header")
    return arr


def save_profile_csv(path, profile: BeamProfile) -> None:
    save_matrix_csv(path, profile.amplitude)


def load_profile_csv(path) -> BeamProfile:
    return BeamProfile(load_matrix_csv(path))


def save_mask_csv(path, mask: MaskSpec) -> None:
    save_matrix_csv(path, mask.transmission)


def load_mask_csv(path) -> MaskSpec:
    return MaskSpec(load_matrix_csv(path))


def save_pgm(path, values: np.ndarray) -> None:
    """8-bit binary PGM; 255 maps linearly to value 1.0."""
    arr = np.asarray(values, dtype=float)
    levels = np.rint(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    h, w = levels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(levels.tobytes())


def load_pgm(path) -> np.ndarray:
    """Read a binary PGM written by save_pgm; returns values in [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    if fields[0] != b"P5":
        raise ValueError("not a binary PGM file")
    w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    pos += 1  # single whitespace after maxval
    levels = np.frombuffer(data[pos : pos + w * h], dtype=np.uint8).reshape(h, w)
    return levels.astype(float) / float(maxval)


def save_mask_pgm(path, mask: MaskSpec) -> None:
    save_pgm(path, mask.transmission)


def load_mask_pgm(path) -> MaskSpec:
    return MaskSpec(load_pgm(path))
