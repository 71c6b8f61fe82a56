"""Stochastic simulation of the heralded single-pixel imaging apparatus.

The thermal beam is modeled semiclassically: a complex field amplitude is
drawn per coherence block from a circular Gaussian and held constant for
the bins of that block, so the per-bin intensity is exponentially
distributed with the right bunching statistics.  Each 12 ns bin the
herald detector sees the power tapped off by the mask and the camera
detector sees the power transmitted into the currently open superpixel;
on/off clicks are drawn independently given the field, and same-bin
herald+camera clicks feed the coincidence counter.

Every superpixel owns a counter-based Philox substream keyed by
(seed, superpixel index), so results are bit-identical no matter how the
raster is scheduled or parallelized.  Within a block the four per-bin
click outcomes are iid given the field amplitude, so the per-block counts
are drawn as one multinomial; this is distribution-exact and keeps a full
raster at desk scale on one core.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigMismatch, NoHeralds
from .spatial import BeamProfile, MaskSpec, reduce

THERMAL = "thermal"
COHERENT = "coherent"
SINGLES = "singles"
COINCIDENCE = "coincidence"

SCAN_CSV_HEADER = "row,col,n_bins,camera_counts,herald_counts,coincidence_counts"


@dataclass(frozen=True)
class DetectorConfig:
    """On/off single-photon detector with a fixed time-bin clock."""

    efficiency: float = 0.6
    dark_prob: float = 0.0
    bin_width: float = 12e-9

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ConfigMismatch("efficiency must lie in [0, 1]")
        if not 0.0 <= self.dark_prob < 1.0:
            raise ConfigMismatch("dark_prob must lie in [0, 1)")
        if self.bin_width <= 0.0:
            raise ConfigMismatch("bin_width must be positive")


@dataclass(frozen=True)
class SourceConfig:
    """Single-spatial-mode source feeding the mask plane."""

    nbar: float
    profile: BeamProfile
    coherence_time: float = 1e-6
    kind: str = THERMAL

    def __post_init__(self):
        if self.nbar < 0:
            raise ConfigMismatch("nbar must be non-negative")
        if self.coherence_time <= 0:
            raise ConfigMismatch("coherence_time must be positive")
        if self.kind not in (THERMAL, COHERENT):
            raise ConfigMismatch(f"unknown source kind {self.kind!r}")


@dataclass(frozen=True)
class ScanConfig:
    """Raster-scan schedule, mask, trigger mode, and RNG seed."""

    mask: MaskSpec
    seed: int
    superpixel: int = 11
    dwell: float = 0.010
    bins_cap: int = 1_000_000
    trigger_mode: str = COINCIDENCE
    herald_detector: DetectorConfig = field(default_factory=DetectorConfig)
    camera_detector: DetectorConfig = field(default_factory=DetectorConfig)
    threads: int = 1

    def __post_init__(self):
        if self.superpixel < 1:
            raise ConfigMismatch("superpixel side must be at least 1")
        if self.trigger_mode not in (SINGLES, COINCIDENCE):
            raise ConfigMismatch(f"unknown trigger mode {self.trigger_mode!r}")
        if self.herald_detector.bin_width != self.camera_detector.bin_width:
            raise ConfigMismatch("detectors must share one time-bin width")
        if self.dwell < self.herald_detector.bin_width:
            raise ConfigMismatch("dwell must cover at least one time bin")
        if self.bins_cap < 1 or self.threads < 1:
            raise ConfigMismatch("bins_cap and threads must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigMismatch("seed must fit in 64 bits")

    @property
    def bin_width(self) -> float:
        return self.herald_detector.bin_width


@dataclass(frozen=True)
class SuperpixelRecord:
    """Counts accumulated while one superpixel was open."""

    row: int
    col: int
    n_bins: int
    camera_counts: int
    herald_counts: int
    coincidence_counts: int

    def __post_init__(self):
        if self.coincidence_counts > min(self.camera_counts, self.herald_counts):
            raise ConfigMismatch("coincidences exceed a singles counter")
        if max(self.camera_counts, self.herald_counts) > self.n_bins:
            raise ConfigMismatch("counts exceed the number of bins")


@dataclass(frozen=True)
class ScanResult:
    """Per-superpixel counts plus the flat config echo that produced them."""

    records: tuple[SuperpixelRecord, ...]
    n_rows: int
    n_cols: int
    config: dict

    def grid(self, name: str) -> np.ndarray:
        out = np.zeros((self.n_rows, self.n_cols), dtype=np.int64)
        for rec in self.records:
            out[rec.row, rec.col] = getattr(rec, name)
        return out

    def bins_per_block(self) -> int:
        return int(self.config.get("derived.bins_per_block", 1))

    def source_kind(self) -> str:
        return self.config.get("source.kind", THERMAL)

    def camera_rate_map(self) -> tuple[np.ndarray, np.ndarray]:
        """Unconditional camera rate per bin with its standard error.

        For a thermal source the error includes the bunching inflation
        from bins sharing one coherence block, inferred from the measured
        rate (exact for dark_prob = 0).
        """
        counts = self.grid("camera_counts").astype(float)
        n_bins = self.grid("n_bins").astype(float)
        rates = np.divide(counts, n_bins, out=np.zeros_like(counts), where=n_bins > 0)
        var = counts * (1.0 - rates)  # binomial, per-superpixel totals
        if self.source_kind() == THERMAL:
            bpb = self.bins_per_block()
            if bpb > 1:
                x = np.divide(rates, 1.0 - rates, out=np.zeros_like(rates), where=rates < 1)
                ep2 = 1.0 - 2.0 / (1.0 + x) + 1.0 / (1.0 + 2.0 * x)
                var_p = np.clip(ep2 - rates**2, 0.0, None)
                var = n_bins * (rates - ep2) + _sum_block_squares(n_bins, bpb) * var_p
        sigmas = np.sqrt(np.clip(var, 1.0, None))
        sigmas = np.divide(sigmas, n_bins, out=np.full_like(counts, np.inf), where=n_bins > 0)
        return rates, sigmas


@dataclass(frozen=True)
class RateMap:
    """A per-superpixel rate map with one-sigma errors."""

    values: np.ndarray
    sigmas: np.ndarray


@dataclass(frozen=True)
class ConditionalProfile:
    """Heralded and unconditional camera rates from one coincidence scan."""

    conditional: RateMap
    unconditional: RateMap


# ---------------------------------------------------------------------------
# elementary pieces


def sample_block_amplitude(gen: np.random.Generator, nbar: float, size=None):
    """Complex field amplitude(s) with E|alpha|^2 = nbar (circular Gaussian)."""
    if nbar < 0:
        raise ConfigMismatch("nbar must be non-negative")
    scale = math.sqrt(nbar / 2.0)
    return scale * (gen.standard_normal(size) + 1j * gen.standard_normal(size))


def click_probability(intensity, det: DetectorConfig):
    """On/off click probability for a mean photon number per bin."""
    return det.dark_prob + (1.0 - det.dark_prob) * -np.expm1(
        -det.efficiency * np.asarray(intensity, dtype=float)
    )


def thermal_click_moments(coupling: float, nbar: float, det: DetectorConfig):
    """Mean and variance over the field of the per-bin click probability."""
    x = det.efficiency * coupling * nbar
    keep = 1.0 - det.dark_prob
    p_mean = 1.0 - keep / (1.0 + x)
    p_sq = 1.0 - 2.0 * keep / (1.0 + x) + keep * keep / (1.0 + 2.0 * x)
    return p_mean, max(p_sq - p_mean * p_mean, 0.0)


def _sum_block_squares(n_bins, bins_per_block: int):
    """Sum of squared block sizes when n_bins bins tile into blocks."""
    n_bins = np.asarray(n_bins, dtype=float)
    full = np.floor(n_bins / bins_per_block)
    rem = n_bins - full * bins_per_block
    return full * bins_per_block**2 + rem**2


def expected_singles_counts(
    coupling: float, src: SourceConfig, det: DetectorConfig, n_bins: int
):
    """Analytic mean and standard deviation of a singles counter.

    The variance carries both per-bin shot noise and the excess from
    thermal intensity fluctuations shared by bins of one coherence block.
    """
    if src.kind == COHERENT:
        p = float(click_probability(coupling * src.nbar, det))
        return n_bins * p, math.sqrt(max(n_bins * p * (1.0 - p), 0.0))
    p_mean, var_p = thermal_click_moments(coupling, src.nbar, det)
    p_sq = var_p + p_mean * p_mean
    bpb = bins_per_block(src, det)
    var = n_bins * (p_mean - p_sq) + float(_sum_block_squares(n_bins, bpb)) * var_p
    return n_bins * p_mean, math.sqrt(max(var, 0.0))


def bins_per_block(src: SourceConfig, det: DetectorConfig) -> int:
    """Bins per coherence block; must be at least one full bin."""
    if src.coherence_time < det.bin_width:
        raise ConfigMismatch("coherence time must be at least one bin")
    return int(src.coherence_time / det.bin_width + 1e-9)


def superpixel_tiles(height: int, width: int, superpixel: int):
    """Row-major (row, col, yslice, xslice) tiles; edge tiles may be partial."""
    n_rows = -(-height // superpixel)
    n_cols = -(-width // superpixel)
    tiles = []
    for row in range(n_rows):
        for col in range(n_cols):
            tiles.append(
                (
                    row,
                    col,
                    slice(row * superpixel, min((row + 1) * superpixel, height)),
                    slice(col * superpixel, min((col + 1) * superpixel, width)),
                )
            )
    return n_rows, n_cols, tiles


# ---------------------------------------------------------------------------
# the scan itself


def _simulate_tile(
    seed: int,
    index: int,
    w_cam: float,
    w_her: float,
    src: SourceConfig,
    det_cam: DetectorConfig,
    det_her: DetectorConfig,
    n_bins: int,
    bpb: int,
):
    gen = np.random.Generator(
        np.random.Philox(key=np.array([seed, index], dtype=np.uint64))
    )
    n_blocks = -(-n_bins // bpb)
    sizes = np.full(n_blocks, bpb, dtype=np.int64)
    sizes[-1] = n_bins - bpb * (n_blocks - 1)
    if src.kind == THERMAL:
        alpha = sample_block_amplitude(gen, src.nbar, size=n_blocks)
        intensity = np.abs(alpha) ** 2
    else:
        intensity = np.full(n_blocks, src.nbar)
    p_cam = click_probability(w_cam * intensity, det_cam)
    p_her = click_probability(w_her * intensity, det_her)
    pvals = np.empty((n_blocks, 4))
    pvals[:, 0] = p_cam * p_her
    pvals[:, 1] = p_cam * (1.0 - p_her)
    pvals[:, 2] = (1.0 - p_cam) * p_her
    pvals[:, 3] = (1.0 - p_cam) * (1.0 - p_her)
    draws = gen.multinomial(sizes, pvals)
    both = int(draws[:, 0].sum())
    return both + int(draws[:, 1].sum()), both + int(draws[:, 2].sum()), both


def run_scan(src: SourceConfig, scan: ScanConfig) -> ScanResult:
    """Raster-scan the camera superpixel over the masked beam.

    Deterministic for a fixed (seed, config) at any thread count: each
    superpixel draws from its own keyed Philox substream.
    """
    profile, mask = src.profile, scan.mask
    if profile.amplitude.shape != mask.transmission.shape:
        raise ConfigMismatch("profile and mask grids differ")
    bpb = bins_per_block(src, scan.herald_detector)
    n_bins = min(int(scan.dwell / scan.bin_width + 1e-9), scan.bins_cap)
    if n_bins < 1:
        raise ConfigMismatch("dwell shorter than one bin")
    r_eff2 = reduce(profile, mask).r_eff ** 2
    transmitted_power = (mask.transmission * profile.amplitude) ** 2
    n_rows, n_cols, tiles = superpixel_tiles(profile.height, profile.width, scan.superpixel)

    def work(item):
        index, (row, col, ys, xs) = item
        w_cam = float(transmitted_power[ys, xs].sum())
        cam, her, both = _simulate_tile(
            scan.seed,
            index,
            w_cam,
            r_eff2,
            src,
            scan.camera_detector,
            scan.herald_detector,
            n_bins,
            bpb,
        )
        return SuperpixelRecord(
            row=row,
            col=col,
            n_bins=n_bins,
            camera_counts=cam,
            herald_counts=her,
            coincidence_counts=both,
        )

    items = list(enumerate(tiles))
    if scan.threads > 1:
        with ThreadPoolExecutor(max_workers=scan.threads) as pool:
            records = tuple(pool.map(work, items))
    else:
        records = tuple(work(item) for item in items)

    echo = {
        "source.kind": src.kind,
        "source.nbar": repr(src.nbar),
        "source.coherence_time": repr(src.coherence_time),
        "scan.seed": str(scan.seed),
        "scan.superpixel": str(scan.superpixel),
        "scan.dwell": repr(scan.dwell),
        "scan.bins_cap": str(scan.bins_cap),
        "scan.trigger_mode": scan.trigger_mode,
        "detector.herald.efficiency": repr(scan.herald_detector.efficiency),
        "detector.herald.dark_prob": repr(scan.herald_detector.dark_prob),
        "detector.camera.efficiency": repr(scan.camera_detector.efficiency),
        "detector.camera.dark_prob": repr(scan.camera_detector.dark_prob),
        "detector.bin_width": repr(scan.bin_width),
        "derived.n_bins": str(n_bins),
        "derived.bins_per_block": str(bpb),
        "derived.r_eff2": repr(r_eff2),
        "derived.n_rows": str(n_rows),
        "derived.n_cols": str(n_cols),
    }
    return ScanResult(records=records, n_rows=n_rows, n_cols=n_cols, config=echo)


def conditional_profile_mc(result: ScanResult) -> ConditionalProfile:
    """Heralded camera rate (coincidences per herald) next to the singles rate."""
    mode = result.config.get("scan.trigger_mode", COINCIDENCE)
    if mode != COINCIDENCE:
        raise ConfigMismatch("conditional profile needs a coincidence-mode scan")
    heralds = result.grid("herald_counts").astype(float)
    if (heralds <= 0).any():
        raise NoHeralds("a superpixel recorded zero herald counts")
    both = result.grid("coincidence_counts").astype(float)
    p_cond = both / heralds
    var = np.clip(both * (1.0 - p_cond), 1.0, None)
    cond = RateMap(values=p_cond, sigmas=np.sqrt(var) / heralds)
    rates, sigmas = result.camera_rate_map()
    return ConditionalProfile(
        conditional=cond, unconditional=RateMap(values=rates, sigmas=sigmas)
    )


# ---------------------------------------------------------------------------
# serialization


def save_scan_csv(path, result: ScanResult) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(SCAN_CSV_HEADER + "\n")
        for rec in result.records:
            fh.write(
                f"{rec.row},{rec.col},{rec.n_bins},{rec.camera_counts},"
                f"{rec.herald_counts},{rec.coincidence_counts}\n"
            )


def load_scan_csv(path, config: dict | None = None) -> ScanResult:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != SCAN_CSV_HEADER:
            raise ConfigMismatch(f"unexpected scan CSV header: {header!r}")
        records = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row, col, n_bins, cam, her, both = (int(tok) for tok in line.split(","))
            records.append(
                SuperpixelRecord(
                    row=row,
                    col=col,
                    n_bins=n_bins,
                    camera_counts=cam,
                    herald_counts=her,
                    coincidence_counts=both,
                )
            )
    config = dict(config or {})
    n_rows = int(config.get("derived.n_rows", max(r.row for r in records) + 1))
    n_cols = int(config.get("derived.n_cols", max(r.col for r in records) + 1))
    return ScanResult(records=tuple(records), n_rows=n_rows, n_cols=n_cols, config=config)


def save_sidecar(path, config: dict) -> None:
    """Flat key=value config echo; rereading it reproduces the run."""
    with open(path, "w", encoding="ascii") as fh:
        for key in sorted(config):
            fh.write(f"{key}={config[key]}\n")


def load_sidecar(path) -> dict:
    out = {}
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out
