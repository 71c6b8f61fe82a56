"""Flat key=value scenario configuration with env-var overrides.

The config format is one ``section.key=value`` pair per line, chosen so
sidecar echoes diff cleanly and any run can be reproduced by feeding its
echo back in.  Every key can also be overridden by an environment
variable: ``QVAMPIRE_`` plus the key upper-cased with dots replaced by
underscores (e.g. ``QVAMPIRE_SOURCE_NBAR``).
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass

import numpy as np

from .errors import ConfigMismatch
from .montecarlo import (
    COINCIDENCE,
    DetectorConfig,
    ScanConfig,
    SINGLES,
    SourceConfig,
)
from .spatial import (
    BeamProfile,
    MaskSpec,
    contrast_for_herald_rate,
    ellipse_region,
    make_mask,
    make_profile,
    rect_region,
    silhouette_region,
)

ENV_PREFIX = "QVAMPIRE_"

SCENARIOS = ("initial", "loss_high_contrast", "loss_low_contrast", "subtraction")

DEFAULTS: dict[str, str] = {
    "scenario": "initial",
    "grid.width": "64",
    "grid.height": "48",
    "profile.kind": "uniform_ellipse_with_ring",
    "profile.cx": "",
    "profile.cy": "",
    "profile.rx": "",
    "profile.ry": "",
    "profile.ring_gain": "1.5",
    "profile.sigma_x": "",
    "profile.sigma_y": "",
    "mask.region": "silhouette",
    "mask.contrast": "",
    "mask.herald_target": "",
    "source.nbar": "1.0",
    "source.kind": "thermal",
    "source.coherence_time": "1e-06",
    "scan.superpixel": "11",
    "scan.dwell": "0.01",
    "scan.bins_cap": "1000000",
    "scan.trigger_mode": "",
    "scan.seed": "",
    "scan.threads": "1",
    "detector.bin_width": "1.2e-08",
    "detector.herald.efficiency": "0.6",
    "detector.herald.dark_prob": "0.0",
    "detector.camera.efficiency": "0.6",
    "detector.camera.dark_prob": "0.0",
    "stats.nmax": "80",
}

# default vampire-mask contrasts per scenario when neither contrast nor
# herald target is given
_SCENARIO_CONTRAST = {
    "loss_high_contrast": "0.8",
    "loss_low_contrast": "0.3",
    "subtraction": "0.3",
}


@dataclass(frozen=True)
class ScenarioConfig:
    """Fully resolved scenario: constructed objects plus the flat echo."""

    scenario: str
    profile: BeamProfile
    mask: MaskSpec
    region: np.ndarray
    source: SourceConfig
    scan: ScanConfig
    stats_nmax: int
    echo: dict


def parse_config_text(text: str) -> dict:
    """Parse ``key=value`` lines; '#' starts a comment, blanks ignored."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigMismatch(f"line {lineno}: expected key=value, got {raw!r}")
        out[key.strip()] = value.strip()
    return out


def load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def apply_env_overrides(cfg: dict, environ) -> dict:
    """Overlay QVAMPIRE_* environment variables onto a config dict."""
    lookup = {key.replace(".", "_").upper(): key for key in DEFAULTS}
    out = dict(cfg)
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key = lookup.get(name[len(ENV_PREFIX) :])
        if key is None:
            raise ConfigMismatch(f"unknown config override {name}")
        out[key] = value
    return out


def _resolve(cfg: dict) -> dict:
    unknown = set(cfg) - set(DEFAULTS)
    if unknown:
        raise ConfigMismatch(f"unknown config keys: {sorted(unknown)}")
    merged = dict(DEFAULTS)
    merged.update(cfg)
    return merged


def _opt_float(value: str):
    return float(value) if value != "" else None


def parse_region_spec(spec: str, width: int, height: int) -> np.ndarray:
    """Pixel-set specs: all | silhouette | rect:x0,y0,w,h | ellipse:cx,cy,rx,ry."""
    if spec == "all":
        return np.ones((height, width), dtype=bool)
    if spec == "silhouette":
        return silhouette_region(width, height)
    kind, _, rest = spec.partition(":")
    if kind == "rect":
        x0, y0, w, h = (int(tok) for tok in rest.split(","))
        return rect_region(width, height, x0, y0, w, h)
    if kind == "ellipse":
        cx, cy, rx, ry = (float(tok) for tok in rest.split(","))
        return ellipse_region(width, height, cx, cy, rx, ry)
    raise ConfigMismatch(f"unknown region spec {spec!r}")


def _build_profile(merged: dict, width: int, height: int) -> BeamProfile:
    kind = merged["profile.kind"]
    params = {}
    if kind in ("uniform_ellipse", "uniform_ellipse_with_ring"):
        for name, key in (
            ("cx", "profile.cx"),
            ("cy", "profile.cy"),
            ("rx", "profile.rx"),
            ("ry", "profile.ry"),
        ):
            val = _opt_float(merged[key])
            if val is not None:
                params[name] = val
        if kind == "uniform_ellipse_with_ring":
            params["ring_gain"] = float(merged["profile.ring_gain"])
    elif kind == "gaussian":
        for name, key in (
            ("cx", "profile.cx"),
            ("cy", "profile.cy"),
            ("sigma_x", "profile.sigma_x"),
            ("sigma_y", "profile.sigma_y"),
        ):
            val = _opt_float(merged[key])
            if val is not None:
                params[name] = val
    else:
        raise ConfigMismatch(f"unknown profile kind {kind!r}")
    return make_profile(kind, width, height, **params)


def build_scenario(cfg: dict, seed: int | None = None, threads: int | None = None) -> ScenarioConfig:
    """Assemble a scenario from a flat config dict.

    The scenario fixes the parts the physics requires: the initial run
    uses the white mask, the subtraction run acquires in coincidence
    mode.  A missing seed is generated and recorded in the echo.
    """
    merged = _resolve(cfg)
    scenario = merged["scenario"]
    if scenario not in SCENARIOS:
        raise ConfigMismatch(f"unknown scenario {scenario!r}")
    width = int(merged["grid.width"])
    height = int(merged["grid.height"])
    nbar = float(merged["source.nbar"])

    profile = _build_profile(merged, width, height)

    if scenario == "initial":
        region = np.zeros((height, width), dtype=bool)
        mask = make_mask("white", width, height)
        merged["mask.contrast"] = "0.0"
    else:
        region = parse_region_spec(merged["mask.region"], width, height)
        target = _opt_float(merged["mask.herald_target"])
        if target is not None:
            contrast = contrast_for_herald_rate(profile, region, nbar, target)
        else:
            contrast = float(
                merged["mask.contrast"] or _SCENARIO_CONTRAST[scenario]
            )
        merged["mask.contrast"] = repr(contrast)
        mask = make_mask("vampire", width, height, contrast, region)

    trigger = merged["scan.trigger_mode"]
    if scenario == "subtraction":
        trigger = COINCIDENCE
    elif trigger == "":
        trigger = SINGLES
    if trigger not in (SINGLES, COINCIDENCE):
        raise ConfigMismatch(f"unknown trigger mode {trigger!r}")
    merged["scan.trigger_mode"] = trigger

    if seed is not None:
        merged["scan.seed"] = str(seed)
    if merged["scan.seed"] == "":
        merged["scan.seed"] = str(secrets.randbits(63))
    if threads is not None:
        merged["scan.threads"] = str(threads)

    bin_width = float(merged["detector.bin_width"])
    herald_det = DetectorConfig(
        efficiency=float(merged["detector.herald.efficiency"]),
        dark_prob=float(merged["detector.herald.dark_prob"]),
        bin_width=bin_width,
    )
    camera_det = DetectorConfig(
        efficiency=float(merged["detector.camera.efficiency"]),
        dark_prob=float(merged["detector.camera.dark_prob"]),
        bin_width=bin_width,
    )
    source = SourceConfig(
        nbar=nbar,
        profile=profile,
        coherence_time=float(merged["source.coherence_time"]),
        kind=merged["source.kind"],
    )
    scan = ScanConfig(
        mask=mask,
        seed=int(merged["scan.seed"]),
        superpixel=int(merged["scan.superpixel"]),
        dwell=float(merged["scan.dwell"]),
        bins_cap=int(merged["scan.bins_cap"]),
        trigger_mode=trigger,
        herald_detector=herald_det,
        camera_detector=camera_det,
        threads=int(merged["scan.threads"]),
    )
    return ScenarioConfig(
        scenario=scenario,
        profile=profile,
        mask=mask,
        region=region,
        source=source,
        scan=scan,
        stats_nmax=int(merged["stats.nmax"]),
        echo=merged,
    )
