"""Command-line front end: profile, scan, verify, analyze.

Exit codes: 0 on success, 1 on validation or I/O problems, 2 when the
verification suite finds an operator-model fidelity breach (a scientific
failure, not a usage one).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, fock, montecarlo as mc, spatial, verify
from .config import ScenarioConfig, apply_env_overrides, build_scenario, load_config, parse_region_spec
from .errors import QVampireError

VERIFY_CSV_HEADER = "state,c_A,r,herald_model,fidelity,herald_prob,complement_population"
RATIO_CSV_HEADER = "row,col,ratio,sigma,tag"
CUT_CSV_HEADER = "x,scan_value,scan_sigma,ref_value,ref_sigma"
FIDELITY_FLOOR = 1.0 - 1e-9

DEFAULT_STATES = "thermal:0.5,thermal:1,coherent:1,fock:1,fock:2,fock:3"
DEFAULT_CA = "0.1,0.5,0.9"
DEFAULT_R = "0.05,0.1,0.2"


def _load_scenario(args) -> ScenarioConfig:
    cfg = load_config(args.config)
    cfg = apply_env_overrides(cfg, os.environ)
    seed = getattr(args, "seed", None)
    threads = getattr(args, "threads", None)
    return build_scenario(cfg, seed=seed, threads=threads)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _analytic_map(scenario: ScenarioConfig) -> np.ndarray:
    nbar = scenario.source.nbar
    if scenario.scenario == "initial":
        return scenario.profile.power() * nbar
    if scenario.scenario in ("loss_high_contrast", "loss_low_contrast"):
        return spatial.loss_profile(scenario.profile, scenario.mask, nbar)
    nmax = scenario.stats_nmax
    if scenario.source.kind == mc.THERMAL:
        stats = fock.stats(fock.make_thermal(nbar, nmax))
    else:
        stats = fock.stats(fock.make_coherent(math.sqrt(nbar), nmax))
    return spatial.subtracted_profile_analytic(
        scenario.profile, scenario.mask, stats, nbar
    )


def cmd_profile(args) -> int:
    scenario = _load_scenario(args)
    out = _outdir(args)
    intensity = _analytic_map(scenario)
    spatial.save_matrix_csv(out / "intensity.csv", intensity)
    peak = intensity.max()
    spatial.save_pgm(out / "intensity.pgm", intensity / peak if peak > 0 else intensity)
    spatial.save_profile_csv(out / "profile.csv", scenario.profile)
    spatial.save_mask_csv(out / "mask.csv", scenario.mask)
    spatial.save_mask_pgm(out / "mask.pgm", scenario.mask)
    mc.save_sidecar(out / "profile.cfg", scenario.echo)
    rate = spatial.herald_rate(scenario.profile, scenario.mask, scenario.source.nbar)
    print(f"herald_rate={rate!r}")
    return 0


def cmd_scan(args) -> int:
    scenario = _load_scenario(args)
    out = _outdir(args)
    result = mc.run_scan(scenario.source, scenario.scan)
    echo = dict(scenario.echo)
    echo.update(result.config)
    mc.save_scan_csv(out / "scan.csv", result)
    mc.save_sidecar(out / "scan.cfg", echo)
    total = result.grid("camera_counts").sum()
    print(
        f"scan complete: {result.n_rows}x{result.n_cols} superpixels, "
        f"seed={scenario.scan.seed}, camera_counts={total}"
    )
    return 0


def _parse_state(spec: str, nmax: int) -> fock.DensityMatrix:
    kind, _, value = spec.partition(":")
    if kind == "thermal":
        return fock.make_thermal(float(value), nmax)
    if kind == "coherent":
        return fock.make_coherent(complex(value), nmax)
    if kind == "fock":
        return fock.make_fock(int(value), nmax)
    raise QVampireError(f"unknown state spec {spec!r}")


def _split_list(text: str) -> list[str]:
    return [tok for tok in (t.strip() for t in text.split(",")) if tok]


def cmd_verify(args) -> int:
    states = _split_list(args.states)
    cas = [float(v) for v in _split_list(args.ca)]
    rs = [float(v) for v in _split_list(args.r)]
    models = _split_list(args.models)
    if not states or not cas or not rs or not models:
        print("verify: empty sweep (need states, ca, r and models)", file=sys.stderr)
        return 1
    for model in models:
        if model not in verify.HERALD_MODELS:
            print(f"verify: unknown herald model {model!r}", file=sys.stderr)
            return 1
    out = _outdir(args)
    rows = []
    breached = False
    for spec in states:
        rho = _parse_state(spec, args.nmax)
        direct, _ = fock.subtract_photon(rho)
        for c_a in cas:
            for r in rs:
                for model in models:
                    res = verify.regional_subtraction(
                        rho, verify.SplitConfig(c_a=c_a, r=r, herald_model=model)
                    )
                    fid = fock.fidelity(res.state, direct)
                    ok = fid >= FIDELITY_FLOOR
                    if model == verify.OPERATOR:
                        breached = breached or not ok
                        status = "PASS" if ok else "FAIL"
                    else:
                        status = "INFO"
                    print(
                        f"{status} {spec} c_A={c_a} r={r} {model}: "
                        f"fidelity={fid:.12f} herald_prob={res.herald_prob:.6e}"
                    )
                    rows.append(
                        f"{spec},{c_a!r},{r!r},{model},{fid!r},"
                        f"{res.herald_prob!r},{res.complement_population!r}"
                    )
    with open(out / "verify.csv", "w", encoding="ascii") as fh:
        fh.write(VERIFY_CSV_HEADER + "\n")
        fh.write("\n".join(rows) + "\n")
    if breached:
        print("verify: operator-model fidelity breach", file=sys.stderr)
        return 2
    return 0


def _sidecar_for(path: Path) -> dict:
    sidecar = path.with_suffix(".cfg")
    return mc.load_sidecar(sidecar) if sidecar.exists() else {}


def _region_fracs(result: mc.ScanResult) -> np.ndarray:
    cfg = result.config
    try:
        width = int(cfg["grid.width"])
        height = int(cfg["grid.height"])
        superpixel = int(cfg["scan.superpixel"])
        if cfg.get("scenario") == "initial":
            raise KeyError("initial scenario has no mask region")
        region = parse_region_spec(cfg["mask.region"], width, height)
    except (KeyError, ValueError):
        return np.zeros((result.n_rows, result.n_cols))
    return analysis.region_fraction_map(region, superpixel, result.n_rows, result.n_cols)


def cmd_analyze(args) -> int:
    scan_path = Path(args.scan)
    result = mc.load_scan_csv(scan_path, config=_sidecar_for(scan_path))
    out = _outdir(args)
    fracs = _region_fracs(result)

    if args.reference:
        ref_path = Path(args.reference)
        reference = mc.load_scan_csv(ref_path, config=_sidecar_for(ref_path))
        if (reference.n_rows, reference.n_cols) != (result.n_rows, result.n_cols):
            raise QVampireError(
                f"superpixel grids differ: scan {result.n_rows}x{result.n_cols} "
                f"vs reference {reference.n_rows}x{reference.n_cols}"
            )
        num, num_s = result.camera_rate_map()
        den, den_s = reference.camera_rate_map()
    else:
        maps = mc.conditional_profile_mc(result)
        num, num_s = maps.conditional.values, maps.conditional.sigmas
        den, den_s = maps.unconditional.values, maps.unconditional.sigmas

    rmap = analysis.ratio_map(num, num_s, den, den_s, fracs)
    flat = analysis.flatness_test(rmap)
    try:
        depth, z = analysis.shadow_depth(rmap)
    except QVampireError:
        depth, z = float("nan"), float("nan")

    cam = int(result.grid("camera_counts").sum())
    her = int(result.grid("herald_counts").sum())
    both = int(result.grid("coincidence_counts").sum())
    bins = int(result.grid("n_bins").sum())
    if her > 0 and cam > 0:
        g2, g2_sigma = analysis.g2_estimate(cam, her, both, bins)
    else:
        g2, g2_sigma = float("nan"), float("nan")

    if math.isnan(z):
        verdict = "NONFLAT" if flat.p_value < 0.01 else "NO_SHADOW"
    elif flat.p_value < 0.01 and z > 3.0:
        verdict = "SHADOW"
    elif flat.p_value > 0.01 and abs(z) < 3.0:
        verdict = "NO_SHADOW"
    else:
        verdict = "AMBIGUOUS"

    with open(out / "ratio_map.csv", "w", encoding="ascii") as fh:
        fh.write(RATIO_CSV_HEADER + "\n")
        for row in range(result.n_rows):
            for col in range(result.n_cols):
                fh.write(
                    f"{row},{col},{float(rmap.ratio[row, col])!r},"
                    f"{float(rmap.sigma[row, col])!r},{rmap.tags[row, col]}\n"
                )

    if args.band:
        lo, hi = (int(tok) for tok in args.band.split(":"))
    else:
        lo = result.n_rows // 3
        hi = max(lo + 1, (2 * result.n_rows) // 3)
    x, cut_num, cut_num_s = analysis.profile_cut(num, num_s, lo, hi)
    _, cut_den, cut_den_s = analysis.profile_cut(den, den_s, lo, hi)
    with open(out / "cut.csv", "w", encoding="ascii") as fh:
        fh.write(CUT_CSV_HEADER + "\n")
        for i in range(x.size):
            fh.write(
                f"{float(x[i])!r},{float(cut_num[i])!r},{float(cut_num_s[i])!r},"
                f"{float(cut_den[i])!r},{float(cut_den_s[i])!r}\n"
            )

    summary = {
        "chi2": repr(flat.chi2),
        "dof": str(flat.dof),
        "p_value": repr(flat.p_value),
        "best_const": repr(flat.best_const),
        "depth": repr(depth),
        "z_score": repr(z),
        "g2": repr(g2),
        "g2_sigma": repr(g2_sigma),
        "band": f"{lo}:{hi}",
        "verdict": verdict,
    }
    mc.save_sidecar(out / "summary.txt", summary)
    print(f"verdict={verdict} p_value={flat.p_value:.4g} best_const={flat.best_const:.4f} z={z:.2f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qvampire",
        description="Heralded photon-subtraction imaging simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="write analytic intensity maps for a scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("scan", help="run the Monte Carlo raster scan")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("verify", help="brute-force regional-subtraction check")
    p.add_argument("--out", required=True)
    p.add_argument("--states", default=DEFAULT_STATES)
    p.add_argument("--ca", default=DEFAULT_CA)
    p.add_argument("--r", default=DEFAULT_R)
    p.add_argument("--models", default=verify.OPERATOR)
    p.add_argument("--nmax", type=int, default=verify.DEFAULT_VERIFY_NMAX)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("analyze", help="ratio maps, flatness/shadow verdict, g2")
    p.add_argument("--scan", required=True)
    p.add_argument("--reference", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--band", default=None)
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (QVampireError, OSError, ValueError) as exc:
        print(f"qvampire: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
