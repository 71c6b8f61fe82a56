"""Beam-profile and mask tests with direct-summation oracles."""

import math

import numpy as np
import pytest

from qvampire import fock, spatial
from qvampire.errors import DegenerateShape, DimensionMismatch, WeakCouplingViolated


def uniform_profile(width, height):
    """Flat profile: every pixel carries power 1/(width*height)."""
    return spatial.BeamProfile(np.full((height, width), 1.0 / math.sqrt(width * height)))


# ---------------------------------------------------------------------------
# profiles


def test_gaussian_single_pixel_grid():
    prof = spatial.make_profile("gaussian", 1, 1, sigma_x=1.0, sigma_y=1.0)
    assert prof.amplitude[0, 0] == 1.0


def test_uniform_ellipse_equal_amplitudes_and_normalized():
    prof = spatial.make_profile("uniform_ellipse", 32, 24, rx=12, ry=9)
    inside = prof.amplitude > 0
    vals = prof.amplitude[inside]
    assert np.allclose(vals, vals[0])
    assert abs(prof.power().sum() - 1.0) < 1e-12
    assert abs(vals[0] - 1.0 / math.sqrt(inside.sum())) < 1e-12


def test_ring_pixels_carry_gain_before_normalization():
    prof = spatial.make_profile(
        "uniform_ellipse_with_ring", 32, 24, rx=12, ry=9, ring_gain=1.5
    )
    vals = np.unique(np.round(prof.amplitude[prof.amplitude > 0], 14))
    assert vals.size == 2
    assert abs(vals[1] / vals[0] - 1.5) < 1e-12


def test_degenerate_profile_rejected():
    with pytest.raises(DegenerateShape):
        spatial.make_profile("uniform_ellipse", 20, 20, cx=-50.0, cy=-50.0, rx=1, ry=1)
    with pytest.raises(ValueError):
        spatial.make_profile("donut", 8, 8)


def test_silhouette_region_is_nonempty_pixel_set():
    region = spatial.silhouette_region(64, 48)
    assert region.dtype == bool and region.shape == (48, 64)
    assert 0 < region.sum() < region.size


# ---------------------------------------------------------------------------
# masks and reduction


def test_white_mask_reduces_to_zero_coupling():
    prof = uniform_profile(10, 10)
    mask = spatial.make_mask("white", 10, 10)
    red = spatial.reduce(prof, mask)
    assert red.r_eff == 0.0
    assert red.c_a == 0.0
    assert red.reflected_profile is None
    assert np.allclose(red.transmitted_profile.amplitude, prof.amplitude)


def test_full_blocking_mask():
    region = spatial.rect_region(10, 10, 0, 0, 10, 5)
    mask = spatial.make_mask("vampire", 10, 10, contrast=1.0, region=region)
    assert np.all(mask.transmission[region] == 0.0)
    assert np.all(mask.transmission[~region] == 1.0)


def test_r_eff_matches_direct_sum_oracle():
    # region holding exactly 20% of the power of a flat beam, contrast 0.3
    prof = uniform_profile(10, 10)
    region = spatial.rect_region(10, 10, 0, 0, 10, 2)
    mask = spatial.make_mask("vampire", 10, 10, contrast=0.3, region=region)
    red = spatial.reduce(prof, mask)
    oracle = math.sqrt(float((mask.reflectivity() ** 2 * prof.power()).sum()))
    assert abs(red.r_eff - oracle) < 1e-15
    assert abs(red.r_eff - 0.3 * math.sqrt(0.2)) < 1e-12
    assert abs(red.c_a - math.sqrt(0.2)) < 1e-12


def test_uniform_mask_over_full_beam():
    prof = uniform_profile(8, 8)
    mask = spatial.make_mask(
        "vampire", 8, 8, contrast=0.25, region=np.ones((8, 8), dtype=bool)
    )
    red = spatial.reduce(prof, mask)
    assert abs(red.r_eff - 0.25) < 1e-12
    assert abs(red.c_a - 1.0) < 1e-12
    assert np.allclose(red.transmitted_profile.amplitude, prof.amplitude)
    # uniform mask over its active region: r_eff = contrast * c_a
    assert abs(red.r_eff - 0.25 * red.c_a) < 1e-12


def test_reduce_against_elementwise_oracle():
    rng = np.random.default_rng(5)
    amp = rng.random((6, 7)) + 0.1
    prof = spatial.BeamProfile(amp / np.sqrt((amp**2).sum()))
    t = 0.5 + 0.5 * rng.random((6, 7))
    mask = spatial.MaskSpec(t)
    red = spatial.reduce(prof, mask)
    expected = t * prof.amplitude
    expected /= np.sqrt((expected**2).sum())
    assert np.abs(red.transmitted_profile.amplitude - expected).max() < 1e-14
    r = np.sqrt(1 - t**2)
    expected_r = r * prof.amplitude
    expected_r /= np.sqrt((expected_r**2).sum())
    assert np.abs(red.reflected_profile.amplitude - expected_r).max() < 1e-14


def test_reduce_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        spatial.reduce(uniform_profile(4, 4), spatial.make_mask("white", 5, 4))


def test_herald_rate_relations():
    prof = uniform_profile(10, 10)
    region = spatial.rect_region(10, 10, 0, 0, 10, 2)
    mask = spatial.make_mask("vampire", 10, 10, contrast=0.3, region=region)
    nbar = 1.7
    rate = spatial.herald_rate(prof, mask, nbar)
    red = spatial.reduce(prof, mask)
    assert abs(math.sqrt(rate / nbar) - red.r_eff) < 1e-12
    assert spatial.herald_rate(prof, spatial.make_mask("white", 10, 10), nbar) == 0.0


def test_contrast_for_herald_rate_tunes_operating_point():
    prof = uniform_profile(10, 10)
    region = spatial.rect_region(10, 10, 0, 0, 10, 2)
    for target in (1.0 * 0.1, 0.13 * 0.1):
        c = spatial.contrast_for_herald_rate(prof, region, nbar=1.0, target=target)
        mask = spatial.make_mask("vampire", 10, 10, contrast=c, region=region)
        assert abs(spatial.herald_rate(prof, mask, 1.0) - target) < 1e-12
    with pytest.raises(ValueError):
        spatial.contrast_for_herald_rate(prof, region, nbar=1.0, target=10.0)


# ---------------------------------------------------------------------------
# analytic intensity maps


def test_loss_profile_white_and_blocked():
    prof = uniform_profile(10, 10)
    nbar = 2.0
    white = spatial.loss_profile(prof, spatial.make_mask("white", 10, 10), nbar)
    assert np.abs(white - prof.power() * nbar).max() < 1e-15
    region = spatial.rect_region(10, 10, 2, 2, 3, 3)
    blocked = spatial.loss_profile(
        prof, spatial.make_mask("vampire", 10, 10, 1.0, region), nbar
    )
    assert np.all(blocked[region] == 0.0)
    assert np.abs(blocked[~region] - nbar / 100.0).max() < 1e-15


def test_subtracted_profile_is_g2_times_loss_profile():
    prof = uniform_profile(12, 12)
    region = spatial.rect_region(12, 12, 3, 3, 4, 4)
    mask = spatial.make_mask("vampire", 12, 12, contrast=0.3, region=region)
    nbar = 1.0
    for rho, g2 in [
        (fock.make_thermal(1.0, 40), 2.0),
        (fock.make_coherent(1.0, 30), 1.0),
        (fock.make_fock(5, 20), 0.8),
    ]:
        st = fock.stats(rho)
        cond = spatial.subtracted_profile_analytic(prof, mask, st, nbar)
        unc = spatial.loss_profile(prof, mask, nbar)
        ratio = cond[unc > 0] / unc[unc > 0]
        assert np.abs(ratio - st.g2).max() < 1e-12
        assert abs(st.g2 - g2) < 1e-7


def test_weak_coupling_warning():
    prof = uniform_profile(10, 10)
    mask = spatial.make_mask(
        "vampire", 10, 10, contrast=0.9, region=np.ones((10, 10), dtype=bool)
    )
    st = fock.StateStats(mean_n=1.0, g2=2.0)
    with pytest.warns(WeakCouplingViolated):
        spatial.subtracted_profile_analytic(prof, mask, st, 1.0)


# ---------------------------------------------------------------------------
# serialization


def test_profile_csv_roundtrip(tmp_path):
    prof = spatial.make_profile("uniform_ellipse_with_ring", 20, 16, rx=8, ry=6)
    path = tmp_path / "profile.csv"
    spatial.save_profile_csv(path, prof)
    with open(path) as fh:
        assert fh.readline().strip() == "20,16"
    back = spatial.load_profile_csv(path)
    assert np.abs(back.amplitude - prof.amplitude).max() < 1e-15


def test_mask_csv_and_pgm_roundtrip(tmp_path):
    region = spatial.silhouette_region(20, 16)
    mask = spatial.make_mask("vampire", 20, 16, contrast=0.5, region=region)
    csv_path = tmp_path / "mask.csv"
    spatial.save_mask_csv(csv_path, mask)
    assert np.abs(spatial.load_mask_csv(csv_path).transmission - mask.transmission).max() < 1e-15
    pgm_path = tmp_path / "mask.pgm"
    spatial.save_mask_pgm(pgm_path, mask)
    back = spatial.load_mask_pgm(pgm_path)
    # PGM is 8-bit: transmissions survive to half a level
    assert np.abs(back.transmission - mask.transmission).max() <= 0.5 / 255.0
    with open(pgm_path, "rb") as fh:
        assert fh.readline() == b"P5\n"
        assert fh.readline() == b"20 16\n"
        assert fh.readline() == b"255\n"
