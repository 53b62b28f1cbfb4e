import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subwave.chains import DimerCell
from subwave.topology import (
    AmbiguousError,
    DegeneratePointError,
    OriginProximityError,
    UnderResolvedError,
    alpha_grid,
    band_gap_check,
    band_inversion_check,
    classify_bloch_vector,
    compute_band_structure,
    unwrap_theta,
    winding_number,
    zak_phase,
)

DELTA = 1e-3
DILUTE = DimerCell(12.0, 42.0)
NON_DILUTE = DimerCell(3.0, 6.0)


@pytest.fixture(scope="module")
def bands():
    return {
        key: compute_band_structure(cell, DELTA, 64)
        for key, cell in {
            "dilute": DILUTE,
            "dilute_swapped": DILUTE.swapped(),
            "non_dilute": NON_DILUTE,
            "non_dilute_swapped": NON_DILUTE.swapped(),
        }.items()
    }


class TestGrid:
    @pytest.mark.parametrize("n", [16, 64, 129])
    def test_grid_ends_at_zone_edge_and_contains_zero_for_even_n(self, n):
        a = alpha_grid(54.0, n)
        assert a.size == n
        assert a[-1] * 54.0 == pytest.approx(math.pi)
        assert a[0] > -math.pi / 54.0
        assert (np.any(np.isclose(a, 0.0, atol=1e-15))) == (n % 2 == 0)

    def test_too_coarse_rejected(self):
        with pytest.raises(ValueError):
            compute_band_structure(DILUTE, DELTA, 8)

    def test_bad_delta_rejected(self):
        with pytest.raises(ValueError):
            compute_band_structure(DILUTE, 1.5, 64)


class TestBandStructure:
    def test_zero_momentum_point_has_vanishing_acoustic_band(self, bands):
        bs = bands["dilute"]
        i = int(np.argmin(np.abs(bs.alphas)))
        assert bs.alphas[i] == 0.0
        assert bs.omega1[i] == pytest.approx(0.0, abs=1e-12)

    def test_bands_ordered(self, bands):
        for bs in bands.values():
            assert np.all(bs.omega1 <= bs.omega2)

    def test_bands_even_in_alpha(self, bands):
        bs = bands["dilute"]
        inner = bs.omega1[:-1]
        # grid is symmetric about zero apart from the zone edge
        assert np.allclose(inner, inner[::-1], rtol=1e-10)

    def test_swapping_leaves_bands_unchanged(self, bands):
        assert np.allclose(bands["dilute"].omega1, bands["dilute_swapped"].omega1, rtol=1e-10)
        assert np.allclose(bands["dilute"].omega2, bands["dilute_swapped"].omega2, rtol=1e-10)


class TestZakPhase:
    @pytest.mark.parametrize("n", [64, 128, 256])
    def test_dilute_pair(self, n):
        assert zak_phase(compute_band_structure(DILUTE, DELTA, n)).value == 0.0
        assert zak_phase(compute_band_structure(DILUTE.swapped(), DELTA, n)).value == pytest.approx(math.pi)

    def test_non_dilute_swap_differs_by_pi(self, bands):
        a = zak_phase(bands["non_dilute"]).value
        b = zak_phase(bands["non_dilute_swapped"]).value
        assert abs(a - b) == pytest.approx(math.pi)

    def test_winding_matches_zak(self, bands):
        assert zak_phase(bands["dilute"]).winding == 0
        assert zak_phase(bands["dilute_swapped"]).winding == -1

    @pytest.mark.parametrize("key", ["dilute", "dilute_swapped", "non_dilute", "non_dilute_swapped"])
    def test_winding_of_c12_curve_matches(self, bands, key):
        bs = bands[key]
        assert winding_number(bs.c12) == zak_phase(bs).winding

    def test_higher_order_agrees(self):
        assert zak_phase(compute_band_structure(NON_DILUTE, DELTA, 64, order=2)).value == 0.0

    def test_equal_spacing_is_degenerate(self):
        cell = DimerCell(20.0, 20.0)
        with pytest.raises(DegeneratePointError):
            zak_phase(compute_band_structure(cell, DELTA, 64))

    def test_unwrap_is_closed(self, bands):
        u = unwrap_theta(bands["dilute_swapped"])
        assert u.net_change == pytest.approx(-2 * math.pi, abs=1e-6)
        assert u.total_variation >= abs(u.net_change)

    def test_near_degenerate_cell_needs_finer_grid(self):
        cell = DimerCell(27.01, 26.99)
        with pytest.raises(UnderResolvedError):
            zak_phase(compute_band_structure(cell, DELTA, 64))
        assert zak_phase(compute_band_structure(cell, DELTA, 256)).value == pytest.approx(math.pi)


class TestGapAndInversion:
    @pytest.mark.parametrize("key", ["dilute", "dilute_swapped", "non_dilute", "non_dilute_swapped"])
    def test_gap_opens(self, bands, key):
        bs = bands[key]
        gap = band_gap_check(bs, 0.05 * math.pi / bs.cell.L)
        assert gap.has_gap and gap.width > 0

    def test_dilute_gap_width(self, bands):
        gap = band_gap_check(bands["dilute"], 0.05 * math.pi / 54.0)
        assert gap.width == pytest.approx(0.0031913, rel=1e-3)

    def test_bad_cutoff(self, bands):
        with pytest.raises(ValueError):
            band_gap_check(bands["dilute"], 0.0)

    @pytest.mark.parametrize("cell", [DILUTE, NON_DILUTE])
    def test_inversion_between_swapped_cells(self, cell):
        report = band_inversion_check(cell, cell.swapped(), DELTA)
        assert report.inverted
        assert set(report.labels_a) == {"monopole", "dipole"}
        assert report.moduli_defect < 1e-8

    def test_no_inversion_against_itself(self):
        assert not band_inversion_check(DILUTE, DILUTE, DELTA).inverted

    def test_classify(self):
        assert classify_bloch_vector(np.array([1, 1]) / math.sqrt(2)) == "monopole"
        assert classify_bloch_vector(1j * np.array([1, -1]) / math.sqrt(2)) == "dipole"
        with pytest.raises(AmbiguousError):
            classify_bloch_vector(np.array([1.0, 0.0]))


class TestWindingNumber:
    @given(st.integers(-4, 4), st.floats(0.1, 3.0))
    @settings(max_examples=40, deadline=None)
    def test_circle(self, w, radius):
        t = np.linspace(0, 2 * math.pi, 64, endpoint=False)
        z = radius * np.exp(1j * w * t)
        if w == 0:
            z = z + 2 * radius
        assert winding_number(z) == w

    def test_off_center_loop(self):
        t = np.linspace(0, 2 * math.pi, 200, endpoint=False)
        assert winding_number(3.0 + np.exp(1j * t)) == 0
        assert winding_number(0.5 + np.exp(1j * t)) == 1

    def test_origin_rejected(self):
        with pytest.raises(OriginProximityError):
            winding_number([1.0, 0.0, -1.0j])
