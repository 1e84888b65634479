import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bulbleak.colorlab import (
    TABLE_BRIGHTNESS, TABLE_RESPONSES, CalibrationInvalid, DarkSample, DuplicateKnot,
    HsbColor, ResponseCalibration, RgbColor, RgbResponse, build_calibration,
    correct_response, correct_response_array, fit_lagrange, hsb_to_rgb, hsb_to_rgb_array,
    identify_hue, identify_hue_array, luminance_sensitivity, rgb_to_hsb, rgb_to_hsb_array,
    sensor_response, sensor_response_array,
)
from oracles import hsb_oracle

unit = st.floats(0.0, 1.0, allow_nan=False)


def test_white_and_primaries():
    assert tuple(rgb_to_hsb(RgbColor(1, 1, 1))) == (0.0, 0.0, 1.0)
    assert tuple(rgb_to_hsb(RgbColor(1, 0, 0))) == pytest.approx((0, 1, 1))
    h, s, b = rgb_to_hsb(RgbColor(1, 0, 1))
    assert (h, s, b) == pytest.approx((300, 1, 1))
    assert hsb_oracle(1, 0, 1) == pytest.approx((300, 1, 1))


def test_black_is_achromatic():
    assert tuple(rgb_to_hsb(RgbColor(0, 0, 0))) == (0.0, 0.0, 0.0)


def test_matches_oracle_on_random_inputs():
    rng = np.random.default_rng(1)
    rgb = rng.random((20_000, 3))
    ours = rgb_to_hsb_array(rgb)
    ref = np.array([hsb_oracle(*row) for row in rgb])
    dh = np.abs((ours[:, 0] - ref[:, 0] + 180) % 360 - 180)
    assert dh.max() < 1e-6
    assert np.abs(ours[:, 1:] - ref[:, 1:]).max() < 1e-6


@pytest.mark.parametrize("hsb,rgb", [
    ((240, 1, 1), (0, 0, 1)),
    ((123, 0, 0.5), (0.5, 0.5, 0.5)),
    ((60, 1, 1), (1, 1, 0)),
    ((0, 1, 1), (1, 0, 0)),
    ((120, 1, 0.4), (0, 0.4, 0)),
])
def test_hsb_to_rgb_anchors(hsb, rgb):
    assert tuple(hsb_to_rgb(HsbColor(*hsb))) == pytest.approx(rgb, abs=1e-12)


@given(st.floats(0, 359.999), st.floats(0.001, 1.0), st.floats(0.001, 1.0))
def test_hsb_roundtrip(h, s, b):
    back = rgb_to_hsb(hsb_to_rgb(HsbColor(h, s, b)))
    assert abs((back.hue - h + 180) % 360 - 180) < 1e-9
    assert back.saturation == pytest.approx(s, abs=1e-9)
    assert back.brightness == pytest.approx(b, abs=1e-9)


def test_hsb_normalizes_fields():
    c = HsbColor(-30, 1.5, -0.2)
    assert tuple(c) == (330.0, 1.0, 0.0)


def test_rgb_range_checked():
    with pytest.raises(ValueError):
        RgbColor(1.2, 0, 0)


# --- Lagrange -----------------------------------------------------------------

def test_lagrange_line_and_constant():
    assert np.allclose(np.trim_zeros(fit_lagrange([(0, 0), (1, 1)]), "f"), [1, 0])
    assert np.allclose(fit_lagrange([(0, 1), (1, 1), (2, 1)]), [0, 0, 1])


def test_lagrange_duplicate():
    with pytest.raises(DuplicateKnot):
        fit_lagrange([(1, 0), (1, 2)])


@pytest.mark.parametrize("channel,expected", [
    ("r", [9.8923, -8.6910, -0.2037, 2.0864, 0.1163]),
    ("b", [3.5353, -4.6515, 0.6081, 1.3907, 0.1174]),
])
def test_table2_polynomials(channel, expected):
    coeffs = fit_lagrange(list(zip(TABLE_RESPONSES[channel], TABLE_BRIGHTNESS)))
    assert np.allclose(coeffs, expected, atol=1e-3)


def test_table2_green_polynomial():
    coeffs = fit_lagrange(list(zip(TABLE_RESPONSES["g"], TABLE_BRIGHTNESS)))
    assert np.allclose(coeffs, [979.13, -304.98, 7.1778, 5.8836, 0.1198], rtol=1e-3, atol=1e-3)


@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=2, max_size=6,
                unique_by=lambda k: round(k[0], 1)))
def test_lagrange_passes_through_knots(knots):
    coeffs = fit_lagrange(knots)
    for x, y in knots:
        assert abs(np.polyval(coeffs, x) - y) < 1e-9 * max(1.0, np.abs(coeffs).max())


def test_red_quartic_at_knots(cal):
    p = cal.polynomials[0]
    assert np.polyval(p, 0.741883) == pytest.approx(1.0, abs=1e-3)
    assert np.polyval(p, 0.04052) == pytest.approx(0.2, abs=1e-3)


# --- sensor model -----------------------------------------------------------

def test_forward_model_reproduces_table(cal):
    for i, level in enumerate(TABLE_BRIGHTNESS):
        d = sensor_response(RgbColor(level, level, level), cal)
        expected = [TABLE_RESPONSES[c][i] for c in "rgb"]
        assert tuple(d) == pytest.approx(expected, abs=1e-6)
    assert tuple(sensor_response(RgbColor(0, 0, 0), cal)) == (0, 0, 0)


def test_forward_model_monotone(cal):
    x = np.linspace(0, 1, 501)
    resp = sensor_response_array(np.stack([x, x, x], axis=1), cal)
    assert (np.diff(resp, axis=0) > 0).all()


def test_correction_at_table_rows(cal):
    assert tuple(correct_response(RgbResponse(0.741883, 0.242022, 1.0), cal)) == pytest.approx((1, 1, 1), abs=1e-3)
    assert tuple(correct_response(RgbResponse(0.04052, 0.013536, 0.058512), cal)) == pytest.approx((0.2, 0.2, 0.2), abs=1e-3)


def test_correction_at_zero(cal):
    assert tuple(correct_response(RgbResponse(0, 0, 0), cal, below_knots="polynomial")) == pytest.approx(
        (0.1163, 0.1198, 0.1174), abs=1e-3)
    assert tuple(correct_response(RgbResponse(0, 0, 0), cal)) == (0, 0, 0)


def test_correction_inverts_forward_on_grid(cal):
    grid = np.array(TABLE_BRIGHTNESS)
    rgb = np.array(np.meshgrid(grid, grid, grid)).reshape(3, -1).T
    back = correct_response_array(sensor_response_array(rgb, cal), cal)
    assert np.abs(back - rgb).max() < 2e-3


def test_correction_inverts_forward_random(cal):
    rgb = np.random.default_rng(3).uniform(0.2, 1.0, (20_000, 3))
    back = correct_response_array(sensor_response_array(rgb, cal), cal)
    assert np.abs(back - rgb).max() < 0.05


def test_correction_output_range(cal):
    d = np.random.default_rng(0).uniform(0, 1.3, (5000, 3))
    out = correct_response_array(d, cal)
    assert out.min() >= 0 and out.max() <= 1.02


# --- hue identification ----------------------------------------------------

def test_hue_brightness_invariance_all_bins(cal):
    hues = np.arange(360)
    for level in (0.3, 0.6, 1.0):
        hsb = np.stack([hues, np.ones(360), np.full(360, level)], axis=1)
        bins = identify_hue_array(sensor_response_array(hsb_to_rgb_array(hsb), cal), cal)
        assert (bins == hues).all()


def test_green_at_three_levels(cal):
    for level in (0.3, 0.6, 1.0):
        assert identify_hue(sensor_response(hsb_to_rgb(HsbColor(120, 1, level)), cal), cal) == 120


def test_only_blue(cal):
    assert abs(identify_hue(RgbResponse(0, 0, 0.4), cal) - 240) <= 5


def test_dark_sample(cal):
    with pytest.raises(DarkSample):
        identify_hue(RgbResponse(0, 0, 0), cal)


def test_luminance_sensitivity(cal):
    top = int(np.argmax(cal.luminance))
    assert luminance_sensitivity(top, cal) == 1.0
    assert luminance_sensitivity(17, cal) == luminance_sensitivity(17, cal)
    assert luminance_sensitivity(0, cal) != luminance_sensitivity(120, cal)
    assert all(0 < v <= 1 for v in cal.luminance)


# --- calibration file -------------------------------------------------------

def test_factor_rows_sum_to_one(cal):
    assert np.allclose(cal.hue_factors.sum(axis=1), 1.0)


def test_shipped_calibration_is_reproducible(cal):
    fresh = build_calibration()
    assert np.allclose(fresh.hue_factors, cal.hue_factors, atol=1e-11)
    assert np.allclose(fresh.luminance, cal.luminance, atol=1e-11)


def test_calibration_save_load(tmp_path, cal):
    cal.save(tmp_path / "x.cal")
    again = ResponseCalibration.load(tmp_path / "x.cal")
    assert again.knots == cal.knots
    assert np.allclose(again.hue_factors, cal.hue_factors)


def test_non_monotone_knots_rejected():
    knots = dict(TABLE_RESPONSES)
    knots["g"] = (0.01, 0.05, 0.04, 0.2, 0.24)
    with pytest.raises(CalibrationInvalid):
        build_calibration(knots=knots)


def test_alternate_calibration():
    # a dimmer bulb with a weaker green channel still yields a valid table
    knots = {c: tuple(v * 0.9 for v in TABLE_RESPONSES[c]) for c in "rgb"}
    alt = build_calibration(knots=knots, name="dim")
    assert alt.reference_peak == pytest.approx(0.9)
    assert np.allclose(alt.hue_factors.sum(axis=1), 1.0)


def test_agrees_with_literal_acos_formula():
    rng = np.random.default_rng(5)
    for r, g, b in rng.random((2000, 3)):
        cos_h = 0.5 * ((r - g) + (r - b)) / math.sqrt((r - g) ** 2 + (r - b) * (g - b))
        h = math.degrees(math.acos(max(-1.0, min(1.0, cos_h))))
        if b > g:
            h = 360.0 - h
        ours = rgb_to_hsb(RgbColor(r, g, b)).hue
        assert abs((ours - h + 180) % 360 - 180) < 1e-6
