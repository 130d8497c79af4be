import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from junctionfab.errors import GeometryDomainError
from junctionfab.features.geometry import (
    DolanMask, EvaporationStep, Regime, StackGeometry, angle_tolerance, effective_opening,
    junction_area, max_bridge_for_full_overlay, overlay, shadow_shift, shift_sensitivity,
)

STACK = StackGeometry()
NORMAL = EvaporationStep(angle=0.0)


def test_shadow_shift_reference_angles():
    assert shadow_shift(STACK, 40.0) == pytest.approx(419.6, abs=0.1)
    assert shadow_shift(STACK, 35.0) == pytest.approx(350.1, abs=0.1)
    assert shadow_shift(STACK, 0.0) == 0.0


@pytest.mark.parametrize("angle", [-1.0, 90.0, 95.0, math.nan])
def test_shadow_shift_rejects_angles_outside_domain(angle):
    with pytest.raises(GeometryDomainError):
        shadow_shift(STACK, angle)


def test_full_overlay_at_forty_degrees():
    result = overlay(STACK, DolanMask(), EvaporationStep(angle=40.0), NORMAL)

    assert result.regime is Regime.FULL
    assert result.overlap_width == pytest.approx(170.0)
    assert result.area == pytest.approx(0.0255)
    assert result.area_angle_sensitivity == 0.0
    assert result.margin > 0


def test_partial_overlay_at_thirty_five_degrees():
    mask = DolanMask(bottom_window=260.0)

    result = overlay(STACK, mask, EvaporationStep(angle=35.0), NORMAL)

    assert result.regime is Regime.PARTIAL
    assert result.overlap_width == pytest.approx(200.1, abs=0.1)
    assert result.area_angle_sensitivity > 0
    assert result.margin < 0


def test_no_overlap_at_normal_incidence():
    result = overlay(STACK, DolanMask(), NORMAL, NORMAL)

    assert result.regime is Regime.NONE
    assert result.overlap_width == 0.0
    assert result.area == 0.0


def test_partial_sensitivity_matches_finite_difference():
    mask = DolanMask(bottom_window=260.0)
    a = overlay(STACK, mask, EvaporationStep(angle=34.99), NORMAL).area
    b = overlay(STACK, mask, EvaporationStep(angle=35.01), NORMAL).area
    analytic = overlay(STACK, mask, EvaporationStep(angle=35.0), NORMAL).area_angle_sensitivity

    assert (b - a) / 0.02 == pytest.approx(analytic, rel=1e-3)


def test_tilt_axis_swaps_roles():
    mask = DolanMask(bottom_window=150.0, junction_length=170.0, tilt_axis="junction_length")

    result = overlay(STACK, mask, EvaporationStep(angle=40.0), NORMAL)

    assert result.overlap_width == pytest.approx(170.0)
    assert result.area == pytest.approx(0.0255)


def test_with_extents_respects_tilt_axis():
    mask = DolanMask().with_extents(240.0, 460.0)
    assert (mask.bottom_window, mask.junction_length) == (240.0, 460.0)

    swapped = DolanMask(tilt_axis="junction_length").with_extents(240.0, 460.0)
    assert (swapped.junction_length, swapped.bottom_window) == (240.0, 460.0)


def test_effective_opening_clamps_at_zero():
    assert effective_opening(200.0, STACK, 0.0) == 200.0
    assert effective_opening(200.0, STACK, 45.0) == pytest.approx(100.0)
    assert effective_opening(50.0, STACK, 60.0) == 0.0
    with pytest.raises(GeometryDomainError):
        effective_opening(0.0, STACK, 10.0)


def test_junction_area_units():
    assert junction_area(150.0, 170.0) == pytest.approx(0.0255)
    with pytest.raises(GeometryDomainError):
        junction_area(-1.0, 170.0)


def test_angle_tolerance_full_and_partial():
    full = angle_tolerance(STACK, DolanMask(), EvaporationStep(angle=40.0), NORMAL)
    assert full > 0
    # moving the angle by less than the tolerance keeps the overlay Full
    nudged = overlay(STACK, DolanMask(), EvaporationStep(angle=40.0 + 0.9 * full), NORMAL)
    assert nudged.regime is Regime.FULL

    partial = angle_tolerance(STACK, DolanMask(bottom_window=260.0), EvaporationStep(angle=35.0), NORMAL)
    assert partial == 0.0


def test_max_bridge_for_full_overlay():
    mask = DolanMask()
    widest = max_bridge_for_full_overlay(STACK, mask, 40.0)

    assert widest == pytest.approx(shadow_shift(STACK, 40.0) - 170.0)
    assert max_bridge_for_full_overlay(STACK, mask, 0.0) == 0.0


def test_clipping_is_flagged():
    stack = StackGeometry(undercut=0.0)
    mask = DolanMask(top_window=200.0)

    result = overlay(stack, mask, EvaporationStep(angle=60.0), NORMAL)

    assert result.clipped is True


def test_invalid_stack_rejected():
    with pytest.raises(ValueError):
        StackGeometry(copolymer_thickness=0.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=0.0, max_value=80.0))
def test_shift_monotone_in_angle(angle):
    assert shadow_shift(STACK, angle) <= shadow_shift(STACK, angle + 1.0)
    assert shift_sensitivity(STACK, angle) > 0


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=0.0, max_value=75.0),
       st.floats(min_value=50.0, max_value=400.0))
def test_overlap_bounded_by_window(angle, window):
    mask = DolanMask(bottom_window=window)
    result = overlay(STACK, mask, EvaporationStep(angle=angle), NORMAL)

    assert 0.0 <= result.overlap_width <= min(window, mask.top_window) + 1e-9
    assert (result.regime is Regime.NONE) == (result.overlap_width == 0.0)
