"""Dolan-bridge double-angle shadow-evaporation geometry.

All lengths are nm unless a name says otherwise, angles are degrees and
areas are µm². Positions are measured along the tilt axis with the bridge
occupying ``[0, bridge_width]``: the bottom window lies on the negative
side, the top window on the positive side.
"""
from __future__ import annotations

import logging
import math
from enum import Enum
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from junctionfab.errors import GeometryDomainError

log = logging.getLogger(__name__)

JUNCTION_LENGTH_BAND = (80.0, 680.0)
NM2_PER_UM2 = 1.0e6


class Regime(str, Enum):
    FULL = "Full"
    PARTIAL = "Partial"
    NONE = "None"


class StackGeometry(BaseModel):
    """Resist bilayer: copolymer (bridge suspension height) and top resist."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    copolymer_thickness: float = Field(default=500.0, gt=0)
    top_resist_thickness: float = Field(default=100.0, gt=0)
    undercut: float = Field(default=200.0, ge=0)


class DolanMask(BaseModel):
    """Mask openings around one bridge.

    ``tilt_axis`` names the dimension that lies along the evaporation tilt
    axis. With the default ``"bottom_window"`` the bottom window extent is
    the overlapped dimension and ``junction_length`` is transverse; with
    ``"junction_length"`` the two swap roles.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    bridge_width: float = Field(default=150.0, gt=0)
    bottom_window: float = Field(default=170.0, gt=0)
    top_window: float = Field(default=600.0, gt=0)
    junction_length: float = Field(default=150.0, gt=0)
    tilt_axis: Literal["bottom_window", "junction_length"] = "bottom_window"

    @property
    def tilt_extent(self) -> float:
        return self.bottom_window if self.tilt_axis == "bottom_window" else self.junction_length

    @property
    def transverse_extent(self) -> float:
        return self.junction_length if self.tilt_axis == "bottom_window" else self.bottom_window

    def with_extents(self, tilt_extent: float, transverse_extent: float) -> "DolanMask":
        """Copy with the tilt-axis and transverse extents replaced."""
        if self.tilt_axis == "bottom_window":
            update = {"bottom_window": tilt_extent, "junction_length": transverse_extent}
        else:
            update = {"junction_length": tilt_extent, "bottom_window": transverse_extent}
        return self.model_copy(update=update)


class EvaporationStep(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    angle: float = Field(default=0.0, ge=0, lt=90)
    film_thickness: float = Field(default=25.0, gt=0)


class OverlayResult(BaseModel):
    """Outcome of the two evaporations through one mask.

    ``area_angle_sensitivity`` is ∂area/∂α1 in µm² per degree.
    ``margin`` is the shift change (nm) the configuration tolerates before
    leaving the Full regime; it is negative outside Full.
    """
    model_config = ConfigDict(frozen=True)

    shift: float
    overlap_width: float = Field(ge=0)
    area: float = Field(ge=0)
    regime: Regime
    area_angle_sensitivity: float
    margin: float
    parasitic_area: float = 0.0
    clipped: bool = False

    @model_validator(mode="after")
    def _regime_consistent(self) -> "OverlayResult":
        if (self.regime is Regime.NONE) != (self.overlap_width == 0.0):
            raise ValueError("regime None must coincide with zero overlap")
        return self


def _check_angle(angle: float) -> None:
    if not (0.0 <= angle < 90.0) or math.isnan(angle):
        raise GeometryDomainError(f"evaporation angle must lie in [0, 90) degrees, got {angle}")


def shadow_shift(stack: StackGeometry, angle: float) -> float:
    """Lateral displacement of the film image, ``h * tan(angle)``."""
    _check_angle(angle)
    return stack.copolymer_thickness * math.tan(math.radians(angle))


def shift_sensitivity(stack: StackGeometry, angle: float) -> float:
    """d(shift)/d(angle) in nm per degree."""
    _check_angle(angle)
    return stack.copolymer_thickness / math.cos(math.radians(angle)) ** 2 * math.pi / 180.0


def effective_opening(width: float, stack: StackGeometry, angle: float) -> float:
    """Aperture left after foreshortening by the top resist wall."""
    if width <= 0:
        raise GeometryDomainError(f"opening width must be positive, got {width}")
    _check_angle(angle)
    return max(0.0, width - stack.top_resist_thickness * math.tan(math.radians(angle)))


def junction_area(overlap_width: float, junction_length: float) -> float:
    """Overlap rectangle area in µm² from two nm lengths."""
    if overlap_width < 0 or junction_length < 0:
        raise GeometryDomainError("junction dimensions must be non-negative")
    return overlap_width * junction_length / NM2_PER_UM2


def _intervals(mask: DolanMask, relative_shift: float) -> tuple[float, float, float, float]:
    lo1 = -mask.tilt_extent + relative_shift
    hi1 = relative_shift
    lo2 = mask.bridge_width
    hi2 = mask.bridge_width + mask.top_window
    return lo1, hi1, lo2, hi2


def overlap_derivative(lo1: float, hi1: float, lo2: float, hi2: float) -> int:
    """∂overlap/∂shift for the first interval moving rigidly: 0, +1 or -1."""
    lo, hi = max(lo1, lo2), min(hi1, hi2)
    if hi <= lo:
        return 0
    if lo2 < lo1 and hi1 < hi2:
        return 0
    if lo1 < lo2 and hi2 < hi1:
        return 0
    # the moving interval gains at its leading edge or loses at its trailing edge
    gains = hi1 < hi2
    loses = lo1 > lo2
    return int(gains) - int(loses)


def overlay(
        stack: StackGeometry,
        mask: DolanMask,
        evap1: EvaporationStep,
        evap2: EvaporationStep,
) -> OverlayResult:
    """Overlap of the first film (bottom window image) with the second.

    The first film is the bottom window shifted by ``s1 - s2``; the second
    film fills the top window. Regime follows the first-order sensitivity
    of the overlap to the first evaporation angle.
    """
    s1 = shadow_shift(stack, evap1.angle)
    s2 = shadow_shift(stack, evap2.angle)
    rel = s1 - s2
    lo1, hi1, lo2, hi2 = _intervals(mask, rel)
    overlap_width = max(0.0, min(hi1, hi2) - max(lo1, lo2))

    if overlap_width == 0.0:
        regime = Regime.NONE
        slope = 0
        margin = -min(abs(lo2 - hi1), abs(lo1 - hi2))
    else:
        slope = overlap_derivative(lo1, hi1, lo2, hi2)
        if slope == 0:
            regime = Regime.FULL
            margin = min(abs(lo1 - lo2), abs(hi2 - hi1))
        else:
            regime = Regime.PARTIAL
            margin = -min(abs(lo1 - lo2), abs(hi2 - hi1))

    transverse = mask.transverse_extent
    area = junction_area(overlap_width, transverse)
    sensitivity = transverse * slope * shift_sensitivity(stack, evap1.angle) / NM2_PER_UM2

    # second film through the bottom window, shorted by bandages downstream
    parasitic_width = effective_opening(mask.tilt_extent, stack, evap2.angle)
    parasitic = junction_area(min(parasitic_width, mask.tilt_extent), transverse)
    clipped = s1 > stack.undercut + mask.bridge_width + mask.top_window
    if clipped:
        log.warning("first film shifted by %.1f nm is clipped by the resist wall", s1)
    lo_band, hi_band = JUNCTION_LENGTH_BAND
    if not (lo_band <= mask.junction_length <= hi_band):
        log.warning("junction length %.1f nm outside the studied %g-%g nm band",
                    mask.junction_length, lo_band, hi_band)

    return OverlayResult(
        shift=s1,
        overlap_width=overlap_width,
        area=area,
        regime=regime,
        area_angle_sensitivity=sensitivity,
        margin=margin,
        parasitic_area=parasitic,
        clipped=clipped,
    )


def angle_tolerance(stack: StackGeometry, mask: DolanMask, evap1: EvaporationStep,
                    evap2: EvaporationStep) -> float:
    """Angle excursion in degrees that a Full overlay absorbs (0 otherwise)."""
    result = overlay(stack, mask, evap1, evap2)
    if result.regime is not Regime.FULL:
        return 0.0
    return result.margin / shift_sensitivity(stack, evap1.angle)


def max_bridge_for_full_overlay(stack: StackGeometry, mask: DolanMask, angle: float) -> float:
    """Widest bridge for which the bottom film still lands entirely beyond it."""
    return max(0.0, shadow_shift(stack, angle) - mask.tilt_extent)
