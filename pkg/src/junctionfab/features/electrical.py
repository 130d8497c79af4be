"""From junction area to normal resistance, critical current and transmon frequency.

Energies are quoted as frequencies E/h in GHz.
"""
from __future__ import annotations

import logging
import math
from enum import Enum
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import constants

from junctionfab.errors import GeometryDomainError

log = logging.getLogger(__name__)

# CODATA values
E_CHARGE = constants.e
PLANCK = constants.h
HBAR = constants.hbar
FLUX_QUANTUM = constants.physical_constants["mag. flux quantum"][0]

TRANSMON_MIN_RATIO = 20.0


class SpreadMode(str, Enum):
    ANALYTIC = "analytic"
    MONTE_CARLO = "monte_carlo"


class ElectricalParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    gap_delta: float = Field(default=180.0, gt=0)  # µeV
    ra_product: float = Field(default=250.0, gt=0)  # Ω·µm²
    capacitance: float = Field(default=80.0, gt=0)  # fF


class JunctionElectrical(BaseModel):
    model_config = ConfigDict(frozen=True)

    rn: float = Field(gt=0)  # Ω
    ic: float = Field(gt=0)  # nA
    ej_over_h: float = Field(gt=0)  # GHz


class SquidPair(BaseModel):
    model_config = ConfigDict(frozen=True)

    area_small: float = Field(gt=0)
    area_large: float = Field(gt=0)

    @model_validator(mode="after")
    def _ordered(self) -> "SquidPair":
        if self.area_small > self.area_large:
            raise ValueError("area_small must not exceed area_large")
        return self

    @property
    def asymmetry(self) -> float:
        return self.area_small / self.area_large


def rn_from_area(area: float, params: ElectricalParams) -> float:
    """Normal resistance (Ω) of a junction of ``area`` µm²."""
    if area <= 0:
        raise GeometryDomainError(f"junction area must be positive, got {area}")
    return params.ra_product / area


def ic_from_rn(rn: float, params: ElectricalParams) -> float:
    """Zero-temperature Ambegaokar-Baratoff critical current in nA."""
    if rn <= 0:
        raise GeometryDomainError(f"normal resistance must be positive, got {rn}")
    gap_volts = params.gap_delta * 1e-6
    return math.pi * gap_volts / (2.0 * rn) * 1e9


def ej_from_ic(ic: float) -> float:
    """Josephson energy E_J/h in GHz for a critical current in nA."""
    if ic <= 0:
        raise GeometryDomainError(f"critical current must be positive, got {ic}")
    return HBAR * ic * 1e-9 / (2.0 * E_CHARGE) / PLANCK / 1e9


def ec_from_capacitance(c: float) -> float:
    """Charging energy E_c/h in GHz for a capacitance in fF."""
    if c <= 0:
        raise GeometryDomainError(f"capacitance must be positive, got {c}")
    return E_CHARGE ** 2 / (2.0 * c * 1e-15) / PLANCK / 1e9


def capacitance_from_ec(ec: float) -> float:
    """Inverse of :func:`ec_from_capacitance`, fF."""
    if ec <= 0:
        raise GeometryDomainError(f"charging energy must be positive, got {ec}")
    return E_CHARGE ** 2 / (2.0 * ec * 1e9 * PLANCK) * 1e15


def transmon_f01(ej_over_h: float, ec_over_h: float) -> float:
    """Transmon transition frequency √(8 E_c E_J) − E_c in GHz."""
    if ej_over_h <= 0 or ec_over_h <= 0:
        raise GeometryDomainError("Josephson and charging energies must be positive")
    if ej_over_h / ec_over_h < TRANSMON_MIN_RATIO:
        log.warning("E_J/E_c = %.1f below the transmon regime (%g)",
                    ej_over_h / ec_over_h, TRANSMON_MIN_RATIO)
    return math.sqrt(8.0 * ec_over_h * ej_over_h) - ec_over_h


def anharmonicity(ec_over_h: float) -> float:
    """Leading-order transmon anharmonicity f12 − f01 ≈ −E_c, GHz."""
    return -ec_over_h


def junction_electrical(area: float, params: ElectricalParams) -> JunctionElectrical:
    rn = rn_from_area(area, params)
    ic = ic_from_rn(rn, params)
    return JunctionElectrical(rn=rn, ic=ic, ej_over_h=ej_from_ic(ic))


def f01_from_area(area: float, params: ElectricalParams) -> float:
    ej = junction_electrical(area, params).ej_over_h
    return transmon_f01(ej, ec_from_capacitance(params.capacitance))


def design_for_f01(f01: float, params: ElectricalParams) -> JunctionElectrical:
    """Junction (Rₙ, I_c, E_J) that places the transmon at ``f01`` GHz."""
    if f01 <= 0:
        raise GeometryDomainError(f"target frequency must be positive, got {f01}")
    ec = ec_from_capacitance(params.capacitance)
    ej = (f01 + ec) ** 2 / (8.0 * ec)
    ic = ej * 1e9 * PLANCK * 2.0 * E_CHARGE / HBAR * 1e9
    rn = math.pi * params.gap_delta * 1e-6 / (2.0 * ic * 1e-9)
    return JunctionElectrical(rn=rn, ic=ic, ej_over_h=ej)


def area_for_f01(f01: float, params: ElectricalParams) -> float:
    """Junction area (µm²) for a target frequency at the configured RA."""
    return params.ra_product / design_for_f01(f01, params).rn


def squid_asymmetry(a_small: float, a_large: float) -> float:
    """Smaller-to-larger junction area ratio."""
    if a_small <= 0 or a_large <= 0:
        raise GeometryDomainError("SQUID junction areas must be positive")
    return SquidPair(area_small=a_small, area_large=a_large).asymmetry


def frequency_lever(area: float, params: ElectricalParams) -> float:
    """k = √(8E_cE_J)/(√(8E_cE_J) − E_c), so δf/f = k·½·δA/A to first order."""
    ej = junction_electrical(area, params).ej_over_h
    ec = ec_from_capacitance(params.capacitance)
    plasma = math.sqrt(8.0 * ec * ej)
    return plasma / (plasma - ec)


def propagate_variation(area_cv: float, params: ElectricalParams,
                        mode: SpreadMode | str = SpreadMode.ANALYTIC,
                        area: float = 0.065, samples: int = 100_000, seed: int = 0) -> float:
    """Predicted f01 coefficient of variation (%) from an area CV (%).

    ``area`` is the nominal junction area in µm² (250 × 260 nm by default).
    """
    if area_cv < 0:
        raise GeometryDomainError(f"area CV must be non-negative, got {area_cv}")
    mode = SpreadMode(mode)
    if area_cv == 0:
        return 0.0
    if mode is SpreadMode.ANALYTIC:
        return frequency_lever(area, params) * 0.5 * area_cv
    cv = area_cv / 100.0
    s2 = math.log1p(cv ** 2)
    rng = np.random.default_rng(seed)
    areas = np.exp(math.log(area) - 0.5 * s2 + math.sqrt(s2) * rng.standard_normal(samples))
    f = f01_array(areas, params)
    return float(np.std(f, ddof=1) / np.mean(f) * 100.0)


def f01_array(areas: ArrayLike, params: ElectricalParams) -> NDArray[np.float64]:
    """Vectorized area → f01 chain (GHz)."""
    areas = np.asarray(areas, dtype=float)
    if np.any(areas <= 0):
        raise GeometryDomainError("junction areas must be positive")
    return f01_from_rn(params.ra_product / areas, params)


def f01_from_rn(resistances: ArrayLike, params: ElectricalParams) -> NDArray[np.float64]:
    """f01 (GHz) of transmons whose junctions read ``resistances`` Ω."""
    rn = np.asarray(resistances, dtype=float)
    if np.any(rn <= 0):
        raise GeometryDomainError("normal resistances must be positive")
    ic = math.pi * params.gap_delta * 1e-6 / (2.0 * rn)
    ej = HBAR * ic / (2.0 * E_CHARGE) / PLANCK / 1e9
    ec = ec_from_capacitance(params.capacitance)
    return np.sqrt(8.0 * ec * ej) - ec


def calibrate_ra(areas: Sequence[float], resistances: Sequence[float]) -> float:
    """RA product as the median of Rₙ·A over records with positive values."""
    a = np.asarray(areas, dtype=float)
    r = np.asarray(resistances, dtype=float)
    ok = (a > 0) & (r > 0)
    if not np.any(ok):
        raise GeometryDomainError("no record with positive area and resistance")
    return float(np.median(a[ok] * r[ok]))
