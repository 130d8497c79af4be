"""How the e-beam writer realizes a nominal linewidth."""
from __future__ import annotations

import logging
import math
from enum import Enum

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator

from junctionfab.errors import GeometryDomainError

log = logging.getLogger(__name__)

STUDIED_FIELD_SIZES = (50.0, 100.0, 200.0, 500.0)
STUDIED_STEP_SIZES = (2.0, 3.0, 5.0)


class ScanDirection(str, Enum):
    ALONG = "Along"
    ACROSS = "Across"


class WriterConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    field_size: float = Field(default=100.0, gt=0)  # µm
    step_size: float = Field(default=2.0, gt=0)  # nm
    scan_direction: ScanDirection = ScanDirection.ACROSS

    @property
    def extrapolated(self) -> bool:
        return self.field_size not in STUDIED_FIELD_SIZES or self.step_size not in STUDIED_STEP_SIZES


class LwNoiseModel(BaseModel):
    """Linewidth calibration of the writer.

    A direction missing from ``quantization_by_direction`` is quantized on
    the configured step size. The 3σ table covers lines spread over a whole
    write field; ``junction_share`` is the part of that variance that still
    scatters between junctions placed at the same position in their fields.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    sigma3_by_field_size: dict[float, float] = Field(
        default_factory=lambda: {100.0: 7.1, 500.0: 17.4})
    placement_max_by_field_size: dict[float, float] = Field(
        default_factory=lambda: {200.0: 33.0, 500.0: 41.0})
    bias_by_direction: dict[ScanDirection, float] = Field(
        default_factory=lambda: {ScanDirection.ALONG: -1.0, ScanDirection.ACROSS: -4.0})
    quantization_by_direction: dict[ScanDirection, float] = Field(
        default_factory=lambda: {ScanDirection.ALONG: 5.0})
    junction_share: float = Field(default=0.2, ge=0, le=1)

    @model_validator(mode="after")
    def _tables_valid(self) -> "LwNoiseModel":
        if not self.sigma3_by_field_size:
            raise ValueError("sigma3_by_field_size must not be empty")
        for table in (self.sigma3_by_field_size, self.placement_max_by_field_size):
            if any(v < 0 for v in table.values()):
                raise ValueError("writer calibration values must be non-negative")
        if any(v < 0 for v in self.quantization_by_direction.values()):
            raise ValueError("quantization granularity must be non-negative")
        sizes = sorted(self.sigma3_by_field_size)
        values = [self.sigma3_by_field_size[s] for s in sizes]
        if any(b < a for a, b in zip(values, values[1:])):
            raise ValueError("3-sigma linewidth noise must not decrease with field size")
        return self

    @classmethod
    def zero(cls) -> "LwNoiseModel":
        """Writer that prints exactly the nominal width."""
        return cls(
            sigma3_by_field_size={100.0: 0.0},
            placement_max_by_field_size={100.0: 0.0},
            bias_by_direction={ScanDirection.ALONG: 0.0, ScanDirection.ACROSS: 0.0},
            quantization_by_direction={ScanDirection.ALONG: 0.0, ScanDirection.ACROSS: 0.0},
        )


def _log_interp(table: dict[float, float], field_size: float) -> float:
    # flat outside the calibrated range, linear in log(field size) inside
    sizes = sorted(table)
    values = [table[s] for s in sizes]
    return float(np.interp(math.log(field_size), [math.log(s) for s in sizes], values))


def lw_3sigma(model: LwNoiseModel, field_size: float) -> float:
    """3σ linewidth variation in nm for the given write-field size (µm)."""
    if field_size <= 0:
        raise GeometryDomainError(f"field size must be positive, got {field_size}")
    return _log_interp(model.sigma3_by_field_size, field_size)


def junction_sigma(model: LwNoiseModel, field_size: float) -> float:
    """σ (nm) of the linewidth scatter between junctions on one layout."""
    return lw_3sigma(model, field_size) / 3.0 * math.sqrt(model.junction_share)


def placement_max(model: LwNoiseModel, field_size: float) -> float:
    """Maximum placement deviation in nm for the write-field size."""
    if field_size <= 0:
        raise GeometryDomainError(f"field size must be positive, got {field_size}")
    return _log_interp(model.placement_max_by_field_size, field_size)


def granularity(config: WriterConfig, model: LwNoiseModel) -> float:
    return model.quantization_by_direction.get(config.scan_direction, config.step_size)


def quantize(width: float, grid: float) -> float:
    """Largest multiple of ``grid`` not exceeding ``width`` (identity for grid 0).

    A partial shot pitch is not written, so the grid floors rather than
    rounds; this reproduces 100 and 103 nm printing alike along the scan.
    """
    if grid <= 0:
        return width
    # tolerance keeps exact multiples stable against float noise
    return math.floor(width / grid + 1e-9) * grid


def realized_mean(nominal: float, config: WriterConfig, model: LwNoiseModel) -> float:
    if nominal <= 0:
        raise GeometryDomainError(f"nominal linewidth must be positive, got {nominal}")
    bias = model.bias_by_direction.get(config.scan_direction, 0.0)
    return quantize(nominal, granularity(config, model)) + bias


def realized_linewidth(nominal: float, config: WriterConfig, model: LwNoiseModel,
                       rng: np.random.Generator, size: int | None = None) -> float | NDArray[np.float64]:
    """Sample the printed linewidth (nm): quantized nominal plus bias plus
    Gaussian noise with σ = lw_3sigma/3."""
    mean = realized_mean(nominal, config, model)
    sigma = lw_3sigma(model, config.field_size) / 3.0
    if config.extrapolated:
        log.warning("writer settings (field %g µm, step %g nm) outside the studied set; "
                    "calibration extrapolated", config.field_size, config.step_size)
    sample = mean + sigma * rng.standard_normal(size)
    return float(sample) if size is None else sample


def placement_error(config: WriterConfig, model: LwNoiseModel, rng: np.random.Generator,
                    size: int | None = None) -> NDArray[np.float64]:
    """Feature displacement (dx, dy) in nm, Gaussian with 3σ = placement maximum."""
    sigma = placement_max(model, config.field_size) / 3.0
    shape = (2,) if size is None else (size, 2)
    return sigma * rng.standard_normal(shape)


def calc_min_step(clock: float, dose: float, current: float) -> float:
    """Smallest shot pitch (nm) the pattern generator sustains.

    ``clock`` in MHz, ``dose`` in µC/cm², ``current`` in pA.
    """
    if clock <= 0 or dose <= 0 or current <= 0:
        raise GeometryDomainError("clock, dose and current must be positive")
    area_m2 = (current * 1e-12) / ((dose * 1e-2) * (clock * 1e6))
    return round(math.sqrt(area_m2) * 1e9, 1)


# measured resist-mask linewidths: nominal -> (mean nm, 3σ nm, count)
MEASURED_LINEWIDTHS: dict[ScanDirection, dict[float, tuple[float, float, int]]] = {
    ScanDirection.ALONG: {
        100.0: (99.0, 4.4, 98), 103.0: (99.0, 4.4, 98), 105.0: (104.0, 5.1, 96),
        150.0: (150.0, 5.5, 97), 300.0: (302.0, 6.0, 95), 500.0: (502.0, 6.6, 97),
    },
    ScanDirection.ACROSS: {
        100.0: (96.0, 4.5, 93), 103.0: (99.0, 4.4, 94), 105.0: (101.0, 5.8, 84),
        150.0: (144.0, 8.3, 88), 300.0: (300.0, 5.6, 89), 500.0: (500.0, 5.2, 98),
    },
}
