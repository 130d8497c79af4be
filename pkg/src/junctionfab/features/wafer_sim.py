"""Substrate-scale Monte Carlo of junction areas and resistances.

Every site draws from its own substream ``SeedSequence(seed, spawn_key=(0, i))``
and every chip from ``(1, j)``, so a dataset depends only on the seed and
the configuration, never on the worker count.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.signal import lfilter

from junctionfab.errors import GeometryDomainError, SimulationError
from junctionfab.features.dataset import JunctionDataset, JunctionRecord
from junctionfab.features.ebl_writer import (
    LwNoiseModel, WriterConfig, junction_sigma, realized_mean,
)
from junctionfab.features.electrical import ElectricalParams
from junctionfab.features.geometry import (
    DolanMask, EvaporationStep, Regime, StackGeometry, overlay,
)
from junctionfab.features.wafer_layout import Site, WaferLayout

log = logging.getLogger(__name__)

SITE_STREAM = 0
CHIP_STREAM = 1
FIELD_STREAM = 2
SITE_CHUNK = 500
MIN_PROFILE_POINTS = 8
_DRAWS_PER_SITE = 9


class SourceModel(BaseModel):
    """Evaporation source seen from the substrate.

    ``lateral_offset`` (mm) displaces the source foot along the tilt
    azimuth. With ``angle_gradient`` off every site sees the nominal angle.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    source_distance: float = Field(default=600.0, gt=0)  # mm
    lateral_offset: float = 0.0  # mm
    tilt_azimuth: float = 0.0  # deg
    angle_gradient: bool = True


class LerModel(BaseModel):
    """Line-edge roughness of an electrode deposited at an angle.

    ``sigma_vs_angle`` maps deposition angle (deg) to edge σ (nm) and is
    interpolated linearly; each electrode takes the σ of its own step.
    ``wall_shadow_transfer`` is the fraction of the local change in
    top-wall shadow, relative to the nominal angle, that the wall coating
    passes on to the top-electrode linewidth.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    sigma_vs_angle: dict[float, float] = Field(default_factory=lambda: {
        0.0: 2.0, 15.0: 2.0, 30.0: 2.1, 40.0: 3.0, 45.0: 4.0,
        50.0: 6.0, 55.0: 9.0, 62.0: 14.0, 70.0: 20.0,
    })
    correlation_length: float = Field(default=30.0, gt=0)  # nm
    wall_shadow_transfer: float = Field(default=1.0, ge=0)

    @model_validator(mode="after")
    def _table_valid(self) -> "LerModel":
        if not self.sigma_vs_angle:
            raise ValueError("sigma_vs_angle must not be empty")
        if any(v < 0 for v in self.sigma_vs_angle.values()):
            raise ValueError("edge roughness must be non-negative")
        above = [self.sigma_vs_angle[a] for a in sorted(self.sigma_vs_angle) if a >= 45.0]
        if any(b < a for a, b in zip(above, above[1:])):
            raise ValueError("edge roughness must not decrease above 45 degrees")
        return self

    @classmethod
    def zero(cls) -> "LerModel":
        return cls(sigma_vs_angle={0.0: 0.0}, wall_shadow_transfer=0.0)


class OxidationField(BaseModel):
    """Multiplicative RA field: plane along the tilt azimuth, a smooth
    random component and white per-junction noise, all in percent."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    enabled: bool = False
    gradient_percent_per_mm: float = 0.61
    smooth_percent: float = Field(default=0.5, ge=0)
    smooth_length: float = Field(default=4.0, gt=0)  # mm
    white_percent: float = Field(default=2.3, ge=0)


class ProcessVariation(BaseModel):
    """Linewidth scatter beyond the writer calibration, and oxidation."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    site_lw_sigma: float = Field(default=0.0, ge=0)  # nm
    chip_lw_sigma: float = Field(default=0.0, ge=0)  # nm
    oxidation: OxidationField = OxidationField()

    @classmethod
    def zero(cls) -> "ProcessVariation":
        return cls(site_lw_sigma=0.0, chip_lw_sigma=0.0)


class MeasurementModel(BaseModel):
    """How the recorded dataset deviates from the fabricated junctions.

    SEM reads each linewidth with a Gaussian error of ``sem_sigma`` nm and
    the recorded area is the read overlap times the read top linewidth.
    A ``contact_failure_fraction`` of resistance readings come through a
    bad contact and read high by a factor drawn log-uniformly from
    ``contact_failure_factor``.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    sem_sigma: float = Field(default=0.0, ge=0)  # nm
    contact_failure_fraction: float = Field(default=0.0, ge=0, lt=1)
    contact_failure_factor: tuple[float, float] = (10.0, 100.0)

    @model_validator(mode="after")
    def _factor_range(self) -> "MeasurementModel":
        lo, hi = self.contact_failure_factor
        if not 1.0 < lo <= hi:
            raise ValueError("contact failure factors must satisfy 1 < low <= high")
        return self

    def failure_factor(self, u_fail: float, u_factor: float) -> float:
        """Resistance multiplier for one reading given two uniform draws."""
        if u_fail >= self.contact_failure_fraction:
            return 1.0
        lo, hi = self.contact_failure_factor
        return lo * (hi / lo) ** u_factor


class EvaporationPlan(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    first: EvaporationStep = EvaporationStep(angle=45.0)
    second: EvaporationStep = EvaporationStep(angle=0.0)


def local_evap_angle(source: SourceModel, nominal_angle: float,
                     position: tuple[float, float]) -> float:
    """Deposition angle at ``position`` (mm from the substrate centre)."""
    az = math.radians(source.tilt_azimuth)
    projection = position[0] * math.cos(az) + position[1] * math.sin(az) + source.lateral_offset
    return nominal_angle + math.degrees(math.atan(projection / source.source_distance))


def ler_at_angle(ler: LerModel, angle: float) -> float:
    angles = sorted(ler.sigma_vs_angle)
    return float(np.interp(angle, angles, [ler.sigma_vs_angle[a] for a in angles]))


def sample_edge(length: float, ler: LerModel, angle: float, rng: np.random.Generator,
                spacing: float = 1.0) -> NDArray[np.float64]:
    """Edge displacement profile (nm) sampled every ``spacing`` nm.

    Stationary Gaussian process with exponential autocorrelation, generated
    as a first-order autoregressive filter started in equilibrium.
    """
    if length <= 0 or spacing <= 0:
        raise GeometryDomainError("edge length and spacing must be positive")
    n = max(int(length / spacing) + 1, 2)
    sigma = ler_at_angle(ler, angle)
    rho = math.exp(-spacing / ler.correlation_length)
    drive = sigma * math.sqrt(1.0 - rho ** 2) * rng.standard_normal(n)
    drive[0] = sigma * rng.standard_normal()
    return lfilter([1.0], [1.0, -rho], drive)


def ler_sigma(profile: ArrayLike) -> float:
    """σ of the residuals after removing the best straight line."""
    y = np.asarray(profile, dtype=float)
    if y.ndim != 1 or y.size < MIN_PROFILE_POINTS:
        raise GeometryDomainError(f"an edge profile needs at least {MIN_PROFILE_POINTS} points")
    x = np.arange(y.size, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    return float(np.std(y - (slope * x + intercept)))


def ler_width_sigma(ler: LerModel, angle: float, edge_length: float) -> float:
    """σ (nm) of a linewidth whose edge roughness is averaged over
    ``edge_length``: σ_LER·√(ξ/L), capped at σ_LER."""
    sigma = ler_at_angle(ler, angle)
    return sigma * min(1.0, math.sqrt(ler.correlation_length / edge_length))


def _stream(seed: int, kind: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(kind, index))))


def _oxidation_factors(field: OxidationField, rel_xy: NDArray[np.float64], azimuth: float,
                       white: NDArray[np.float64], seed: int) -> NDArray[np.float64]:
    if not field.enabled:
        return np.ones(len(rel_xy))
    az = math.radians(azimuth)
    projection = rel_xy[:, 0] * math.cos(az) + rel_xy[:, 1] * math.sin(az)
    rng = _stream(seed, FIELD_STREAM, 0)
    # random Fourier features of a squared-exponential field with unit variance
    n_modes = 64
    k = rng.standard_normal((n_modes, 2)) / field.smooth_length
    phase = rng.uniform(0.0, 2.0 * math.pi, n_modes)
    smooth = math.sqrt(2.0 / n_modes) * np.cos(rel_xy @ k.T + phase).sum(axis=1)
    percent = (field.gradient_percent_per_mm * projection
               + field.smooth_percent * smooth
               + field.white_percent * white)
    return np.clip(1.0 + percent / 100.0, 0.05, None)


@dataclass(frozen=True)
class _SiteContext:
    """Everything a site evaluation needs besides its own draws."""

    writer: WriterConfig
    noise: LwNoiseModel
    stack: StackGeometry
    source: SourceModel
    ler: LerModel
    process: ProcessVariation
    measurement: MeasurementModel
    electrical: ElectricalParams
    evaporation: EvaporationPlan
    mask: DolanMask
    center: tuple[float, float]
    seed: int


def _local_step(ctx: _SiteContext, step: EvaporationStep, rel: tuple[float, float]) -> EvaporationStep:
    if step.angle == 0.0 or not ctx.source.angle_gradient:
        return step
    angle = min(max(local_evap_angle(ctx.source, step.angle, rel), 0.0), 89.9)
    return step.model_copy(update={"angle": angle})


def _simulate_site(ctx: _SiteContext, site: Site, draws: NDArray[np.float64],
                   uniforms: NDArray[np.float64], chip_offset: float,
                   ox_factor: float) -> JunctionRecord:
    rel = (site.x - ctx.center[0], site.y - ctx.center[1])
    first = _local_step(ctx, ctx.evaporation.first, rel)
    second = _local_step(ctx, ctx.evaporation.second, rel)

    sigma_w = junction_sigma(ctx.noise, ctx.writer.field_size)
    sigma_s = ctx.process.site_lw_sigma
    wall = (ctx.ler.wall_shadow_transfer * ctx.stack.top_resist_thickness
            * (math.tan(math.radians(first.angle)) - math.tan(math.radians(ctx.evaporation.first.angle))))

    # the top electrode comes from the second step, the bottom from the first
    lw_top = (realized_mean(site.nom_l, ctx.writer, ctx.noise) + sigma_w * draws[0]
              + ler_width_sigma(ctx.ler, second.angle, site.nom_w) * draws[2]
              + sigma_s * draws[4] + chip_offset - wall)
    lw_bot = (realized_mean(site.nom_w, ctx.writer, ctx.noise) + sigma_w * draws[1]
              + ler_width_sigma(ctx.ler, first.angle, site.nom_l) * draws[3]
              + sigma_s * draws[5] + chip_offset)

    sem = ctx.measurement.sem_sigma
    err_top, err_bot = sem * draws[7], sem * draws[8]
    common = dict(chip_id=site.chip_id, x_mm=site.x, y_mm=site.y, group=site.group,
                  nom_w_nm=site.nom_w, nom_l_nm=site.nom_l,
                  lw_top_nm=max(lw_top + err_top, 0.0), lw_bot_nm=max(lw_bot + err_bot, 0.0))
    if lw_top <= 0 or lw_bot <= 0:
        return JunctionRecord(**common, regime=Regime.NONE, area_um2=0.0)

    result = overlay(ctx.stack, ctx.mask.with_extents(lw_bot, lw_top), first, second)
    if result.regime is Regime.NONE:
        return JunctionRecord(**common, regime=Regime.NONE, area_um2=0.0)
    r_ohm = (ctx.electrical.ra_product / result.area * ox_factor
             * ctx.measurement.failure_factor(uniforms[0], uniforms[1]))
    read_area = result.area
    if sem > 0:
        read_area *= (max(result.overlap_width + err_bot, 1.0) / result.overlap_width
                      * max(lw_top + err_top, 1.0) / lw_top)
    return JunctionRecord(**common, regime=result.regime, area_um2=read_area, r_ohm=r_ohm)


def _site_draws(seed: int, index: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Normals 0-5 shape the linewidths, 6 is white oxidation noise, 7-8 are
    SEM errors; the two uniforms decide a contact failure."""
    rng = _stream(seed, SITE_STREAM, index)
    return rng.standard_normal(_DRAWS_PER_SITE), rng.random(2)


def _simulate_chunk(ctx: _SiteContext, sites: Sequence[Site], indices: range,
                    chip_offsets: dict[str, float], ox: NDArray[np.float64]) -> list[JunctionRecord]:
    out = []
    for site, i in zip(sites, indices):
        draws, uniforms = _site_draws(ctx.seed, i)
        out.append(_simulate_site(ctx, site, draws, uniforms, chip_offsets[site.chip_id], float(ox[i])))
    return out


def simulate_wafer(
        layout: WaferLayout,
        writer: WriterConfig,
        noise: LwNoiseModel,
        stack: StackGeometry,
        source: SourceModel,
        ler: LerModel,
        electrical: ElectricalParams,
        seed: int,
        evaporation: EvaporationPlan | None = None,
        process: ProcessVariation | None = None,
        mask: DolanMask | None = None,
        measurement: MeasurementModel | None = None,
        workers: int = 1,
) -> JunctionDataset:
    """One record per layout site; regime-None sites carry no resistance.

    Without ``measurement`` the records hold the fabricated values exactly.
    """
    if not layout.sites:
        raise SimulationError("the wafer layout has no junction sites")
    if seed < 0:
        raise SimulationError(f"seed must be non-negative, got {seed}")
    evaporation = evaporation or EvaporationPlan()
    process = process or ProcessVariation()
    if writer.extrapolated:
        log.warning("writer settings (field %g µm, step %g nm) outside the studied set; "
                    "calibration extrapolated", writer.field_size, writer.step_size)

    ctx = _SiteContext(writer=writer, noise=noise, stack=stack, source=source, ler=ler,
                       process=process, measurement=measurement or MeasurementModel(),
                       electrical=electrical, evaporation=evaporation,
                       mask=mask or DolanMask(), center=layout.center, seed=seed)

    sites = layout.sites
    chip_ids = [c.id for c in layout.chips]
    chip_offsets = {cid: process.chip_lw_sigma * float(_stream(seed, CHIP_STREAM, j).standard_normal())
                    for j, cid in enumerate(chip_ids)}
    rel_xy = np.array([(s.x - layout.center[0], s.y - layout.center[1]) for s in sites])
    white = np.array([_site_draws(seed, i)[0][6]
                      for i in range(len(sites))]) if process.oxidation.enabled else np.zeros(len(sites))
    ox = _oxidation_factors(process.oxidation, rel_xy, source.tilt_azimuth, white, seed)

    bounds = [(lo, min(lo + SITE_CHUNK, len(sites))) for lo in range(0, len(sites), SITE_CHUNK)]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        chunks = list(pool.map(
            lambda b: _simulate_chunk(ctx, sites[b[0]:b[1]], range(b[0], b[1]), chip_offsets, ox),
            bounds))
    records = [r for chunk in chunks for r in chunk]

    excluded = sum(r.regime is Regime.NONE for r in records)
    if excluded:
        log.warning("%d of %d junctions without overlap; excluded from resistance statistics",
                    excluded, len(records))
    log.info("simulated %d junctions (seed %d, %.1f/%.1f deg)", len(records), seed,
             evaporation.first.angle, evaporation.second.angle)
    metadata = {
        "seed": seed,
        "sites": len(records),
        "no_overlap": excluded,
        "angles": [evaporation.first.angle, evaporation.second.angle],
    }
    return JunctionDataset(records=records, metadata=metadata)
