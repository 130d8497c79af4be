"""Double-Gaussian proximity dose over rectangle layouts.

Lengths are µm. Doses are relative to the base dose, so a point deep inside
a large uniformly exposed area receives exactly 1.
"""
from __future__ import annotations

import json
import logging
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from scipy.optimize import brentq
from scipy.special import erf

from junctionfab.errors import ConfigError, FeatureNotDevelopedError, JunctionFabError

log = logging.getLogger(__name__)

# cut resolution for edge search and the root tolerance (0.1 nm)
_EDGE_SCAN_STEP = 0.01
_EDGE_XTOL = 1.0e-4


class PsfParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha_fwd: float = Field(gt=0)
    beta_back: float = Field(gt=0)
    eta: float = Field(ge=0)

    @model_validator(mode="after")
    def _ranges_ordered(self) -> "PsfParams":
        if self.beta_back <= self.alpha_fwd:
            raise ValueError("beta_back must exceed alpha_fwd")
        return self


class LayoutRect(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    x0: float
    y0: float
    x1: float
    y1: float
    relative_dose: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def _non_degenerate(self) -> "LayoutRect":
        if self.x1 <= self.x0 or self.y1 <= self.y0:
            raise ValueError(f"degenerate rectangle ({self.x0}, {self.y0}, {self.x1}, {self.y1})")
        return self

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))

    def intersects(self, other: "LayoutRect") -> bool:
        return self.x0 < other.x1 and other.x0 < self.x1 and self.y0 < other.y1 and other.y0 < self.y1


class ResistPreset(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str
    psf: PsfParams
    base_dose: float = Field(default=180.0, gt=0)  # µC/cm²
    threshold_fraction: float = Field(gt=0)

    @model_validator(mode="after")
    def _threshold_reachable(self) -> "ResistPreset":
        if self.threshold_fraction >= 1.0 + self.psf.eta:
            raise ValueError("threshold_fraction above the normalization bound 1 + eta")
        return self


def gaussian_rect_integral(rect: LayoutRect, x: ArrayLike, y: ArrayLike, rng: float) -> NDArray[np.float64]:
    """Integral of the unit 2-D Gaussian ``exp(-r²/rng²)/(π rng²)`` over ``rect``
    seen from ``(x, y)``. Each axis factor lies in [0, 1]."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    fx = 0.5 * (erf((rect.x1 - x) / rng) - erf((rect.x0 - x) / rng))
    fy = 0.5 * (erf((rect.y1 - y) / rng) - erf((rect.y0 - y) / rng))
    return fx * fy


def _dose(layout: Iterable[LayoutRect], psf: PsfParams, x: ArrayLike, y: ArrayLike,
          forward: bool = True, backward: bool = True) -> NDArray[np.float64]:
    norm = 1.0 / (1.0 + psf.eta)
    total = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
    for rect in layout:
        part = 0.0
        if forward:
            part = part + gaussian_rect_integral(rect, x, y, psf.alpha_fwd)
        if backward:
            part = part + psf.eta * gaussian_rect_integral(rect, x, y, psf.beta_back)
        total = total + rect.relative_dose * norm * part
    return total


def dose_at_point(layout: Sequence[LayoutRect], psf: PsfParams, point: tuple[float, float]) -> float:
    """Relative dose deposited at ``point`` by every rectangle of the layout."""
    return float(_dose(layout, psf, point[0], point[1]))


def psf_value(psf: PsfParams, r: ArrayLike) -> NDArray[np.float64]:
    """Point-spread function per µm² at radius ``r``; integrates to 1 over the plane."""
    r2 = np.asarray(r, dtype=float) ** 2
    a2 = psf.alpha_fwd ** 2
    b2 = psf.beta_back ** 2
    return (np.exp(-r2 / a2) / (np.pi * a2) + psf.eta * np.exp(-r2 / b2) / (np.pi * b2)) / (1.0 + psf.eta)


def dose_map(layout: Sequence[LayoutRect], psf: PsfParams,
             xs: ArrayLike, ys: ArrayLike) -> NDArray[np.float64]:
    """Dose on the grid ``ys × xs`` (rows follow y)."""
    gx, gy = np.meshgrid(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))
    return _dose(layout, psf, gx, gy)


def _region_grid(region: LayoutRect, n: int = 11) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    # cell-centred sample points
    fx = (np.arange(n) + 0.5) / n
    gx, gy = np.meshgrid(region.x0 + fx * region.width, region.y0 + fx * region.height)
    return gx.ravel(), gy.ravel()


def backscatter_increase(layout: Sequence[LayoutRect], psf: PsfParams, feature_region: LayoutRect) -> float:
    """Backscattered dose from other shapes as percent of the feature's own dose.

    Shapes overlapping ``feature_region`` form the feature; all the others
    contribute only through the backscatter term. Both doses are averaged
    over the region.
    """
    if feature_region.width <= 0 or feature_region.height <= 0:
        raise JunctionFabError("feature region is empty")
    own = [r for r in layout if r.intersects(feature_region)]
    others = [r for r in layout if not r.intersects(feature_region)]
    if not own:
        raise JunctionFabError("no layout shape overlaps the feature region")
    gx, gy = _region_grid(feature_region)
    own_dose = float(np.mean(_dose(own, psf, gx, gy)))
    if not others:
        return 0.0
    back = float(np.mean(_dose(others, psf, gx, gy, forward=False)))
    return 100.0 * back / own_dose


def find_feature(layout: Sequence[LayoutRect], nominal_width: float) -> LayoutRect:
    """Rectangle whose narrow side matches ``nominal_width`` (nm)."""
    width_um = nominal_width / 1000.0
    for rect in layout:
        if abs(min(rect.width, rect.height) - width_um) < 1e-6:
            return rect
    raise JunctionFabError(f"no {nominal_width} nm wide feature in layout")


def _edge(profile, start: float, direction: float, threshold: float) -> float:
    # walk outward until the dose drops below threshold, then refine
    inner = start
    outer = start + direction * _EDGE_SCAN_STEP
    for _ in range(5000):
        if profile(outer) < threshold:
            return float(brentq(lambda t: profile(t) - threshold, min(inner, outer), max(inner, outer),
                                xtol=_EDGE_XTOL))
        inner, outer = outer, outer + direction * _EDGE_SCAN_STEP
    raise FeatureNotDevelopedError("developed region does not terminate along the cut")


def developed_width(layout: Sequence[LayoutRect], preset: ResistPreset, feature: LayoutRect,
                    at: float | None = None) -> float:
    """Width (µm) of the region above threshold on the cut through ``feature``."""
    horizontal = feature.width <= feature.height  # narrow along x: cut runs along x
    cx, cy = feature.center
    if horizontal:
        pos = cy if at is None else at
        profile = lambda t: dose_at_point(layout, preset.psf, (t, pos))  # noqa: E731
        centre = cx
    else:
        pos = cx if at is None else at
        profile = lambda t: dose_at_point(layout, preset.psf, (pos, t))  # noqa: E731
        centre = cy
    threshold = preset.threshold_fraction
    if profile(centre) < threshold:
        raise FeatureNotDevelopedError(
            f"dose {profile(centre):.3f} at feature centre below threshold {threshold:.3f}")
    right = _edge(profile, centre, 1.0, threshold)
    left = _edge(profile, centre, -1.0, threshold)
    return right - left


def linewidth_bias(nominal_width: float, layout: Sequence[LayoutRect], preset: ResistPreset,
                   at: float | None = None) -> float:
    """Developed minus nominal width of the feature, in nm."""
    feature = find_feature(layout, nominal_width)
    return developed_width(layout, preset, feature, at) * 1000.0 - nominal_width


# reference layout and preset calibration, documented in docs/reference-layout.md

REFERENCE_LAYOUT_VERSION = "1"
REFERENCE_FEATURE_WIDTH = 150.0  # nm
REFERENCE_BETA = 10.0  # µm, 50 keV on Si
REFERENCE_ALPHA = 0.05  # µm
PMMA_BACKSCATTER_TARGET = 30.0
CSAR_BACKSCATTER_TARGET = 10.0
PMMA_BIAS_TARGET = 50.0


def reference_layout() -> list[LayoutRect]:
    """Junction fingers across a 150 nm bridge gap, fed by two 10×10 µm wiring pads."""
    return [
        LayoutRect(x0=-0.075, y0=0.075, x1=0.075, y1=1.5),   # top electrode finger
        LayoutRect(x0=-0.085, y0=-1.5, x1=0.085, y1=-0.075),  # bottom electrode finger
        LayoutRect(x0=-5.0, y0=1.5, x1=5.0, y1=11.5),         # top wiring pad
        LayoutRect(x0=-5.0, y0=-11.5, x1=5.0, y1=-1.5),       # bottom wiring pad
    ]


def reference_region() -> LayoutRect:
    """Part of the top finger next to the bridge where the increase is averaged."""
    return LayoutRect(x0=-0.075, y0=0.075, x1=0.075, y1=0.575)


def reference_cut() -> float:
    """y position (µm) of the linewidth cut through the top finger."""
    return 0.325


def calibrate_eta(target_percent: float, layout: Sequence[LayoutRect] | None = None,
                  region: LayoutRect | None = None, alpha_fwd: float = REFERENCE_ALPHA,
                  beta_back: float = REFERENCE_BETA) -> float:
    """η for which ``backscatter_increase`` equals ``target_percent``."""
    layout = reference_layout() if layout is None else list(layout)
    region = reference_region() if region is None else region

    def excess(eta: float) -> float:
        psf = PsfParams(alpha_fwd=alpha_fwd, beta_back=beta_back, eta=eta)
        return backscatter_increase(layout, psf, region) - target_percent

    if excess(1.0e-6) > 0:
        raise JunctionFabError(f"target {target_percent}% below the reachable range")
    hi = 1.0
    while excess(hi) < 0:
        hi *= 2.0
        if hi > 1.0e3:
            raise JunctionFabError(f"target {target_percent}% not reachable on this layout")
    return float(brentq(excess, 1.0e-6, hi, xtol=1e-10))


def calibrate_threshold(target_bias: float, psf: PsfParams, layout: Sequence[LayoutRect] | None = None,
                        nominal_width: float = REFERENCE_FEATURE_WIDTH, at: float | None = None) -> float:
    """Development threshold giving ``target_bias`` nm on the reference cut."""
    layout = reference_layout() if layout is None else list(layout)
    at = reference_cut() if at is None else at
    feature = find_feature(layout, nominal_width)
    cx, _ = feature.center
    centre_dose = dose_at_point(layout, psf, (cx, at))

    def excess(threshold: float) -> float:
        preset = ResistPreset(name="calibration", psf=psf, threshold_fraction=threshold)
        return developed_width(layout, preset, feature, at) * 1000.0 - nominal_width - target_bias

    return float(brentq(excess, 0.05 * centre_dose, 0.999 * centre_dose, xtol=1e-9))


@lru_cache(maxsize=None)
def presets() -> dict[str, ResistPreset]:
    """Shipped resist presets, calibrated on the reference layout."""
    eta_pmma = calibrate_eta(PMMA_BACKSCATTER_TARGET)
    eta_csar = calibrate_eta(CSAR_BACKSCATTER_TARGET)
    pmma_psf = PsfParams(alpha_fwd=REFERENCE_ALPHA, beta_back=REFERENCE_BETA, eta=eta_pmma)
    csar_psf = PsfParams(alpha_fwd=REFERENCE_ALPHA, beta_back=REFERENCE_BETA, eta=eta_csar)
    threshold = calibrate_threshold(PMMA_BIAS_TARGET, pmma_psf)
    log.debug("calibrated presets: eta PMMA %.4f, eta CSAR %.4f, threshold %.4f",
              eta_pmma, eta_csar, threshold)
    return {
        "mma-pmma-a4": ResistPreset(name="MMA-PMMA-A4", psf=pmma_psf, threshold_fraction=threshold),
        "mma-csar62": ResistPreset(name="MMA-CSAR62", psf=csar_psf, threshold_fraction=threshold),
    }


def get_preset(name: str) -> ResistPreset:
    key = name.lower()
    table = presets()
    if key not in table:
        raise ConfigError(f"unknown resist preset {name!r}; choose from {sorted(table)}")
    return table[key]


def preset_with_psf(preset: ResistPreset, psf: PsfParams) -> ResistPreset:
    """Preset copy using a PSF fitted elsewhere (e.g. by the Monte Carlo run)."""
    return preset.model_copy(update={"psf": psf})


def load_psf(path: str | Path) -> PsfParams:
    """Read PSF parameters written as JSON (the psf command's psf_fit.json)."""
    path = Path(path)
    try:
        return PsfParams.model_validate_json(path.read_text())
    except OSError as e:
        raise ConfigError(f"cannot read PSF {path}: {e}") from e
    except ValidationError as e:
        raise ConfigError(f"{path}: invalid PSF: {e}") from e


def load_layout(path: str | Path) -> list[LayoutRect]:
    """Read rectangles from CSV (x0,y0,x1,y1[,relative_dose]) or a JSON list."""
    path = Path(path)
    try:
        if path.suffix.lower() == ".json":
            rows = json.loads(path.read_text())
        else:
            rows = pd.read_csv(path, comment="#").to_dict(orient="records")
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read layout {path}: {e}") from e
    return [LayoutRect.model_validate(row) for row in rows]


def write_dose_map(path: str | Path, xs: ArrayLike, ys: ArrayLike, dose: NDArray[np.float64]) -> None:
    """CSV grid with x positions as header and y as first column."""
    frame = pd.DataFrame(dose, index=pd.Index(np.asarray(ys), name="y_um"),
                         columns=[f"{x:.6g}" for x in np.asarray(xs)])
    frame.to_csv(path, float_format="%.9g")
