"""Variation statistics over junction datasets."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict
from scipy import stats as sps

from junctionfab.errors import FitError, JunctionFabError
from junctionfab.features.dataset import JunctionDataset
from junctionfab.features.electrical import ElectricalParams, calibrate_ra, f01_from_rn

log = logging.getLogger(__name__)

MIN_FILTER_SAMPLES = 8
MAX_FILTER_ITERATIONS = 3


def cv_percent(values: ArrayLike) -> float:
    """Sample standard deviation over mean, in percent."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise JunctionFabError("a coefficient of variation needs at least two values")
    mean = v.mean()
    if mean == 0:
        raise JunctionFabError("coefficient of variation undefined for zero mean")
    return float(v.std(ddof=1) / abs(mean) * 100.0)


def spread_percent(values: ArrayLike) -> float:
    """Full range over mean, in percent."""
    v = np.asarray(values, dtype=float)
    if v.size == 0 or v.mean() == 0:
        raise JunctionFabError("spread needs a non-empty sample with non-zero mean")
    return float((v.max() - v.min()) / abs(v.mean()) * 100.0)


def three_sigma_mask(values: ArrayLike) -> NDArray[np.bool_]:
    """True for values kept after iteratively discarding points beyond 3σ."""
    v = np.asarray(values, dtype=float)
    keep = np.ones(v.size, dtype=bool)
    if v.size < MIN_FILTER_SAMPLES:
        return keep
    for _ in range(MAX_FILTER_ITERATIONS):
        kept = v[keep]
        if kept.size < MIN_FILTER_SAMPLES:
            break
        outside = keep & (np.abs(v - kept.mean()) > 3.0 * kept.std(ddof=1))
        if not outside.any():
            break
        keep &= ~outside
    return keep


def three_sigma_filter(values: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Split ``values`` into (kept, removed)."""
    v = np.asarray(values, dtype=float)
    keep = three_sigma_mask(v)
    return v[keep], v[~keep]


class GroupVariation(BaseModel):
    model_config = ConfigDict(frozen=True)

    group: str
    n: int
    removed: int
    mean: float
    wafer_cv: float
    chip_cv: float | None
    inter_chip_cv: float | None
    spread: float
    yield_fraction: float


class Outlier(BaseModel):
    """A reading the 3σ filter removed."""
    model_config = ConfigDict(frozen=True)

    chip_id: str
    x_mm: float
    y_mm: float
    group: str
    value: float


class VariationReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    metric: str
    groups: list[GroupVariation]
    outliers: list[Outlier] = []

    def group(self, name: str) -> GroupVariation:
        for g in self.groups:
            if g.group == name:
                return g
        raise KeyError(name)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([g.model_dump() for g in self.groups])

    def render(self) -> str:
        """Plain-text table, one row per group."""
        df = self.to_frame().rename(columns={
            "wafer_cv": "wafer CV %", "chip_cv": "chip CV %",
            "inter_chip_cv": "inter-chip CV %", "spread": "spread %",
            "yield_fraction": "yield",
        })
        table = df.to_string(index=False, float_format=lambda x: f"{x:.2f}", na_rep="-")
        if not self.outliers:
            return table
        removed = self.outliers_frame().to_string(index=False, float_format=lambda x: f"{x:.4g}")
        return f"{table}\n\n{len(self.outliers)} outlier(s) removed:\n{removed}"

    def outliers_frame(self) -> pd.DataFrame:
        columns = list(Outlier.model_fields)
        return pd.DataFrame([o.model_dump() for o in self.outliers], columns=columns)

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        self.to_frame().to_csv(path, index=False, lineterminator="\n")
        return path

    def write_outliers_csv(self, path: str | Path) -> Path:
        path = Path(path)
        self.outliers_frame().to_csv(path, index=False, lineterminator="\n")
        return path


def _chip_levels(frame: pd.DataFrame, metric: str) -> tuple[float | None, float | None]:
    per_chip = frame.groupby("chip_id", sort=True)[metric]
    chip_cvs = [cv_percent(v) for _, v in per_chip if len(v) >= 2]
    means = per_chip.mean()
    chip_cv = float(np.mean(chip_cvs)) if chip_cvs else None
    inter = cv_percent(means.to_numpy()) if len(means) >= 2 else None
    return chip_cv, inter


def variation_report(dataset: JunctionDataset, metric: str = "r_ohm",
                     outlier_filter: bool = True) -> VariationReport:
    """Wafer, per-chip and inter-chip variation of ``metric`` per group.

    Junctions without overlap count against the yield and are otherwise
    ignored. Groups with fewer than two usable values are skipped.
    """
    df = dataset.frame()
    if df.empty:
        raise JunctionFabError("cannot report on an empty dataset")
    out = []
    outliers: list[Outlier] = []
    for name in dataset.groups():
        sub = df[df["group"] == name]
        usable = sub[sub["regime"] != "None"].dropna(subset=[metric])
        if len(usable) < 2:
            log.warning("group %s has %d usable junctions; skipped", name, len(usable))
            continue
        keep = three_sigma_mask(usable[metric].to_numpy()) if outlier_filter \
            else np.ones(len(usable), dtype=bool)
        kept = usable[keep]
        for row in usable[~keep].itertuples(index=False):
            outliers.append(Outlier(chip_id=row.chip_id, x_mm=row.x_mm, y_mm=row.y_mm,
                                    group=row.group, value=float(getattr(row, metric))))
        values = kept[metric].to_numpy()
        chip_cv, inter = _chip_levels(kept, metric)
        out.append(GroupVariation(
            group=name,
            n=len(kept),
            removed=int((~keep).sum()),
            mean=float(values.mean()),
            wafer_cv=cv_percent(values),
            chip_cv=chip_cv,
            inter_chip_cv=inter,
            spread=spread_percent(values),
            yield_fraction=len(usable) / len(sub),
        ))
    if outliers:
        log.info("%d outlier(s) removed from %s", len(outliers), metric)
    return VariationReport(metric=metric, groups=out, outliers=outliers)


def plane_fit(x: ArrayLike, y: ArrayLike, z: ArrayLike) -> tuple[float, float, float]:
    """Least-squares plane z = a + b·x + c·y; returns (a, b, c)."""
    x, y, z = (np.asarray(a, dtype=float) for a in (x, y, z))
    design = np.column_stack([np.ones_like(x), x, y])
    if x.size < 3 or np.linalg.matrix_rank(design) < 3:
        raise FitError("plane fit needs at least three non-collinear positions")
    coef, *_ = np.linalg.lstsq(design, z, rcond=None)
    return float(coef[0]), float(coef[1]), float(coef[2])


@dataclass(frozen=True)
class HeatMap:
    """Cell means of a metric over the substrate plus its plane fit.

    ``values[i, j]`` covers row ``i`` along y and column ``j`` along x;
    empty cells are NaN. ``gradient`` is (∂/∂x, ∂/∂y) per mm.
    """
    metric: str
    values: NDArray[np.float64]
    x_edges: NDArray[np.float64]
    y_edges: NDArray[np.float64]
    intercept: float
    gradient: tuple[float, float]

    @property
    def gradient_magnitude(self) -> float:
        return float(np.hypot(*self.gradient))

    def to_frame(self) -> pd.DataFrame:
        xc = 0.5 * (self.x_edges[:-1] + self.x_edges[1:])
        yc = 0.5 * (self.y_edges[:-1] + self.y_edges[1:])
        return pd.DataFrame(self.values, index=pd.Index(np.round(yc, 6), name="y_mm"),
                            columns=np.round(xc, 6))

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        self.to_frame().to_csv(path, lineterminator="\n")
        return path

    def _gray(self) -> NDArray[np.int64]:
        v = self.values
        finite = np.isfinite(v)
        if not finite.any():
            return np.zeros(v.shape, dtype=np.int64)
        lo, hi = np.nanmin(v), np.nanmax(v)
        scaled = np.zeros(v.shape)
        if hi > lo:
            scaled[finite] = (v[finite] - lo) / (hi - lo)
        gray = np.rint(scaled * 255).astype(np.int64)
        gray[~finite] = 0
        return gray

    def write_pgm(self, path: str | Path) -> Path:
        """Plain (P2) grayscale image, top row at the largest y."""
        path = Path(path)
        gray = self._gray()[::-1]
        rows = "\n".join(" ".join(str(p) for p in row) for row in gray)
        path.write_text(f"P2\n{gray.shape[1]} {gray.shape[0]}\n255\n{rows}\n")
        return path

    def write_svg(self, path: str | Path, cell: int = 20) -> Path:
        path = Path(path)
        gray = self._gray()[::-1]
        ny, nx = gray.shape
        rects = [
            f'<rect x="{j * cell}" y="{i * cell}" width="{cell}" height="{cell}" '
            f'fill="rgb({g},{g},{g})"/>'
            for i, row in enumerate(gray) for j, g in enumerate(row)
        ]
        path.write_text(
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{nx * cell}" height="{ny * cell}">\n'
            + "\n".join(rects) + "\n</svg>\n")
        return path


def heatmap(dataset: JunctionDataset, metric: str, grid_shape: tuple[int, int] = (10, 10),
            substrate_size: tuple[float, float] = (22.0, 22.0),
            groups: Sequence[str] | None = None) -> HeatMap:
    """Bin ``metric`` on a ``(columns, rows)`` grid and fit a plane through the points."""
    nx, ny = grid_shape
    if nx < 1 or ny < 1:
        raise JunctionFabError(f"invalid heat-map grid {grid_shape}")
    df = dataset.frame()
    if groups is not None:
        df = df[df["group"].isin(list(groups))]
    df = df.dropna(subset=[metric])
    if metric in ("r_ohm", "area_um2"):
        df = df[df["regime"] != "None"]
    x, y, z = (df[c].to_numpy(dtype=float) for c in ("x_mm", "y_mm", metric))
    intercept, gx, gy = plane_fit(x, y, z)

    x_edges = np.linspace(0.0, substrate_size[0], nx + 1)
    y_edges = np.linspace(0.0, substrate_size[1], ny + 1)
    total, _, _ = np.histogram2d(y, x, bins=[y_edges, x_edges], weights=z)
    count, _, _ = np.histogram2d(y, x, bins=[y_edges, x_edges])
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(count > 0, total / count, np.nan)
    return HeatMap(metric=metric, values=values, x_edges=x_edges, y_edges=y_edges,
                   intercept=intercept, gradient=(gx, gy))


class AreaResistanceFit(BaseModel):
    """log Rₙ = intercept + slope·log A.

    ``pearson_r`` is |r| of the log-log pairs; ``pearson_raw`` is |r| of
    the untransformed (A, Rₙ) pairs.
    """
    model_config = ConfigDict(frozen=True)

    slope: float
    intercept: float
    pearson_r: float
    pearson_raw: float
    n: int
    rejected: int


def fit_area_resistance(areas: ArrayLike, resistances: ArrayLike) -> AreaResistanceFit:
    a = np.asarray(areas, dtype=float)
    r = np.asarray(resistances, dtype=float)
    ok = np.isfinite(a) & np.isfinite(r) & (a > 0) & (r > 0)
    rejected = int((~ok).sum())
    if rejected:
        log.warning("%d records with non-positive area or resistance rejected", rejected)
    a, r = a[ok], r[ok]
    if a.size < 3 or np.ptp(a) == 0:
        raise FitError("area-resistance fit needs at least three distinct areas")
    la, lr = np.log(a), np.log(r)
    fit = sps.linregress(la, lr)
    return AreaResistanceFit(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        pearson_r=abs(float(fit.rvalue)),
        pearson_raw=abs(float(sps.pearsonr(a, r)[0])),
        n=int(a.size),
        rejected=rejected,
    )


def area_resistance_fit(dataset: JunctionDataset) -> AreaResistanceFit:
    df = dataset.frame()
    return fit_area_resistance(df["area_um2"].to_numpy(dtype=float), df["r_ohm"].to_numpy(dtype=float))


class GroupFrequency(BaseModel):
    model_config = ConfigDict(frozen=True)

    group: str
    n: int
    f01_mean_ghz: float
    f01_cv: float


class FrequencyReport(BaseModel):
    """RA product calibrated on the dataset and the f01 spread it implies."""
    model_config = ConfigDict(frozen=True)

    ra_product: float  # Ω·µm²
    groups: list[GroupFrequency]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([g.model_dump() for g in self.groups],
                            columns=list(GroupFrequency.model_fields))

    def render(self) -> str:
        df = self.to_frame().rename(columns={"f01_mean_ghz": "f01 GHz", "f01_cv": "f01 CV %"})
        table = df.to_string(index=False, float_format=lambda x: f"{x:.3f}")
        return f"calibrated RA {self.ra_product:.1f} Ohm um2\n{table}"

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        self.to_frame().to_csv(path, index=False, lineterminator="\n")
        return path


def frequency_report(dataset: JunctionDataset, params: ElectricalParams,
                     outlier_filter: bool = True) -> FrequencyReport:
    """Transmon f01 per group from the recorded resistances.

    The RA product is the median Rₙ·A over all readings; the f01 spread
    uses the readings the 3σ filter keeps.
    """
    df = dataset.frame()
    usable = df[df["regime"] != "None"].dropna(subset=["r_ohm"])
    if usable.empty:
        raise FitError("no junction with a resistance reading")
    ra = calibrate_ra(usable["area_um2"].to_numpy(dtype=float), usable["r_ohm"].to_numpy(dtype=float))
    groups = []
    for name, sub in usable.groupby("group", sort=False):
        r = sub["r_ohm"].to_numpy(dtype=float)
        if outlier_filter:
            r = r[three_sigma_mask(r)]
        if r.size < 2:
            continue
        f = f01_from_rn(r, params)
        groups.append(GroupFrequency(group=str(name), n=int(r.size),
                                     f01_mean_ghz=float(f.mean()), f01_cv=cv_percent(f)))
    return FrequencyReport(ra_product=ra, groups=groups)
