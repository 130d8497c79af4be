"""Per-junction records and their versioned CSV form."""
from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Any

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from junctionfab.errors import DatasetError, SchemaVersionError
from junctionfab.features.geometry import Regime
from junctionfab.metadata import __csv_schema__

log = logging.getLogger(__name__)

COLUMNS = [
    "chip_id", "x_mm", "y_mm", "group", "nom_w_nm", "nom_l_nm",
    "lw_top_nm", "lw_bot_nm", "regime", "area_um2", "r_ohm",
]
SCHEMA_PREFIX = "# junctionfab-dataset schema="
UNITS_LINE = "# units: x_mm,y_mm mm; *_nm nm; area_um2 um^2; r_ohm ohm; r_ohm empty for regime None"


class JunctionRecord(BaseModel):
    """One simulated or measured junction.

    ``nom_w_nm`` is the tilt-axis window, ``nom_l_nm`` the transverse top
    linewidth; ``lw_top_nm`` and ``lw_bot_nm`` are their realized values.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    chip_id: str
    x_mm: float
    y_mm: float
    group: str
    nom_w_nm: float = Field(gt=0)
    nom_l_nm: float = Field(gt=0)
    lw_top_nm: float
    lw_bot_nm: float
    regime: Regime
    area_um2: float = Field(ge=0)
    r_ohm: float | None = None

    @model_validator(mode="after")
    def _resistance_consistent(self) -> "JunctionRecord":
        if self.regime is Regime.NONE:
            if self.r_ohm is not None:
                raise ValueError("a junction without overlap has no resistance")
        elif self.r_ohm is None or not self.r_ohm > 0 or not self.area_um2 > 0:
            raise ValueError("an overlapping junction needs positive area and resistance")
        return self


class JunctionDataset(BaseModel):
    model_config = ConfigDict(frozen=True)

    records: list[JunctionRecord] = Field(default_factory=list)
    metadata: dict[str, Any] = Field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def frame(self) -> pd.DataFrame:
        """Records as a DataFrame in column order; ``r_ohm`` is NaN for regime None."""
        if not self.records:
            return pd.DataFrame(columns=COLUMNS)
        rows = [r.model_dump() for r in self.records]
        df = pd.DataFrame(rows, columns=COLUMNS)
        df["regime"] = [r.regime.value for r in self.records]
        df["r_ohm"] = df["r_ohm"].astype(float)
        return df

    def groups(self) -> list[str]:
        seen: dict[str, None] = {}
        for r in self.records:
            seen.setdefault(r.group, None)
        return list(seen)


def write_dataset(dataset: JunctionDataset, path: str | Path) -> Path:
    """Write the dataset as CSV behind a schema and units header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"{SCHEMA_PREFIX}{__csv_schema__}\n")
        fh.write(f"{UNITS_LINE}\n")
        dataset.frame().to_csv(fh, index=False, na_rep="", lineterminator="\n")
    return path


def _schema_version(path: Path) -> str:
    with path.open() as fh:
        first = fh.readline().strip()
    if not first.startswith(SCHEMA_PREFIX):
        raise SchemaVersionError(f"{path}: missing '{SCHEMA_PREFIX.strip()}' header line")
    return first[len(SCHEMA_PREFIX):].strip()


def check_schema(version: str) -> None:
    """Readers accept any minor revision of the major version they know."""
    try:
        major = int(version.split(".")[0])
    except ValueError:
        raise SchemaVersionError(f"unreadable schema version {version!r}") from None
    supported = int(__csv_schema__.split(".")[0])
    if major > supported:
        raise SchemaVersionError(
            f"dataset schema {version} is newer than the supported {__csv_schema__}")


def _row_to_record(row: dict[str, Any]) -> JunctionRecord:
    data = dict(row)
    r = data.get("r_ohm")
    data["r_ohm"] = None if r is None or (isinstance(r, float) and math.isnan(r)) else r
    return JunctionRecord.model_validate(data)


def read_dataset(path: str | Path, strict: bool = False,
                 allow_extra_columns: bool = False) -> tuple[JunctionDataset, list[DatasetError]]:
    """Load a dataset CSV.

    Malformed rows are reported with their 1-based data-row number and
    skipped, or raised immediately when ``strict``.
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"dataset {path} does not exist")
    check_schema(_schema_version(path))
    df = pd.read_csv(path, comment="#", dtype={"chip_id": str, "group": str, "regime": str},
                     keep_default_na=False, na_values={"r_ohm": [""]},
                     float_precision="round_trip")

    missing = [c for c in COLUMNS if c not in df.columns]
    if missing:
        raise DatasetError(f"{path}: missing columns {', '.join(missing)}")
    extra = [c for c in df.columns if c not in COLUMNS]
    if extra and not allow_extra_columns:
        raise DatasetError(f"{path}: unexpected columns {', '.join(extra)}")

    records: list[JunctionRecord] = []
    errors: list[DatasetError] = []
    for i, row in enumerate(df[COLUMNS].to_dict(orient="records"), start=1):
        try:
            records.append(_row_to_record(row))
        except ValidationError as exc:
            err = DatasetError(exc.errors()[0]["msg"], row=i)
            if strict:
                raise err from exc
            log.warning("%s: %s", path.name, err)
            errors.append(err)
    return JunctionDataset(records=records, metadata={"source": str(path)}), errors
