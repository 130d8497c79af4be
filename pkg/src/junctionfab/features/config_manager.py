"""Run configuration: schema, YAML/JSON loading and reference presets."""
from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Callable, Dict

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from junctionfab.errors import ConfigError
from junctionfab.features.ebl_writer import LwNoiseModel, WriterConfig
from junctionfab.features.electrical import ElectricalParams
from junctionfab.features.geometry import DolanMask, EvaporationStep, StackGeometry
from junctionfab.features.wafer_layout import (
    WaferLayout, correlation_layout, overlay_layout, reference_wafer_layout,
)
from junctionfab.features.wafer_sim import (
    EvaporationPlan, LerModel, MeasurementModel, OxidationField, ProcessVariation, SourceModel,
)

log = logging.getLogger(__name__)


class RunConfig(BaseModel):
    """Everything a wafer simulation depends on."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = "run"
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    stack: StackGeometry = StackGeometry()
    mask: DolanMask = DolanMask()
    evaporation: EvaporationPlan = EvaporationPlan()
    writer: WriterConfig = WriterConfig()
    noise: LwNoiseModel = LwNoiseModel()
    source: SourceModel = SourceModel()
    ler: LerModel = LerModel()
    process: ProcessVariation = ProcessVariation()
    electrical: ElectricalParams = ElectricalParams()
    measurement: MeasurementModel = MeasurementModel()
    wafer: WaferLayout = Field(default_factory=reference_wafer_layout)
    heatmap_grid: tuple[int, int] = (10, 10)
    outlier_filter: bool = True

    def to_dict(self) -> Dict[str, Any]:
        """JSON-compatible dump; generated grid sites are left out."""
        exclude = {"wafer": {"sites"}} if self.wafer.groups else None
        return self.model_dump(mode="json", exclude=exclude)

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


def _node_line(root: yaml.Node | None, loc: tuple[Any, ...]) -> int | None:
    node = root
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            match = [v for k, v in node.value if str(k.value) == str(key)]
            if not match:
                break
            node = match[0]
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
        else:
            break
    return None if node is None else node.start_mark.line + 1


def _describe(exc: ValidationError, path: Path, root: yaml.Node | None) -> str:
    lines = []
    for err in exc.errors():
        loc = tuple(err["loc"])
        where = ".".join(str(p) for p in loc) or "<root>"
        line = _node_line(root, loc)
        prefix = f"{path}:{line}" if line else str(path)
        lines.append(f"{prefix}: {where}: {err['msg']}")
    return "\n".join(lines)


def load_run_config(path: str | Path) -> RunConfig:
    """Read a YAML or JSON run configuration.

    Schema violations raise :class:`ConfigError` naming the offending key
    and, for YAML, its line.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    text = path.read_text()
    root = None
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            root = yaml.compose(text)
            data = yaml.safe_load(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}: {e.msg}") from e
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark else str(path)
        raise ConfigError(f"{where}: {getattr(e, 'problem', e)}") from e
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    try:
        config = RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_describe(e, path, root)) from e
    log.debug("loaded run config %s from %s", config.name, path)
    return config


def save_run_config(config: RunConfig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        yaml.safe_dump(config.to_dict(), fh, default_flow_style=False, sort_keys=False)
    return path


def reference_config(seed: int = 0) -> RunConfig:
    """45°/0° evaporation on the six-chip layout with oxidation scatter,
    SEM read error and contact failures on."""
    return RunConfig(
        name="reference",
        seed=seed,
        process=ProcessVariation(oxidation=OxidationField(enabled=True)),
        measurement=MeasurementModel(sem_sigma=3.0, contact_failure_fraction=0.06),
        wafer=reference_wafer_layout(),
    )


def zero_angle_config(seed: int = 0) -> RunConfig:
    """Both evaporations at normal incidence: linewidths only, no junctions."""
    return reference_config(seed).model_copy(update={
        "name": "zero-angle",
        "evaporation": EvaporationPlan(first=EvaporationStep(angle=0.0),
                                       second=EvaporationStep(angle=0.0)),
    })


def correlation_config(seed: int = 0) -> RunConfig:
    return reference_config(seed).model_copy(update={"name": "correlation", "wafer": correlation_layout()})


def overlay_config(first_angle: float, seed: int = 0) -> RunConfig:
    """240 nm windows at ``first_angle``; oxidation off to isolate the geometry."""
    return RunConfig(
        name=f"overlay-{first_angle:g}",
        seed=seed,
        evaporation=EvaporationPlan(first=EvaporationStep(angle=first_angle)),
        wafer=overlay_layout(),
    )


PRESETS: Dict[str, Callable[[int], RunConfig]] = {
    "reference": reference_config,
    "zero-angle": zero_angle_config,
    "correlation": correlation_config,
    "overlay-full": lambda seed=0: overlay_config(40.0, seed),
    "overlay-partial": lambda seed=0: overlay_config(35.0, seed),
}


def get_preset(name: str, seed: int = 0) -> RunConfig:
    try:
        return PRESETS[name](seed)
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
