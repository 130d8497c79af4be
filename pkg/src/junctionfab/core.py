from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from types import TracebackType
from typing import Any, Dict, Optional, Sequence, Type

from junctionfab.errors import FitError
from junctionfab.features.config_manager import RunConfig, save_run_config
from junctionfab.features.dataset import JunctionDataset, write_dataset
from junctionfab.features.electrical import ElectricalParams
from junctionfab.features.experiments import run_config
from junctionfab.features.stats import (
    AreaResistanceFit, FrequencyReport, HeatMap, VariationReport, area_resistance_fit,
    frequency_report, heatmap, variation_report,
)
from junctionfab.metadata import __version__
from junctionfab.settings import JunctionFabSettings

HEATMAP_METRICS = ("lw_top_nm", "lw_bot_nm", "area_um2", "r_ohm")


@dataclass
class Analysis:
    report: VariationReport
    heatmaps: Dict[str, HeatMap]
    fit: Optional[AreaResistanceFit]
    frequency: Optional[FrequencyReport] = None


class Pipeline:
    """One output directory: simulate or load a dataset, analyze it and
    write every artefact next to a ``metadata.json``.

    Used as a context manager it mirrors the package log into ``run.log``.
    """

    def __init__(self, out_dir: str | Path, settings: JunctionFabSettings = JunctionFabSettings()):
        self.settings = settings
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.log: logging.Logger = logging.getLogger("junctionfab")
        self._file_handler: Optional[logging.Handler] = None

    def __enter__(self) -> "Pipeline":
        if self.settings.log_to_file:
            fh = logging.FileHandler(self.out_dir / "run.log", encoding="utf-8", delay=True)
            fh.setFormatter(logging.Formatter("[%(asctime)s] %(levelname)s %(name)s: %(message)s"))
            fh.setLevel(getattr(logging, self.settings.log_level.upper(), logging.INFO))
            if self.log.getEffectiveLevel() > fh.level:
                self.log.setLevel(fh.level)
            self.log.addHandler(fh)
            self._file_handler = fh
        return self

    def __exit__(
            self,
            exc_type: Optional[Type[BaseException]],
            exc_val: Optional[BaseException],
            exc_tb: Optional[TracebackType],
    ) -> None:
        if self._file_handler is not None:
            self.log.removeHandler(self._file_handler)
            self._file_handler.close()
            self._file_handler = None

    def simulate(self, config: RunConfig) -> JunctionDataset:
        self.log.info("simulating %s with seed %d on %d thread(s)",
                      config.name, config.seed, self.settings.threads)
        dataset = run_config(config, workers=self.settings.threads)
        save_run_config(config, self.out_dir / "config.yaml")
        write_dataset(dataset, self.out_dir / "dataset.csv")
        return dataset

    def analyze(self, dataset: JunctionDataset, grid: tuple[int, int] = (10, 10),
                outlier_filter: bool = True,
                substrate_size: tuple[float, float] = (22.0, 22.0),
                metrics: Sequence[str] = HEATMAP_METRICS,
                electrical: ElectricalParams = ElectricalParams()) -> Analysis:
        report = variation_report(dataset, outlier_filter=outlier_filter)
        report.write_csv(self.out_dir / "report.csv")
        report.write_outliers_csv(self.out_dir / "outliers.csv")
        text = report.render()

        frequency: Optional[FrequencyReport] = None
        try:
            frequency = frequency_report(dataset, electrical, outlier_filter=outlier_filter)
            frequency.write_csv(self.out_dir / "frequency.csv")
            text += "\n\n" + frequency.render()
        except FitError as e:
            self.log.warning("no frequency report: %s", e)
        (self.out_dir / "report.txt").write_text(text + "\n")

        maps: Dict[str, HeatMap] = {}
        for metric in metrics:
            try:
                hm = heatmap(dataset, metric, grid_shape=grid, substrate_size=substrate_size)
            except FitError as e:
                self.log.warning("no %s heat map: %s", metric, e)
                continue
            stem = self.out_dir / f"heatmap_{metric}"
            hm.write_csv(stem.with_suffix(".csv"))
            hm.write_pgm(stem.with_suffix(".pgm"))
            hm.write_svg(stem.with_suffix(".svg"))
            self.log.info("%s gradient (%.4g, %.4g) per mm", metric, *hm.gradient)
            maps[metric] = hm

        fit: Optional[AreaResistanceFit] = None
        try:
            fit = area_resistance_fit(dataset)
            (self.out_dir / "area_fit.json").write_text(fit.model_dump_json(indent=2) + "\n")
        except FitError as e:
            self.log.warning("no area-resistance fit: %s", e)
        return Analysis(report=report, heatmaps=maps, fit=fit, frequency=frequency)

    def write_metadata(self, command: str, config: Optional[RunConfig] = None,
                       seed: Optional[int] = None, extra: Optional[Dict[str, Any]] = None) -> Path:
        """Provenance without timestamps, so identical runs give identical files."""
        meta: Dict[str, Any] = {"command": command, "version": __version__}
        if config is not None:
            meta["config_hash"] = config.config_hash()
            meta["seed"] = config.seed
        if seed is not None:
            meta["seed"] = seed
        meta.update(extra or {})
        path = self.out_dir / "metadata.json"
        path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return path
