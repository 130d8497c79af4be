from .core import Pipeline
from .settings import JunctionFabSettings
from .features.config_manager import RunConfig, load_run_config
from .features.dataset import JunctionDataset, JunctionRecord, read_dataset, write_dataset

__all__ = [
    "Pipeline",
    "JunctionFabSettings",
    "RunConfig",
    "load_run_config",
    "JunctionDataset",
    "JunctionRecord",
    "read_dataset",
    "write_dataset",
]
