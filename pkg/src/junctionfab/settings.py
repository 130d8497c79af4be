import os
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from pydantic import Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from junctionfab.errors import ConfigError


class JunctionFabSettings(BaseSettings):
    """Process-level settings, separate from the run configuration.

    JF_THREADS=4, JF_LOG_LEVEL=DEBUG etc. override the YAML values.
    """

    threads: int = Field(default=1, ge=1)

    # logger
    log_to_console: bool = True
    log_to_file: bool = True
    log_level: str = "INFO"

    model_config = SettingsConfigDict(
        env_prefix="JF_",
        extra="forbid",
    )

    settings_file: Optional[Path] = None

    @classmethod
    def from_yaml(cls, path: str | Path | None) -> "JunctionFabSettings":
        """Utility for one-liner loading w/ override by env vars."""
        data: Dict[str, Any] = {}
        if path:
            path = Path(path)
            if path.exists():
                try:
                    with open(path, "r") as fh:
                        data = yaml.safe_load(fh) or {}
                except (IOError, yaml.YAMLError) as e:
                    raise ConfigError(f"error reading settings file {path}: {e}") from e
            data.setdefault("settings_file", path)

        # env vars override yaml
        final_data = {}
        for field in cls.model_fields:
            env_name = f"{cls.model_config['env_prefix']}{field.upper()}"
            if env_name in os.environ:
                final_data[field] = os.environ[env_name]
            elif field in data:
                final_data[field] = data[field]

        unknown = set(data) - set(cls.model_fields)
        if unknown:
            raise ConfigError(f"unknown settings: {', '.join(sorted(unknown))}")
        try:
            return cls.model_validate(final_data)
        except ValidationError as e:
            raise ConfigError(f"invalid settings: {e}") from e
