"""
Pipeline configuration.

Values resolve flag > environment > config file > default. The config file is
flat ``KEY=value`` text read by python-decouple; file keys and environment
variables share the ``KEYSCAN_`` prefix.
"""

from dataclasses import dataclass, field, asdict, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from decouple import Config as DecoupleConfig, Csv, RepositoryEmpty, RepositoryEnv
from loguru import logger

from .errors import ConfigError

ENV_PREFIX = "KEYSCAN_"
DATA_DIR = Path(__file__).resolve().parent / "data"
DEFAULT_CONFIG_PATH = DATA_DIR / "keyscan.conf"
DEFAULT_SIGNATURE_DB = DATA_DIR / "signature_db.json"
DEFAULT_NEEDLES = ("android/security/keystore", "AndroidKeyStore", "AndroidKeyStoreBCWorkaround")


@dataclass(frozen=True)
class Config:
    bfs_node_limit: int = 1000
    obfuscation_min_component: int = 3
    per_app_timeout_minutes: float = 30
    needle_set: List[str] = field(default_factory=lambda: list(DEFAULT_NEEDLES))
    signature_db_path: str = ""
    min_installs_filter: int = 10000
    cha_enabled: bool = False
    workers: int = 1
    top_n: int = 10

    def __post_init__(self):
        for name in ("bfs_node_limit", "obfuscation_min_component", "min_installs_filter", "workers", "top_n"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not self.per_app_timeout_minutes > 0:
            raise ConfigError(f"per_app_timeout_minutes must be > 0, got {self.per_app_timeout_minutes}")
        if not self.needle_set:
            raise ConfigError("needle_set must not be empty")

    @property
    def timeout_seconds(self) -> float:
        return self.per_app_timeout_minutes * 60.0

    @property
    def resolved_signature_db(self) -> Path:
        return Path(self.signature_db_path) if self.signature_db_path else DEFAULT_SIGNATURE_DB

    def snapshot(self) -> Dict[str, Any]:
        """Thresholds recorded into the corpus manifest."""
        return asdict(self)


def env_key(name: str) -> str:
    return f"{ENV_PREFIX}{name.upper()}"


def load_config(path: Optional[Union[str, Path]] = None, **overrides) -> Config:
    """
    Resolves a Config from a key=value file, the environment and explicit overrides.

    Args:
        path: Config file. None reads the shipped default file.
        **overrides: Field values from command-line flags; None entries are ignored.

    Returns:
        Config: The validated configuration.

    Raises:
        ConfigError: If the file is missing or a value does not cast or validate.
    """
    source = Path(path) if path is not None else DEFAULT_CONFIG_PATH
    try:
        repository = RepositoryEnv(str(source)) if source.exists() else RepositoryEmpty()
    except OSError as err:
        raise ConfigError(f"cannot read config file {source}: {err}")
    if path is not None and not source.exists():
        raise ConfigError(f"config file not found: {source}")

    reader = DecoupleConfig(repository)
    defaults = Config()
    try:
        values = {
            "bfs_node_limit": reader(env_key("bfs_node_limit"), default=defaults.bfs_node_limit, cast=int),
            "obfuscation_min_component": reader(
                env_key("obfuscation_min_component"), default=defaults.obfuscation_min_component, cast=int
            ),
            "per_app_timeout_minutes": reader(
                env_key("per_app_timeout_minutes"), default=defaults.per_app_timeout_minutes, cast=float
            ),
            "needle_set": reader(env_key("needle_set"), default=",".join(DEFAULT_NEEDLES), cast=Csv()),
            "signature_db_path": reader(env_key("signature_db_path"), default="", cast=str),
            "min_installs_filter": reader(
                env_key("min_installs_filter"), default=defaults.min_installs_filter, cast=int
            ),
            "cha_enabled": reader(env_key("cha_enabled"), default=defaults.cha_enabled, cast=bool),
            "workers": reader(env_key("workers"), default=defaults.workers, cast=int),
            "top_n": reader(env_key("top_n"), default=defaults.top_n, cast=int),
        }
    except ValueError as err:
        raise ConfigError(f"bad config value: {err}")

    flags = {k: v for k, v in overrides.items() if v is not None}
    unknown = set(flags) - set(values)
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    values.update(flags)
    values["needle_set"] = list(values["needle_set"])

    config = Config(**values)
    logger.debug("config resolved from {}: {}", source, config.snapshot())
    return config


def with_overrides(config: Config, **overrides) -> Config:
    return replace(config, **{k: v for k, v in overrides.items() if v is not None})
