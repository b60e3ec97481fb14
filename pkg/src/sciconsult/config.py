"""Service configuration: one YAML file mapped onto plain dataclasses.

Top-level keys configure the service itself; the nested ``gateway`` mapping
configures the LLM backend (see `GatewayConfig`). Unknown keys are rejected
so that typos fail loudly instead of silently falling back to defaults.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .gateway import GatewayConfig

#: Evidence representations the recommendation step accepts.
STRATEGIES = ("abstract_only", "full_paper", "summaries")


@dataclass
class AppConfig:
    """Everything the consult service needs to wire itself together.

    Path fields left as ``None`` fall back at runtime: the bundled
    questionnaire, an empty dataset catalog, live HTTP transport, and a
    summary cache under ``data_dir``.
    """

    data_dir: str = "consult_data"
    questionnaire_path: str | None = None
    catalog_path: str | None = None
    cassette_dir: str | None = None
    summary_cache_dir: str | None = None
    pdf_converter: tuple[str, ...] = ()
    workers: int = 2
    politeness_delay_s: float = 3.0
    per_query_max: int = 10
    k_limit: int = 50
    n_limit: int = 50
    context_budget_tokens: int = 100_000
    default_strategy: str = "summaries"
    gateway: GatewayConfig = field(default_factory=GatewayConfig)

    def __post_init__(self):
        for name in ("workers", "per_query_max", "k_limit", "n_limit",
                     "context_budget_tokens"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not isinstance(self.politeness_delay_s, (int, float)) or self.politeness_delay_s < 0:
            raise ConfigError(
                f"politeness_delay_s must be a non-negative number, got {self.politeness_delay_s!r}"
            )
        if self.default_strategy not in STRATEGIES:
            raise ConfigError(
                f"default_strategy must be one of {', '.join(STRATEGIES)}, "
                f"got {self.default_strategy!r}"
            )
        if not self.data_dir:
            raise ConfigError("data_dir must be a non-empty path")
        self.pdf_converter = tuple(str(part) for part in self.pdf_converter)


_STR_OR_NONE_FIELDS = {
    "questionnaire_path", "catalog_path", "cassette_dir", "summary_cache_dir",
}


def _build_gateway(raw: object) -> GatewayConfig:
    if not isinstance(raw, dict):
        raise ConfigError("gateway section must be a mapping")
    known = {f.name for f in dataclasses.fields(GatewayConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown gateway key(s): {', '.join(unknown)}")
    try:
        config = GatewayConfig(**raw)
    except TypeError as exc:
        raise ConfigError(f"bad gateway section: {exc}") from exc
    if config.kind not in ("scripted", "remote_api"):
        raise ConfigError(
            f"gateway kind must be 'scripted' or 'remote_api', got {config.kind!r}"
        )
    return config


def parse_config(document: str) -> AppConfig:
    """Parse a YAML config document into a validated AppConfig."""
    try:
        data = yaml.safe_load(document)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping of settings")

    known = {f.name for f in dataclasses.fields(AppConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")

    kwargs: dict = {}
    for key, value in data.items():
        if key == "gateway":
            kwargs[key] = _build_gateway(value)
        elif key == "pdf_converter":
            if not isinstance(value, list) or not all(isinstance(p, str) for p in value):
                raise ConfigError("pdf_converter must be a list of argv strings")
            kwargs[key] = tuple(value)
        elif key in _STR_OR_NONE_FIELDS:
            if value is not None and not isinstance(value, str):
                raise ConfigError(f"{key} must be a string path or null")
            kwargs[key] = value
        else:
            kwargs[key] = value
    return AppConfig(**kwargs)


def load_config(path: str | Path) -> AppConfig:
    """Read and parse a config file, resolving relative paths against it.

    Every path-valued setting in the file is interpreted relative to the
    file's own directory, so a config travels with the tree it describes.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    config = parse_config(text)
    base = path.resolve().parent
    config.data_dir = str(_anchor(base, config.data_dir))
    for name in sorted(_STR_OR_NONE_FIELDS):
        value = getattr(config, name)
        if value is not None:
            setattr(config, name, str(_anchor(base, value)))
    if config.gateway.transcript_path:
        config.gateway.transcript_path = str(_anchor(base, config.gateway.transcript_path))
    if config.gateway.audit_path:
        config.gateway.audit_path = str(_anchor(base, config.gateway.audit_path))
    return config


def _anchor(base: Path, value: str) -> Path:
    candidate = Path(value)
    return candidate if candidate.is_absolute() else base / candidate
