from __future__ import annotations

from collections.abc import Iterator
import json
from pathlib import Path
from typing import Any
from urllib.parse import urlparse
from urllib.request import urlopen

from jsonschema import ValidationError as SchemaViolation, validate
from pydantic import ValidationError

from qzk_lab.core.errors import ConfigError
from qzk_lab.core.models import ExperimentConfig

# -------- schema cache (offline safety) --------
_SCHEMA_CACHE: dict[str, dict[str, Any]] = {}


def _load_schema(schema_ref: str, base_path: Path) -> dict[str, Any]:
    if schema_ref in _SCHEMA_CACHE:
        return _SCHEMA_CACHE[schema_ref]

    parsed = urlparse(schema_ref)

    try:
        if parsed.scheme in ("http", "https", "file"):
            with urlopen(schema_ref) as resp:
                schema = json.load(resp)
        else:
            schema_path = (base_path.parent / schema_ref).resolve()
            if not schema_path.exists():
                raise ConfigError(f"Schema not found: {schema_path}")
            schema = json.loads(schema_path.read_text())
    except ConfigError:
        raise
    except (OSError, ValueError) as e:
        raise ConfigError(f"Failed to load schema '{schema_ref}': {e}") from e

    _SCHEMA_CACHE[schema_ref] = schema
    return schema


class ExperimentCatalog:
    """
    Named experiment configurations:
    - validated against the catalog's $schema
    - normalized into ExperimentConfig models
    """

    def __init__(self, catalog_path: str | Path = "configs/experiments.json"):
        self.catalog_path = catalog_path if isinstance(catalog_path, Path) else Path(catalog_path)
        self.entries: dict[str, dict[str, Any]] = {}
        self.configs: dict[str, ExperimentConfig] = {}
        self.schema_ref: str | None = None

        self._load()
        self._validate()
        self._normalize()

    # ---------- loading & validation ----------

    def _load(self) -> None:
        try:
            raw = json.loads(self.catalog_path.read_text())
        except (OSError, ValueError) as e:
            raise ConfigError(f"Failed to load catalog: {e}") from e
        if not isinstance(raw, dict):
            raise ConfigError("Catalog must be a JSON object")

        self.schema_ref = raw.pop("$schema", None)
        if not self.schema_ref:
            raise ConfigError("Catalog file missing $schema field")
        self.entries = raw

    def _validate(self) -> None:
        assert self.schema_ref is not None
        schema = _load_schema(self.schema_ref, self.catalog_path)
        try:
            validate(instance=self.entries, schema=schema)
        except SchemaViolation as e:
            raise ConfigError(f"Catalog schema violation:\n{e.message}") from e

    def _normalize(self) -> None:
        for name, entry in self.entries.items():
            try:
                self.configs[name] = ExperimentConfig.model_validate({"name": name, **entry})
            except ValidationError as e:
                raise ConfigError(f"Experiment '{name}': {e.errors()[0]['msg']}") from e

    # ---------- public API ----------

    def names(self) -> list[str]:
        return sorted(self.configs)

    def get(self, name: str, **overrides: Any) -> ExperimentConfig:
        """Config by name, with non-None overrides re-validated."""
        if name not in self.configs:
            raise ConfigError(f"Unknown experiment '{name}'; known: {self.names()}")
        base = self.configs[name]
        changes = {k: v for k, v in overrides.items() if v is not None}
        if not changes:
            return base
        try:
            return ExperimentConfig.model_validate({**base.model_dump(), **changes})
        except ValidationError as e:
            raise ConfigError(f"Experiment '{name}': {e.errors()[0]['msg']}") from e

    def __iter__(self) -> Iterator[ExperimentConfig]:
        return iter(self.configs[name] for name in self.names())


def make_config(**fields: Any) -> ExperimentConfig:
    """Ad-hoc config from CLI options."""
    try:
        return ExperimentConfig.model_validate({k: v for k, v in fields.items() if v is not None})
    except ValidationError as e:
        raise ConfigError(f"Invalid experiment options: {e.errors()[0]['msg']}") from e
