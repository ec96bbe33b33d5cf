"""
YAML documents and their bundled schemas

Training configs and checkpoint headers are YAML mappings checked against
JSON Schemas shipped in ``aelpn/schema``.
"""

from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Type

import jsonschema
import yaml

from .errors import AelpnError, ConfigError

SCHEMA_DIR = Path(__file__).parent / "schema"

TRAIN_CONFIG_SCHEMA = "train-config-v1.yaml"
CHECKPOINT_SCHEMA = "checkpoint-v1.yaml"


@lru_cache(maxsize=None)
def load_schema(name: str) -> Dict[str, Any]:
    """Load a bundled schema by file name"""
    path = SCHEMA_DIR / name
    try:
        with open(path) as f:
            return yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"Failed to load schema {name}: {e}") from e


def validate_document(
    data: Any, schema_name: str, error: Type[AelpnError] = ConfigError
) -> Dict[str, Any]:
    """
    Check a parsed document against a bundled schema

    Args:
        data: Parsed YAML
        schema_name: File name under aelpn/schema
        error: Exception type raised on failure

    Returns:
        The document, unchanged
    """
    try:
        jsonschema.validate(instance=data, schema=load_schema(schema_name))
    except jsonschema.ValidationError as e:
        location = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise error(f"Schema validation failed at {location}: {e.message}") from e
    return data


def load_yaml(path, schema_name: str) -> Dict[str, Any]:
    """Read a YAML file and validate it; an empty file counts as an empty mapping"""
    try:
        with open(path) as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"Failed to parse {path}: {e}") from e
    return validate_document({} if data is None else data, schema_name)


def dump_yaml(data: Dict[str, Any]) -> str:
    return yaml.safe_dump(data, sort_keys=False, default_flow_style=None)
