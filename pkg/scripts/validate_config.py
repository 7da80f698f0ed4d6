#!/usr/bin/env python3
"""
JSON schema validation for run configurations and probability tables.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

try:
    import jsonschema
    from jsonschema import Draft7Validator
    JSONSCHEMA_AVAILABLE = True
except ImportError:
    JSONSCHEMA_AVAILABLE = False

logger = logging.getLogger("hydrobell.validate_config")

RUN_CONFIG_SCHEMA = "run_config_schema.json"
PROBABILITY_TABLE_SCHEMA = "probability_table_schema.json"

# Fields a block must carry once the block is present at all
REQUIRED_BLOCK_FIELDS = {
    "fluid": ("rho", "sigma", "nu"),
    "geometry": ("cavity_length", "cavity_depth", "barrier_width"),
}

NUMERIC_BLOCK_FIELDS = {
    "fluid": ("rho", "sigma", "nu", "g0", "gamma", "drive_frequency_hz"),
    "geometry": (
        "cavity_length", "cavity_depth", "barrier_width", "coupling_depth", "central_length", "central_depth",
    ),
    "droplet": ("mass", "drag_coeff", "radius", "contact_fraction", "impact_phase", "pressure_halfwidth"),
    "grid": ("points_per_wavelength", "faraday_wavelength", "nz", "steps_per_period", "smoothing_cells"),
}


def _basic_validation_run_config(config: Dict) -> Tuple[bool, List[str]]:
    """
    Perform basic validation of a run config when jsonschema is unavailable.

    Args:
        config: Configuration dictionary

    Returns:
        Tuple of (is_valid, list_of_errors)
    """
    errors = []
    if not isinstance(config, dict):
        return False, ["Config must be a JSON object"]

    if config.get("schema_version", 1) != 1:
        errors.append("schema_version: only version 1 is supported")

    for block, required in REQUIRED_BLOCK_FIELDS.items():
        if block in config:
            if not isinstance(config[block], dict):
                errors.append(f"{block}: must be an object")
                continue
            for field in required:
                if field not in config[block]:
                    errors.append(f"{block}: '{field}' is a required property")

    for block, fields in NUMERIC_BLOCK_FIELDS.items():
        values = config.get(block)
        if not isinstance(values, dict):
            continue
        for field in fields:
            if field in values and (isinstance(values[field], bool) or not isinstance(values[field], (int, float))):
                errors.append(f"{block}.{field}: must be a number")

    experiment = config.get("experiment", {})
    if isinstance(experiment, dict) and "mode" in experiment:
        if experiment["mode"] not in ("independent", "mirrored"):
            errors.append("experiment.mode: must be 'independent' or 'mirrored'")

    return len(errors) == 0, errors


def _basic_validation_probability_table(data: Dict) -> Tuple[bool, List[str]]:
    errors = []
    if not isinstance(data, dict):
        return False, ["Table must be a JSON object"]
    for field in ("conditions", "outcomes", "probs"):
        if field not in data:
            errors.append(f"'{field}' is a required property")
        elif not isinstance(data[field], list):
            errors.append(f"{field}: must be an array")
    return len(errors) == 0, errors


def load_schema(schema_name: str) -> Optional[Dict]:
    """
    Load a JSON schema file.

    Args:
        schema_name: Name of schema file (e.g., 'run_config_schema.json')

    Returns:
        Schema dictionary or None if not found
    """
    schema_path = Path(__file__).parent.parent / "schemas" / schema_name
    if not schema_path.exists():
        return None

    try:
        with open(schema_path, "r", encoding="utf-8") as f:
            return json.load(f)
    except (json.JSONDecodeError, IOError):
        return None


def _schema_errors(schema: Dict, document) -> List[str]:
    errors = []
    validator = Draft7Validator(schema)
    for error in sorted(validator.iter_errors(document), key=lambda e: list(e.path)):
        path = ".".join(str(p) for p in error.path)
        errors.append(f"{path}: {error.message}" if path else error.message)
    return errors


def validate_document(document, schema_name: str, basic, strict: bool = False) -> Tuple[bool, List[str]]:
    """
    Validate an already-parsed JSON document against a named schema.

    Args:
        document: Parsed JSON value
        schema_name: Schema file under schemas/
        basic: Fallback validator used when jsonschema is not installed
        strict: If True, raise ValueError on validation errors instead of returning False

    Returns:
        Tuple of (is_valid, list_of_errors)

    Raises:
        ValueError: If strict=True and validation fails
    """
    if not JSONSCHEMA_AVAILABLE:
        if strict:
            raise ValueError("jsonschema not installed - cannot validate in strict mode")
        logger.warning(
            "jsonschema not installed - using basic validation. "
            "Install with: pip install jsonschema for full schema validation"
        )
        return basic(document)

    schema = load_schema(schema_name)
    if not schema:
        if strict:
            raise ValueError(f"Schema file {schema_name} not found - cannot validate in strict mode")
        return True, []

    errors = _schema_errors(schema, document)
    if errors:
        if strict:
            error_msg = "\n".join(f"  - {e}" for e in errors)
            raise ValueError(f"Schema validation failed:\n{error_msg}")
        return False, errors
    return True, []


def _read_json(path: Path, strict: bool) -> Tuple[Optional[object], List[str]]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f), []
    except json.JSONDecodeError as e:
        error_msg = f"Invalid JSON: {e}"
        if strict:
            raise ValueError(error_msg) from e
        return None, [error_msg]
    except IOError as e:
        error_msg = f"Cannot read file: {e}"
        if strict:
            raise ValueError(error_msg) from e
        return None, [error_msg]


def validate_run_config(config_path: Path, strict: bool = False) -> Tuple[bool, List[str]]:
    """
    Validate a run configuration file against the run config schema.

    Args:
        config_path: Path to the JSON run config
        strict: If True, raise ValueError on validation errors instead of returning False

    Returns:
        Tuple of (is_valid, list_of_errors)

    Raises:
        ValueError: If strict=True and validation fails
    """
    config, errors = _read_json(Path(config_path), strict)
    if errors:
        return False, errors
    # Comment fields (leading underscore) are documentation only
    if isinstance(config, dict):
        config = {k: v for k, v in config.items() if not k.startswith("_")}
    return validate_document(config, RUN_CONFIG_SCHEMA, _basic_validation_run_config, strict)


def validate_probability_table(data, strict: bool = False) -> Tuple[bool, List[str]]:
    return validate_document(data, PROBABILITY_TABLE_SCHEMA, _basic_validation_probability_table, strict)


def validate_config_file(config_path: Path, config_type: str = "run") -> Tuple[bool, List[str]]:
    """
    Validate a configuration file.

    Args:
        config_path: Path to configuration file
        config_type: Type of document ('run' or 'table')

    Returns:
        Tuple of (is_valid, list_of_errors)
    """
    if config_type == "run":
        return validate_run_config(config_path)
    elif config_type == "table":
        data, errors = _read_json(Path(config_path), strict=False)
        if errors:
            return False, errors
        return validate_probability_table(data)
    else:
        return False, [f"Unknown config type: {config_type}"]
