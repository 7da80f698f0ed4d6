"""
Unit tests for JSON schema validation of run configurations and probability tables.
"""

import pytest

from validate_config import (
    _basic_validation_run_config,
    validate_config_file,
    validate_probability_table,
    validate_run_config,
)

pytestmark = pytest.mark.unit


def test_valid_config_passes(fixtures_dir):
    is_valid, errors = validate_run_config(fixtures_dir / "config_valid.json")
    assert is_valid, errors
    assert errors == []


def test_missing_required_fluid_field(fixtures_dir):
    """Test a fluid block without rho is rejected with a readable message."""
    is_valid, errors = validate_run_config(fixtures_dir / "config_missing_rho.json")
    assert not is_valid
    assert any("rho" in e for e in errors)


def test_malformed_json_is_reported(fixtures_dir):
    is_valid, errors = validate_run_config(fixtures_dir / "config_malformed.json")
    assert not is_valid
    assert errors[0].startswith("Invalid JSON")


def test_strict_mode_raises(fixtures_dir):
    with pytest.raises(ValueError, match="Schema validation failed"):
        validate_run_config(fixtures_dir / "config_missing_rho.json", strict=True)


def test_unknown_top_level_key_is_rejected(temp_out_dir):
    path = temp_out_dir / "extra.json"
    path.write_text('{"schema_version": 1, "colour": "blue"}', encoding="utf-8")
    is_valid, errors = validate_run_config(path)
    assert not is_valid


def test_table_validation(fixtures_dir):
    """Test tables pass the schema even when rows do not sum to one."""
    assert validate_config_file(fixtures_dir / "table_independent.json", "table") == (True, [])
    assert validate_config_file(fixtures_dir / "table_broken_normalization.json", "table")[0]
    is_valid, errors = validate_probability_table({"conditions": [[0]], "outcomes": ["l0"]})
    assert not is_valid
    assert any("probs" in e for e in errors)


def test_unknown_kind(fixtures_dir):
    is_valid, errors = validate_config_file(fixtures_dir / "config_valid.json", "profile")
    assert not is_valid
    assert "Unknown config type" in errors[0]


def test_basic_validation_fallback():
    """Test the jsonschema-free checks catch the common mistakes."""
    ok, _ = _basic_validation_run_config({"fluid": {"rho": 1.0, "sigma": 20.0, "nu": 0.1}})
    assert ok
    ok, errors = _basic_validation_run_config(
        {"fluid": {"sigma": 20.0, "nu": 0.1}, "grid": {"nz": "many"}, "experiment": {"mode": "random"}}
    )
    assert not ok
    assert len(errors) == 3
