"""Validate model and ansatz JSON files against their JSON Schemas."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import jsonschema

from sphgse.config import ANSATZ_SCHEMA_FILE, MODEL_SCHEMA_FILE, MODELS_DIR


@dataclass
class ValidationResult:
    """Result of validating a single input file."""

    filepath: Path
    valid: bool
    errors: list[str]


class _SchemaValidator:
    schema_file: Path

    def __init__(self) -> None:
        schema_text = self.schema_file.read_text(encoding="utf-8")
        self._validator = jsonschema.Draft7Validator(json.loads(schema_text))

    def _semantic_errors(self, data: dict[str, Any]) -> list[str]:
        return []

    def validate_dict(self, data: Any, filepath: Path) -> ValidationResult:
        """Validate an already-parsed document; ``filepath`` only labels the result."""
        errors = []
        for error in self._validator.iter_errors(data):
            path = ".".join(str(p) for p in error.absolute_path) or "(root)"
            errors.append(f"{path}: {error.message}")
        if not errors and isinstance(data, dict):
            errors.extend(self._semantic_errors(data))
        return ValidationResult(filepath=filepath, valid=len(errors) == 0, errors=errors)

    def validate_file(self, filepath: Path) -> ValidationResult:
        """Validate a single JSON file."""
        try:
            data = json.loads(filepath.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            return ValidationResult(filepath=filepath, valid=False, errors=[f"Invalid JSON: {e}"])
        except OSError as e:
            return ValidationResult(filepath=filepath, valid=False, errors=[f"Unreadable: {e}"])
        return self.validate_dict(data, filepath)


class ModelSchemaValidator(_SchemaValidator):
    """Validate model files against model.schema.json.

    Beyond the schema, degrees must be distinct and the weights must not all vanish.
    """

    schema_file = MODEL_SCHEMA_FILE

    def _semantic_errors(self, data: dict[str, Any]) -> list[str]:
        terms = data.get("terms")
        if terms is None:
            return []
        errors = []
        degrees = [t["p"] for t in terms]
        dupes = sorted({p for p in degrees if degrees.count(p) > 1})
        if dupes:
            errors.append(f"terms: duplicate degrees {dupes}")
        if not any(t["beta_sq"] > 0 for t in terms):
            errors.append("terms: xi(1) must be positive")
        return errors

    def validate_all(self, directory: Path = MODELS_DIR) -> list[ValidationResult]:
        """Validate every model file in ``directory``."""
        if not directory.exists():
            return []
        return [self.validate_file(path) for path in sorted(directory.glob("*.json"))]


class AnsatzSchemaValidator(_SchemaValidator):
    """Validate order-parameter ansatz files against ansatz.schema.json."""

    schema_file = ANSATZ_SCHEMA_FILE

    def _semantic_errors(self, data: dict[str, Any]) -> list[str]:
        errors = []
        locations = [q for q, _ in data.get("atoms", [])]
        if locations != sorted(set(locations)):
            errors.append("atoms: locations must be strictly increasing")
        for i, (a, b) in enumerate(data.get("frsb_segments", [])):
            if not a < b:
                errors.append(f"frsb_segments.{i}: left end must be below right end")
        return errors
