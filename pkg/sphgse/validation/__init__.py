"""Input validation: JSON Schema checks of model and ansatz files."""

from sphgse.validation.schema_validator import (
    AnsatzSchemaValidator,
    ModelSchemaValidator,
    ValidationResult,
)

__all__ = [
    "AnsatzSchemaValidator",
    "ModelSchemaValidator",
    "ValidationResult",
]
