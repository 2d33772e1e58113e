#!/usr/bin/env python3
"""Validate all model JSON files against the schema and build each model.

Usage:
    python scripts/validate_models.py
"""

from __future__ import annotations

import sys
from pathlib import Path

# Add project root to path
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from sphgse.errors import ValidationError
from sphgse.model import read_model
from sphgse.validation.schema_validator import ModelSchemaValidator


def main() -> None:
    validator = ModelSchemaValidator()
    results = validator.validate_all()

    valid_count = 0
    for r in results:
        errors = list(r.errors)
        detail = ""
        if r.valid:
            try:
                model = read_model(r.filepath)
            except ValidationError as e:
                errors.append(str(e))
            else:
                detail = "  (degrees " + ", ".join(str(p) for p in model.degrees) + ")"

        status = "FAIL" if errors else "OK"
        print(f"  {status:4s} {r.filepath.name}{detail}")
        for error in errors:
            print(f"       - {error}")
        if not errors:
            valid_count += 1

    invalid_count = len(results) - valid_count
    print(f"\n{valid_count} valid, {invalid_count} invalid out of {len(results)} files")

    if invalid_count > 0:
        sys.exit(1)


if __name__ == "__main__":
    main()
