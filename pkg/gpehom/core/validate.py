# JSON Schema validation of run reports (report.json).
from __future__ import annotations
from typing import Dict, Any, List, Optional
from jsonschema import Draft202012Validator, exceptions
import json
from pathlib import Path
from dataclasses import dataclass

DEFAULT_SCHEMA_PATH = Path(__file__).resolve().parent.parent / "schema" / "run-report-v1.json"


def _location(error: exceptions.ValidationError) -> str:
    return " -> ".join(str(p) for p in error.path) if error.path else "root"


class ReportValidator:
    def __init__(self, schema_path: str | Path = DEFAULT_SCHEMA_PATH):
        try:
            self.schema_path = Path(schema_path)
            self.schema = json.loads(self.schema_path.read_text(encoding="utf-8"))
            self.validator = Draft202012Validator(self.schema)
        except json.JSONDecodeError as e:
            raise ValueError(f"Schema file parsing error: {e}")
        except FileNotFoundError:
            raise FileNotFoundError(f"Schema file not found: {schema_path}")

    def validate(self, report: Dict[str, Any]) -> None:
        try:
            self.validator.validate(report)
        except exceptions.ValidationError as e:
            raise ValueError(f"Report validation failed (location: {_location(e)}): {e.message}") from e

    def is_valid(self, report: Dict[str, Any]) -> bool:
        return self.validator.is_valid(report)

    def iter_errors(self, report: Dict[str, Any]) -> List[str]:
        return [
            f"Validation error (location: {_location(error)}): {error.message}"
            for error in self.validator.iter_errors(report)
        ]


@dataclass
class ValidationResult:
    valid: bool
    error: Optional[str] = None


def validate_report(report: Dict[str, Any], validator: Optional[ReportValidator] = None) -> ValidationResult:
    validator = validator or ReportValidator()
    errors = validator.iter_errors(report)
    if errors:
        return ValidationResult(valid=False, error="; ".join(errors))
    return ValidationResult(valid=True)
