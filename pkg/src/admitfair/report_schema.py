"""The published JSON schema for ``report.json``."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

import jsonschema


@lru_cache(maxsize=None)
def report_schema() -> dict:
    text = resources.files("admitfair").joinpath("schemas/report.schema.json").read_text()
    return json.loads(text)


def validate_report(report: dict) -> None:
    """Raise ``jsonschema.ValidationError`` when ``report`` does not conform."""
    jsonschema.validate(report, report_schema(), cls=jsonschema.Draft202012Validator)
