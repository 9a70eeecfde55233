import json
import sys
from importlib import resources

import pytest
from jsonschema import Draft202012Validator
from referencing import Registry, Resource


def _schemas() -> dict:
    root = resources.files("probcal") / "schemas"
    return {p.name: json.loads(p.read_text()) for p in root.iterdir() if p.name.endswith(".schema.json")}


@pytest.fixture(scope="session")
def validate():
    """validate(doc, "report.schema.json") raises on any schema violation."""
    schemas = _schemas()
    registry = Registry().with_resources((s["$id"], Resource.from_contents(s)) for s in schemas.values())

    def check(doc, name):
        Draft202012Validator(schemas[name], registry=registry).validate(doc)

    return check


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
