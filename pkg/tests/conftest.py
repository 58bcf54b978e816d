import json
from pathlib import Path

import pytest

from unigraph.annotations import parse_annotation_file

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def einstein_ds():
    return parse_annotation_file((FIXTURES / "einstein.json").read_bytes())


@pytest.fixture(scope="session")
def corpus5_ds():
    return parse_annotation_file((FIXTURES / "corpus5.json").read_bytes())


@pytest.fixture(scope="session")
def nested_prefixes_path():
    return FIXTURES / "nested_prefixes.json"


@pytest.fixture(scope="session")
def einstein_path():
    return FIXTURES / "einstein.json"


@pytest.fixture(scope="session")
def einstein_golden_graph():
    return (FIXTURES / "einstein.graph.json").read_bytes()


def make_annotation_json(documents) -> bytes:
    return json.dumps({"documents": documents}).encode("utf-8")
