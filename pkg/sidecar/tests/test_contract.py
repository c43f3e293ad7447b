"""Wire-compatibility: the recorded request/response fixtures (shared with
the consuming pipeline's client tests) must pass unchanged against the live
service."""

import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from scorer_sidecar.app import create_app

WIRE_FIXTURES = (
    Path(__file__).parents[2] / "tests" / "data" / "scorer_wire_fixtures.json"
)


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def test_recorded_fixtures_replay_exactly(client):
    recorded = json.loads(WIRE_FIXTURES.read_text(encoding="utf-8"))["fixtures"]
    assert len(recorded) >= 8
    for fixture in recorded:
        if fixture["method"] == "GET":
            response = client.get(fixture["path"])
        else:
            response = client.post(fixture["path"], json=fixture["request"])
        assert response.status_code == 200, fixture["path"]
        assert response.json() == fixture["response"], fixture
