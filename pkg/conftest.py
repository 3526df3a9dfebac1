"""
Shared Test Setup
-----------------
Hypothesis profiles and common fixtures for the root-level test modules.

Profiles:
    dev         quick local runs (default)
    acceptance  the long property runs; select with HYPOTHESIS_PROFILE=acceptance
"""

import os
from pathlib import Path

import hypothesis as hyp
import pytest

from app.parser import parse_policy_set
from app.schemas import parse_entities, parse_request, parse_schema

hyp.settings.register_profile("dev", max_examples=200, deadline=None)
hyp.settings.register_profile(
    "acceptance",
    max_examples=10_000,
    deadline=None,
    suppress_health_check=[hyp.HealthCheck.too_slow],
)
hyp.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "dev"))

TINYTODO_DIR = Path(__file__).parent / "data" / "tinytodo"


@pytest.fixture(scope="session")
def tinytodo_dir() -> Path:
    return TINYTODO_DIR


@pytest.fixture(scope="session")
def tinytodo_policies():
    return parse_policy_set((TINYTODO_DIR / "policies.cedar").read_bytes())


@pytest.fixture(scope="session")
def tinytodo_schema():
    return parse_schema((TINYTODO_DIR / "schema.json").read_bytes())


@pytest.fixture
def tinytodo_store():
    # fresh store per test: the ancestor memo lives on the store
    return parse_entities((TINYTODO_DIR / "entities.json").read_bytes())


@pytest.fixture(scope="session")
def tinytodo_request():
    def load(name: str):
        return parse_request((TINYTODO_DIR / "requests" / f"{name}.json").read_bytes())
    return load
