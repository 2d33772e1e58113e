"""Shared pytest fixtures for tests."""

from __future__ import annotations

import json
from collections.abc import Callable
from pathlib import Path

import pytest

from sphgse.model import MixedModel, named_model


@pytest.fixture
def sk() -> MixedModel:
    """xi(t) = t^2."""
    return named_model("sk")


@pytest.fixture
def pure4() -> MixedModel:
    return MixedModel.from_pairs({4: 1.0}, label="pure4")


@pytest.fixture
def two_four() -> Callable[[float], MixedModel]:
    """Factory for mu t^2 + (1 - mu) t^4."""

    def make(mu: float) -> MixedModel:
        return MixedModel.from_pairs({2: mu, 4: 1.0 - mu}, label=f"2+4:{mu:g}")

    return make


@pytest.fixture
def four_roots() -> MixedModel:
    return named_model("four_roots")


@pytest.fixture
def sample_model_data() -> dict:
    """Return a valid model dict matching model.schema.json."""
    return {
        "label": "sk",
        "terms": [{"p": 2, "beta_sq": 1.0}],
    }


@pytest.fixture
def write_json(tmp_path: Path) -> Callable[[str, object], Path]:
    """Write a JSON document into tmp_path and return its path."""

    def write(name: str, data: object) -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(data, indent=2), encoding="utf-8")
        return path

    return write


@pytest.fixture
def sk_file(write_json: Callable[[str, object], Path], sample_model_data: dict) -> Path:
    return write_json("sk.json", sample_model_data)
