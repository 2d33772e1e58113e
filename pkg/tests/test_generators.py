"""Tests for the JSON/CSV artifact writers."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from sphgse.generators import ArtifactWriter, atomic_write, render_csv, render_json, table_rows


class TestRenderJson:
    def test_sorted_keys_and_newline(self) -> None:
        text = render_json({"b": 1, "a": 2})
        assert text.endswith("}\n")
        assert text.index('"a"') < text.index('"b"')

    def test_non_finite_becomes_null(self) -> None:
        data = json.loads(render_json({"x": math.nan, "y": [1.0, math.inf], "z": np.float64(2.5)}))
        assert data == {"x": None, "y": [1.0, None], "z": 2.5}

    def test_numpy_values(self) -> None:
        data = json.loads(render_json({"a": np.arange(3), "b": np.bool_(True), "n": np.int64(7)}))
        assert data == {"a": [0, 1, 2], "b": True, "n": 7}

    def test_deterministic(self) -> None:
        payload = {"rows": [{"q": 0.1, "m": 2}], "label": "x"}
        assert render_json(payload) == render_json(dict(reversed(list(payload.items()))))


class TestRenderCsv:
    def test_header_and_cells(self) -> None:
        text = render_csv(("t", "v", "flag"), [{"t": 0.5, "v": None, "flag": True}])
        assert text == "t,v,flag\n0.5,,True\n"

    def test_missing_columns_are_blank(self) -> None:
        text = render_csv(("a", "b"), [{"a": 1}])
        assert text.splitlines()[1] == "1,"

    def test_floats_round_trip(self) -> None:
        value = 1 / 3
        text = render_csv(("x",), [{"x": np.float64(value)}])
        assert float(text.splitlines()[1]) == value


def test_table_rows() -> None:
    rows = table_rows({"t": np.array([0.0, 1.0]), "d": np.array([2.0, 3.0])})
    assert rows == [{"t": 0.0, "d": 2.0}, {"t": 1.0, "d": 3.0}]


class TestAtomicWrite:
    def test_creates_parents(self, tmp_path: Path) -> None:
        path = tmp_path / "deep" / "out.json"
        atomic_write(path, "hello\n")
        assert path.read_text(encoding="utf-8") == "hello\n"
        assert [p.name for p in path.parent.iterdir()] == ["out.json"]

    def test_replaces_existing(self, tmp_path: Path) -> None:
        path = tmp_path / "out.txt"
        path.write_text("old", encoding="utf-8")
        atomic_write(path, "new")
        assert path.read_text(encoding="utf-8") == "new"


class TestArtifactWriter:
    def test_without_path_returns_text(self) -> None:
        writer = ArtifactWriter()
        assert writer.json({"a": 1}) == render_json({"a": 1})

    def test_writes_default_and_explicit_paths(self, tmp_path: Path) -> None:
        writer = ArtifactWriter(tmp_path / "main.csv")
        writer.csv(("a",), [{"a": 1}])
        writer.json({"b": 2}, tmp_path / "side.json")
        assert (tmp_path / "main.csv").read_text(encoding="utf-8") == "a\n1\n"
        assert json.loads((tmp_path / "side.json").read_text(encoding="utf-8")) == {"b": 2}
