"""Tests for environment-driven configuration."""

from __future__ import annotations

import pytest

from sphgse.config import MODEL_SCHEMA_FILE, MODELS_DIR, THREADS_ENV, max_workers


class TestMaxWorkers:
    def test_default(self, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.delenv(THREADS_ENV, raising=False)
        assert max_workers() == 1

    def test_from_env(self, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.setenv(THREADS_ENV, " 4 ")
        assert max_workers() == 4

    @pytest.mark.parametrize("raw", ["four", "0", "-2", "1.5"])
    def test_rejects(self, monkeypatch: pytest.MonkeyPatch, raw: str) -> None:
        monkeypatch.setenv(THREADS_ENV, raw)
        with pytest.raises(ValueError, match=THREADS_ENV):
            max_workers()


def test_bundled_paths_exist() -> None:
    assert MODEL_SCHEMA_FILE.is_file()
    assert MODELS_DIR.is_dir()
