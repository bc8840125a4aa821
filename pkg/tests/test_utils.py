"""
Tests for environment settings, error payloads and the shared helpers.
"""

import numpy as np
import pytest

from meshcast.utils import array_digest, canonical_json, format_table, get_settings, worker_count
from meshcast.utils.errors import ConfigError, DataError, NiftiMagicError, NumericalDivergenceError


@pytest.fixture
def fresh_settings():
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


def test_thread_cap_from_environment(monkeypatch, fresh_settings):
    monkeypatch.setenv("MESHCAST_THREADS", "3")
    assert get_settings().threads == 3
    assert worker_count() == 3
    assert worker_count(2) == 2
    assert worker_count(8) == 3


def test_invalid_thread_cap(monkeypatch, fresh_settings):
    monkeypatch.setenv("MESHCAST_THREADS", "0")
    with pytest.raises(ConfigError):
        get_settings()


def test_error_payloads():
    assert ConfigError("bad").to_dict() == {"error": "config error", "message": "bad"}
    assert NiftiMagicError("x").exit_code == DataError.exit_code == 3
    error = NumericalDivergenceError("nan", checkpoint_path="/tmp/last.mckp")
    assert error.to_dict()["checkpoint"] == "/tmp/last.mckp"
    assert error.exit_code == 4


def test_array_digest_tracks_content():
    a = {"w": np.zeros(3, dtype=np.float32), "b": np.ones(2, dtype=np.float32)}
    assert array_digest(a) == array_digest(dict(reversed(list(a.items()))))
    changed = dict(a, w=np.array([0, 0, 1e-7], dtype=np.float32))
    assert array_digest(changed) != array_digest(a)


def test_canonical_json_is_key_ordered():
    assert canonical_json({"b": 1, "a": [1, 2]}) == '{"a":[1,2],"b":1}'


def test_format_table():
    text = format_table("Scores", ["Model", "Dice"], [["a", "0.9"], ["longer", "0.8"]])
    lines = text.splitlines()
    assert lines[0] == "Scores"
    assert lines[2].startswith("Model")
    assert "longer" in lines[5]
