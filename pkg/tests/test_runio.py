from __future__ import annotations

import json

import pytest

from semev.runio import atomic_write_text, canonical_json, config_hash, file_digest, write_manifest


def test_hash_ignores_key_order_and_int_float():
    assert config_hash({"a": 1, "b": [2, "x"]}) == config_hash({"b": [2.0, "x"], "a": 1.0})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
    assert canonical_json({"b": 1, "a": None}) == '{"a":null,"b":"1.0"}'
    with pytest.raises(ValueError):
        config_hash({"a": float("nan")})


def test_atomic_write_leaves_no_temp(tmp_path):
    target = tmp_path / "f.txt"
    atomic_write_text(target, "one\n")
    atomic_write_text(target, "two\n")
    assert target.read_text() == "two\n"
    assert [p.name for p in tmp_path.iterdir()] == ["f.txt"]


def test_manifest(tmp_path):
    (tmp_path / "a.csv").write_text("x\n")
    write_manifest(tmp_path, "solve", {"v": 1}, 7, 1.0, ["a.csv"], {"n": 3})
    doc = json.loads((tmp_path / "manifest.json").read_text())
    assert doc["artifacts"] == {"a.csv": file_digest(tmp_path / "a.csv")}
    assert doc["config_hash"] == config_hash({"v": 1}) and doc["seed"] == 7
    assert doc["extra"] == {"n": 3} and doc["finished"] >= doc["started"]
