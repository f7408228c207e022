import numpy as np
import pytest

from reconlab import nn, persist


def test_model_roundtrip(tmp_path):
    arch = nn.MlpArchitecture((7, 5, 3), activation="tanh")
    params = nn.init_params(arch, 9)
    path = str(tmp_path / "m.model")
    persist.save_model(path, params, {"note": "x", "seed": 5})
    back, meta = persist.load_model(path)
    assert back.arch == arch
    assert np.array_equal(back.flatten(), params.flatten())
    assert meta["note"] == "x" and meta["seed"] == "5"


def test_model_rejects_foreign_file(tmp_path):
    path = tmp_path / "junk.model"
    path.write_bytes(b"something else\n\n\x00\x01")
    with pytest.raises(ValueError):
        persist.load_model(str(path))


def test_model_rejects_truncated_body(tmp_path):
    arch = nn.MlpArchitecture((4, 3))
    params = nn.init_params(arch, 0)
    path = str(tmp_path / "m.model")
    persist.save_model(path, params)
    blob = open(path, "rb").read()
    open(path, "wb").write(blob[:-8])
    with pytest.raises(ValueError):
        persist.load_model(path)


def test_config_hash_stable():
    assert persist.config_hash("a=1\n") == persist.config_hash("a=1\n")
    assert persist.config_hash("a=1\n") != persist.config_hash("a=2\n")
    assert len(persist.config_hash("x")) == 16


def test_write_csv_has_provenance_line(tmp_path):
    path = str(tmp_path / "out.csv")
    persist.write_csv(path, ["a", "b"], [(1, 2), (3, 4)], "deadbeef")
    lines = open(path).read().splitlines()
    assert lines[0] == "# config_hash=deadbeef"
    assert lines[1] == "a,b"
    assert lines[2:] == ["1,2", "3,4"]
