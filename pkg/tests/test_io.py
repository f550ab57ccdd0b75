import struct

import numpy as np
import pytest

from kahlerlab.geodesic import PathGrid, path_from_bytes, path_to_bytes, read_path, write_path
from kahlerlab.grid import field_from_bytes, field_to_bytes, read_field, write_field, write_field_csv


def test_field_byte_layout():
    f = np.arange(64, dtype=float).reshape(8, 8) / 7
    data = field_to_bytes(f)
    assert data[:5] == b"MNPL1"
    assert struct.unpack("<I", data[5:9]) == (8,)
    assert len(data) == 9 + 8 * 64
    vals = struct.unpack("<64d", data[9:])
    assert vals[1] == f[0, 1] and vals[8] == f[1, 0]  # row-major, i outer


def test_field_roundtrip_file(tmp_path):
    f = np.random.default_rng(0).standard_normal((16, 16))
    write_field(tmp_path / "f.mnpl", f)
    assert np.array_equal(read_field(tmp_path / "f.mnpl"), f)


@pytest.mark.parametrize("data", [b"XXXX1" + b"\0" * 20, b"MNPL1" + struct.pack("<I", 8) + b"\0" * 10])
def test_field_rejects_bad_records(data):
    with pytest.raises(ValueError):
        field_from_bytes(data)


def test_field_csv(tmp_path):
    f = np.random.default_rng(1).standard_normal((8, 8))
    write_field_csv(tmp_path / "f.csv", f)
    rows = (tmp_path / "f.csv").read_text().strip().split("\n")
    assert len(rows) == 8 and len(rows[0].split(",")) == 8
    assert np.array_equal(np.loadtxt(tmp_path / "f.csv", delimiter=","), f)


def test_path_layout_and_roundtrip(tmp_path):
    s = np.random.default_rng(2).standard_normal((5, 8, 8))
    p = PathGrid(s, 1e-3)
    data = path_to_bytes(p)
    assert data[:10] == b"MNPL-PATH1"
    assert struct.unpack("<IId", data[10:26]) == (8, 4, 1e-3)
    rec = 9 + 8 * 64
    assert np.array_equal(field_from_bytes(data[26 + 2 * rec: 26 + 3 * rec]), s[2])
    write_path(tmp_path / "p.path", p)
    q = read_path(tmp_path / "p.path")
    assert q.eps == p.eps and np.array_equal(q.slices, s)


def test_path_rejects_bad_magic():
    with pytest.raises(ValueError):
        path_from_bytes(b"NOPE" * 10)
