import numpy as np

from ksgap import io


def test_float_round_trip(tmp_path):
    vals = [0.1, 1 / 3, np.pi * 1e-300, -2.5e17, np.nan]
    path = tmp_path / "x.csv"
    io.write_text(path, io.csv_text(["a"], [(v,) for v in vals]))
    header, data = io.read_csv(path)
    assert header == ["a"]
    np.testing.assert_array_equal(data[:, 0], vals)
    assert b"\r" not in path.read_bytes()


def test_fmt_types():
    assert io.fmt(True) == "true" and io.fmt(np.int64(3)) == "3" and io.fmt(0.5) == "0.5"


def test_keyvalue():
    assert io.keyvalue([("a", 1.5), ("b", "x y"), ("c", False)]) == "a=1.5\nb=x y\nc=false\n"
