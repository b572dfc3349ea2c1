"""The wire codec is an exact inverse pair on every mask."""

from __future__ import annotations

import numpy as np
import pytest

from uncseg_bridge import rle


def test_known_strings():
    assert rle.encode(np.array([[False, False, True, True]])) == "2,2"
    assert rle.encode(np.array([[True, True, False]])) == "0,2,1"
    assert rle.encode(np.zeros((2, 3), dtype=bool)) == "6"
    assert rle.encode(np.ones((2, 2), dtype=bool)) == "0,4"


def test_decode_known():
    out = rle.decode("2,2", (1, 4))
    assert out.tolist() == [[False, False, True, True]]
    assert rle.decode("6", (2, 3)).sum() == 0
    assert rle.decode("0,4", (2, 2)).all()


def test_row_major_order():
    data = np.zeros((3, 3), dtype=bool)
    data[0, 2] = data[1, 0] = True  # adjacent in row-major order
    assert rle.encode(data) == "2,2,5"


def test_decode_rejects_malformed():
    with pytest.raises(ValueError):
        rle.decode("1,x", (1, 4))
    with pytest.raises(ValueError):
        rle.decode("2,-1,3", (1, 4))
    with pytest.raises(ValueError):
        rle.decode("2,2", (2, 4))  # covers 4 of 8 px


def test_round_trip_random_masks():
    rng = np.random.default_rng(0)
    for _ in range(200):
        h = int(rng.integers(1, 40))
        w = int(rng.integers(1, 40))
        data = rng.random((h, w)) < rng.random()
        out = rle.decode(rle.encode(data), (h, w))
        assert np.array_equal(out, data)


def test_encode_is_canonical():
    # decoding then re-encoding returns the identical string
    rng = np.random.default_rng(1)
    for _ in range(50):
        data = rng.random((8, 8)) < 0.5
        s = rle.encode(data)
        assert rle.encode(rle.decode(s, (8, 8))) == s
