"""Tests for the addressed random streams."""

import numpy as np

from blindfold.streams import STREAM_EDGE, STREAM_TIE, sign_bits, stream


def test_same_address_same_draws() -> None:
    a = stream(7, STREAM_EDGE, 3, 4).random(5)
    b = stream(7, STREAM_EDGE, 3, 4).random(5)
    assert np.array_equal(a, b)


def test_addresses_are_independent() -> None:
    base = stream(7, STREAM_EDGE, 3, 4).random(5)
    assert not np.array_equal(base, stream(8, STREAM_EDGE, 3, 4).random(5))
    assert not np.array_equal(base, stream(7, STREAM_TIE, 3, 4).random(5))
    assert not np.array_equal(base, stream(7, STREAM_EDGE, 4, 3).random(5))


def test_sign_bits_are_fair_signs() -> None:
    bits = sign_bits(1, STREAM_TIE, 0, size=20_000)
    assert bits.dtype == np.int8
    assert set(np.unique(bits)) == {-1, 1}
    assert abs(bits.mean()) < 0.03


def test_prefix_is_stable() -> None:
    long = sign_bits(2, STREAM_TIE, 5, size=100)
    short = sign_bits(2, STREAM_TIE, 5, size=40)
    assert np.array_equal(long[:40], short)
