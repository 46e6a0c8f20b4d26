from hypothesis import given, settings, strategies as st
import numpy as np
import pytest

from qzk_lab.core.bits import (
    bits_to_bytes,
    bits_to_int,
    bits_to_words,
    bytes_to_bits,
    ceil_log2,
    int_to_bits,
    pack_arrays,
    random_bits,
    unpack_arrays,
    words_to_bits,
)
from qzk_lab.core.errors import FormatError


def test_int_to_bits_is_msb_first():
    assert int_to_bits(6, 4).tolist() == [0, 1, 1, 0]
    assert int_to_bits(1, 3).tolist() == [0, 0, 1]


def test_int_to_bits_rejects_overflow():
    with pytest.raises(FormatError):
        int_to_bits(16, 4)
    with pytest.raises(FormatError):
        int_to_bits(-1, 4)


@given(st.integers(min_value=0, max_value=2**48 - 1))
@settings(max_examples=50)
def test_int_bits_inverse(value):
    assert bits_to_int(int_to_bits(value, 48)) == value


def test_words_and_bits_agree_with_scalar_helpers():
    words = np.array([[3, 5], [0, 255]], dtype=np.uint64)
    bits = words_to_bits(words, 8)
    assert bits.shape == (2, 2, 8)
    assert bits[0, 1].tolist() == int_to_bits(5, 8).tolist()
    assert bits_to_words(bits).tolist() == words.tolist()


def test_bits_to_words_rejects_wide_rows():
    with pytest.raises(FormatError):
        bits_to_words(np.zeros(65, dtype=np.uint8))


def test_ceil_log2():
    assert [ceil_log2(n) for n in (1, 2, 3, 4, 5, 8, 9, 16)] == [1, 1, 2, 2, 3, 3, 4, 4]


def test_bytes_roundtrip_with_width(rng):
    bits = random_bits(rng, 13)
    assert bytes_to_bits(bits_to_bytes(bits), 13).tolist() == bits.tolist()


def test_pack_arrays_keeps_names_dtypes_and_shapes():
    arrays = {
        "b": np.array([1, 0, 1], dtype=np.uint8),
        "m": np.arange(6, dtype=np.uint64).reshape(2, 3),
        "z": np.array([1 + 2j, -0.5j]),
        "count": 7,
        "flag": np.array(True),
    }
    out = unpack_arrays(pack_arrays(arrays))
    assert list(out) == list(arrays)
    assert out["m"].shape == (2, 3) and out["m"].dtype == np.uint64
    assert np.array_equal(out["z"], arrays["z"])
    assert int(out["count"]) == 7
    assert out["flag"].dtype == np.uint8


@pytest.mark.parametrize(
    "blob",
    [
        b"",
        b"ARR2\x00\x00\x00\x00",
        b"ARR1\x01\x00\x00\x00",
        b"ARR1\x00\x00\x00\x00extra",
        b"ARR1\x01\x00\x00\x00\x01\x00a\x00\x04" + b"\x00\x00\x01\x00" * 4,
        b"ARR1\x01\x00\x00\x00\x01\x00a\x03\x02" + b"\xff\xff\xff\xff" * 2,
    ],
)
def test_unpack_arrays_rejects_malformed(blob):
    with pytest.raises(FormatError):
        unpack_arrays(blob)


def test_unpack_arrays_rejects_truncated_data():
    blob = pack_arrays({"a": np.arange(10, dtype=np.uint64)})
    with pytest.raises(FormatError):
        unpack_arrays(blob[:-3])


def test_pack_arrays_rejects_unsupported_dtype():
    with pytest.raises(FormatError):
        pack_arrays({"s": np.array(["x"])})
