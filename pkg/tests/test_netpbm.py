import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from salbench import netpbm
from salbench.errors import ImageFormatError

shapes = st.one_of(
    st.tuples(st.integers(1, 9), st.integers(1, 9)),
    st.tuples(st.integers(1, 9), st.integers(1, 9), st.just(3)),
)


@given(hnp.arrays(np.uint8, shapes))
def test_round_trip(img):
    out = netpbm.decode(netpbm.encode(img))
    assert out.dtype == np.uint8
    np.testing.assert_array_equal(out, img)


def test_header_layout():
    data = netpbm.encode(np.zeros((2, 3), dtype=np.uint8))
    assert data.startswith(b"P5\n3 2\n255\n") and len(data) == len(b"P5\n3 2\n255\n") + 6
    assert netpbm.encode(np.zeros((1, 1, 3), dtype=np.uint8)).startswith(b"P6")


def test_comments_and_whitespace():
    img = netpbm.decode(b"P5 # comment\n2 # w\n 1\n255\n\x07\x08")
    np.testing.assert_array_equal(img, [[7, 8]])


@pytest.mark.parametrize(
    "data",
    [b"P2\n1 1\n255\n0", b"P5\n2 2\n255\n\x00", b"P5\n1 1\n65535\n\x00\x00", b"P5\n0 1\n255\n", b"P5\nx 1\n255\n\x00", b""],
)
def test_bad_files(data):
    with pytest.raises(ImageFormatError):
        netpbm.decode(data)


def test_encode_rejects_float():
    with pytest.raises(ImageFormatError):
        netpbm.encode(np.zeros((2, 2)))


def test_file_io(tmp_path):
    img = np.arange(12, dtype=np.uint8).reshape(2, 2, 3)
    netpbm.write(tmp_path / "a.ppm", img)
    np.testing.assert_array_equal(netpbm.read(tmp_path / "a.ppm"), img)
