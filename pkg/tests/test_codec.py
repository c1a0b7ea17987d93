import pytest
from hypothesis import given, strategies as st

from chainflow import codec
from chainflow.errors import ChainFileError


def test_fixed_width_big_endian():
    assert codec.enc_u8(7) == b"\x07"
    assert codec.enc_u32(1) == b"\x00\x00\x00\x01"
    assert codec.enc_u64(258) == b"\x00\x00\x00\x00\x00\x00\x01\x02"
    assert codec.enc_i64(-1) == b"\xff" * 8


def test_length_prefixes():
    assert codec.enc_bytes(b"ab") == b"\x00\x00\x00\x02ab"
    assert codec.enc_str("é") == b"\x00\x00\x00\x02\xc3\xa9"


@given(st.binary(max_size=200), st.text(max_size=50), st.integers(0, 2**64 - 1))
def test_reader_round_trip(blob, text, number):
    data = codec.enc_bytes(blob) + codec.enc_str(text) + codec.enc_u64(number)
    r = codec.Reader(data)
    assert r.bytes_() == blob
    assert r.str_() == text
    assert r.u64() == number
    r.expect_end()


def test_reader_overrun():
    r = codec.Reader(b"\x00\x00\x00\x05ab")
    with pytest.raises(ChainFileError, match="unexpected end of record"):
        r.bytes_()


def test_reader_trailing_bytes():
    r = codec.Reader(b"\x01\x02")
    r.u8()
    with pytest.raises(ChainFileError, match="trailing"):
        r.expect_end()


def test_reader_rejects_bad_utf8():
    r = codec.Reader(codec.enc_bytes(b"\xff\xfe"))
    with pytest.raises(ChainFileError, match="UTF-8"):
        r.str_()
