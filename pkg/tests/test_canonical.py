import pytest
from hypothesis import given
from hypothesis import strategies as st

from consentchain import canonical
from consentchain.canonical import CanonicalError, Reader


class TestIntegers:
    def test_big_endian_fixed_width(self):
        assert canonical.u8(7) == b"\x07"
        assert canonical.u32(1) == b"\x00\x00\x00\x01"
        assert canonical.u64(1) == b"\x00" * 7 + b"\x01"

    @pytest.mark.parametrize("fn,limit", [
        (canonical.u8, 2**8), (canonical.u32, 2**32), (canonical.u64, 2**64),
    ])
    def test_range_checked(self, fn, limit):
        fn(limit - 1)
        with pytest.raises(CanonicalError):
            fn(limit)
        with pytest.raises(CanonicalError):
            fn(-1)


class TestRoundTrip:
    @given(st.binary(max_size=200))
    def test_blob(self, data):
        reader = Reader(canonical.blob(data))
        assert reader.blob() == data
        reader.expect_end()

    @given(st.text(max_size=80))
    def test_text(self, value):
        reader = Reader(canonical.text(value))
        assert reader.text() == value
        reader.expect_end()

    @given(st.integers(min_value=0, max_value=2**64 - 1))
    def test_u64(self, value):
        assert Reader(canonical.u64(value)).u64() == value


class TestReaderErrors:
    def test_truncated(self):
        with pytest.raises(CanonicalError, match="truncated"):
            Reader(b"\x00\x00\x00\x05abc").blob()

    def test_trailing_bytes_rejected(self):
        reader = Reader(canonical.u8(1) + b"junk")
        reader.u8()
        with pytest.raises(CanonicalError, match="trailing"):
            reader.expect_end()

    def test_invalid_utf8(self):
        with pytest.raises(CanonicalError, match="utf-8"):
            Reader(canonical.blob(b"\xff\xfe")).text()
