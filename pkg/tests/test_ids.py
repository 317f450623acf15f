from hypothesis import given, strategies as st
import pytest

from otvsim.ids import IdSource, coin_digest, digest64, quantize_unit


def test_digest_is_64_bit_and_stable():
    d = digest64(b"a", b"b")
    assert 0 <= d < 2 ** 64
    assert d == digest64(b"a", b"b")
    assert d != digest64(b"b", b"a")


def test_quantize_bounds():
    assert quantize_unit(0.0) == 0
    assert quantize_unit(1.0) == 2 ** 63 - 1
    with pytest.raises(ValueError):
        quantize_unit(1.5)


@given(st.integers(0, 2 ** 64 - 1), st.floats(0.5, 2 / 3))
def test_coin_digest_deterministic(item, x):
    assert coin_digest(item, x) == coin_digest(item, x)


def test_id_source_unique():
    src = IdSource("blocks", seed=3)
    ids = [src.next() for _ in range(5000)]
    assert len(set(ids)) == len(ids)
    again = IdSource("blocks", seed=3)
    assert [again.next() for _ in range(10)] == ids[:10]
