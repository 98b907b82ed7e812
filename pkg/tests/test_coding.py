import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spikectl.coding import Codec, NoSignal, SignedPairDecode, decode_population, decode_signed_pair, encode


def test_center_gives_unit_activation():
    c = Codec(-1.0, 1.0, 11)
    np.testing.assert_allclose(encode(c, c.centers[3])[3], 1.0)


def test_one_sigma_off_center():
    c = Codec(0.0, 10.0, 20)
    assert encode(c, c.centers[5] + c.sigma)[5] == pytest.approx(0.6065306597126334)


def test_far_end_is_negligible():
    c = Codec(0.0, 1.0, 20, sigma=1.0 / 20)
    assert encode(c, 1.0)[0] < 1e-8


def test_codec_invariants():
    c = Codec(-2.0, 3.0, 7)
    assert c.sigma == pytest.approx(5.0 / 7)
    assert c.centers[0] == -2.0 and c.centers[-1] == 3.0
    assert np.all(np.diff(c.centers) > 0)
    for bad in [dict(lo=1.0, hi=1.0, n=5), dict(lo=0.0, hi=1.0, n=1),
                dict(lo=0.0, hi=1.0, n=5, sigma=0.0)]:
        with pytest.raises(ValueError):
            Codec(**bad)


def test_currents_scale_with_gain():
    c = Codec(0.0, 1.0, 5, gain=12.0)
    np.testing.assert_allclose(c.currents(0.3), 12.0 * encode(c, 0.3))


def test_out_of_range_encoded_as_is():
    c = Codec(0.0, 1.0, 5)
    a = encode(c, 1.5)
    assert np.all(a < 1.0) and np.argmax(a) == 4


def test_decode_population_simple_cases():
    c = Codec(0.0, 1.0, 5)
    r = np.zeros(5)
    r[2] = 40.0
    assert decode_population(c, r) == pytest.approx(c.centers[2])
    r[3] = 40.0
    assert decode_population(c, r) == pytest.approx((c.centers[2] + c.centers[3]) / 2)
    with pytest.raises(NoSignal):
        decode_population(c, np.zeros(5))
    with pytest.raises(ValueError):
        decode_population(c, -np.ones(5))


def test_round_trip_100_values():
    c = Codec(-0.3, 0.3, 20)
    rng = np.random.default_rng(0)
    for v in rng.uniform(-0.27, 0.27, 100):
        assert abs(decode_population(c, 100.0 * encode(c, v)) - v) <= 0.05 * c.span


def test_signed_pair_examples():
    cfg = SignedPairDecode(4, 100.0, 0.05)
    assert decode_signed_pair(cfg, [100.0] * 4, [0.0] * 4) == pytest.approx(0.05)
    assert decode_signed_pair(cfg, [30.0] * 4, [30.0] * 4) == 0.0
    assert decode_signed_pair(cfg, [50.0] * 4, [0.0] * 4) == pytest.approx(0.025)
    assert decode_signed_pair(cfg, [400.0] * 4, [0.0] * 4) == pytest.approx(0.05)
    with pytest.raises(ValueError):
        decode_signed_pair(cfg, [1.0] * 3, [0.0] * 4)
    with pytest.raises(ValueError):
        SignedPairDecode(0, 100.0, 0.05)


@settings(max_examples=200)
@given(st.floats(-5, 5), st.floats(-50, 50), st.integers(2, 40))
def test_encode_translation_consistent(v, shift, n):
    a = Codec(-5.0, 5.0, n)
    b = Codec(-5.0 + shift, 5.0 + shift, n)
    np.testing.assert_allclose(encode(a, v), encode(b, v + shift), atol=1e-9)


@settings(max_examples=200)
@given(st.lists(st.floats(0, 200), min_size=4, max_size=4),
       st.lists(st.floats(0, 200), min_size=4, max_size=4))
def test_signed_pair_antisymmetric(pos, neg):
    cfg = SignedPairDecode(4, 100.0, 0.05)
    assert decode_signed_pair(cfg, pos, neg) == pytest.approx(-decode_signed_pair(cfg, neg, pos))


@settings(max_examples=100)
@given(st.integers(10, 60), st.floats(0.0, 1.0))
def test_round_trip_property(n, frac):
    c = Codec(-1.0, 2.0, n)
    v = c.lo + c.span * (0.05 + 0.9 * frac)
    assert abs(decode_population(c, encode(c, v)) - v) <= 0.05 * c.span
