import math

import numpy as np
import pytest

from nds.channel import frame_rng, hard_decision, snr_to_sigma, transmit
from nds.gf2 import BitVector


def test_sigma_rate_half_at_0db():
    assert snr_to_sigma(0.0, 128, 64) == pytest.approx(1.0, abs=1e-15)


def test_sigma_closed_form_3db():
    # sqrt(128 / (2*64*10^0.3)) evaluated at full precision
    assert snr_to_sigma(3.0, 128, 64) == pytest.approx(0.7079457843841379, rel=1e-12)


def test_sigma_depends_on_rate_only():
    for snr in (-1.0, 0.5, 2.7, 6.0):
        assert snr_to_sigma(snr, 128, 64) == pytest.approx(snr_to_sigma(snr, 2, 1), rel=1e-14)


def test_noiseless_mapping():
    rng = frame_rng(0, 0)
    fs = transmit(BitVector([0, 0, 0]), 0.0, rng)
    assert np.array_equal(fs.y, [1.0, 1.0, 1.0])
    fs = transmit(BitVector([1, 0, 1]), 0.0, rng)
    assert np.array_equal(fs.y, [-1.0, 1.0, -1.0])


def test_noise_moments():
    rng = frame_rng(99, 0)
    c = BitVector(np.zeros(1_000_000, dtype=np.uint8))
    fs = transmit(c, 1.0, rng)
    w = fs.y - 1.0
    assert abs(w.mean()) < 0.005
    assert abs(w.var() - 1.0) < 0.02


def test_hard_decision_rules():
    assert hard_decision([1.0, -1.0, 0.1]) == BitVector([0, 1, 0])
    assert hard_decision([0.5, 2.0]) == BitVector([0, 0])
    assert hard_decision([0.0, -0.0]) == BitVector([0, 0])
    with pytest.raises(ValueError):
        hard_decision([1.0, math.nan])


def test_reproducible_streams():
    a = frame_rng(7, 123).standard_normal(64)
    b = frame_rng(7, 123).standard_normal(64)
    c = frame_rng(7, 124).standard_normal(64)
    d = frame_rng(8, 123).standard_normal(64)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_uncoded_ber_matches_q_function():
    # Q(1) = 0.5 erfc(1/sqrt 2)
    q1 = 0.5 * math.erfc(1.0 / math.sqrt(2.0))
    rng = frame_rng(5, 0)
    fs = transmit(BitVector(np.zeros(1_000_000, dtype=np.uint8)), 1.0, rng)
    ber = float((fs.y < 0).mean())
    assert abs(ber - q1) / q1 < 0.01
