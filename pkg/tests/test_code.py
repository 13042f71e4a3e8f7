import numpy as np
import pytest

from nds.code import (CodeSpec, code_from_h, derive_generator, encode,
                      hamming_7_4, parse_alist, syndrome, write_alist)
from nds.gf2 import BitMatrix, BitVector, RankDeficiencyError

IDENTITY_ALIST = """3 3
1 1
1 1 1
1 1 1
1
2
3
1
2
3
"""

# H with column i equal to the binary representation of i (1..7),
# written out by hand from that rule
HAMMING_ALIST = """7 3
3 4
1 1 2 1 2 2 3
4 4 4
3
2
2 3
1
1 3
1 2
1 2 3
4 5 6 7
2 3 6 7
1 3 5 7
"""


def test_parse_identity_alist():
    h = parse_alist(IDENTITY_ALIST)
    assert np.array_equal(h.data, np.eye(3, dtype=np.uint8))


def test_parse_hamming_alist():
    h = parse_alist(HAMMING_ALIST)
    want = np.array([[(i >> 2) & 1 for i in range(1, 8)],
                     [(i >> 1) & 1 for i in range(1, 8)],
                     [i & 1 for i in range(1, 8)]], dtype=np.uint8)
    assert np.array_equal(h.data, want)


def test_parse_out_of_range_index():
    bad = IDENTITY_ALIST.replace("\n2\n3\n1\n", "\n2\n3\n9\n", 1)
    with pytest.raises(ValueError):
        parse_alist(bad)


def test_parse_inconsistent_halves():
    # swap two row-adjacency lines so they disagree with the columns
    lines = HAMMING_ALIST.strip().splitlines()
    lines[-1], lines[-2] = lines[-2], lines[-1]
    with pytest.raises(ValueError):
        parse_alist("\n".join(lines))


def test_parse_malformed_counts():
    with pytest.raises(ValueError):
        parse_alist("3 3\n1 1\n1 1\n1 1 1\n1\n2\n3\n1\n2\n3\n")


def test_alist_round_trip(ccsds):
    assert np.array_equal(parse_alist(write_alist(ccsds.h)).data, ccsds.h.data)


def test_derive_generator_systematic_input():
    # H already [I : Q2]: the generator is the dual [Q2^T : I]
    q2 = np.array([[1, 0], [1, 1]], dtype=np.uint8)
    h = BitMatrix(np.concatenate([np.eye(2, dtype=np.uint8), q2], axis=1))
    g = derive_generator(h)
    assert np.array_equal(g.data, np.concatenate([q2.T, np.eye(2, dtype=np.uint8)], axis=1))


def test_derive_generator_hamming(hamming):
    g = hamming.g
    assert not ((g.data @ hamming.h.data.T) & 1).any()
    # rank k via brute force: all 16 message combinations give distinct codewords
    words = {tuple(((np.array([(m >> i) & 1 for i in range(4)], dtype=np.uint8)) @ g.data) & 1)
             for m in range(16)}
    assert len(words) == 16


def test_derive_generator_rank_deficient():
    with pytest.raises(RankDeficiencyError):
        code_from_h(BitMatrix([[1, 1, 0], [1, 1, 0]]))


def test_encode_zero_and_hand_example():
    g = BitMatrix([[1, 0, 1, 0], [0, 1, 0, 1]])
    code = CodeSpec(n=4, k=2, h=BitMatrix.identity(4), g=g)  # h unused here
    assert encode(BitVector([0, 0]), code) == BitVector([0, 0, 0, 0])
    assert encode(BitVector([1, 0]), code) == BitVector([1, 0, 1, 0])
    with pytest.raises(ValueError):
        encode(BitVector([1, 0, 1]), code)


def test_syndrome_round_trip(hamming, rng):
    for _ in range(1000):
        msg = BitVector(rng.integers(0, 2, hamming.k, dtype=np.uint8))
        c = encode(msg, hamming)
        assert syndrome(hamming.h, c).is_zero()
    assert syndrome(hamming.h, BitVector([0] * 7)).is_zero()


def test_hamming_single_flip_syndrome(hamming):
    # classic property: the syndrome of a single flip at position i is binary(i+1)
    for i in range(7):
        v = np.zeros(7, dtype=np.uint8)
        v[i] = 1
        s = syndrome(hamming.h, BitVector(v))
        assert int("".join(map(str, s.bits)), 2) == i + 1


def test_ccsds_dimensions(ccsds):
    assert (ccsds.n, ccsds.k, ccsds.m) == (128, 64, 64)
    ones = ccsds.h.data.sum()
    assert ones / ccsds.n == 4.0          # average column weight
    assert (ccsds.h.data.sum(axis=1) == 8).all()  # row weight
    assert not ((ccsds.g.data @ ccsds.h.data.T) & 1).any()


def test_ccsds_round_trip(ccsds, rng):
    for _ in range(200):
        msg = BitVector(rng.integers(0, 2, ccsds.k, dtype=np.uint8))
        assert syndrome(ccsds.h, encode(msg, ccsds)).is_zero()
