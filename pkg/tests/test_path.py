from math import comb

import numpy as np
import pytest

from nds.path import (DecodingPath, TepBlock, block_size, build_path, classify_error,
                      enumerate_blocks, enumerate_teps, feasible_blocks, load_path,
                      save_path, segment_layout, tep_flip_indices)


def test_segment_layout_ccsds_default():
    lay = segment_layout(64, 6)
    assert lay.sizes == (10, 10, 10, 10, 10, 14)
    assert sum(lay.sizes) == 64
    assert lay.offsets == (0, 10, 20, 30, 40, 50)


def test_segment_layout_degenerate_and_exact():
    assert segment_layout(64, 1).sizes == (64,)
    assert segment_layout(8, 4).sizes == (2, 2, 2, 2)
    with pytest.raises(ValueError):
        segment_layout(4, 5)


def test_enumerate_blocks_counts():
    lay = segment_layout(64, 6)
    blocks = enumerate_blocks(3, lay)
    assert len(blocks) == comb(3 + 6, 6) == 84
    assert blocks == sorted(blocks)  # lexicographic
    lay2 = segment_layout(8, 2)
    assert enumerate_blocks(1, lay2) == [(0, 0), (0, 1), (1, 0)]
    assert enumerate_blocks(0, lay2) == [(0, 0)]


def test_block_size_values():
    lay = segment_layout(64, 6)
    assert block_size((0, 0, 0, 0, 0, 0), lay) == 1
    # brute-force count of weight-3 patterns in a 10-bit segment
    brute = sum(1 for m in range(1 << 10) if bin(m).count("1") == 3)
    assert block_size((3, 0, 0, 0, 0, 0), lay) == brute == 120
    total = sum(block_size(w, lay) for w in enumerate_blocks(3, lay))
    assert total == sum(comb(64, i) for i in range(4)) == 43745
    with pytest.raises(ValueError):
        block_size((3, 0), segment_layout(4, 2))


def test_classify_error():
    lay = segment_layout(64, 6)
    assert classify_error(np.zeros(64, dtype=np.uint8), lay, 3) == (0,) * 6
    e = np.zeros(64, dtype=np.uint8)
    e[63] = 1
    assert classify_error(e, lay, 3) == (0, 0, 0, 0, 0, 1)
    e4 = np.zeros(64, dtype=np.uint8)
    e4[:4] = 1
    assert classify_error(e4, lay, 3) is None  # overflow


def test_build_path_ratio_order():
    lay = segment_layout(64, 6)
    # counters: 5 observations of the zero pattern only
    errors = [np.zeros(64, dtype=np.uint8)] * 5
    path = build_path(errors, lay, 3)
    assert path.blocks[0].w == (0,) * 6
    assert path.overflow_count == 0
    assert path.nominal_len == 84
    assert len(path.blocks) == 84

    # ratio comparison: 10/1 outranks 100/140 even though 100 > 10
    counters = {(0, 0, 0, 0, 0, 0): 10, (1, 0, 0, 0, 0, 1): 100}
    from nds.path import _sorted_blocks
    blocks = _sorted_blocks(counters, lay, 3)
    assert blocks[0].w == (0, 0, 0, 0, 0, 0)
    assert blocks[1].w == (1, 0, 0, 0, 0, 1)
    assert blocks[1].size == 140
    assert blocks[0].ratio > blocks[1].ratio


def test_build_path_deterministic_ties():
    lay = segment_layout(12, 3)
    errors = [np.zeros(12, dtype=np.uint8)]
    p1 = build_path(errors, lay, 2)
    p2 = build_path(errors, lay, 2)
    assert [b.w for b in p1.blocks] == [b.w for b in p2.blocks]
    # all-zero counters: ties broken by total weight then lexicographic
    tail = [b.w for b in p1.blocks[1:]]
    assert tail == sorted(tail, key=lambda w: (sum(w), w))


def test_build_path_counts_overflow():
    lay = segment_layout(12, 3)
    heavy = np.ones(12, dtype=np.uint8)
    path = build_path([np.zeros(12, dtype=np.uint8), heavy], lay, 2)
    assert path.overflow_count == 1
    assert sum(b.counter for b in path.blocks) + path.overflow_count == 2


def test_build_path_empty_input():
    with pytest.raises(ValueError):
        build_path([], segment_layout(12, 3), 2)


def test_enumerate_teps():
    lay = segment_layout(4, 2)
    zero = list(enumerate_teps((0, 0), lay))
    assert len(zero) == 1 and zero[0].is_zero()
    teps = [t.bits.tolist() for t in enumerate_teps((1, 0), lay)]
    assert teps == [[1, 0, 0, 0], [0, 1, 0, 0]]


def test_enumerate_teps_stream_length(rng):
    lay = segment_layout(14, 4)
    blocks = feasible_blocks(3, lay)
    idx = rng.choice(len(blocks), size=50)
    for i in idx:
        w = blocks[i]
        assert sum(1 for _ in enumerate_teps(w, lay)) == block_size(w, lay)


def test_partition_exhaustive_small():
    """Blocks partition all patterns of weight <= p (K <= 16, p <= 3)."""
    for k, q, p in ((12, 3, 3), (16, 5, 2), (9, 2, 3)):
        lay = segment_layout(k, q)
        seen = set()
        total = 0
        for w in feasible_blocks(p, lay):
            for tep in enumerate_teps(w, lay):
                assert tep.bits.sum() <= p
                key = tep.bits.tobytes()
                assert key not in seen
                seen.add(key)
                total += 1
        assert total == sum(comb(k, i) for i in range(p + 1))


def test_flip_indices_shapes():
    lay = segment_layout(64, 6)
    f = tep_flip_indices((0,) * 6, lay)
    assert f.shape == (1, 0)
    f = tep_flip_indices((1, 0, 0, 0, 0, 2), lay)
    assert f.shape == (10 * comb(14, 2), 3)
    assert (f[:, 0] < 10).all()
    assert (f[:, 1] >= 50).all()


def test_truncate_prefix():
    lay = segment_layout(64, 6)
    path = build_path([np.zeros(64, dtype=np.uint8)], lay, 3)
    short = path.truncate(30)
    assert len(short.blocks) == 30
    assert [b.w for b in short.blocks] == [b.w for b in path.blocks[:30]]
    with pytest.raises(ValueError):
        path.truncate(0)
    with pytest.raises(ValueError):
        path.truncate(85)


def test_path_file_round_trip(tmp_path):
    lay = segment_layout(64, 6)
    errors = [np.zeros(64, dtype=np.uint8)] * 3
    e1 = np.zeros(64, dtype=np.uint8)
    e1[5] = 1
    errors.append(e1)
    path = build_path(errors, lay, 3)
    f = tmp_path / "p.ndspath"
    save_path(path, f)
    back = load_path(f)
    assert back.p == path.p
    assert back.layout == path.layout
    assert [(b.w, b.counter, b.size) for b in back.blocks] == \
           [(b.w, b.counter, b.size) for b in path.blocks]
    # write(parse(write)) is byte-stable
    f2 = tmp_path / "p2.ndspath"
    save_path(back, f2)
    assert f.read_text() == f2.read_text()


def test_load_path_rejects_garbage(tmp_path):
    f = tmp_path / "bad.ndspath"
    f.write_text("ndspath v2 64 6 3\n")
    with pytest.raises(ValueError):
        load_path(f)
    f.write_text("ndspath v1 64 6 3\n0 0 0 0 0 0 5 7\n")
    with pytest.raises(ValueError):
        load_path(f)  # stored size disagrees with the layout
