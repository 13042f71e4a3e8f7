import numpy as np
import pytest

from nds.code import encode
from nds.datasets import (FailureRecord, FailureWriter, extract_dia_samples,
                          gen_window_samples, read_failures, true_codeword_metric)
from nds.gf2 import BitVector
from nds.osd import preprocess, true_error_pattern
from nds.path import DecodingPath, TepBlock, block_size, feasible_blocks, segment_layout


def make_record(rng, n=128, t=12, snr=2.7):
    y = rng.normal(size=n)
    trace = rng.normal(size=(t, n))
    c = rng.integers(0, 2, n, dtype=np.uint8)
    return FailureRecord(y=y, trace=trace, c_true=c, snr_db=snr)


def test_extract_dia_samples_shape(rng):
    rec = make_record(rng)
    x, d = extract_dia_samples(rec, t_max=12)
    assert x.shape == (128, 13)
    assert d.shape == (128,)
    # first feature is the channel value, the rest the iteration column
    assert np.array_equal(x[:, 0], rec.y)
    assert np.array_equal(x[:, 1:], rec.trace.T)
    assert np.array_equal(d, rec.c_true)


def test_extract_dia_samples_incomplete_trace(rng):
    rec = make_record(rng, t=7)
    with pytest.raises(ValueError):
        extract_dia_samples(rec, t_max=12)


def test_extract_dia_samples_zero_codeword(rng):
    rec = make_record(rng)
    rec.c_true[:] = 0
    _, d = extract_dia_samples(rec)
    assert not d.any()


def full_path(k, q, p):
    lay = segment_layout(k, q)
    blocks = [TepBlock(w=w, size=block_size(w, lay)) for w in feasible_blocks(p, lay)]
    return DecodingPath(layout=lay, p=p, blocks=blocks)


def test_window_sample_counts_and_sorting(ccsds, rng):
    path = full_path(64, 6, 3)
    assert len(path.blocks) == 84
    msg = BitVector(rng.integers(0, 2, 64, dtype=np.uint8))
    c = encode(msg, ccsds)
    y = (1.0 - 2.0 * c.bits) + 0.9 * rng.standard_normal(128)
    ctx = preprocess(y, y, ccsds)
    x, labels = gen_window_samples(ctx, path, c, 5)
    assert x.shape == (80, 6)           # l_p - w_d + 1 samples of size w_d + 1
    assert labels.shape == (80,)
    for row in x:
        assert np.all(np.diff(row[:5]) >= 0)   # ascending window
    assert np.array_equal(x[:, 5], np.arange(80.0))  # raw window position


def test_window_labels_mark_true_metric(ccsds, rng):
    """Windows covering the block that attains the true codeword's
    metric are labeled terminate."""
    path = full_path(64, 6, 3)
    hits = 0
    for _ in range(20):
        msg = BitVector(rng.integers(0, 2, 64, dtype=np.uint8))
        c = encode(msg, ccsds)
        y = (1.0 - 2.0 * c.bits) + 0.8 * rng.standard_normal(128)
        ctx = preprocess(y, y, ccsds)
        e = true_error_pattern(ctx, c)
        x, labels = gen_window_samples(ctx, path, c, 5)
        if e.weight() > 3:
            continue
        # locate the block holding the true pattern
        from nds.path import classify_error
        w = classify_error(e, path.layout, 3)
        bidx = next(i for i, b in enumerate(path.blocks) if b.w == w)
        h_star = true_codeword_metric(ctx, c)
        from nds.datasets import path_metrics
        hs = path_metrics(ctx, path)
        if hs[bidx] == h_star:   # true pattern is its block's argmin
            hits += 1
            for w_p in range(max(0, bidx - 4), min(80, bidx + 1)):
                assert labels[w_p] == 0
    assert hits > 0


def test_window_labels_all_continue_when_unreachable(ccsds, rng):
    """A frame whose pattern exceeds the order yields only continue
    labels (up to metric coincidences, impossible with random noise)."""
    path = full_path(64, 6, 1)   # order 1: almost everything unreachable
    seen_all_ones = 0
    for _ in range(20):
        msg = BitVector(rng.integers(0, 2, 64, dtype=np.uint8))
        c = encode(msg, ccsds)
        y = (1.0 - 2.0 * c.bits) + 1.5 * rng.standard_normal(128)
        ctx = preprocess(y, y, ccsds)
        if true_error_pattern(ctx, c).weight() <= 1:
            continue
        _, labels = gen_window_samples(ctx, path, c, 3)
        if labels.all():
            seen_all_ones += 1
    assert seen_all_ones > 0


def test_window_rejects_noncodeword(ccsds, rng):
    path = full_path(64, 6, 1)
    y = rng.normal(size=128)
    ctx = preprocess(y, y, ccsds)
    bad = np.zeros(128, dtype=np.uint8)
    bad[0] = 1
    with pytest.raises(ValueError):
        gen_window_samples(ctx, path, BitVector(bad), 3)


def test_failure_file_round_trip(tmp_path, rng):
    f = tmp_path / "f.ndsf"
    recs = [make_record(rng, snr=2.7), make_record(rng, snr=3.0)]
    with FailureWriter(f, 128, 64, 12) as w:
        for r in recs:
            w.append(r)
    back, hdr = read_failures(f)
    assert hdr == {"n": 128, "k": 64, "t": 12, "count": 2}
    assert len(back) == 2
    for a, b in zip(recs, back):
        assert np.allclose(a.y, b.y, atol=1e-6)       # f32 storage
        assert np.allclose(a.trace, b.trace, atol=1e-5)
        assert np.array_equal(a.c_true, b.c_true)
        assert b.snr_db == pytest.approx(a.snr_db, abs=1e-6)


def test_failure_file_limit_and_validation(tmp_path, rng):
    f = tmp_path / "f.ndsf"
    with FailureWriter(f, 16, 8, 4) as w:
        for _ in range(5):
            w.append(make_record(rng, n=16, t=4))
        with pytest.raises(ValueError):
            w.append(make_record(rng, n=32, t=4))
    back, hdr = read_failures(f, limit=3)
    assert hdr["count"] == 5
    assert len(back) == 3
    # header magic enforced
    f2 = tmp_path / "bad.ndsf"
    f2.write_bytes(b"XXXX" + bytes(24))
    with pytest.raises(ValueError):
        read_failures(f2)
