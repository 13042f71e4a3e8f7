"""Training data builders and the on-disk failure-record format.

Every iterative-decoding failure yields N per-bit trace samples for the
refinement model, and one sweep of block metrics over the decoding path
yields a sliding-window sample per window position for the termination
arbiter.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .gf2 import BitVector
from .osd import OsdContext, candidates_from_flips, true_error_pattern, weighted_distances
from .path import DecodingPath, tep_flip_indices

_MAGIC = b"NDSF"
_HDR = struct.Struct("<4sIIIIQ")   # magic, version, N, K, T, count


@dataclass
class FailureRecord:
    """One iterative-decoding failure: channel output, full iteration
    trace, the transmitted codeword and the SNR it was collected at."""

    y: np.ndarray        # (N,) float
    trace: np.ndarray    # (T, N) float
    c_true: np.ndarray   # (N,) uint8
    snr_db: float


def extract_dia_samples(rec: FailureRecord, t_max: int = None):
    """Per-bit inputs [y_i, trace_1i .. trace_Ti] with the transmitted
    bit as label. Returns (inputs (N, T+1), labels (N,)); row i is the
    sample for bit i. Records with a truncated trace are rejected."""
    t, n = rec.trace.shape
    if rec.y.size != n:
        raise ValueError("trace width disagrees with frame length")
    if t_max is not None and t != t_max:
        raise ValueError(f"incomplete trace: {t} rows, expected {t_max}")
    x = np.concatenate([np.asarray(rec.y, dtype=np.float64)[:, None], rec.trace.T], axis=1)
    return x, np.asarray(rec.c_true, dtype=np.uint8).copy()


def path_metrics(ctx: OsdContext, path: DecodingPath) -> np.ndarray:
    """Minimum weighted distance of every block in path order."""
    out = np.empty(len(path.blocks))
    for i, blk in enumerate(path.blocks):
        flips = tep_flip_indices(blk.w, path.layout)
        cands = candidates_from_flips(ctx, flips)
        out[i] = weighted_distances(ctx, cands).min()
    return out


def true_codeword_metric(ctx: OsdContext, c_true: BitVector) -> float:
    """Weighted distance of the transmitted codeword, computed through
    the same candidate machinery as the block sweep so that equal
    patterns produce bit-equal metric values."""
    e = true_error_pattern(ctx, c_true)
    flips = np.flatnonzero(e.bits)[None, :]
    cand = candidates_from_flips(ctx, flips)
    return float(weighted_distances(ctx, cand)[0])


def gen_window_samples(ctx: OsdContext, path: DecodingPath, c_true: BitVector, w_d: int):
    """Window inputs and terminate/continue labels for one failure.

    Each of the len(path) - w_d + 1 window positions yields the
    ascending-sorted window metrics plus the position, labeled 0
    (terminate) exactly when the transmitted codeword's metric appears
    among the window values.
    """
    lp = len(path.blocks)
    if w_d > lp:
        raise ValueError(f"window width {w_d} exceeds path length {lp}")
    hs = path_metrics(ctx, path)
    h_star = true_codeword_metric(ctx, c_true)
    n_samples = lp - w_d + 1
    x = np.empty((n_samples, w_d + 1))
    labels = np.empty(n_samples, dtype=np.uint8)
    for w_p in range(n_samples):
        window = hs[w_p:w_p + w_d]
        x[w_p, :w_d] = np.sort(window)
        x[w_p, w_d] = float(w_p)
        labels[w_p] = 0 if np.any(window == h_star) else 1
    return x, labels


# ---------------------------------------------------------------------------
# failure dataset file (binary, little endian)

class FailureWriter:
    """Streams failure records to disk; the record count in the header
    is patched on close."""

    def __init__(self, fname, n: int, k: int, t: int):
        self.n, self.k, self.t = n, k, t
        self.count = 0
        self._f = open(fname, "wb")
        self._f.write(_HDR.pack(_MAGIC, 1, n, k, t, 0))

    def append(self, rec: FailureRecord) -> None:
        if rec.y.size != self.n or rec.trace.shape != (self.t, self.n):
            raise ValueError("record shape disagrees with file header")
        self._f.write(np.asarray(rec.y, dtype="<f4").tobytes())
        self._f.write(np.asarray(rec.trace, dtype="<f4").tobytes())
        self._f.write(np.packbits(np.asarray(rec.c_true, dtype=np.uint8)).tobytes())
        self._f.write(struct.pack("<f", rec.snr_db))
        self.count += 1

    def close(self) -> None:
        self._f.seek(0)
        self._f.write(_HDR.pack(_MAGIC, 1, self.n, self.k, self.t, self.count))
        self._f.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def read_failures(fname, limit: int = None):
    """Load failure records; returns (records, header_dict)."""
    with open(fname, "rb") as f:
        hdr = f.read(_HDR.size)
        if len(hdr) != _HDR.size:
            raise ValueError("truncated failure file header")
        magic, version, n, k, t, count = _HDR.unpack(hdr)
        if magic != _MAGIC or version != 1:
            raise ValueError("not an NDSF v1 file")
        n_bytes = (n + 7) // 8
        rec_size = 4 * n + 4 * t * n + n_bytes + 4
        todo = count if limit is None else min(limit, count)
        records = []
        for _ in range(todo):
            blob = f.read(rec_size)
            if len(blob) != rec_size:
                raise ValueError("truncated failure record")
            off = 0
            y = np.frombuffer(blob, dtype="<f4", count=n, offset=off).astype(np.float64)
            off += 4 * n
            trace = np.frombuffer(blob, dtype="<f4", count=t * n, offset=off).astype(np.float64).reshape(t, n)
            off += 4 * t * n
            c_true = np.unpackbits(np.frombuffer(blob, dtype=np.uint8, count=n_bytes, offset=off))[:n]
            off += n_bytes
            (snr,) = struct.unpack_from("<f", blob, off)
            records.append(FailureRecord(y=y, trace=trace, c_true=c_true, snr_db=float(snr)))
    header = {"n": n, "k": k, "t": t, "count": count}
    return records, header
