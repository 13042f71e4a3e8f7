"""Ordered-statistics reprocessing over a fixed decoding path.

Preprocessing sorts by the refined reliability measure, brings the
parity-check matrix to systematic form, and permutes both the refined
and the original channel sequence into the same domain. Candidates are
re-encoded from the most-reliable-basis hard decisions flipped by test
error patterns; selection uses the weighted Hamming distance against
the ORIGINAL channel magnitudes, while the basis hard decisions come
from the refined measure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .code import CodeSpec
from .gf2 import BitVector, Permutation, to_systematic
from .nms import NmsConfig, nms_decode
from .nn import dia_apply, forward
from .path import DecodingPath, SegmentLayout, tep_flip_indices


@dataclass
class OsdContext:
    """Per-frame permuted world shared by every candidate evaluation."""

    pi1: Permutation
    pi2: Permutation
    q2: object                    # BitMatrix (n-k) x k
    y2: np.ndarray                # original channel values, permuted
    r2: np.ndarray                # uint8 hard decisions of y2
    ytilde2: np.ndarray           # refined measure, permuted
    mrb_hard: np.ndarray          # uint8 hard decisions of ytilde2 on the MRB
    combined: np.ndarray = field(default=None)   # pi1.map[pi2.map]
    _q2cols: np.ndarray = field(default=None)    # (k, n-k), row j = column j of q2
    _base_lrb: np.ndarray = field(default=None)  # mrb_hard @ q2^T
    _absy2: np.ndarray = field(default=None)

    @property
    def n(self) -> int:
        return self.y2.size

    @property
    def k(self) -> int:
        return self.mrb_hard.size


@dataclass
class BestCandidate:
    codeword: BitVector           # permuted domain, full length n
    h: float
    block_index: int
    tep_count: int


@dataclass
class OsdStats:
    n_at: int = 0
    swa_calls: int = 0
    early_terminated: bool = False
    best_h: float = np.inf
    best_block: int = -1


def preprocess(ytilde, y, code: CodeSpec) -> OsdContext:
    """Sort, eliminate and permute one frame into the reprocessing domain."""
    ytilde = np.asarray(ytilde, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if ytilde.size != code.n or y.size != code.n:
        raise ValueError("length mismatch with code")
    if not (np.isfinite(ytilde).all() and np.isfinite(y).all()):
        raise ValueError("non-finite reliability input")
    order1 = np.argsort(np.abs(ytilde), kind="stable")   # ascending, ties by index
    pi1 = Permutation(order1)
    sys_form = to_systematic(code.h.permute_cols(pi1))
    pi2 = sys_form.pi2
    combined = order1[pi2.map]
    y2 = y[combined]
    yt2 = ytilde[combined]
    r2 = (y2 < 0).astype(np.uint8)
    m = code.n - code.k
    mrb_hard = (yt2[m:] < 0).astype(np.uint8)
    q2cols = np.ascontiguousarray(sys_form.q2.data.T)
    base_lrb = (mrb_hard @ q2cols) & 1
    return OsdContext(
        pi1=pi1, pi2=pi2, q2=sys_form.q2,
        y2=y2, r2=r2, ytilde2=yt2, mrb_hard=mrb_hard,
        combined=combined, _q2cols=q2cols, _base_lrb=base_lrb,
        _absy2=np.abs(y2),
    )


def candidates_from_flips(ctx: OsdContext, flips: np.ndarray) -> np.ndarray:
    """Re-encode candidates for a batch of flip-index rows.

    Returns (n_teps, n) uint8 codewords of [I : Q2] in the permuted
    domain: parity part from XORing the Q2 columns of the flipped
    positions into the base candidate, basis part from flipping the MRB
    hard decisions.
    """
    nt = flips.shape[0]
    c2 = np.tile(ctx.mrb_hard, (nt, 1))
    lrb = np.tile(ctx._base_lrb, (nt, 1))
    if flips.size:
        rows = np.repeat(np.arange(nt), flips.shape[1])
        c2[rows, flips.ravel()] ^= 1
        acc = ctx._q2cols[flips[:, 0]].copy()
        for j in range(1, flips.shape[1]):
            acc ^= ctx._q2cols[flips[:, j]]
        lrb ^= acc
    return np.concatenate([lrb, c2], axis=1)


def weighted_distances(ctx: OsdContext, cands: np.ndarray) -> np.ndarray:
    """Selection metric: sum of |y2_i| over disagreements with r2.

    Row-wise elementwise-product-and-sum keeps the reduction order
    identical for every caller, so equal inputs give bit-equal metric
    values anywhere in the pipeline.
    """
    mask = cands != ctx.r2[None, :]
    return (mask * ctx._absy2).sum(axis=1)


def block_best(ctx: OsdContext, w: tuple, layout: SegmentLayout) -> BestCandidate:
    """Best candidate of one block; ties keep the first pattern."""
    flips = tep_flip_indices(tuple(w), layout)
    cands = candidates_from_flips(ctx, flips)
    hs = weighted_distances(ctx, cands)
    i = int(np.argmin(hs))
    return BestCandidate(codeword=BitVector(cands[i]), h=float(hs[i]),
                         block_index=-1, tep_count=flips.shape[0])


def true_error_pattern(ctx: OsdContext, c_true: BitVector) -> BitVector:
    """MRB flip pattern separating the refined hard decisions from the
    transmitted codeword."""
    c_perm = c_true.bits[ctx.combined]
    m = ctx.n - ctx.k
    parity = (c_perm[:m] ^ ((c_perm[m:] @ ctx._q2cols) & 1))
    if parity.any():
        raise ValueError("input is not a codeword")
    return BitVector(ctx.mrb_hard ^ c_perm[m:])


def _unpermute(ctx: OsdContext, cand_bits: np.ndarray) -> BitVector:
    out = np.empty(ctx.n, dtype=np.uint8)
    out[ctx.combined] = cand_bits
    return BitVector(out)


def plain_osd(ctx: OsdContext, path: DecodingPath):
    """Exhaustive sweep of every block in the path; global best wins."""
    if not path.blocks:
        raise ValueError("empty decoding path")
    stats = OsdStats()
    best_bits = None
    for idx, blk in enumerate(path.blocks):
        cand = block_best(ctx, blk.w, path.layout)
        stats.n_at += cand.tep_count
        if cand.h < stats.best_h:
            stats.best_h = cand.h
            stats.best_block = idx
            best_bits = cand.codeword.bits
    return _unpermute(ctx, best_bits), stats


def swa_osd(ctx: OsdContext, path: DecodingPath, model, w_d: int, s_m: float):
    """Window-guided sweep with conditional early termination.

    The first w_d blocks seed the running minimum. The arbiter sees the
    ascending-sorted window metrics plus the window position; when its
    terminate probability exceeds s_m the sweep stops. Otherwise the
    window slides, and while freshly computed block minima exceed the
    running minimum the slide continues without consulting the arbiter.
    """
    lp = len(path.blocks)
    if w_d > lp:
        raise ValueError(f"window width {w_d} exceeds path length {lp}")
    if not 0.0 < s_m <= 1.0:
        raise ValueError("s_m must be in (0, 1]")
    stats = OsdStats()
    hs = np.empty(lp)
    best_bits = None

    def eval_block(i: int):
        cand = block_best(ctx, path.blocks[i].w, path.layout)
        stats.n_at += cand.tep_count
        hs[i] = cand.h
        return cand.h, cand.codeword.bits

    g_m = np.inf
    for i in range(w_d):
        h, bits = eval_block(i)
        if h < g_m:
            g_m, stats.best_block, best_bits = h, i, bits
    w_p = 0
    early = False
    while True:
        window = np.sort(hs[w_p:w_p + w_d])
        x = np.concatenate([window, [float(w_p)]])
        probs = forward(model, x[None, :])
        stats.swa_calls += 1
        if float(probs[0, 0]) > s_m:
            early = True
            break
        # slide; skip the arbiter while the new block is not an improvement
        improved = False
        while w_p < lp - w_d:
            w_p += 1
            h, bits = eval_block(w_p + w_d - 1)
            if h <= g_m:
                g_m, stats.best_block, best_bits = h, w_p + w_d - 1, bits
                improved = True
                break
        if not improved:
            break
    stats.best_h = g_m
    stats.early_terminated = early
    return _unpermute(ctx, best_bits), stats


def hybrid_decode(y, code: CodeSpec, nms_cfg: NmsConfig, dia_model, path: DecodingPath,
                  swa_model, w_d: int, s_m: float):
    """Full pipeline for one frame: iterative decoding first, refined
    reprocessing only on failure. Returns (codeword, route)."""
    outcome = nms_decode(y, code, nms_cfg)
    if outcome.converged:
        return outcome.hard, "nms"
    ytilde = dia_apply(dia_model, outcome.y, outcome.trace)
    ctx = preprocess(ytilde, outcome.y, code)
    cw, _ = swa_osd(ctx, path, swa_model, w_d, s_m)
    return cw, "osd"
