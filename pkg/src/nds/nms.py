"""Normalized min-sum decoding with a flooding schedule.

The decoder consumes the raw channel sequence y rather than scaled
LLRs: min-sum hard decisions are invariant under positive scaling, so
no noise estimate is needed, and downstream models are trained on the
same raw scale. A full per-iteration trace of the a-posteriori values
is kept so that failed frames can feed the reliability-refinement
model.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .code import CodeSpec
from .gf2 import BitVector


@dataclass(frozen=True)
class NmsConfig:
    alpha: float = 0.78
    t_max: int = 12

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        if self.t_max < 1:
            raise ValueError("t_max must be positive")


@dataclass
class NmsOutcome:
    """Result of decoding one frame.

    ``trace`` holds the a-posteriori values after each executed
    iteration (one row per iteration); it has t_max rows exactly when
    the frame failed.
    """

    converged: bool
    iterations_used: int
    hard: BitVector
    trace: np.ndarray
    y: np.ndarray


@dataclass
class BatchOutcome:
    converged: np.ndarray   # (B,) bool
    iterations: np.ndarray  # (B,) int
    hard: np.ndarray        # (B, N) uint8
    trace: np.ndarray       # (B, t_max, N) float64


class _Graph:
    """Edge-index bookkeeping for vectorized flooding updates."""

    def __init__(self, h: np.ndarray):
        m, n = h.shape
        chk, var = np.nonzero(h)          # check-major edge order
        self.n = n
        self.m = m
        self.n_edges = chk.size
        self.chk_of_edge = chk
        self.var_of_edge = var
        self.chk_deg = h.sum(axis=1).astype(np.int64)
        self.var_deg = h.sum(axis=0).astype(np.int64)
        if (self.chk_deg == 0).any():
            raise ValueError("parity-check matrix has an empty row")
        self.chk_ptr = np.concatenate([[0], np.cumsum(self.chk_deg)[:-1]])
        # permutation from check-major to variable-major edge order
        self.to_var_order = np.lexsort((chk, var))
        self.var_ptr = np.concatenate([[0], np.cumsum(self.var_deg)[:-1]])
        self.edge_ids = np.arange(self.n_edges)
        self.h_t = h.T.copy()


@lru_cache(maxsize=8)
def _graph_for(code: CodeSpec) -> _Graph:
    return _Graph(np.asarray(code.h.data))


def decode_batch(ys: np.ndarray, code: CodeSpec, cfg: NmsConfig) -> BatchOutcome:
    """Decode a batch of frames in lockstep.

    Converged frames drop out of the working set; their trace rows
    beyond the stopping iteration stay zero.
    """
    ys = np.asarray(ys, dtype=np.float64)
    if ys.ndim != 2 or ys.shape[1] != code.n:
        raise ValueError(f"expected (B, {code.n}) input, got {ys.shape}")
    if not np.isfinite(ys).all():
        raise ValueError("non-finite decoder input")
    g = _graph_for(code)
    b, n = ys.shape
    t_max = cfg.t_max

    trace = np.zeros((b, t_max, n))
    hard_out = np.empty((b, n), dtype=np.uint8)
    iters = np.full(b, t_max, dtype=np.int64)
    conv = np.zeros(b, dtype=bool)

    active = np.arange(b)
    y_act = ys
    m_vc = ys[:, g.var_of_edge]           # variable-to-check, check-major order

    for t in range(t_max):
        # check-node update: leave-one-out sign and magnitude minimum
        neg = (m_vc < 0)
        parity = np.add.reduceat(neg.astype(np.int16), g.chk_ptr, axis=1) & 1
        tot_sign = (1.0 - 2.0 * parity)
        mag = np.abs(m_vc)
        min1 = np.minimum.reduceat(mag, g.chk_ptr, axis=1)
        min1_e = np.repeat(min1, g.chk_deg, axis=1)
        cand = np.where(mag == min1_e, g.edge_ids[None, :], g.n_edges)
        first = np.minimum.reduceat(cand, g.chk_ptr, axis=1)
        is_first = g.edge_ids[None, :] == np.repeat(first, g.chk_deg, axis=1)
        mag_rest = np.where(is_first, np.inf, mag)
        min2 = np.minimum.reduceat(mag_rest, g.chk_ptr, axis=1)
        out_mag = np.where(is_first, np.repeat(min2, g.chk_deg, axis=1), min1_e)
        out_mag[~np.isfinite(out_mag)] = 0.0   # degree-1 checks carry no information
        sign_e = np.where(neg, -1.0, 1.0)
        m_cv = cfg.alpha * np.repeat(tot_sign, g.chk_deg, axis=1) * sign_e * out_mag

        # a-posteriori values and early stopping on zero syndrome
        totals = np.add.reduceat(m_cv[:, g.to_var_order], g.var_ptr, axis=1)
        app = y_act + totals
        trace[active, t, :] = app
        hard = (app < 0)
        syn_ok = ~(((hard.astype(np.uint8) @ g.h_t) & 1).any(axis=1))
        if syn_ok.any():
            done = active[syn_ok]
            conv[done] = True
            iters[done] = t + 1
            hard_out[done] = hard[syn_ok]
            keep = ~syn_ok
            active = active[keep]
            if active.size == 0:
                break
            app = app[keep]
            m_cv = m_cv[keep]
            y_act = y_act[keep]
        if t + 1 < t_max:
            m_vc = app[:, g.var_of_edge] - m_cv

    if active.size:
        hard_out[active] = (trace[active, t_max - 1, :] < 0)
    return BatchOutcome(converged=conv, iterations=iters, hard=hard_out, trace=trace)


def nms_decode(y, code: CodeSpec, cfg: NmsConfig) -> NmsOutcome:
    """Decode one frame, keeping the per-iteration a-posteriori trace."""
    y = np.asarray(y, dtype=np.float64)
    out = decode_batch(y[None, :], code, cfg)
    used = int(out.iterations[0])
    return NmsOutcome(
        converged=bool(out.converged[0]),
        iterations_used=used,
        hard=BitVector(out.hard[0]),
        trace=out.trace[0, :used, :].copy(),
        y=y,
    )


def is_failure(outcome: NmsOutcome) -> bool:
    return not outcome.converged
