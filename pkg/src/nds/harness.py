"""Campaign orchestration: Monte-Carlo simulation, model training,
path construction, hybrid evaluation and complexity accounting.

Workers split a campaign into fixed-size frame chunks; every frame owns
an RNG stream derived from (seed, frame_index), so results are
bit-identical for any worker count and chunks are aggregated in frame
order.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import channel, nms, nn, osd
from .code import CodeSpec, ccsds_128_64, encode, hamming_7_4, load_code
from .datasets import (FailureRecord, FailureWriter, extract_dia_samples,
                       gen_window_samples, read_failures)
from .gf2 import BitVector
from .path import DecodingPath, build_path, enumerate_blocks, load_path, save_path, segment_layout


@dataclass(frozen=True)
class CampaignConfig:
    code_path: str = None          # None selects the packaged CCSDS (128,64)
    snrs: tuple = (3.0,)
    frames: int = 20000
    target_errors: int = 0         # stop a point once this many failures seen (0: never)
    seed: int = 1
    alpha: float = 0.78
    t_max: int = 12
    p: int = 3
    q: int = 6
    w_d: int = 5
    lp_hat: int = 60
    s_m: float = 0.9
    zero_codeword: bool = False
    batch: int = 2000
    out_dir: str = "out"


def load_campaign_code(cfg: CampaignConfig) -> CodeSpec:
    return load_code(cfg.code_path) if cfg.code_path else ccsds_128_64()


def n_workers() -> int:
    raw = os.environ.get("NDS_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def wilson_ci(errors: int, trials: int, z: float = 1.96):
    """95% score interval for a binomial proportion."""
    if trials == 0:
        return (0.0, 1.0)
    p = errors / trials
    den = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / den
    spread = z * math.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials * trials)) / den
    return (max(0.0, center - spread), min(1.0, center + spread))


def _gen_chunk(code: CodeSpec, sigma: float, seed: int, lo: int, hi: int, zero_codeword: bool):
    """Frames lo..hi-1: codewords and channel outputs."""
    b = hi - lo
    ys = np.empty((b, code.n))
    cs = np.empty((b, code.n), dtype=np.uint8)
    for j in range(b):
        rng = channel.frame_rng(seed, lo + j)
        if zero_codeword:
            c = np.zeros(code.n, dtype=np.uint8)
        else:
            msg = rng.integers(0, 2, code.k, dtype=np.uint8)
            c = (msg @ code.g.data) & 1
        cs[j] = c
        ys[j] = (1.0 - 2.0 * c.astype(np.float64)) + sigma * rng.standard_normal(code.n)
    return ys, cs


def _nms_chunk(code, nms_cfg, sigma, seed, lo, hi, zero_codeword, snr_db):
    """Simulate + decode one chunk; failures returned as records."""
    ys, cs = _gen_chunk(code, sigma, seed, lo, hi, zero_codeword)
    out = nms.decode_batch(ys, code, nms_cfg)
    fail_idx = np.flatnonzero(~out.converged)
    records = [FailureRecord(y=ys[i], trace=out.trace[i], c_true=cs[i], snr_db=snr_db)
               for i in fail_idx]
    undetected = int((out.converged & (out.hard != cs).any(axis=1)).sum())
    return {
        "frames": hi - lo,
        "failures": len(fail_idx),
        "undetected": undetected,
        "iters_sum": int(out.iterations.sum()),
        "records": records,
        "chunk": (ys, cs, out),
    }


def _chunk_ranges(total: int, batch: int):
    return [(lo, min(lo + batch, total)) for lo in range(0, total, batch)]


def _map_chunks(fn, ranges):
    """Run chunk jobs, in order, with the configured worker count."""
    workers = n_workers()
    if workers == 1 or len(ranges) <= 1:
        for r in ranges:
            yield fn(r)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(fn, ranges)


class _NmsJob:
    """Picklable chunk job for the worker pool."""

    def __init__(self, code, nms_cfg, sigma, seed, zero_codeword, snr_db, keep_chunk=False):
        self.code, self.nms_cfg, self.sigma = code, nms_cfg, sigma
        self.seed, self.zero_codeword, self.snr_db = seed, zero_codeword, snr_db
        self.keep_chunk = keep_chunk

    def __call__(self, rng):
        lo, hi = rng
        res = _nms_chunk(self.code, self.nms_cfg, self.sigma, self.seed, lo, hi,
                         self.zero_codeword, self.snr_db)
        if not self.keep_chunk:
            res["chunk"] = None
        return res


def run_nms_campaign(cfg: CampaignConfig, failures_file: str = None, collect: bool = True,
                     log_fn=None):
    """Simulate every configured SNR point with the iterative decoder.

    Returns (rows, failures_file); failure records from all points are
    streamed to one file (each record carries its SNR). ``collect=False``
    skips the failure file for FER-only runs.
    """
    code = load_campaign_code(cfg)
    nms_cfg = nms.NmsConfig(alpha=cfg.alpha, t_max=cfg.t_max)
    os.makedirs(cfg.out_dir, exist_ok=True)
    if failures_file is None:
        failures_file = os.path.join(cfg.out_dir, "failures.ndsf")
    rows = []
    writer = FailureWriter(failures_file, code.n, code.k, cfg.t_max) if collect else None
    try:
        for snr in cfg.snrs:
            sigma = channel.snr_to_sigma(snr, code.n, code.k)
            job = _NmsJob(code, nms_cfg, sigma, cfg.seed, cfg.zero_codeword, snr)
            frames = failures = undetected = iters_sum = 0
            for res in _map_chunks(job, _chunk_ranges(cfg.frames, cfg.batch)):
                frames += res["frames"]
                failures += res["failures"]
                undetected += res["undetected"]
                iters_sum += res["iters_sum"]
                if writer is not None:
                    for rec in res["records"]:
                        writer.append(rec)
                if cfg.target_errors and failures >= cfg.target_errors:
                    break
            fer = failures / frames if frames else 0.0
            lo, hi = wilson_ci(failures, frames)
            row = {"snr_db": snr, "frames": frames, "errors": failures, "fer": fer,
                   "ci_lo": lo, "ci_hi": hi, "undetected": undetected,
                   "mean_iters": iters_sum / frames if frames else 0.0}
            rows.append(row)
            if log_fn:
                log_fn(f"snr {snr:5.2f}  frames {frames:8d}  failures {failures:6d}  "
                       f"FER {fer:.5f}  [{lo:.5f}, {hi:.5f}]  mean_iters {row['mean_iters']:.2f}")
    finally:
        if writer is not None:
            writer.close()
    _write_csv(os.path.join(cfg.out_dir, "nms_fer.csv"), rows,
               ["snr_db", "frames", "errors", "fer", "ci_lo", "ci_hi", "undetected", "mean_iters"])
    return rows, (failures_file if writer is not None else None)


# ---------------------------------------------------------------------------
# training commands

def _stack_dia_samples(records, t_max):
    xs, ds = [], []
    for rec in records:
        x, d = extract_dia_samples(rec, t_max=t_max)
        xs.append(x)
        ds.append(d)
    return np.concatenate(xs, axis=0), np.concatenate(ds, axis=0)


def _split(x, d, val_frac, seed):
    rng = np.random.default_rng(seed)
    order = rng.permutation(x.shape[0])
    n_val = int(x.shape[0] * val_frac)
    val, tr = order[:n_val], order[n_val:]
    return x[tr], d[tr], x[val], d[val]


def train_dia(failures_file: str, out_model: str, train_cfg: nn.TrainConfig = None,
              channels=(8, 8, 8), val_frac: float = 0.1, seed: int = 7, log_fn=None):
    """Train the trace-refinement model from collected failures."""
    train_cfg = train_cfg or nn.TrainConfig()
    records, hdr = read_failures(failures_file)
    if not records:
        raise ValueError("no failure records to train on")
    x, d = _stack_dia_samples(records, hdr["t"])
    xt, dt, xv, dv = _split(x, d, val_frac, seed)
    model = nn.build_dia_model(t_max=hdr["t"], channels=channels, seed=seed)
    nn.train(model, xt, dt, train_cfg, "sigmoid_ce", x_val=xv, d_val=dv,
             seed=seed, log_fn=log_fn)
    val_ce = nn.evaluate_ce(model, xv, dv, "sigmoid_ce")
    # reliability baseline: the final-iteration a-posteriori value as logit
    baseline_ce = nn.ce_from_logits(xv[:, -1], dv)
    nn.save_model(model, out_model)
    report = {"samples": int(x.shape[0]), "val_ce": val_ce, "baseline_final_iter_ce": baseline_ce,
              "steps": train_cfg.max_steps, "weights": model.n_weights()}
    if log_fn:
        log_fn(f"dia: val_ce {val_ce:.5f} vs final-iteration baseline {baseline_ce:.5f}")
    return report


def collect_error_patterns(records, dia_model, code: CodeSpec):
    """Basis error patterns of every failure under the refined measure."""
    errs = []
    for rec in records:
        ytilde = nn.dia_apply(dia_model, rec.y, rec.trace)
        ctx = osd.preprocess(ytilde, rec.y, code)
        errs.append(osd.true_error_pattern(ctx, BitVector(rec.c_true)).bits)
    return errs


def build_path_cmd(failures_file: str, dia_model_file: str, out_path: str,
                   cfg: CampaignConfig, max_failures: int = None, log_fn=None) -> DecodingPath:
    """Accumulate block counters over the failures and write the
    prioritized path."""
    code = load_campaign_code(cfg)
    records, _ = read_failures(failures_file, limit=max_failures)
    if not records:
        raise ValueError("no failure records")
    model = nn.load_model(dia_model_file)
    layout = segment_layout(code.k, cfg.q)
    errs = collect_error_patterns(records, model, code)
    path = build_path(errs, layout, cfg.p)
    save_path(path, out_path)
    if log_fn:
        rate = path.overflow_count / len(records)
        log_fn(f"path: {len(path.blocks)} blocks from {len(records)} failures, "
               f"overflow rate {rate:.4f}")
    return path


def train_swa(failures_file: str, dia_model_file: str, path_file: str, out_model: str,
              cfg: CampaignConfig, train_cfg: nn.TrainConfig = None, max_failures: int = None,
              val_frac: float = 0.1, hidden: int = 8, seed: int = 11, log_fn=None):
    """Generate window samples along the stored path and train the
    termination arbiter with the biased-penalty loss."""
    train_cfg = train_cfg or nn.TrainConfig()
    code = load_campaign_code(cfg)
    records, _ = read_failures(failures_file, limit=max_failures)
    if not records:
        raise ValueError("no failure records")
    dia_model = nn.load_model(dia_model_file)
    path = load_path(path_file)
    xs, ds = [], []
    for rec in records:
        ytilde = nn.dia_apply(dia_model, rec.y, rec.trace)
        ctx = osd.preprocess(ytilde, rec.y, code)
        x, d = gen_window_samples(ctx, path, BitVector(rec.c_true), cfg.w_d)
        xs.append(x)
        ds.append(d)
    x = np.concatenate(xs, axis=0)
    d = np.concatenate(ds, axis=0)
    xt, dt, xv, dv = _split(x, d, val_frac, seed)
    model = nn.build_swa_model(w_d=cfg.w_d, hidden=hidden, seed=seed)
    nn.train(model, xt, dt, train_cfg, "weighted_ce", x_val=xv, d_val=dv,
             seed=seed, log_fn=log_fn)
    probs = nn.forward(model, xv)
    pred = np.argmax(probs, axis=1)
    acc0 = float((pred[dv == 0] == 0).mean()) if (dv == 0).any() else math.nan
    acc1 = float((pred[dv == 1] == 1).mean()) if (dv == 1).any() else math.nan
    harmful = float(((dv == 1) & (pred == 0)).mean())
    nn.save_model(model, out_model)
    report = {"samples": int(x.shape[0]), "acc_terminate": acc0, "acc_continue": acc1,
              "harmful_rate": harmful, "class0_rate": float((d == 0).mean()),
              "weights": model.n_weights()}
    if log_fn:
        log_fn(f"swa: acc0 {acc0:.4f} acc1 {acc1:.4f} harmful {harmful:.5f} "
               f"class0 base {report['class0_rate']:.5f}")
    return report


# ---------------------------------------------------------------------------
# complexity model

def nms_flops_per_iteration(code: CodeSpec) -> float:
    """Analytic per-iteration cost from the average node degrees."""
    ones = float(code.h.data.sum())
    d_v = ones / code.n
    d_c = ones / code.m
    return 2.0 * code.n * d_v + code.m * (4.0 * d_c - 3.0)


def tep_flops(code: CodeSpec) -> int:
    """Estimated distance-evaluation cost per test error pattern: half
    the least-reliable-basis size in multiply-adds."""
    return code.m // 2


def flops_report(code: CodeSpec, cfg: CampaignConfig, dia_model=None, swa_model=None) -> dict:
    dia_model = dia_model or nn.build_dia_model(t_max=cfg.t_max)
    swa_model = swa_model or nn.build_swa_model(w_d=cfg.w_d)
    dia_per_bit = nn.model_flops(dia_model, cfg.t_max + 1)
    swa_per_call = nn.model_flops(swa_model)
    return {
        "nms_per_iteration": nms_flops_per_iteration(code),
        "dia_per_bit": dia_per_bit,
        "dia_per_frame": dia_per_bit * code.n,
        "swa_per_call": swa_per_call,
        "per_tep": tep_flops(code),
        "dia_weights": dia_model.n_weights(),
        "swa_weights": swa_model.n_weights(),
    }


# ---------------------------------------------------------------------------
# hybrid evaluation

def evaluate(cfg: CampaignConfig, dia_model_file: str, path_file: str, swa_model_file: str,
             log_fn=None):
    """Full hybrid campaign; returns per-SNR report rows and writes
    report.csv."""
    code = load_campaign_code(cfg)
    nms_cfg = nms.NmsConfig(alpha=cfg.alpha, t_max=cfg.t_max)
    dia_model = nn.load_model(dia_model_file)
    swa_model = nn.load_model(swa_model_file)
    path = load_path(path_file).truncate(cfg.lp_hat)
    fl = flops_report(code, cfg, dia_model, swa_model)
    os.makedirs(cfg.out_dir, exist_ok=True)
    rows = []
    for snr in cfg.snrs:
        sigma = channel.snr_to_sigma(snr, code.n, code.k)
        job = _NmsJob(code, nms_cfg, sigma, cfg.seed, cfg.zero_codeword, snr, keep_chunk=True)
        frames = nms_fail = undetected = osd_err = 0
        iters_sum = 0
        n_at_sum = swa_calls_sum = 0
        osd_flops_sum = 0.0
        for res in _map_chunks(job, _chunk_ranges(cfg.frames, cfg.batch)):
            ys, cs, out = res["chunk"]
            frames += res["frames"]
            nms_fail += res["failures"]
            undetected += res["undetected"]
            iters_sum += res["iters_sum"]
            for i in np.flatnonzero(~out.converged):
                ytilde = nn.dia_apply(dia_model, ys[i], out.trace[i])
                ctx = osd.preprocess(ytilde, ys[i], code)
                cw, stats = osd.swa_osd(ctx, path, swa_model, cfg.w_d, cfg.s_m)
                if not np.array_equal(cw.bits, cs[i]):
                    osd_err += 1
                n_at_sum += stats.n_at
                swa_calls_sum += stats.swa_calls
                osd_flops_sum += (fl["dia_per_frame"] + stats.n_at * fl["per_tep"]
                                  + stats.swa_calls * fl["swa_per_call"])
            if cfg.target_errors and osd_err >= cfg.target_errors:
                break
        fer_nms = nms_fail / frames if frames else 0.0
        fer_post = osd_err / nms_fail if nms_fail else 0.0
        fer_comp = osd_err / frames if frames else 0.0
        mean_iters = iters_sum / frames if frames else 0.0
        c_nms = mean_iters * fl["nms_per_iteration"]
        c_s = osd_flops_sum / nms_fail if nms_fail else 0.0
        row = {
            "snr_db": snr, "frames": frames, "nms_errors": nms_fail,
            "undetected_nms": undetected, "osd_errors": osd_err,
            "fer_nms": fer_nms, "fer_post": fer_post, "fer_comprehensive": fer_comp,
            "n_at_mean": n_at_sum / nms_fail if nms_fail else 0.0,
            "swa_calls_mean": swa_calls_sum / nms_fail if nms_fail else 0.0,
            "flops_mean": (iters_sum * fl["nms_per_iteration"] + osd_flops_sum) / frames if frames else 0.0,
            "c_av": c_nms + fer_nms * c_s,
        }
        rows.append(row)
        if log_fn:
            log_fn(f"snr {snr:5.2f}  frames {frames:8d}  fer_nms {fer_nms:.5f}  "
                   f"fer_post {fer_post:.5f}  fer_comp {fer_comp:.6f}  "
                   f"n_at {row['n_at_mean']:.1f}  c_av {row['c_av']:.0f}")
    _write_csv(os.path.join(cfg.out_dir, "report.csv"), rows,
               ["snr_db", "frames", "nms_errors", "undetected_nms", "osd_errors",
                "fer_nms", "fer_post", "fer_comprehensive", "n_at_mean",
                "swa_calls_mean", "flops_mean", "c_av"])
    return rows


def _write_csv(fname: str, rows: list, columns: list) -> None:
    with open(fname, "wt", newline="", encoding="ascii") as f:
        f.write("# ndsreport v1\n")
        w = csv.DictWriter(f, fieldnames=columns)
        w.writeheader()
        for row in rows:
            w.writerow({c: row[c] for c in columns})


def read_report_csv(fname: str):
    with open(fname, "rt", encoding="ascii") as f:
        first = f.readline()
        if not first.startswith("# ndsreport v1"):
            raise ValueError("not an ndsreport v1 csv")
        return list(csv.DictReader(f))


# ---------------------------------------------------------------------------
# built-in verification suite

def oracle_check(log_fn=None) -> list:
    """Quick independent cross-checks; returns (name, ok, detail) rows."""
    results = []

    def add(name, ok, detail=""):
        results.append((name, bool(ok), detail))
        if log_fn:
            log_fn(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" ({detail})" if detail else ""))

    rng = np.random.default_rng(2024)

    # exhaustive-codebook agreement on the Hamming code
    code = hamming_7_4()
    layout = segment_layout(code.k, 2)
    from .path import TepBlock, block_size, feasible_blocks
    blocks = [TepBlock(w=w, size=block_size(w, layout)) for w in feasible_blocks(4, layout)]
    full_path = DecodingPath(layout=layout, p=4, blocks=blocks)
    book = np.array([((np.array(list(np.binary_repr(m, 4)), dtype=np.uint8)) @ code.g.data) & 1
                     for m in range(16)], dtype=np.uint8)
    mism = 0
    for _ in range(1000):
        msg = BitVector(rng.integers(0, 2, 4, dtype=np.uint8))
        c = encode(msg, code)
        y = (1.0 - 2.0 * c.bits) + 0.8 * rng.standard_normal(7)
        ctx = osd.preprocess(y, y, code)
        got, _ = osd.plain_osd(ctx, full_path)
        r = (y < 0).astype(np.uint8)
        dists = ((book != r[None, :]) * np.abs(y)).sum(axis=1)
        want = book[int(np.argmin(dists))]
        if not np.array_equal(got.bits, want):
            mism += 1
    add("exhaustive-codebook minimizer, Hamming(7,4)", mism == 0, f"{mism} mismatches in 1000")

    # block partition exhaustiveness on a small layout
    lay = segment_layout(12, 3)
    from .path import classify_error, enumerate_teps
    seen = set()
    total = 0
    for w in enumerate_blocks(3, lay):
        for tep in enumerate_teps(w, lay):
            seen.add(tep.bits.tobytes())
            total += 1
    want_count = sum(math.comb(12, i) for i in range(4))
    add("block partition covers all patterns of weight <= 3",
        total == want_count and len(seen) == want_count, f"{total} vs {want_count}")

    # classification agrees with enumeration
    ok = all(classify_error(tep, lay, 3) == w
             for w in enumerate_blocks(3, lay) for tep in enumerate_teps(w, lay))
    add("pattern classification matches enumeration", ok)

    # combinatorics of the default configuration
    lay64 = segment_layout(64, 6)
    blocks64 = enumerate_blocks(3, lay64)
    total64 = sum(block_size(w, lay64) for w in blocks64)
    add("path combinatorics for K=64, p=3, q=6",
        len(blocks64) == 84 and total64 == 43745, f"{len(blocks64)} blocks, {total64} patterns")

    # gradient checks for both model shapes
    dia = nn.build_dia_model(t_max=12, seed=3)
    x = rng.normal(size=(16, 13, 1))
    d = rng.integers(0, 2, 16)
    err_dia = nn.gradient_check(dia, x, d, "sigmoid_ce", n_points=60, seed=5)
    add("gradient check, trace-refinement shape", err_dia < 1e-4, f"max rel err {err_dia:.2e}")
    swa = nn.build_swa_model(w_d=5, seed=3)
    xs = np.abs(rng.normal(size=(32, 6)))
    dsw = rng.integers(0, 2, 32)
    err_swa = nn.gradient_check(swa, xs, dsw, "weighted_ce", gamma=10.0, n_points=60, seed=5)
    add("gradient check, window-arbiter shape with biased loss", err_swa < 1e-4,
        f"max rel err {err_swa:.2e}")

    # permuted-domain row space sanity on random full-rank matrices
    from .gf2 import BitMatrix, RankDeficiencyError, to_systematic
    bad = 0
    trials = 0
    while trials < 200:
        m, n = 5, 12
        h = BitMatrix(rng.integers(0, 2, (m, n), dtype=np.uint8))
        try:
            sysf = to_systematic(h)
        except RankDeficiencyError:
            continue
        trials += 1
        hp = h.permute_cols(sysf.pi2)
        rebuilt = np.concatenate([np.eye(m, dtype=np.uint8), sysf.q2.data], axis=1)
        if _row_space(hp.data) != _row_space(rebuilt):
            bad += 1
    add("systematic form preserves the row space", bad == 0, f"{bad} bad of {trials}")

    return results


def _row_space(a: np.ndarray) -> frozenset:
    a = a.copy()
    m, n = a.shape
    r = 0
    for c in range(n):
        piv = None
        for i in range(r, m):
            if a[i, c]:
                piv = i
                break
        if piv is None:
            continue
        a[[r, piv]] = a[[piv, r]]
        for i in range(m):
            if i != r and a[i, c]:
                a[i] ^= a[r]
        r += 1
    return frozenset(row.tobytes() for row in a[:r])
