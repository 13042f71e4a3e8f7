"""Command-line entry points for the decoding laboratory."""

from __future__ import annotations

import argparse
import os
import sys

from . import harness, nn
from .harness import CampaignConfig


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--code", default=None, help="alist file (default: packaged CCSDS (128,64))")
    sp.add_argument("--seed", type=int, default=1)
    sp.add_argument("--out", default="out", help="output directory")


def _add_sim(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--snr", type=float, nargs="+", default=[3.0], help="Eb/N0 points in dB")
    sp.add_argument("--frames", type=int, default=20000, help="maximum frames per point")
    sp.add_argument("--target-errors", type=int, default=0,
                    help="stop a point after this many errors (0: simulate all frames)")
    sp.add_argument("--alpha", type=float, default=0.78, help="check-node normalization factor")
    sp.add_argument("--iters", type=int, default=12, help="maximum decoding iterations")
    sp.add_argument("--zero-codeword", action="store_true",
                    help="send the all-zero codeword instead of random messages")
    sp.add_argument("--batch", type=int, default=2000)


def _add_pipeline(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--p", type=int, default=3, help="maximum pattern weight")
    sp.add_argument("--q", type=int, default=6, help="number of basis segments")
    sp.add_argument("--wd", type=int, default=5, help="sliding window width")
    sp.add_argument("--lp", type=int, default=60, help="surviving path length")
    sp.add_argument("--sm", type=float, default=0.9, help="termination soft margin")


def _add_train(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--lr", type=float, default=0.001)
    sp.add_argument("--decay", type=float, default=0.95)
    sp.add_argument("--decay-every", type=int, default=500)
    sp.add_argument("--steps", type=int, default=20000)
    sp.add_argument("--train-batch", type=int, default=128)
    sp.add_argument("--gamma", type=float, default=10.0)
    sp.add_argument("--val-frac", type=float, default=0.1)


def _cfg(args) -> CampaignConfig:
    return CampaignConfig(
        code_path=args.code,
        snrs=tuple(getattr(args, "snr", [3.0])),
        frames=getattr(args, "frames", 20000),
        target_errors=getattr(args, "target_errors", 0),
        seed=args.seed,
        alpha=getattr(args, "alpha", 0.78),
        t_max=getattr(args, "iters", 12),
        p=getattr(args, "p", 3),
        q=getattr(args, "q", 6),
        w_d=getattr(args, "wd", 5),
        lp_hat=getattr(args, "lp", 60),
        s_m=getattr(args, "sm", 0.9),
        zero_codeword=getattr(args, "zero_codeword", False),
        batch=getattr(args, "batch", 2000),
        out_dir=args.out,
    )


def _train_cfg(args) -> nn.TrainConfig:
    return nn.TrainConfig(lr0=args.lr, decay=args.decay, decay_every=args.decay_every,
                          max_steps=args.steps, batch=args.train_batch, gamma=args.gamma)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="nds", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("nms-campaign", help="simulate the iterative decoder and collect failures")
    _add_common(sp)
    _add_sim(sp)
    sp.add_argument("--failures", default=None, help="failure record output file")

    sp = sub.add_parser("train-dia", help="train the trace-refinement model")
    _add_common(sp)
    _add_train(sp)
    sp.add_argument("--failures", required=True)
    sp.add_argument("--model", default=None, help="weight file to write")
    sp.add_argument("--channels", type=int, nargs=3, default=[8, 8, 8])

    sp = sub.add_parser("build-path", help="build the prioritized block path from failures")
    _add_common(sp)
    _add_pipeline(sp)
    sp.add_argument("--failures", required=True)
    sp.add_argument("--dia", required=True, help="trace-refinement weight file")
    sp.add_argument("--path", default=None, help="path file to write")
    sp.add_argument("--max-failures", type=int, default=None)

    sp = sub.add_parser("train-swa", help="train the window termination arbiter")
    _add_common(sp)
    _add_pipeline(sp)
    _add_train(sp)
    sp.add_argument("--failures", required=True)
    sp.add_argument("--dia", required=True)
    sp.add_argument("--path", required=True)
    sp.add_argument("--model", default=None)
    sp.add_argument("--max-failures", type=int, default=5000)
    sp.add_argument("--hidden", type=int, default=8)

    sp = sub.add_parser("evaluate", help="run the full hybrid and report FER/complexity")
    _add_common(sp)
    _add_sim(sp)
    _add_pipeline(sp)
    sp.add_argument("--dia", required=True)
    sp.add_argument("--path", required=True)
    sp.add_argument("--swa", required=True)

    sp = sub.add_parser("flops", help="print the analytic complexity table")
    _add_common(sp)
    _add_pipeline(sp)
    sp.add_argument("--iters", type=int, default=12)

    sp = sub.add_parser("oracle-check", help="run the built-in verification suite")

    args = ap.parse_args(argv)
    log = print

    if args.cmd == "nms-campaign":
        cfg = _cfg(args)
        rows, ffile = harness.run_nms_campaign(cfg, failures_file=args.failures, log_fn=log)
        log(f"failure records: {ffile}")
        log(f"fer table: {os.path.join(cfg.out_dir, 'nms_fer.csv')}")
        return 0

    if args.cmd == "train-dia":
        os.makedirs(args.out, exist_ok=True)
        model_file = args.model or os.path.join(args.out, "dia.micromodel")
        report = harness.train_dia(args.failures, model_file, _train_cfg(args),
                                   channels=tuple(args.channels), val_frac=args.val_frac,
                                   seed=args.seed, log_fn=log)
        log(f"model: {model_file}  ({report['weights']} weights)")
        return 0

    if args.cmd == "build-path":
        os.makedirs(args.out, exist_ok=True)
        path_file = args.path or os.path.join(args.out, "decoding.ndspath")
        harness.build_path_cmd(args.failures, args.dia, path_file, _cfg(args),
                               max_failures=args.max_failures, log_fn=log)
        log(f"path: {path_file}")
        return 0

    if args.cmd == "train-swa":
        os.makedirs(args.out, exist_ok=True)
        model_file = args.model or os.path.join(args.out, "swa.micromodel")
        harness.train_swa(args.failures, args.dia, args.path, model_file, _cfg(args),
                          _train_cfg(args), max_failures=args.max_failures,
                          val_frac=args.val_frac, hidden=args.hidden, seed=args.seed, log_fn=log)
        log(f"model: {model_file}")
        return 0

    if args.cmd == "evaluate":
        cfg = _cfg(args)
        harness.evaluate(cfg, args.dia, args.path, args.swa, log_fn=log)
        log(f"report: {os.path.join(cfg.out_dir, 'report.csv')}")
        return 0

    if args.cmd == "flops":
        cfg = _cfg(args)
        code = harness.load_campaign_code(cfg)
        fl = harness.flops_report(code, cfg)
        for key, val in fl.items():
            log(f"{key:20s} {val:12.1f}" if isinstance(val, float) else f"{key:20s} {val:12d}")
        return 0

    if args.cmd == "oracle-check":
        results = harness.oracle_check(log_fn=log)
        return 0 if all(ok for _, ok, _ in results) else 1

    return 2


if __name__ == "__main__":
    sys.exit(main())
