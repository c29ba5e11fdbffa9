"""Command line entry point: ``pnlab run | summarize | selftest``."""
from __future__ import annotations

import argparse
import logging
import sys

from . import harness


def _parse_args(argv=None):
    p = argparse.ArgumentParser(prog="pnlab", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="Monte-Carlo BER / phase MSE sweep")
    r.add_argument("--config", help="flat TOML file with RunConfig keys")
    r.add_argument("--snr", type=float, nargs="+", help="SNR grid in dB")
    r.add_argument("--frames", type=int, help="frames per SNR point")
    r.add_argument("--frame-offset", type=int, help="index of the first frame")
    r.add_argument("--iters", type=int, help="outer receiver iterations")
    r.add_argument("--receiver", nargs="+", choices=harness.RECEIVERS)
    r.add_argument("--seed", type=int, help="master seed")
    r.add_argument("--out", help="output CSV path")
    r.add_argument("--no-timing", action="store_true",
                   help="write nan timings so repeated runs are byte-identical")

    s = sub.add_parser("summarize", help="paired comparison of two receivers")
    s.add_argument("--in", dest="inputs", nargs="+", required=True,
                   help="result CSV(s); the .frames.csv sidecars are read")
    s.add_argument("--baseline", default="eks")
    s.add_argument("--subject", default="bpmfep")
    s.add_argument("--out", help="write the report as CSV instead of printing")

    t = sub.add_parser("selftest", help="oracle cross-checks")
    t.add_argument("--seed", type=int, default=0)
    return p.parse_args(argv)


def cmd_run(args) -> int:
    overrides = dict(snr_db_grid=args.snr, n_frames=args.frames, frame_offset=args.frame_offset,
                     iters=args.iters, receiver=args.receiver, master_seed=args.seed,
                     out=args.out, record_timing=False if args.no_timing else None)
    if args.config:
        cfg = harness.load_config(args.config, **overrides)
    else:
        cfg = harness.RunConfig(**{k: v for k, v in overrides.items() if v is not None})
    rows, _ = harness.run_experiment(cfg)
    for row in rows:
        print(f"{row['receiver']:>8} {row['snr_db']:6.2f} dB  it {row['iteration']:2d}  "
              f"BER {row['ber']:.3e}  MSE med {row['pn_mse_median']:.3e}")
    print(f"wrote {cfg.out}")
    return 0


def cmd_summarize(args) -> int:
    parts = [harness.read_csv(harness.sidecar_path(p)) for p in args.inputs]
    report = harness.summarize(harness.merge_records(*parts), args.baseline, args.subject)
    if args.out:
        harness.write_csv(args.out, report, harness.SUMMARY_FIELDS)
        print(f"wrote {args.out}")
        return 0
    print(f"{args.subject} vs {args.baseline}")
    print(f"{'snr':>6} {'it':>3} {'frames':>6} {'mse ratio':>10} {'ber ratio':>10} "
          f"{'wins':>5} {'losses':>6} {'p':>10}")
    for r in report:
        print(f"{r['snr_db']:6.2f} {r['iteration']:3d} {r['n_frames']:6d} {r['mse_ratio']:10.4f} "
              f"{r['ber_ratio']:10.4f} {r['n_subject_better']:5d} {r['n_baseline_better']:6d} "
              f"{r['sign_test_p']:10.3g}")
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_all

    ok = True
    for name, passed, detail in run_all(args.seed):
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
        ok &= passed
    return 0 if ok else 1


def main(argv=None) -> int:
    args = _parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return {"run": cmd_run, "summarize": cmd_summarize, "selftest": cmd_selftest}[args.cmd](args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
