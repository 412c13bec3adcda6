"""Command-line front end for Monte Carlo campaigns."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .harness import MODES, CampaignConfig, format_csv, run_campaign, snr_grid

log = logging.getLogger("lorasync")


def _snr(spec: str) -> tuple:
    try:
        return snr_grid(spec)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="lorasync",
        description="Simulate chirp-spread-spectrum frame synchronisation and write a CSV.",
    )
    p.add_argument("--mode", choices=MODES, required=True)
    p.add_argument("--sf", type=int, default=8, help="spreading factor (default 8)")
    p.add_argument("--oversample", type=int, default=1, help="receiver rate multiple R")
    p.add_argument("--snr", type=_snr, required=True, metavar="START:STOP:STEP|LIST",
                   help="SNR grid in dB, inclusive range or comma list")
    p.add_argument("--frames", type=int, default=10_000,
                   help="frames per SNR point (symbols in ber-fractional mode)")
    p.add_argument("--payload", type=int, default=10, help="payload symbols per frame")
    p.add_argument("--nup", type=int, default=8)
    p.add_argument("--nsync", type=int, default=2)
    p.add_argument("--ndown", type=int, default=2)
    p.add_argument("--scheme", choices=("naive", "proposed"), default="proposed")
    off = p.add_mutually_exclusive_group()
    off.add_argument("--phi", type=float, help="fixed fractional CFO (ber-fractional)")
    off.add_argument("--lambda", dest="lam", type=float,
                     help="fixed fractional STO (ber-fractional)")
    p.add_argument("--q", type=int, default=0, help="network identifier")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", metavar="PATH", help="CSV destination (default stdout)")
    p.add_argument("--with-se", action="store_true",
                   help="append binomial standard-error columns")
    p.add_argument("--quiet", action="store_true", help="suppress progress on stderr")
    return p


def _attach_values(argv: list) -> list:
    """Join ``--snr -12:-4:2`` into one token; argparse reads a leading '-' as an option."""
    out, it = [], iter(argv)
    for tok in it:
        if tok in ("--snr", "--phi", "--lambda"):
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_attach_values(argv))
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        cfg = CampaignConfig(
            mode=args.mode, sf=args.sf, oversample=args.oversample, snr_db=args.snr,
            frames=args.frames, payload_len=args.payload, n_up=args.nup,
            n_sync=args.nsync, n_down=args.ndown, scheme=args.scheme, q=args.q,
            phi=args.phi, lam=args.lam, seed=args.seed, workers=args.workers,
        )
    except ValueError as exc:
        print(f"lorasync: configuration error: {exc}", file=sys.stderr)
        return 2

    if args.out is not None:
        parent = os.path.dirname(os.path.abspath(args.out))
        if not os.path.isdir(parent) or os.path.isdir(args.out):
            print(f"lorasync: cannot write CSV to {args.out!r}", file=sys.stderr)
            return 1

    def progress(row):
        log.info("snr %+.2f dB: fail %.4g ber %.4g (%.1f s)", row.snr_db,
                 row.sync_fail_rate, row.ber, row.runtime_s)

    try:
        result = run_campaign(cfg, out=args.out, with_se=args.with_se, progress=progress)
    except OSError as exc:
        print(f"lorasync: {exc}", file=sys.stderr)
        return 1
    if args.out is None:
        sys.stdout.write(format_csv(result, args.with_se))
    return 0


if __name__ == "__main__":
    sys.exit(main())
