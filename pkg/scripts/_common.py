"""Shared plumbing for the experiment runners: each run is one CLI invocation."""

import argparse
import os
import sys

from lorasync.cli import main as cli_main


def parser(description: str, frames: int) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--outdir", default="results")
    p.add_argument("--frames", type=int, default=frames)
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.add_argument("--seed", type=int, default=0)
    return p


def run(args, name: str, flags: list) -> None:
    os.makedirs(args.outdir, exist_ok=True)
    out = os.path.join(args.outdir, f"{name}.csv")
    argv = flags + ["--frames", str(args.frames), "--workers", str(args.workers),
                    "--seed", str(args.seed), "--out", out, "--with-se"]
    print(f"{name}: lorasync {' '.join(argv)}", file=sys.stderr)
    rc = cli_main(argv)
    if rc:
        sys.exit(rc)
