"""Synchronisation failure rate against SNR at R = 4 for both schemes and several preambles."""

from _common import parser, run


def main():
    p = parser(__doc__, frames=10_000)
    p.add_argument("--snr", default="-14:-5:1")
    args = p.parse_args()
    base = ["--mode", "sync-rate", "--oversample", "4", "--snr", args.snr]
    run(args, "sync_naive_8_2_2", base + ["--scheme", "naive"])
    for nup, nsync, ndown in ((8, 2, 2), (8, 4, 4), (8, 6, 6), (16, 2, 2)):
        run(args, f"sync_proposed_{nup}_{nsync}_{ndown}",
            base + ["--nup", str(nup), "--nsync", str(nsync), "--ndown", str(ndown)])


if __name__ == "__main__":
    main()
