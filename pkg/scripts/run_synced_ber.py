"""BER of synchronised frames for R = 1, 2, 4, 8 and the genie-offset baseline."""

from _common import parser, run


def main():
    p = parser(__doc__, frames=10_000)
    p.add_argument("--snr", default="-14:-5:1")
    args = p.parse_args()
    for r in (1, 2, 4, 8):
        run(args, f"ber_r{r}", ["--mode", "ber", "--oversample", str(r), "--snr", args.snr])
    run(args, "ber_baseline", ["--mode", "baseline", "--snr", args.snr])


if __name__ == "__main__":
    main()
