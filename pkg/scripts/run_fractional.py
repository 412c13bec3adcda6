"""BER of isolated symbols under an uncorrected fractional CFO or STO."""

from _common import parser, run


def main():
    p = parser(__doc__, frames=100_000)
    p.add_argument("--snr", default="-16:-4:1")
    args = p.parse_args()
    for off in ("0", "0.1", "0.2", "0.3", "0.4", "0.5"):
        run(args, f"fractional_phi_{off}",
            ["--mode", "ber-fractional", "--snr", args.snr, "--phi", off])
        run(args, f"fractional_lambda_{off}_r8",
            ["--mode", "ber-fractional", "--snr", args.snr, "--lambda", off, "--oversample", "8"])


if __name__ == "__main__":
    main()
