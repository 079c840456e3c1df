"""``irssense`` command line: run one experiment from a YAML config and emit CSV.

Exit status: 0 on success, 1 on a validation error, 2 on an I/O error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from irssense import experiments as ex
from irssense.config import ConfigError, load_config

COMMANDS = {
    "beampattern": "beampattern",
    "rmse": "rmse_sweep",
    "estimate": "estimate",
    "crlb": "crlb",
    "codebook": "codebook",
}
ARCH_ALIASES = {"active": "active", "semi": "semi_passive", "passive": "passive"}

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # Usage mistakes are validation errors; status 2 is reserved for I/O.
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="irssense", description="IRS-aided radar sensing experiments")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, type=Path, help="YAML experiment config")
    parser.add_argument("--seed", type=int, help="override master_seed")
    parser.add_argument("--trials", type=int, help="override trials")
    parser.add_argument("--out", type=Path, help="output CSV (default: standard output)")
    parser.add_argument("--arch", choices=sorted(ARCH_ALIASES), help="run a single architecture")
    parser.add_argument("--dump-spectrum", action="store_true",
                        help="estimate: also write <out>.<arch>.<algorithm>.spectrum.csv")
    parser.add_argument("--dump-snapshots", action="store_true",
                        help="estimate: also write <out>.<arch>.snapshots.csv")
    return parser


def _side_path(out: Path, *parts: str) -> Path:
    return out.with_name(".".join((out.stem, *parts, "csv")))


def _run(args) -> None:
    cfg = load_config(args.config, experiment=COMMANDS[args.command], master_seed=args.seed,
                      trials=args.trials, output_path=args.out,
                      architecture=ARCH_ALIASES.get(args.arch))
    out = cfg.output_path
    dumps = args.dump_spectrum or args.dump_snapshots
    if dumps and cfg.experiment != "estimate":
        raise ConfigError("--dump-spectrum/--dump-snapshots apply to the estimate command only")
    if dumps and out is None:
        raise ConfigError("--dump-spectrum/--dump-snapshots need an output path (--out or output_path)")

    if cfg.experiment == "beampattern":
        header, rows = ex.run_beampattern(cfg)
    elif cfg.experiment == "rmse_sweep":
        header, rows = ex.rmse_rows(ex.run_rmse_sweep(cfg))
    elif cfg.experiment == "crlb":
        header, rows = ex.run_crlb(cfg)
    elif cfg.experiment == "codebook":
        header, rows = ex.run_codebook(cfg)
    else:
        runs = ex.run_estimate(cfg)
        header, rows = ex.estimate_rows(cfg, runs)
        for run in runs:
            if args.dump_snapshots:
                ex.write_csv(*ex.snapshot_rows(run.snapshots), _side_path(out, run.architecture, "snapshots"))
            if args.dump_spectrum:
                for alg, res in run.results.items():
                    if res.spectrum is not None:
                        ex.write_csv(*ex.spectrum_rows(res), _side_path(out, run.architecture, alg, "spectrum"))

    text = ex.write_csv(header, rows, out)
    if out is None:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _run(args)
    except OSError as err:
        print(f"irssense: I/O error: {err}", file=sys.stderr)
        return EXIT_IO
    except ValueError as err:  # ConfigError, bad IRSSENSE_THREADS, estimator preconditions
        print(f"irssense: invalid input: {err}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
