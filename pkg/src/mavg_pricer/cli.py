"""Command-line entry point: ``mavg-pricer <experiment> [options] [--key=value ...]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, build_config, merge_config
from .experiments import EXPERIMENTS, write_csv

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2


def _scale_of(file, scale) -> str:
    if scale:
        return scale
    if file is not None and Path(file).exists():
        try:
            return json.loads(Path(file).read_text()).get("scale", "desk")
        except (json.JSONDecodeError, AttributeError):
            return "desk"
    return "desk"


def resolve(name: str, flags=(), *, file=None, scale=None, seed=None, out=None):
    """Resolved :class:`ExperimentConfig` for one experiment; raises ConfigError."""
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    exp = EXPERIMENTS[name]
    scale = _scale_of(file, scale)
    raw = merge_config(exp.preset(scale), file, list(flags))
    raw["scale"] = scale
    if seed is not None:
        raw["seeds"] = [seed + k for k in range(len(raw["seeds"]))]
    if out is not None:
        raw["out"] = str(out)
    return build_config(raw, pricing=exp.pricing)


def run_experiment(name: str, overrides=None, *, file=None, scale=None, seed=None, out=None) -> int:
    """Run one experiment and write its CSV files; returns the process exit code.

    ``overrides`` is either a nested config fragment (dict) or a list of
    ``--key=value`` flags.
    """
    if isinstance(overrides, dict):
        flags = _flatten(overrides)
    else:
        flags = list(overrides or [])
    try:
        cfg = resolve(name, flags, file=file, scale=scale, seed=seed, out=out)
        output = EXPERIMENTS[name].run(cfg)
    except ConfigError as exc:
        print(f"mavg-pricer: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    header = [f"# experiment: {name}"] + cfg.header_lines()
    target = cfg.out / f"{name}.csv"
    write_csv(target, output.columns, output.rows, header, output.footer)
    for label, (cols, rows) in output.extra_files.items():
        write_csv(cfg.out / f"{name}-{label}.csv", cols, rows, header)
    logger.info("wrote %s", target)
    return EXIT_OK


def _flatten(fragment: dict, prefix: str = "") -> list[str]:
    flags = []
    for key, value in fragment.items():
        path = f"{prefix}{key}"
        if isinstance(value, dict):
            flags.extend(_flatten(value, path + "."))
        else:
            flags.append(f"--{path}={json.dumps(value)}")
    return flags


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mavg-pricer",
        description="Bermudan moving-average option pricing experiments.",
        epilog="Any other --key=value (dotted paths such as --grid.N_delta=5, or bare leaf "
        "names such as --N_delta=5) overrides the configuration.",
    )
    parser.add_argument("experiment", choices=sorted(EXPERIMENTS), help="experiment to run")
    parser.add_argument("--config", type=Path, help="JSON configuration file")
    parser.add_argument("--scale", choices=["desk", "paper"], help="preset size (default desk)")
    parser.add_argument("--seed", type=int, help="first seed; k valuations use seeds S..S+k-1")
    parser.add_argument("--out", type=Path, help="output directory (default ./results)")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args, rest = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    stray = [r for r in rest if not r.startswith("--") or "=" not in r]
    if stray:
        parser.print_usage(sys.stderr)
        print(f"mavg-pricer: expected --key=value, got {' '.join(stray)}", file=sys.stderr)
        return EXIT_CONFIG
    return run_experiment(args.experiment, rest, file=args.config, scale=args.scale, seed=args.seed, out=args.out)


if __name__ == "__main__":
    sys.exit(main())
