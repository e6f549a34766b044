"""Command-line entry point.

Subcommands: fit, align, transfer, featurize, tag-train, tag-eval, project.
Options can also come from a ``key = value`` config file (``--config``);
explicit flags override the file, the file overrides built-in defaults.
Thread count comes from ``--threads`` or the ``NESPHERE_THREADS`` environment
variable and is pinned before any numeric library loads, so runs with thread
count 1 are byte-reproducible.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from typing import Any, Callable

from .errors import FormatError, NesphereError, UsageError


@dataclass
class Opt:
    """One CLI option: how to parse it and its effective default."""

    flag: str
    type: Callable[[str], Any] | None = str  # None marks a boolean switch
    default: Any = None
    required: bool = False
    choices: tuple | None = None
    repeat: bool = False
    help: str = ""

    @property
    def dest(self) -> str:
        return self.flag.lstrip("-").replace("-", "_")


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_COMMON = [
    Opt("--out-dir", str, ".", help="directory for reports and figures"),
    Opt("--config", str, None, help="key = value config file"),
    Opt("--seed", int, 0, help="seed for every random choice"),
    Opt("--threads", int, None, help="numeric thread count (default: NESPHERE_THREADS)"),
    Opt("--figures", None, True, help="render figures next to the reports"),
    Opt("--lowercase-fallback", None, False,
        help="retry lookups with the lowercased token"),
]

_OPTIONS: dict[str, list[Opt]] = {
    "fit": [
        Opt("--embeddings", str, required=True, help="embedding text file"),
        Opt("--dictionary", str, required=True, help="entity dictionary TSV"),
        Opt("--types", str, "Per,Loc,Org", help="comma-separated sphere types"),
        Opt("--center-method", str, "mean", choices=("mean", "median")),
        Opt("--limit", int, None, help="max vocabulary entries to load"),
    ],
    "align": [
        Opt("--source-embeddings", str, required=True),
        Opt("--target-embeddings", str, required=True),
        Opt("--mode", str, required=True, choices=("adversarial", "procrustes")),
        Opt("--train-lexicon", str, None, help="pairs for procrustes mode"),
        Opt("--eval-lexicon", str, None, help="pairs for accuracy reporting"),
        Opt("--output", str, None, help="alignment map path"),
        Opt("--source-tag", str, ""),
        Opt("--target-tag", str, ""),
        Opt("--steps", int, 20000),
        Opt("--clip-value", float, 0.01),
        Opt("--learning-rate", float, 1e-4),
        Opt("--critic-learning-rate", float, None),
        Opt("--batch-size", int, 128),
        Opt("--critic-steps", int, 5),
        Opt("--hidden-size", int, 500),
        Opt("--normalize-inputs", None, False),
        Opt("--orthogonality-strength", float, 0.0),
    ],
    "transfer": [
        Opt("--map", str, required=True, help="alignment map JSON"),
        Opt("--sphere", str, required=True, help="source hypersphere JSON"),
        Opt("--source-embeddings", str, required=True),
        Opt("--target-embeddings", str, required=True),
        Opt("--target-dictionary", str, required=True),
        Opt("--sample-limit", int, 1000,
            help="source vectors for radius scaling (0 = all)"),
    ],
    "featurize": [
        Opt("--embeddings", str, required=True),
        Opt("--corpus", str, required=True, help="tagged corpus file"),
        Opt("--sphere", str, required=True, repeat=True,
            help="hypersphere JSON (repeatable)"),
        Opt("--output", str, None, help="feature table TSV path"),
    ],
    "tag-train": [
        Opt("--corpus", str, required=True),
        Opt("--embeddings", str, required=True),
        Opt("--features", str, None, help="hypersphere feature table TSV"),
        Opt("--epochs", int, 5),
        Opt("--learning-rate", float, 0.1),
        Opt("--l2-strength", float, 0.0),
        Opt("--no-shuffle", None, False),
        Opt("--no-embedding-block", None, False),
        Opt("--no-lexical-block", None, False),
        Opt("--output", str, None, help="model JSON path"),
    ],
    "tag-eval": [
        Opt("--corpus", str, required=True),
        Opt("--embeddings", str, required=True),
        Opt("--model", str, required=True),
        Opt("--baseline-model", str, None,
            help="second model for the comparison report"),
        Opt("--features", str, None),
    ],
    "project": [
        Opt("--embeddings", str, required=True),
        Opt("--dictionary", str, None),
        Opt("--vocab-sample", int, 0, help="also project the first N vocab tokens"),
        Opt("--dim", int, 2, choices=(2, 3)),
    ],
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nesphere",
        description="Named-entity hyperspheres: fit, align, transfer, tag.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command, options in _OPTIONS.items():
        sub = subparsers.add_parser(command)
        for opt in _COMMON + options:
            if opt.type is None:
                group = sub.add_mutually_exclusive_group()
                group.add_argument(
                    opt.flag, dest=opt.dest, action="store_const", const=True,
                    default=None, help=opt.help,
                )
                if not opt.flag.startswith("--no-"):
                    group.add_argument(
                        f"--no-{opt.flag[2:]}", dest=opt.dest,
                        action="store_const", const=False, help=argparse.SUPPRESS,
                    )
            elif opt.repeat:
                sub.add_argument(
                    opt.flag, dest=opt.dest, type=opt.type, action="append",
                    default=None, help=opt.help,
                )
            else:
                sub.add_argument(
                    opt.flag, dest=opt.dest, type=opt.type, default=None,
                    choices=opt.choices, help=opt.help,
                )
    return parser


def load_config_file(path: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment, blanks are skipped."""
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _all_known_dests() -> set[str]:
    dests = {opt.dest for opt in _COMMON}
    for options in _OPTIONS.values():
        dests.update(opt.dest for opt in options)
    return dests


def resolve_options(args: argparse.Namespace) -> argparse.Namespace:
    """Merge defaults < config file < explicit flags into final values."""
    options = _COMMON + _OPTIONS[args.command]
    config: dict[str, str] = {}
    if args.config:
        config = load_config_file(args.config)
        known = _all_known_dests()
        for key in config:
            if key not in known:
                raise UsageError(f"unknown config key {key!r}")
    active = {opt.dest: opt for opt in options}
    for dest, opt in active.items():
        value = getattr(args, dest, None)
        if value is None and dest in config:
            converter = _parse_bool if opt.type is None else opt.type
            if opt.repeat:
                value = [opt.type(v.strip()) for v in config[dest].split(",")]
            else:
                value = converter(config[dest])
            if opt.choices and value not in opt.choices:
                raise UsageError(
                    f"config {dest} = {value!r} invalid; choose from {opt.choices}"
                )
        if value is None:
            value = opt.default
        setattr(args, dest, value)
    for dest, opt in active.items():
        if opt.required and getattr(args, dest) is None:
            raise UsageError(f"{opt.flag} is required for '{args.command}'")
    return args


def _pin_thread_env(threads: int) -> None:
    for var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
        "VECLIB_MAXIMUM_THREADS",
    ):
        os.environ[var] = str(threads)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(sys.argv[1:] if argv is None else argv)
    try:
        args = resolve_options(args)
        threads = args.threads
        if threads is None and os.environ.get("NESPHERE_THREADS"):
            threads = int(os.environ["NESPHERE_THREADS"])
        if threads is not None:
            if threads <= 0:
                raise UsageError(f"thread count must be positive, got {threads}")
            _pin_thread_env(threads)

        # Heavy imports happen only after the thread environment is pinned.
        from . import commands

        handlers = {
            "fit": commands.cmd_fit,
            "align": commands.cmd_align,
            "transfer": commands.cmd_transfer,
            "featurize": commands.cmd_featurize,
            "tag-train": commands.cmd_tag_train,
            "tag-eval": commands.cmd_tag_eval,
            "project": commands.cmd_project,
        }
        return handlers[args.command](args)
    except FileNotFoundError as exc:
        name = exc.filename if exc.filename else exc
        print(f"error: file not found: {name}", file=sys.stderr)
        return 1
    except NesphereError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
