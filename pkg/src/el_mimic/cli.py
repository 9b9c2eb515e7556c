"""CLI entrypoint and output rendering for el-mimic."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from dotenv import load_dotenv

from . import __version__

LOGGER = logging.getLogger("el_mimic")

EXIT_CONFIG = 1
EXIT_STAGE = 2
EXIT_INTERRUPTED = 130


def render_scores(scores: dict[str, Any], output_format: str) -> str:
    """Render per-metric match scores as a text table or JSON."""
    if output_format == "json":
        return json.dumps(scores, indent=2)
    lines = [f"{'metric':<10} {'mean':>8} {'min':>5} {'max':>5} {'P':>6} {'R':>6} {'F1':>6}"]
    for metric, score in scores.items():
        distances = score["distances"]
        mean = f"{sum(distances) / len(distances):8.3f}" if distances else f"{'-':>8}"
        low = f"{min(distances):5d}" if distances else f"{'-':>5}"
        high = f"{max(distances):5d}" if distances else f"{'-':>5}"
        lines.append(
            f"{metric:<10} {mean} {low} {high} {score['precision']:6.3f} "
            f"{score['recall']:6.3f} {score['f1']:6.3f}"
        )
    return "\n".join(lines)


def write_output(output_text: str, output_path: str | None) -> None:
    """Write rendered output to stdout or a file path."""
    if not output_path or output_path == "-":
        print(output_text)
        return
    path = Path(output_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(output_text + "\n", encoding="utf-8")


def _add_run_options(parser: argparse.ArgumentParser, out_help: str) -> None:
    parser.add_argument("--config", help="INI experiment config (defaults apply when omitted).")
    parser.add_argument("--seed", type=int, default=None, help="Override [run] seed.")
    parser.add_argument("--out", default=None, help=out_help)
    parser.add_argument("--threads", type=int, default=None, help="Override [run] threads.")


def build_parser() -> argparse.ArgumentParser:
    """Build and return the command-line parser for ``el-mimic``."""
    parser = argparse.ArgumentParser(
        prog="el-mimic",
        description="Teach LSTMs to mimic EL+ reasoning traces, then score what they learned.",
    )
    parser.add_argument("-V", "--version", action="store_true", help="Print package version.")
    parser.add_argument(
        "--no-dotenv",
        action="store_true",
        help="Do not load variables from a .env file.",
    )
    parser.add_argument(
        "--verbose",
        action="store_true",
        help="Print stage diagnostics to stderr while keeping stdout output unchanged.",
    )
    commands = parser.add_subparsers(dest="command")

    gen = commands.add_parser("generate", help="Write synthetic or sampled KB files.")
    _add_run_options(gen, "Directory for the KB files and manifest (default: kbs).")
    gen.add_argument("--count", type=int, default=None, help="Override [generate] count.")

    run = commands.add_parser("run", help="Dataset, cross-validation and corruption sweep.")
    _add_run_options(run, "Root under which run-<hash> is created (default: [run] out).")
    run.add_argument("--kbs", default=None, help="Existing KB directory (overrides [dataset]).")

    insp = commands.add_parser("inspect", help="Decode a model's support layer for one KB.")
    insp.add_argument("checkpoint", help="Checkpoint directory of a deep or piecewise model.")
    insp.add_argument("kb", help="KB file in the canonical format.")
    insp.add_argument("--step", type=int, default=1, help="Reasoning step (1-based).")

    ev = commands.add_parser("eval", help="Score predicted statements against answers.")
    ev.add_argument("predictions", help="File with one predicted statement per line.")
    ev.add_argument("answers", help="File with one correct statement per line.")
    ev.add_argument("--format", choices=["text", "json"], default="text", help="Output format.")
    ev.add_argument("--output", help="Write output to a file instead of stdout.")
    return parser


def _resolve_config(args: argparse.Namespace) -> Any:
    from .config import load_config, resolve

    return resolve(load_config(args.config), seed=args.seed, threads=args.threads)


def _cmd_generate(args: argparse.Namespace) -> int:
    from .config import ConfigError
    from .pipeline import generate_kbs, with_generate_overrides, write_kbs

    try:
        cfg = with_generate_overrides(_resolve_config(args), args.count)
    except (ConfigError, ValueError) as exc:
        LOGGER.error("ERROR: %s", exc)
        return EXIT_CONFIG
    out = Path(args.out or "kbs")
    try:
        manifest = write_kbs(generate_kbs(cfg), out, cfg.generate.mode)
    except Exception as exc:
        LOGGER.error("ERROR: stage 'generate' failed: %s: %s", type(exc).__name__, exc)
        return EXIT_STAGE
    print(f"wrote {manifest['count']} KB file(s) to {out}")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    from dataclasses import replace

    from .config import ConfigError
    from .pipeline import StageError, run_experiment

    try:
        cfg = _resolve_config(args)
        if args.out:
            cfg = replace(cfg, run=replace(cfg.run, out=args.out))
    except (ConfigError, ValueError) as exc:
        LOGGER.error("ERROR: %s", exc)
        return EXIT_CONFIG
    diagnostics = LOGGER.info if args.verbose else None
    try:
        summary = run_experiment(cfg, args.kbs, verbose=args.verbose, diagnostics=diagnostics)
    except StageError as exc:
        LOGGER.error("ERROR: %s", exc)
        return EXIT_STAGE
    print(summary.run_dir)
    for arch, path in summary.reports.items():
        print(f"{arch}: {path}")
    return 0


def _cmd_inspect(args: argparse.Namespace) -> int:
    from .pipeline import inspect

    try:
        view = inspect(args.checkpoint, args.kb, args.step)
    except (ValueError, OSError) as exc:
        LOGGER.error("ERROR: %s", exc)
        return EXIT_CONFIG
    print(view.render())
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    from dataclasses import asdict

    from .evaluation import read_statements, score_statements

    try:
        predictions = read_statements(args.predictions)
        answers = read_statements(args.answers)
    except (ValueError, OSError) as exc:
        LOGGER.error("ERROR: %s", exc)
        return EXIT_CONFIG
    scores = {
        metric.value: asdict(score)
        for metric, score in score_statements(predictions, answers).items()
    }
    write_output(render_scores(scores, args.format), args.output)
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "run": _cmd_run,
    "inspect": _cmd_inspect,
    "eval": _cmd_eval,
}


def main(argv: Sequence[str] | None = None) -> None:
    """CLI entrypoint with validation, orchestration, and error handling."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)

    if not args.no_dotenv:
        load_dotenv()

    if args.version:
        print(__version__)
        sys.exit(0)

    if not args.command:
        parser.error("a command is required: generate, run, inspect or eval")

    try:
        code = _COMMANDS[args.command](args)
    except KeyboardInterrupt:
        LOGGER.error("Interrupted by user.")
        sys.exit(EXIT_INTERRUPTED)
    except Exception as exc:
        LOGGER.error("ERROR: %s: %s", type(exc).__name__, exc)
        sys.exit(EXIT_STAGE)
    sys.exit(code)
