"""Command-line entry point: ``flakemend repair ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .llm.providers import (Provider, ProviderConfig, ProviderKind, RecordingProvider, ReplayProvider,
                            make_provider)
from .model import MAX_ITERATIONS
from .orchestrator import CampaignConfig, InputError, run_campaign
from .prompts.forge import DEFAULT_CHAR_BUDGET, DEFAULT_MAX_DIAGNOSTICS
from .runner.base import Runner
from .runner.maven import MavenRunner
from .runner.scripted import ScriptedRunner
from .stitcher import DEFAULT_PROBE_BUDGET

EXIT_OK, EXIT_UNFIXED, EXIT_CONFIG = 0, 1, 2
DEFAULT_PROVIDERS_FILE = "flakemend-providers.json"


class ConfigError(ValueError):
    pass


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flakemend", description="Repair flaky Java tests with an LLM in the loop.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser("repair", help="run a repair campaign over an input list")
    r.add_argument("--project", required=True, type=Path, help="project checkout (never modified)")
    r.add_argument("--input", required=True, type=Path,
                   help="CSV: project,sha,module,test,category,polluters")
    r.add_argument("--provider", required=True,
                   help="'replay', a provider JSON file, or a name from --providers-file")
    r.add_argument("--providers-file", type=Path, default=None,
                   help=f"named provider settings (default: ./{DEFAULT_PROVIDERS_FILE})")
    r.add_argument("--out", required=True, type=Path)
    r.add_argument("--max-iterations", type=_positive, default=MAX_ITERATIONS)
    r.add_argument("--identical-error-limit", type=_positive, default=3)
    r.add_argument("--nondex-rounds", type=_positive, default=5)
    r.add_argument("--jobs", type=_positive, default=1)
    r.add_argument("--seed", type=int, default=0, help="shaking seed, recorded in every report")
    mode = r.add_mutually_exclusive_group()
    mode.add_argument("--record", type=Path, metavar="FIXTURES", help="record provider responses to this file")
    mode.add_argument("--replay", type=Path, metavar="FIXTURES", help="answer prompts from recorded responses")
    r.add_argument("--keep-workdirs", action="store_true")
    r.add_argument("--prompt-budget", type=_positive, default=None, help="prompt size cap in characters")
    r.add_argument("--max-diagnostics", type=_positive, default=DEFAULT_MAX_DIAGNOSTICS)
    r.add_argument("--probe-budget", type=_positive, default=DEFAULT_PROBE_BUDGET)
    r.add_argument("--dependency-table", type=Path, default=None,
                   help="extra package-prefix to group:artifact:version table")
    r.add_argument("--script", type=Path, default=None,
                   help="use the scripted runner with this table instead of Maven")
    r.add_argument("--mvn", default="mvn", help="Maven executable")
    return parser


def resolve_provider_config(args: argparse.Namespace) -> ProviderConfig:
    if args.replay is not None:
        return ProviderConfig(ProviderKind.REPLAY, fixture_path=str(args.replay))
    if args.provider == "replay":
        raise ConfigError("--provider replay needs --replay <fixtures>")
    candidate = Path(args.provider)
    if candidate.suffix == ".json" and candidate.is_file():
        raw = json.loads(candidate.read_text(encoding="utf-8"))
    else:
        table_path = args.providers_file or Path(DEFAULT_PROVIDERS_FILE)
        if not table_path.is_file():
            raise ConfigError(f"unknown provider {args.provider!r}: no providers file at {table_path}")
        table = json.loads(table_path.read_text(encoding="utf-8"))
        if args.provider not in table:
            raise ConfigError(f"provider {args.provider!r} is not defined in {table_path}")
        raw = table[args.provider]
    try:
        return ProviderConfig.from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid provider settings: {exc}") from exc


def make_runtime(args: argparse.Namespace, provider_config: ProviderConfig) -> tuple[Runner, Provider]:
    runner: Runner = ScriptedRunner.load(args.script) if args.script else MavenRunner(mvn=args.mvn)
    if provider_config.kind is ProviderKind.REPLAY:
        provider: Provider = ReplayProvider(provider_config.fixture_path)
    else:
        provider = make_provider(provider_config)
        if args.record is not None:
            provider = RecordingProvider(provider, args.record)
    return runner, provider


def repair(args: argparse.Namespace) -> int:
    try:
        provider_config = resolve_provider_config(args)
        if not args.project.is_dir():
            raise ConfigError(f"project directory {args.project} does not exist")
        if not args.input.is_file():
            raise ConfigError(f"input list {args.input} does not exist")
        config = CampaignConfig(
            project_dir=args.project, input_path=args.input, provider=provider_config, out_dir=args.out,
            max_iterations=args.max_iterations, identical_error_limit=args.identical_error_limit,
            nondex_rounds=args.nondex_rounds, jobs=args.jobs, seed=args.seed, keep_workdirs=args.keep_workdirs,
            prompt_budget=args.prompt_budget or provider_config.char_budget or DEFAULT_CHAR_BUDGET,
            max_diagnostics=args.max_diagnostics, probe_budget=args.probe_budget,
            dependency_table=args.dependency_table,
        )
        runner, provider = make_runtime(args, provider_config)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"flakemend: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = run_campaign(config, runner, provider)
    except InputError as exc:
        print(f"flakemend: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    finally:
        provider.close()
    for row in report.rows:
        print(f"{row.status:28} {row.test}" + (f"  ({row.error})" if row.error else ""))
    print(f"summary written to {config.out_dir / 'campaign-summary.json'}")
    return report.exit_code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "repair":
        return repair(args)
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
