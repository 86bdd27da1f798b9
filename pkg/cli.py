"""Command-line entry point: generate instances, run the dynamics, verify states, bench."""

from __future__ import annotations

import asyncio
import logging
import sys
from pathlib import Path as FilePath
from typing import Dict, List, Optional, Tuple

import click

from analysis import AuditReport, audit_run
from config import RunConfig
from dynamics import run
from game import State, is_nash
from instance import Instance, gen_broadcast, gen_poa_chain, gen_random_quasi_bipartite
from services.instance_format import load_instance, parse_state, save_instance
from services.report_writer import failure_row, format_csv, report_row, write_artifacts
from utils.errors import (
    AuditFailure,
    CapExceededError,
    GuardExceededError,
    InstanceFormatError,
    InstanceValidationError,
    InvalidPathError,
    LemmaViolation,
    McastError,
    ParameterError,
)
from utils.log_setup import configure_logging
from utils.rational import format_rational, to_fraction

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT_ERROR = 2
EXIT_GUARD_EXCEEDED = 3

INPUT_ERRORS = (
    InstanceFormatError,
    InstanceValidationError,
    InvalidPathError,
    CapExceededError,
    ParameterError,
    OSError,
)


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, GuardExceededError):
        return EXIT_GUARD_EXCEEDED
    if isinstance(exc, (LemmaViolation, AuditFailure)):
        return EXIT_CHECK_FAILED
    if isinstance(exc, INPUT_ERRORS):
        return EXIT_INPUT_ERROR
    return EXIT_CHECK_FAILED


def _fail(exc: BaseException) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(exit_code_for(exc))


def _summary(instance: Instance) -> str:
    return (
        f"{instance.vertex_count} vertices, {len(instance.terminals)} terminals, "
        f"{len(instance.edges)} edges, root {instance.root}"
    )


def _build_config(**options) -> RunConfig:
    caps = options.pop("oracle_caps", None)
    return RunConfig.from_env(**options).with_caps(caps)


def run_options(func):
    """Flags shared by ``run`` and ``bench``."""
    options = [
        click.option("--seed", type=int, default=None, help="Seed recorded with the report."),
        click.option("--guard", type=int, default=None, help="Maximum number of applied moves."),
        click.option("--absorb-order", type=click.Choice(["from-v", "from-r"]), default=None),
        click.option("--format", "report_format", type=click.Choice(["csv", "json"]), default=None),
        click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=FilePath), default=None),
        click.option("--oracle-caps", default=None, help="key=value pairs: steiner, edges, profiles."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


@click.group()
@click.option("--log", "verbosity", type=click.Choice(["quiet", "moves", "assertions", "full"]), default=None,
              help="Overrides MCAST_POS_LOG.")
def main(verbosity: Optional[str]) -> None:
    """Fair cost-sharing multicast games: dynamics from the optimal tree and its audit."""
    configure_logging(verbosity)


@main.group()
def generate() -> None:
    """Write a generated instance file."""


def _write_generated(instance: Instance, out: FilePath) -> None:
    save_instance(instance, out)
    click.echo(f"wrote {out}: {_summary(instance)}")


@generate.command("random-qb")
@click.option("--terminals", type=int, default=6, show_default=True)
@click.option("--nonterminals", type=int, default=4, show_default=True)
@click.option("--prob", type=float, default=0.4, show_default=True)
@click.option("--cost-min", default="1", show_default=True)
@click.option("--cost-max", default="20", show_default=True)
@click.option("--cost-classes", type=int, default=0, show_default=True,
              help="Draw log-uniform costs over this many edge classes instead.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=FilePath), required=True)
def generate_random(terminals: int, nonterminals: int, prob: float, cost_min: str, cost_max: str,
                    cost_classes: int, seed: int, out: FilePath) -> None:
    try:
        instance = gen_random_quasi_bipartite(
            terminals, nonterminals, prob, (to_fraction(cost_min), to_fraction(cost_max)), seed, cost_classes
        )
        _write_generated(instance, out)
    except (McastError, OSError, ValueError) as exc:
        _fail(exc if isinstance(exc, McastError) else ParameterError(str(exc)))


@generate.command("poa-chain")
@click.option("--n", "n", type=int, default=4, show_default=True)
@click.option("--eps", default="1/2", show_default=True)
@click.option("--delta", default="1/100", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=FilePath), required=True)
def generate_poa_chain(n: int, eps: str, delta: str, out: FilePath) -> None:
    try:
        _write_generated(gen_poa_chain(n, to_fraction(eps), to_fraction(delta)), out)
    except (McastError, OSError, ValueError) as exc:
        _fail(exc if isinstance(exc, McastError) else ParameterError(str(exc)))


@generate.command("broadcast")
@click.option("--k", "k", type=int, default=5, show_default=True)
@click.option("--prob", type=float, default=0.4, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=FilePath), required=True)
def generate_broadcast(k: int, prob: float, seed: int, out: FilePath) -> None:
    try:
        _write_generated(gen_broadcast(k, prob, seed=seed), out)
    except (McastError, OSError) as exc:
        _fail(exc)


def _run_one(path: FilePath, config: RunConfig) -> AuditReport:
    instance = load_instance(path)
    result = run(instance, config)
    report = audit_run(result, name=path.stem, seed=config.seed)
    write_artifacts(config.out_dir, path.stem, report, result.trace, config.report_format)
    return report


@main.command("run")
@click.argument("instance_file", type=click.Path(exists=True, dir_okay=False, path_type=FilePath))
@run_options
def run_command(instance_file: FilePath, **options) -> None:
    """Run the dynamics from T* and audit the final equilibrium."""
    try:
        config = _build_config(**options)
        report = _run_one(instance_file, config)
    except (McastError, OSError) as exc:
        logger.error("Run of %s failed: %s", instance_file, exc)
        _fail(exc)
    click.echo(
        f"{instance_file.stem}: pos_ratio={report.pos_ratio} moves={report.moves} "
        f"critical={report.critical_moves} audit_pass={str(report.audit_pass).lower()}"
    )


@main.command("verify")
@click.argument("instance_file", type=click.Path(exists=True, dir_okay=False, path_type=FilePath))
@click.argument("state_file", type=click.Path(exists=True, dir_okay=False, path_type=FilePath))
def verify_command(instance_file: FilePath, state_file: FilePath) -> None:
    """Check whether a routing state is a Nash equilibrium."""
    try:
        instance = load_instance(instance_file)
        state = State.from_paths(instance, parse_state(state_file.read_text(encoding="utf-8"), instance))
    except (McastError, OSError) as exc:
        _fail(exc)
    verdict = is_nash(state)
    if verdict:
        click.echo(f"nash cost={format_rational(state.cost)}")
        return
    click.echo(
        f"not nash: terminal {verdict.terminal} pays {format_rational(verdict.current_cost)}, "
        f"deviation {' '.join(map(str, verdict.path.edges))} costs {format_rational(verdict.deviation_cost)}"
    )
    sys.exit(EXIT_CHECK_FAILED)


def _bench_one(path: FilePath, config: RunConfig) -> Dict[str, object]:
    try:
        return report_row(_run_one(path, config))
    except Exception as exc:
        # every instance gets a row, whatever it raised
        logger.exception("Bench instance %s failed", path.name)
        check = getattr(exc, "check", type(exc).__name__)
        return failure_row(config.seed, check)


async def _bench(paths: List[FilePath], config: RunConfig) -> List[Tuple[str, Dict[str, object]]]:
    rows = await asyncio.gather(*(asyncio.to_thread(_bench_one, p, config) for p in paths))
    return sorted(zip((p.name for p in paths), rows), key=lambda item: item[0])


@main.command("bench")
@click.argument("instance_dir", type=click.Path(exists=True, file_okay=False, path_type=FilePath))
@click.option("--pattern", default="*.inst", show_default=True, help="Glob for instance files.")
@run_options
def bench_command(instance_dir: FilePath, pattern: str, **options) -> None:
    """Run and audit every instance in a directory; one CSV row each."""
    try:
        config = _build_config(**options)
    except ParameterError as exc:
        _fail(exc)
    paths = sorted(instance_dir.glob(pattern))
    if not paths:
        _fail(ParameterError(f"no instances matching {pattern!r} in {instance_dir}"))

    results = asyncio.run(_bench(paths, config))
    rows = [row for _, row in results]
    text = format_csv(rows)
    config.out_dir.mkdir(parents=True, exist_ok=True)
    (config.out_dir / "bench.csv").write_text(text, encoding="utf-8")
    click.echo(text, nl=False)
    failed = [name for name, row in results if row["audit_pass"] != "true"]
    if failed:
        click.echo(f"{len(failed)} of {len(rows)} instances failed: {', '.join(map(str, failed))}", err=True)
        sys.exit(EXIT_CHECK_FAILED)


if __name__ == "__main__":
    main()
