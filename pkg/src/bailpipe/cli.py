"""Command-line front door: one subcommand per stage plus `all` and the
fixture generator.

Exit codes: 0 on success, 1 for usage or configuration problems, 2 when a
stage fails mid-run.  Options can also be supplied through BAILPIPE_*
environment variables.
"""

from __future__ import annotations

from pathlib import Path

import click

from . import pipeline
from .config import load_pipeline_config
from .errors import ConfigError, PipelineError
from .fixtures import generate_fixtures

_CONTEXT = {"auto_envvar_prefix": "BAILPIPE", "help_option_names": ["-h", "--help"]}


def _common(fn):
    fn = click.option(
        "--workers", type=int, default=None, help="Worker processes for per-doc stages."
    )(fn)
    fn = click.option("--seed", type=int, default=None, help="Master random seed.")(fn)
    fn = click.option(
        "--config",
        "config_path",
        type=click.Path(path_type=Path),
        default=None,
        help="Run-config YAML; packaged defaults when omitted.",
    )(fn)
    fn = click.option(
        "--out",
        "out_dir",
        type=click.Path(path_type=Path),
        required=True,
        help="Workspace directory holding all stage artifacts.",
    )(fn)
    return fn


def _cfg(config_path, seed, workers):
    overrides = {}
    if seed is not None:
        overrides["seed"] = seed
    if workers is not None:
        overrides["workers"] = workers
    return load_pipeline_config(config_path, **overrides)


@click.group(context_settings=_CONTEXT)
def cli():
    """Batch pipeline for Hindi bail orders: clean, anonymize, segment,
    extract, summarize, split, train and evaluate."""


def _input_option(fn):
    return click.option(
        "--input",
        "input_path",
        type=click.Path(path_type=Path),
        default=None,
        help="Override the stage's default input artifact.",
    )(fn)


@cli.command()
@click.option(
    "--input",
    "input_path",
    type=click.Path(path_type=Path),
    required=True,
    help="Raw corpus: JSONL records or a directory of *.txt files.",
)
@_common
def clean(input_path, out_dir, config_path, seed, workers):
    """Filter and normalize the raw corpus."""
    manifest = pipeline.stage_clean(input_path, out_dir, _cfg(config_path, seed, workers))
    click.echo(pipeline.workspace_paths(out_dir)["kept"])
    click.echo(f"kept {manifest['docs_out']} of {manifest['docs_in']} documents")


@cli.command()
@_input_option
@_common
def anonymize(input_path, out_dir, config_path, seed, workers):
    """Replace phone numbers and gazetteer terms."""
    pipeline.stage_anonymize(out_dir, _cfg(config_path, seed, workers), input_path)
    click.echo(pipeline.workspace_paths(out_dir)["anonymized"])


@cli.command()
@_input_option
@_common
def segment(input_path, out_dir, config_path, seed, workers):
    """Split documents into header, facts, judge summary and result."""
    manifest = pipeline.stage_segment(
        out_dir, _cfg(config_path, seed, workers), input_path=input_path
    )
    click.echo(pipeline.workspace_paths(out_dir)["segmented"])
    click.echo(f"segmented {manifest['docs_out']} of {manifest['docs_in']} documents")


@cli.command()
@_input_option
@_common
def extract(input_path, out_dir, config_path, seed, workers):
    """Extract decisions and bail amounts from result segments."""
    pipeline.stage_extract(
        out_dir, _cfg(config_path, seed, workers), input_path=input_path
    )
    click.echo(pipeline.workspace_paths(out_dir)["extracted"])


@cli.command()
@_input_option
@_common
def lexstats(input_path, out_dir, config_path, seed, workers):
    """District-level token concentration tables."""
    pipeline.stage_lexstats(out_dir, _cfg(config_path, seed, workers), input_path)
    click.echo(pipeline.workspace_paths(out_dir)["regional"])


@cli.command()
@_input_option
@_common
def split(input_path, out_dir, config_path, seed, workers):
    """Partition documents into train/val/test."""
    pipeline.stage_split(out_dir, _cfg(config_path, seed, workers), input_path)
    click.echo(pipeline.workspace_paths(out_dir)["splits"])


@cli.command()
@_input_option
@_common
def summarize(input_path, out_dir, config_path, seed, workers):
    """Salience labels plus TF-IDF and TextRank rankings."""
    pipeline.stage_summarize(out_dir, _cfg(config_path, seed, workers), input_path)
    click.echo(pipeline.workspace_paths(out_dir)["summaries"])


@cli.command()
@_input_option
@_common
def train(input_path, out_dir, config_path, seed, workers):
    """Train the multi-task bail model."""
    pipeline.stage_train(out_dir, _cfg(config_path, seed, workers), input_path)
    click.echo(pipeline.workspace_paths(out_dir)["model"])


@cli.command()
@_input_option
@_common
def evaluate(input_path, out_dir, config_path, seed, workers):
    """Score the test split and write the metrics file."""
    pipeline.stage_evaluate(out_dir, _cfg(config_path, seed, workers), input_path)
    click.echo(pipeline.workspace_paths(out_dir)["metrics"])


@cli.command()
@_common
def report(out_dir, config_path, seed, workers):
    """Write a plain-text run summary."""
    pipeline.stage_report(out_dir, _cfg(config_path, seed, workers))
    click.echo(pipeline.workspace_paths(out_dir)["report"])


@cli.command(name="all")
@click.option(
    "--input",
    "input_path",
    type=click.Path(path_type=Path),
    required=True,
    help="Raw corpus: JSONL records or a directory of *.txt files.",
)
@_common
def run_all(input_path, out_dir, config_path, seed, workers):
    """Run every stage in order."""
    pipeline.run_all(input_path, out_dir, _cfg(config_path, seed, workers))
    click.echo(pipeline.workspace_paths(out_dir)["metrics"])


@cli.command()
@click.option("--n", type=int, default=500, help="Number of synthetic documents.")
@click.option("--noise", type=float, default=0.0, help="Token perturbation level.")
@click.option("--seed", type=int, default=2021)
@click.option(
    "--out",
    "out_dir",
    type=click.Path(path_type=Path),
    required=True,
    help="Directory for corpus.jsonl, truth.json and meta.json.",
)
def fixtures(n, noise, seed, out_dir):
    """Generate a synthetic corpus with a ground-truth sidecar."""
    try:
        corpus = generate_fixtures(n, seed=seed, noise_level=noise)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    click.echo(corpus.write(out_dir))


def main() -> int:
    try:
        cli.main(standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except PipelineError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
