"""Command-line entry point: one subcommand per pipeline stage."""

import sys
from pathlib import Path
from typing import Dict, Optional

import click
import pandas as pd
from loguru import logger

from .analytics import compute_stats, lint_results
from .benchstats import emit_figure_data, fill_device_years, load_device_years, parse_bench_log, summarize
from .config import Config, load_config
from .corpus import (
    MANIFEST_NAME, AppMetadata, build_manifest, load_manifest, read_app_metadata, write_csv, write_json,
    write_manifest,
)
from .errors import KeyScanError
from .labels import classify_all, ingest_labels, load_category_table
from .pipeline import discover_apps, exit_code, prefilter_corpus, reach_corpus, run_batch
from .report import emit_lint, emit_report

LOG_FORMAT = "<green>{time:HH:mm:ss}</green> | <level>{level: <7}</level> | {message}"


def _configure_logging(level: str):
    logger.remove()
    logger.add(sys.stderr, level=level.upper(), format=LOG_FORMAT)


def _metadata(path: Optional[str]) -> Optional[Dict[str, AppMetadata]]:
    return read_app_metadata(path) if path else None


def _config(ctx: click.Context) -> Config:
    return ctx.obj["config"]


class KeyScanGroup(click.Group):
    """Maps any KeyScanError to exit code 1 with a logged message."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except KeyScanError as err:
            logger.error("{}: {}", type(err).__name__, err)
            ctx.exit(1)


@click.group(cls=KeyScanGroup)
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="KEYSCAN_* key=value file.")
@click.option("--log-level", default="INFO", show_default=True,
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
@click.option("--bfs-node-limit", type=int, default=None, help="Visited-node budget per reachability query.")
@click.option("--obfuscation-min-component", type=int, default=None, help="Component length marking a real package name.")
@click.option("--per-app-timeout-minutes", type=float, default=None, help="Per-app scan time limit.")
@click.option("--needle", "needle_set", multiple=True, help="Prefilter needle; repeat for several.")
@click.option("--signature-db", "signature_db_path", type=click.Path(dir_okay=False), default=None)
@click.option("--min-installs", "min_installs_filter", type=int, default=None, help="Drop apps below this install count.")
@click.option("--cha/--no-cha", "cha_enabled", default=None, help="Resolve virtual calls to subtype overrides.")
@click.option("--workers", type=int, default=None, help="Parallel app scans.")
@click.option("--top-n", type=int, default=None, help="Rows in the top package tables.")
@click.pass_context
def main(ctx, config_path, log_level, needle_set, **flags):
    """Static analysis of Android Keystore usage across an app corpus."""
    _configure_logging(log_level)
    ctx.ensure_object(dict)
    ctx.obj["config"] = load_config(config_path, needle_set=list(needle_set) or None, **flags)


@main.command()
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True, help="Prefilter JSON to write.")
@click.pass_context
def prefilter(ctx, corpus_dir, out_path):
    """Keyword prefilter over every app directory of CORPUS_DIR."""
    results = prefilter_corpus(corpus_dir, _config(ctx).needle_set)
    matched = sorted(app_id for app_id, res in results.items() if res.matched)
    write_json(out_path, {app_id: res.to_dict() for app_id, res in results.items()})
    logger.info("prefilter: {}/{} apps matched", len(matched), len(results))
    for app_id in matched:
        click.echo(app_id)


@main.command()
@click.argument("app_dirs", nargs=-1, required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True, help="Results directory.")
@click.option("--corpus", "as_corpus", is_flag=True, help="Treat each argument as a directory of apps.")
@click.option("--metadata", type=click.Path(exists=True, dir_okay=False), default=None, help="App metadata CSV.")
@click.pass_context
def scan(ctx, app_dirs, out_dir, as_corpus, metadata):
    """Scan apps into one result file each. Exits 2 when some apps time out or fail."""
    apps = [app for root in app_dirs for app in discover_apps(root)] if as_corpus else [Path(p) for p in app_dirs]
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    statuses = run_batch(apps, out_dir, _config(ctx), _metadata(metadata))
    done = sum(1 for s in statuses if not s.failed)
    logger.info("scan: {}/{} apps done", done, len(statuses))
    ctx.exit(exit_code(statuses))


@main.group()
def corpus():
    """Corpus-wide stages over a results directory."""


@corpus.command("classify-packages")
@click.argument("results_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--metadata", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--manifest", "manifest_path", type=click.Path(dir_okay=False), default=None,
              help=f"Defaults to RESULTS_DIR/{MANIFEST_NAME}.")
@click.option("--strict", is_flag=True, help="Fail on apps without developer metadata.")
@click.pass_context
def classify_packages(ctx, results_dir, metadata, manifest_path, strict):
    """Build the manifest and the package party index."""
    path = Path(manifest_path) if manifest_path else Path(results_dir) / MANIFEST_NAME
    manifest = build_manifest(results_dir, _config(ctx), _metadata(metadata), path.parent, strict)
    write_manifest(manifest, path)
    parties: Dict[str, int] = {}
    for entry in manifest.package_index.values():
        parties[str(entry.party)] = parties.get(str(entry.party), 0) + 1
    logger.info("{} apps, {} packages {}", len(manifest.apps), len(manifest.package_index), dict(sorted(parties.items())))


@corpus.command()
@click.argument("results_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--metadata", type=click.Path(exists=True, dir_okay=False), default=None)
@click.pass_context
def reach(ctx, results_dir, metadata):
    """Evaluate recorded call traces against the corpus party map."""
    reach_corpus(results_dir, _config(ctx), _metadata(metadata))


def _labels(path: Optional[str], categories: Optional[str]) -> Optional[Dict[str, str]]:
    if not path:
        return None
    table = load_category_table(categories)
    return classify_all(ingest_labels(path, table), table)


@corpus.command()
@click.argument("manifest_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--labels", "labels_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Data-safety labels JSONL.")
@click.option("--categories", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--format", "formats", type=click.Choice(["json", "csv"]), multiple=True, default=("json", "csv"))
@click.pass_context
def stats(ctx, manifest_path, out_dir, labels_path, categories, formats):
    """Compute corpus statistics into report.json and CSV tables."""
    manifest = load_manifest(manifest_path)
    report = compute_stats(manifest, _labels(labels_path, categories), top_n=_config(ctx).top_n)
    emit_report(report, out_dir, formats)
    for name, value in report.metrics.items():
        logger.info("{:<36} {:>6}/{:<6} {:6.2f}%", name, value.numerator, value.denominator, value.percent)


@main.group()
def labels():
    """Data-safety label ingestion and classification."""


@labels.command()
@click.argument("labels_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--categories", type=click.Path(exists=True, dir_okay=False), default=None)
def ingest(labels_path, out_path, categories):
    """Validate a labels JSONL export and write the normalized records."""
    records = ingest_labels(labels_path, load_category_table(categories))
    write_json(out_path, [r.to_dict() for r in sorted(records, key=lambda r: r.app_id)])
    logger.info("{} labels ingested", len(records))


@labels.command()
@click.argument("labels_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--categories", type=click.Path(exists=True, dir_okay=False), default=None)
def classify(labels_path, out_path, categories):
    """Write app_id,sensitivity for every label."""
    classes = _labels(labels_path, categories)
    df = pd.DataFrame(sorted(classes.items()), columns=["app_id", "sensitivity"])
    write_csv(out_path, df)
    logger.info("sensitivity: {}", df["sensitivity"].value_counts().sort_index().to_dict())


@main.command()
@click.argument("manifest_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--include-unreachable", is_flag=True, help="Also lint keys built in unreachable code.")
def lint(manifest_path, out_dir, include_unreachable):
    """Run the key-configuration lint rules over every app of the manifest."""
    findings = lint_results(load_manifest(manifest_path).load_results(), include_unreachable)
    emit_lint(findings, out_dir)
    logger.info("{} lint findings", len(findings))


@main.command()
@click.argument("log_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--baseline", type=click.Choice(["software", "tee", "strongbox"]), default="tee", show_default=True)
@click.option("--device-years", type=click.Path(exists=True, dir_okay=False), default=None)
def benchstats(log_path, out_dir, baseline, device_years):
    """Summarize a keystore benchmark log into figure data."""
    samples = fill_device_years(parse_bench_log(log_path), load_device_years(device_years))
    summaries = summarize(samples)
    emit_figure_data(summaries, out_dir, baseline)
    logger.info("{} samples in {} groups", len(samples), len(summaries))


if __name__ == "__main__":
    main()
