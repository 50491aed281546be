"""Operator CLI: wgd harvest | clean | aggregate | serve.

Exit codes: 0 success, 1 configuration or input error, 2 transient
endpoint failure persisted through retries (harvest is resumable from its
checkpoint in that case).
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from . import aggregator, cleaner, snapshot
from .client import (
    EndpointClient,
    EndpointKind,
    RetriesExhausted,
    RetryPolicy,
    endpoint_from_env,
)
from .harvester import (
    CheckpointCorrupt,
    HarvestClients,
    enumerate_subclasses,
    run_harvest,
)
from .records import RecordError, read_records_csv, write_records_csv

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RETRIES_EXHAUSTED = 2


def _fail(message: str, code: int = EXIT_CONFIG) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress details.")
def main(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command()
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path(dir_okay=False))
@click.option("--page-size", type=int, default=None, help="Rows per page (default: endpoint row limit).")
@click.option("--dbpedia-endpoint", default=None, help="Override WGD_DBPEDIA_ENDPOINT.")
@click.option("--wikidata-endpoint", default=None, help="Override WGD_WIKIDATA_ENDPOINT.")
@click.option("--wikipedia-api", default=None, help="Override WGD_WIKIPEDIA_API.")
@click.option("--row-limit", type=int, default=10_000, show_default=True)
@click.option("--sort-cap", type=int, default=40_000, show_default=True)
@click.option("--min-interval-ms", type=int, default=0, show_default=True,
              help="Minimum spacing between requests to one endpoint.")
@click.option("--max-attempts", type=int, default=5, show_default=True,
              help="Attempts per request before giving up.")
@click.option("--base-backoff-ms", type=int, default=1000, show_default=True,
              help="First retry wait; doubles per attempt.")
def harvest(
    out_dir: str,
    checkpoint_path: str,
    page_size: int | None,
    dbpedia_endpoint: str | None,
    wikidata_endpoint: str | None,
    wikipedia_api: str | None,
    row_limit: int,
    sort_cap: int,
    min_interval_ms: int,
    max_attempts: int,
    base_backoff_ms: int,
) -> None:
    """Harvest raw per-subclass CSVs (resumable via the checkpoint)."""
    import os

    required = [
        ("--dbpedia-endpoint", "WGD_DBPEDIA_ENDPOINT", dbpedia_endpoint),
        ("--wikidata-endpoint", "WGD_WIKIDATA_ENDPOINT", wikidata_endpoint),
        ("--wikipedia-api", "WGD_WIKIPEDIA_API", wikipedia_api),
    ]
    for flag, variable, value in required:
        if not value and not os.environ.get(variable):
            _fail(f"no endpoint configured: set {variable} or pass {flag} "
                  f"(see wgd harvest --help)")
    try:
        dbpedia = endpoint_from_env(
            EndpointKind.DBPEDIA_LIKE,
            url=dbpedia_endpoint,
            row_limit=row_limit,
            sort_cap=sort_cap,
            min_request_interval_ms=min_interval_ms,
        )
        wikidata = endpoint_from_env(
            EndpointKind.WIKIDATA_LIKE,
            url=wikidata_endpoint,
            min_request_interval_ms=min_interval_ms,
        )
        wikipedia = endpoint_from_env(
            EndpointKind.WIKI_REST,
            url=wikipedia_api,
            min_request_interval_ms=min_interval_ms,
        )
    except ValueError as exc:
        _fail(str(exc))
    try:
        retry = RetryPolicy(max_attempts=max_attempts, base_backoff_ms=base_backoff_ms)
    except ValueError as exc:
        _fail(str(exc))
    clients = HarvestClients(
        dbpedia=EndpointClient(dbpedia, retry=retry),
        wikidata=EndpointClient(wikidata, retry=retry),
        wikipedia=EndpointClient(wikipedia, retry=retry),
    )
    try:
        catalog = enumerate_subclasses(clients.dbpedia)
        click.echo(f"harvesting {len(catalog.subclasses)} subclasses", err=True)
        run_harvest(clients, catalog, checkpoint_path, out_dir, page_size=page_size)
    except RetriesExhausted as exc:
        click.echo(f"transient failure persisted: {exc}", err=True)
        click.echo("checkpoint kept; re-run the same command to resume", err=True)
        sys.exit(EXIT_RETRIES_EXHAUSTED)
    except CheckpointCorrupt as exc:
        _fail(f"checkpoint unusable: {exc}")
    except ValueError as exc:
        _fail(str(exc))
    finally:
        for client in (clients.dbpedia, clients.wikidata, clients.wikipedia):
            client.close()
    click.echo(f"harvest complete: CSVs in {out_dir}", err=True)


def _collect_input_files(inputs: tuple[str, ...]) -> list[Path]:
    files: list[Path] = []
    for item in inputs:
        path = Path(item)
        if path.is_dir():
            files.extend(sorted(path.glob("*.csv")))
        elif path.is_file():
            files.append(path)
        else:
            _fail(f"input not found: {path}")
    if not files:
        _fail("no input CSV files")
    return files


@main.command()
@click.option("--input", "inputs", multiple=True, required=True,
              type=click.Path(), help="Raw CSV file or directory of CSVs (repeatable).")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--report", "report_path", required=True, type=click.Path(dir_okay=False))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True, dir_okay=False),
              help="key = value file: upper_limit, z_threshold, fixed_cutoff, current_year, resolver.")
@click.option("--upper-limit", type=int, default=None)
@click.option("--z-threshold", type=float, default=None)
@click.option("--fixed-cutoff", type=int, default=None)
@click.option("--current-year", type=int, default=None)
@click.option("--resolver", "resolver_mode", type=click.Choice(["live", "fixture", "off"]),
              default=None, help="Cross-check source (default off).")
@click.option("--resolver-file", default=None, type=click.Path(exists=True, dir_okay=False),
              help="JSON table for --resolver fixture.")
def clean(
    inputs: tuple[str, ...],
    out_path: str,
    report_path: str,
    config_path: str | None,
    upper_limit: int | None,
    z_threshold: float | None,
    fixed_cutoff: int | None,
    current_year: int | None,
    resolver_mode: str | None,
    resolver_file: str | None,
) -> None:
    """Clean raw CSVs into one clean CSV plus a JSON cleaning report."""
    import dataclasses

    files = _collect_input_files(inputs)
    config = cleaner.CleaningConfig()
    file_resolver_mode = None
    if config_path:
        try:
            config = cleaner.CleaningConfig.from_file(config_path)
            for line in Path(config_path).read_text(encoding="utf-8").splitlines():
                body = line.split("#", 1)[0]
                if body.strip().startswith("resolver"):
                    file_resolver_mode = body.partition("=")[2].strip()
        except (ValueError, OSError) as exc:
            _fail(f"bad config file: {exc}")
    overrides = {
        "upper_limit": upper_limit,
        "z_threshold": z_threshold,
        "fixed_cutoff": fixed_cutoff,
        "current_year": current_year,
    }
    config = dataclasses.replace(
        config, **{k: v for k, v in overrides.items() if v is not None}
    )
    resolver_mode = resolver_mode or file_resolver_mode or "off"

    if resolver_mode == "off":
        resolver: cleaner.EntityResolver = cleaner.NullResolver()
    elif resolver_mode == "fixture":
        if not resolver_file:
            _fail("--resolver fixture requires --resolver-file")
        resolver = cleaner.FixtureResolver.from_file(resolver_file)
    else:
        endpoint = endpoint_from_env(EndpointKind.WIKIDATA_LIKE)
        resolver = cleaner.EndpointResolver(EndpointClient(endpoint))

    records = []
    for path in files:
        try:
            records.extend(read_records_csv(path))
        except (OSError, RecordError) as exc:
            _fail(str(exc))
    clean_records, report = cleaner.run_cleaning(records, resolver, config)
    write_records_csv(out_path, clean_records)
    report.write_json(report_path)
    click.echo(report.to_text())


@main.command()
@click.option("--input", "clean_path", required=True, type=click.Path(dir_okay=False))
@click.option("--out-dir", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--report", "report_path", default=None, type=click.Path(dir_okay=False),
              help="Cleaning report to pin into the snapshot (default: report.json in --out-dir).")
def aggregate(clean_path: str, out_dir: str, report_path: str | None) -> None:
    """Build the cube (CSV + JSON) and a hash-pinned snapshot document."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        records = read_records_csv(clean_path)
    except (OSError, RecordError) as exc:
        _fail(str(exc))
    cube = aggregator.build_cube(records)
    cube_csv = out / "cube.csv"
    cube_json = out / "cube.json"
    aggregator.write_cube_csv(cube_csv, cube)
    aggregator.write_cube_json(cube_json, cube)

    report = Path(report_path) if report_path else out / "report.json"
    if not report.exists():
        report.write_text('{"stages": []}\n', encoding="utf-8")
    built = snapshot.build_snapshot(
        out / "snapshot.json",
        clean_csv=clean_path,
        cube_csv=cube_csv,
        cube_json=cube_json,
        report_json=report,
    )
    click.echo(f"cube: {len(cube)} cells -> {cube_csv}", err=True)
    click.echo(f"snapshot: {out / 'snapshot.json'} ({built.content_hash[:12]})", err=True)


@main.command()
@click.option("--snapshot", "snapshot_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--bind", "bind_address", default=None, help="host:port (default WGD_BIND_ADDR or 127.0.0.1:8000).")
@click.option("--static-dir", default=None, type=click.Path(file_okay=False, exists=True),
              help="Built dashboard assets to serve at /.")
def serve(snapshot_path: str, bind_address: str | None, static_dir: str | None) -> None:
    """Serve the read-only JSON API and dashboard for one snapshot."""
    import os

    from . import server
    from .snapshot import SnapshotError

    bind = bind_address or os.environ.get("WGD_BIND_ADDR") or "127.0.0.1:8000"
    try:
        server.serve(snapshot_path, bind, static_dir)
    except SnapshotError as exc:
        _fail(str(exc))


if __name__ == "__main__":
    main()
