"""Subclass-by-subclass harvest of Person biographies with resumable state.

A full harvest against the public endpoints runs for days, so every unit of
progress is checkpointed: one JSON checkpoint document (atomically replaced)
plus append-only partial files under the output directory. Interrupt the
process anywhere and a re-run continues from the last completed page or
enrichment batch, producing byte-identical final CSVs.

Layout under ``out_dir`` while a harvest is in flight:
    harvest.partial/<subclass>.csv   rows fetched so far, page by page
    harvest.partial/enrichment.csv   gender/publicationYear journal, in order
Final outputs are one ``<subclass>.csv`` per subclass in ``out_dir``.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .client import EndpointClient, RetriesExhausted
from .records import (
    CSV_HEADER,
    PersonRecord,
    QID_PATTERN,
    read_records_csv,
    write_records_csv,
)

logger = logging.getLogger(__name__)

EXCLUDED_SUBCLASSES = frozenset({"OrganizationMember"})

ENRICHMENT_BATCH_SIZE = 100
ENRICHMENT_WORKERS = 4

SUBCLASS_LIST_QUERY = """\
SELECT DISTINCT ?subclass WHERE {
  ?class rdfs:subClassOf dbo:Person .
  ?class rdfs:label ?subclass .
  FILTER(LANG(?subclass) = "en")
}
ORDER BY ?subclass
"""

# All attributes except gender and publication year come from the subclass
# query; {after} enables keyed paging past the endpoint's sort cap via an
# inner ordered subselect.
SUBCLASS_INSTANCES_TEMPLATE = """\
SELECT ?instance ?wikiDataID ?age ?birthYear WHERE {{
  {{
    SELECT ?instance ?wikiDataID ?age ?birthYear WHERE {{
      ?person a dbo:{subclass} .
      ?person rdfs:label ?instance .
      OPTIONAL {{ ?person owl:sameAs ?wikiDataID . }}
      OPTIONAL {{ ?person dbo:age ?age . }}
      OPTIONAL {{ ?person dbo:birthYear ?birthYear . }}
      {after}
    }}
    ORDER BY ?instance
  }}
}}
LIMIT {limit} OFFSET {offset}
"""


class CheckpointCorrupt(Exception):
    """The checkpoint file exists but cannot be trusted; refuse to resume."""


@dataclass(frozen=True)
class SubclassCatalog:
    subclasses: tuple[str, ...]
    excluded: frozenset[str] = EXCLUDED_SUBCLASSES

    def __post_init__(self) -> None:
        overlap = set(self.subclasses) & self.excluded
        if overlap:
            raise ValueError(f"catalog lists excluded subclasses: {sorted(overlap)}")


@dataclass
class HarvestCheckpoint:
    """Cursor state for a resumable harvest.

    ``subclass_cursor`` maps an in-progress subclass to the number of rows
    already fetched (the next offset; always a multiple of the page size).
    ``last_keys`` carries the last sort key once paging has switched past
    the sort cap. ``enrichment_cursor`` counts fully enriched records.
    """

    page_size: int
    subclass_cursor: dict[str, int] = field(default_factory=dict)
    last_keys: dict[str, str] = field(default_factory=dict)
    completed_subclasses: set[str] = field(default_factory=set)
    enrichment_cursor: int = 0
    finished: bool = False
    last_write_utc: str = ""

    def to_json(self) -> dict:
        return {
            "page_size": self.page_size,
            "subclass_cursor": self.subclass_cursor,
            "last_keys": self.last_keys,
            "completed_subclasses": sorted(self.completed_subclasses),
            "enrichment_cursor": self.enrichment_cursor,
            "finished": self.finished,
            "last_write_utc": self.last_write_utc,
        }

    @classmethod
    def from_json(cls, data: dict) -> "HarvestCheckpoint":
        try:
            checkpoint = cls(
                page_size=int(data["page_size"]),
                subclass_cursor={k: int(v) for k, v in data["subclass_cursor"].items()},
                last_keys=dict(data.get("last_keys", {})),
                completed_subclasses=set(data["completed_subclasses"]),
                enrichment_cursor=int(data["enrichment_cursor"]),
                finished=bool(data["finished"]),
                last_write_utc=str(data.get("last_write_utc", "")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CheckpointCorrupt(f"checkpoint fields invalid: {exc}") from None
        if checkpoint.completed_subclasses & checkpoint.subclass_cursor.keys():
            raise CheckpointCorrupt("subclass marked both completed and in progress")
        return checkpoint

    def save(self, path: str | Path) -> None:
        path = Path(path)
        self.last_write_utc = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(json.dumps(self.to_json(), indent=2), encoding="utf-8")
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str | Path) -> "HarvestCheckpoint | None":
        path = Path(path)
        if not path.exists():
            return None
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise CheckpointCorrupt(f"cannot parse checkpoint {path}: {exc}") from None
        return cls.from_json(data)


@dataclass
class HarvestClients:
    dbpedia: EndpointClient
    wikidata: EndpointClient
    wikipedia: EndpointClient


def enumerate_subclasses(client: EndpointClient) -> SubclassCatalog:
    """All Person subclasses from the ontology, minus the exclusion set."""
    page = client.execute_select(SUBCLASS_LIST_QUERY)
    seen: dict[str, None] = {}
    for row in page.rows:
        name = row.get("subclass")
        if name and name not in EXCLUDED_SUBCLASSES:
            seen.setdefault(name)
    return SubclassCatalog(subclasses=tuple(seen))


def _row_to_record(subclass: str, row: dict[str, str]) -> PersonRecord | None:
    instance = row.get("instance", "").strip()
    if not instance:
        return None
    qid = row.get("wikiDataID")
    if qid:
        # Accept both bare Q-ids and full entity IRIs.
        qid = qid.rsplit("/", 1)[-1]
        if not QID_PATTERN.match(qid):
            qid = None
    else:
        qid = None

    def opt_int(name: str) -> int | None:
        value = row.get(name)
        if value is None or value == "":
            return None
        try:
            return int(value)
        except ValueError:
            return None

    return PersonRecord(
        subclass=subclass,
        instance=instance,
        wikidata_id=qid,
        age=opt_int("age"),
        birth_year=opt_int("birthYear"),
    )


def harvest_subclass(
    client: EndpointClient, subclass: str, page_size: int | None = None
) -> list[PersonRecord]:
    """All instances of one subclass, complete past endpoint caps.

    Gender and publication year stay unset; they come from enrichment.
    """
    page_size = page_size or client.endpoint.row_limit
    query_template = SUBCLASS_INSTANCES_TEMPLATE.replace("{subclass}", subclass)
    records: list[PersonRecord] = []
    for page in client.paged_select(query_template, page_size, key_var="instance"):
        for row in page.rows:
            record = _row_to_record(subclass, row)
            if record is not None:
                records.append(record)
    return records


def enrich_gender(
    client: EndpointClient,
    records: Sequence[PersonRecord],
    workers: int = ENRICHMENT_WORKERS,
) -> list[PersonRecord]:
    """Fill gender from the entity endpoint; order preserved, never aborts."""
    unique_ids = list(dict.fromkeys(r.wikidata_id for r in records if r.wikidata_id))
    genders = _lookup_many(client.fetch_entity_gender, unique_ids, workers)
    return [
        r.with_values(gender=genders.get(r.wikidata_id)) if r.wikidata_id else
        r.with_values(gender=None)
        for r in records
    ]


def enrich_publication_year(
    client: EndpointClient,
    records: Sequence[PersonRecord],
    workers: int = ENRICHMENT_WORKERS,
) -> list[PersonRecord]:
    """Fill publicationYear from the article's creation date, keyed by name."""
    unique_titles = list(dict.fromkeys(r.instance for r in records))
    years = _lookup_many(client.fetch_creation_year, unique_titles, workers)
    return [r.with_values(publication_year=years.get(r.instance)) for r in records]


def _lookup_many(fetch, keys: list, workers: int) -> dict:
    """Run per-key lookups through a bounded pool; failures map to None."""

    def safe_fetch(key):
        try:
            return fetch(key)
        except RetriesExhausted as exc:
            logger.warning("lookup for %r failed after retries: %s", key, exc)
            return None

    if not keys:
        return {}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return dict(zip(keys, pool.map(safe_fetch, keys)))


# -- resumable end-to-end run ------------------------------------------------


def _partial_dir(out_dir: Path) -> Path:
    return out_dir / "harvest.partial"


def _append_partial_rows(path: Path, records: Iterable[PersonRecord]) -> None:
    from .records import record_to_row

    new_file = not path.exists()
    with open(path, "a", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        if new_file:
            writer.writerow(CSV_HEADER)
        for record in records:
            writer.writerow(record_to_row(record))
        handle.flush()
        os.fsync(handle.fileno())


def _load_partial_rows(path: Path, keep: int | None) -> list[PersonRecord]:
    """Load a partial file, truncated to the checkpointed row count.

    ``keep=None`` loads everything (completed subclasses). Otherwise rows
    past the checkpoint (an append that never got checkpointed, or a torn
    final line) are discarded and the file is rewritten to match, so the
    pages they came from can be refetched without duplicating rows.
    """
    from .records import record_from_row, RecordError

    if not path.exists():
        if keep:
            raise CheckpointCorrupt(f"checkpoint expects {keep} rows but {path} is gone")
        return []
    records = []
    truncated = False
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise CheckpointCorrupt(f"partial file {path} has bad header")
        for line_number, row in enumerate(reader, start=2):
            if keep is not None and len(records) >= keep:
                truncated = True
                break
            try:
                records.append(record_from_row(row, line_number))
            except RecordError as exc:
                raise CheckpointCorrupt(f"partial file {path}: {exc}") from None
    if keep is not None and len(records) < keep:
        raise CheckpointCorrupt(
            f"partial file {path} has {len(records)} usable rows, checkpoint says {keep}"
        )
    if truncated:
        write_records_csv(path, records)
    return records


def _read_enrichment_journal(path: Path) -> list[tuple[str | None, int | None]]:
    """Complete (gender, publicationYear) journal entries, torn tail dropped."""
    import io

    if not path.exists():
        return []
    entries = []
    raw = path.read_bytes().decode("utf-8")
    complete, sep, _tail = raw.rpartition("\n")
    if not sep:
        return []
    for line in csv.reader(io.StringIO(complete + "\n")):
        if len(line) != 2:
            continue
        gender = line[0] or None
        year = int(line[1]) if line[1] else None
        entries.append((gender, year))
    return entries


def _rewrite_enrichment_journal(
    path: Path, entries: list[tuple[str | None, int | None]]
) -> None:
    import io

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    for gender, year in entries:
        writer.writerow([gender or "", "" if year is None else str(year)])
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(buffer.getvalue(), encoding="utf-8")
    os.replace(tmp, path)


def _append_enrichment_journal(
    path: Path, entries: Iterable[tuple[str | None, int | None]]
) -> None:
    with open(path, "a", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        for gender, year in entries:
            writer.writerow([gender or "", "" if year is None else str(year)])
        handle.flush()
        os.fsync(handle.fileno())


def run_harvest(
    clients: HarvestClients,
    catalog: SubclassCatalog,
    checkpoint_path: str | Path,
    out_dir: str | Path,
    page_size: int | None = None,
) -> HarvestCheckpoint:
    """Harvest every catalog subclass, enrich, and write final per-subclass CSVs.

    The checkpoint is persisted after every page and every enrichment batch;
    re-running after an interruption continues where the previous run stopped
    and produces byte-identical outputs.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    checkpoint_path = Path(checkpoint_path)
    page_size = page_size or clients.dbpedia.endpoint.row_limit

    checkpoint = HarvestCheckpoint.load(checkpoint_path)
    if checkpoint is None:
        checkpoint = HarvestCheckpoint(page_size=page_size)
    elif checkpoint.page_size != page_size:
        raise CheckpointCorrupt(
            f"checkpoint page_size {checkpoint.page_size} != requested {page_size}"
        )
    partial_dir = _partial_dir(out_dir)
    if checkpoint.finished:
        logger.info("harvest already finished; nothing to do")
        _cleanup_partials(partial_dir)
        return checkpoint
    partial_dir.mkdir(parents=True, exist_ok=True)

    # Phase 1: instances per subclass, page by page.
    per_subclass: dict[str, list[PersonRecord]] = {}
    for subclass in catalog.subclasses:
        if subclass in catalog.excluded:
            continue
        partial_path = partial_dir / f"{subclass}.csv"
        fetched = checkpoint.subclass_cursor.get(subclass, 0)
        if subclass in checkpoint.completed_subclasses:
            per_subclass[subclass] = _load_partial_rows(partial_path, keep=None)
            continue
        records = _load_partial_rows(partial_path, keep=fetched) if fetched else []
        template = SUBCLASS_INSTANCES_TEMPLATE.replace("{subclass}", subclass)
        pages = _resume_pages(
            clients.dbpedia, template, page_size, fetched, checkpoint.last_keys.get(subclass)
        )
        for page_rows, is_last, last_key in pages:
            page_records = [
                record
                for row in page_rows
                if (record := _row_to_record(subclass, row)) is not None
            ]
            _append_partial_rows(partial_path, page_records)
            records.extend(page_records)
            fetched += len(page_rows)
            if is_last:
                checkpoint.subclass_cursor.pop(subclass, None)
                checkpoint.last_keys.pop(subclass, None)
                checkpoint.completed_subclasses.add(subclass)
            else:
                checkpoint.subclass_cursor[subclass] = fetched
                if last_key is not None:
                    checkpoint.last_keys[subclass] = last_key
            checkpoint.save(checkpoint_path)
        per_subclass[subclass] = records
        logger.info("subclass %s: %d records", subclass, len(records))

    # Phase 2: enrichment in a fixed global order, batch by batch.
    ordered: list[PersonRecord] = []
    for subclass in catalog.subclasses:
        if subclass not in catalog.excluded:
            ordered.extend(per_subclass.get(subclass, []))

    journal_path = partial_dir / "enrichment.csv"
    journal = _read_enrichment_journal(journal_path)
    if len(journal) > checkpoint.enrichment_cursor:
        journal = journal[: checkpoint.enrichment_cursor]
        _rewrite_enrichment_journal(journal_path, journal)
    elif len(journal) < checkpoint.enrichment_cursor:
        raise CheckpointCorrupt(
            f"enrichment journal has {len(journal)} entries, "
            f"checkpoint says {checkpoint.enrichment_cursor}"
        )
    cursor = len(journal)
    while cursor < len(ordered):
        batch = ordered[cursor : cursor + ENRICHMENT_BATCH_SIZE]
        batch = enrich_gender(clients.wikidata, batch)
        batch = enrich_publication_year(clients.wikipedia, batch)
        entries = [(r.gender, r.publication_year) for r in batch]
        _append_enrichment_journal(journal_path, entries)
        journal.extend(entries)
        cursor += len(batch)
        checkpoint.enrichment_cursor = cursor
        checkpoint.save(checkpoint_path)

    enriched = [
        record.with_values(gender=gender, publication_year=year)
        for record, (gender, year) in zip(ordered, journal)
    ]

    # Final outputs (one CSV per subclass, empty ones included), then clear
    # the partial state.
    by_subclass: dict[str, list[PersonRecord]] = {}
    for record in enriched:
        by_subclass.setdefault(record.subclass, []).append(record)
    for subclass in catalog.subclasses:
        if subclass in catalog.excluded:
            continue
        write_records_csv(out_dir / f"{subclass}.csv", by_subclass.get(subclass, []))
    checkpoint.finished = True
    checkpoint.save(checkpoint_path)
    _cleanup_partials(partial_dir)
    return checkpoint


def _cleanup_partials(partial_dir: Path) -> None:
    if not partial_dir.exists():
        return
    for leftover in sorted(partial_dir.glob("*.csv")):
        leftover.unlink()
    try:
        partial_dir.rmdir()
    except OSError:
        pass


def _resume_pages(
    client: EndpointClient,
    template: str,
    page_size: int,
    rows_fetched: int,
    last_key: str | None,
):
    """Yield (rows, is_last, last_key) starting from a checkpointed cursor.

    Mirrors EndpointClient.paged_select's strategy switch, but starts at an
    arbitrary offset / sort key instead of the beginning.
    """
    from .client import _after_filter

    sort_cap = client.endpoint.sort_cap
    offset = rows_fetched
    if last_key is None:
        while sort_cap is None or offset + page_size <= sort_cap:
            page = client.execute_select(
                template.format(limit=page_size, offset=offset, after="")
            )
            key = page.rows[-1].get("instance") if page.rows else None
            yield page.rows, page.is_last, key
            if page.is_last:
                return
            last_key = key
            offset += page_size
        if last_key is None:
            # Resuming exactly at the strategy switch: re-derive the key from
            # the last checkpointed row is impossible here, so refetch the
            # final offset page's tail row.
            page = client.execute_select(
                template.format(limit=page_size, offset=offset - page_size, after="")
            )
            last_key = page.rows[-1].get("instance") if page.rows else None
            if last_key is None:
                raise CheckpointCorrupt("cannot re-derive sort key at strategy switch")
    while True:
        page = client.execute_select(
            template.format(
                limit=page_size, offset=0, after=_after_filter("instance", last_key)
            )
        )
        key = page.rows[-1].get("instance") if page.rows else None
        yield page.rows, page.is_last, key if key is not None else last_key
        if page.is_last:
            return
        last_key = key
