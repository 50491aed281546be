"""Person record type and the 7-column CSV schema shared by the pipeline.

One dataclass serves both the raw (just harvested) and the clean
(post-pipeline) shape of a record; the difference between the two is the set
of invariants the cleaning pipeline establishes, not the fields.

CSV conventions (the on-disk contract for every stage):
  header   subclass,instance,wikiDataID,gender,age,birthYear,publicationYear
  encoding UTF-8, no BOM, LF line endings, RFC-4180 quoting
  nulls    encoded as the empty string
"""

from __future__ import annotations

import csv
import io
import os
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Iterator

CSV_HEADER = [
    "subclass",
    "instance",
    "wikiDataID",
    "gender",
    "age",
    "birthYear",
    "publicationYear",
]

QID_PATTERN = re.compile(r"^Q\d+$")

# Sanity bounds for birth years; semantic repair is the cleaner's job.
MIN_BIRTH_YEAR = -4000
MAX_BIRTH_YEAR = 3000


class RecordError(ValueError):
    """A row violates the record schema (bad type, bad Q-id, empty key field)."""


@dataclass(frozen=True, slots=True)
class PersonRecord:
    """One biography row: a person instance inside one ontology subclass."""

    subclass: str
    instance: str
    wikidata_id: str | None = None
    gender: str | None = None
    age: int | None = None
    birth_year: int | None = None
    publication_year: int | None = None

    def __post_init__(self) -> None:
        if not self.subclass:
            raise RecordError("subclass must be non-empty")
        if not self.instance:
            raise RecordError("instance must be non-empty")
        if self.wikidata_id is not None and not QID_PATTERN.match(self.wikidata_id):
            raise RecordError(f"wikiDataID {self.wikidata_id!r} is not a Q-id")
        if self.birth_year is not None and not (
            MIN_BIRTH_YEAR <= self.birth_year <= MAX_BIRTH_YEAR
        ):
            raise RecordError(f"birthYear {self.birth_year} out of range")

    def with_values(self, **changes) -> "PersonRecord":
        return replace(self, **changes)


def _parse_optional_int(value: str, column: str, line_number: int) -> int | None:
    if value == "":
        return None
    try:
        return int(value)
    except ValueError:
        raise RecordError(
            f"line {line_number}: column {column!r} has non-integer value {value!r}"
        ) from None


def record_from_row(row: list[str], line_number: int) -> PersonRecord:
    if len(row) != len(CSV_HEADER):
        raise RecordError(
            f"line {line_number}: expected {len(CSV_HEADER)} columns, got {len(row)}"
        )
    subclass, instance, qid, gender, age, birth, pub = row
    try:
        return PersonRecord(
            subclass=subclass,
            instance=instance,
            wikidata_id=qid or None,
            gender=gender or None,
            age=_parse_optional_int(age, "age", line_number),
            birth_year=_parse_optional_int(birth, "birthYear", line_number),
            publication_year=_parse_optional_int(pub, "publicationYear", line_number),
        )
    except RecordError as exc:
        raise RecordError(f"line {line_number}: {exc}") from None


def record_to_row(record: PersonRecord) -> list[str]:
    def blank(value) -> str:
        return "" if value is None else str(value)

    return [
        record.subclass,
        record.instance,
        blank(record.wikidata_id),
        blank(record.gender),
        blank(record.age),
        blank(record.birth_year),
        blank(record.publication_year),
    ]


def read_records_csv(path: str | Path) -> list[PersonRecord]:
    """Read a 7-column CSV, validating the header and every row."""
    with open(path, newline="", encoding="utf-8") as handle:
        return list(iter_records(handle, source=str(path)))


def iter_records(handle, source: str = "<stream>") -> Iterator[PersonRecord]:
    reader = csv.reader(handle)
    try:
        header = next(reader)
    except StopIteration:
        raise RecordError(f"{source}: missing CSV header") from None
    if header != CSV_HEADER:
        raise RecordError(f"{source}: unexpected header {header!r}")
    for line_number, row in enumerate(reader, start=2):
        try:
            yield record_from_row(row, line_number)
        except RecordError as exc:
            raise RecordError(f"{source}: {exc}") from None


def write_records_csv(path: str | Path, records: Iterable[PersonRecord]) -> None:
    """Write records atomically (temp file + rename in the target directory)."""
    path = Path(path)
    payload = records_to_csv_bytes(records)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def records_to_csv_bytes(records: Iterable[PersonRecord]) -> bytes:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for record in records:
        writer.writerow(record_to_row(record))
    return buffer.getvalue().encode("utf-8")
