"""Deterministic cleaning pipeline: duplicates, bad values, missing values.

Stages run in a fixed order and each one accounts for every row it touches,
so the report reconciles input to output exactly:

    duplicate_combinations   exact duplicates on (instance, wikiDataID, subclass)
    multi_id_resolution      one name with several Q-ids: keep the id whose
                             resolved name matches, null the rest
    shared_ids               one Q-id on several distinct names: null them all
    age_repair               age <= 0 or above the upper limit: recompute from
                             resolved birth/death years or null
    gaussian_outliers        ages above mean + z * stddev (or a fixed cutoff)
                             set to null
    gender_labels            URL-shaped gender values drop the row; labels are
                             trimmed
    missing_values           null gender or null publication year drops the
                             row; null age is kept

The pipeline is a pure function of (records, resolver, config); current_year
is configuration, never the wall clock, so runs are reproducible.
"""

from __future__ import annotations

import json
import math
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol, Sequence

from .records import PersonRecord

URL_GENDER_PATTERN = re.compile(r"^[A-Za-z][A-Za-z0-9+.\-]*://")

STAGE_ORDER = [
    "duplicate_combinations",
    "multi_id_resolution",
    "shared_ids",
    "age_repair",
    "gaussian_outliers",
    "gender_labels",
    "missing_values",
]


class EntityResolver(Protocol):
    """Lookup service for cross-checks; pure within a run."""

    def lookup_name(self, qid: str) -> str | None: ...

    def lookup_years(self, qid: str) -> tuple[int | None, int | None] | None: ...


class NullResolver:
    """Resolver mode "off": every cross-check comes back unanswered."""

    def lookup_name(self, qid: str) -> str | None:
        return None

    def lookup_years(self, qid: str) -> tuple[int | None, int | None] | None:
        return None


class FixtureResolver:
    """Resolver backed by a mapping, e.g. loaded from a JSON fixture file.

    File shape: {"Q1": {"name": "...", "birthYear": 1900, "deathYear": 1960}}
    with every field optional.
    """

    def __init__(self, table: dict[str, dict]):
        self._table = table

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureResolver":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def lookup_name(self, qid: str) -> str | None:
        entry = self._table.get(qid)
        return entry.get("name") if entry else None

    def lookup_years(self, qid: str) -> tuple[int | None, int | None] | None:
        entry = self._table.get(qid)
        if entry is None:
            return None
        birth = entry.get("birthYear")
        death = entry.get("deathYear")
        if birth is None and death is None:
            return None
        return (birth, death)


class EndpointResolver:
    """Resolver mode "live", backed by a SPARQL entity endpoint.

    Results are memoized so repeated lookups within a run stay consistent
    even if the endpoint drifts mid-run.
    """

    NAME_QUERY = """\
SELECT ?name WHERE {{
  wd:{qid} rdfs:label ?name .
  FILTER(LANG(?name) = "en")
}}
LIMIT 1
"""
    YEARS_QUERY = """\
SELECT ?birthYear ?deathYear WHERE {{
  OPTIONAL {{ wd:{qid} wdt:P569 ?birthYear . }}
  OPTIONAL {{ wd:{qid} wdt:P570 ?deathYear . }}
}}
LIMIT 1
"""

    def __init__(self, client):
        self._client = client
        self._names: dict[str, str | None] = {}
        self._years: dict[str, tuple[int | None, int | None] | None] = {}

    def lookup_name(self, qid: str) -> str | None:
        if qid not in self._names:
            page = self._client.execute_select(self.NAME_QUERY.format(qid=qid))
            self._names[qid] = page.rows[0].get("name") if page.rows else None
        return self._names[qid]

    def lookup_years(self, qid: str) -> tuple[int | None, int | None] | None:
        if qid not in self._years:
            page = self._client.execute_select(self.YEARS_QUERY.format(qid=qid))
            years = None
            if page.rows:
                birth = _leading_year(page.rows[0].get("birthYear"))
                death = _leading_year(page.rows[0].get("deathYear"))
                if birth is not None or death is not None:
                    years = (birth, death)
            self._years[qid] = years
        return self._years[qid]


def _leading_year(value: str | None) -> int | None:
    if not value:
        return None
    match = re.match(r"^(-?\d{1,4})", value)
    return int(match.group(1)) if match else None


@dataclass(frozen=True)
class StageReport:
    stage: str
    rows_in: int
    rows_out: int
    rows_modified: int
    rows_dropped: int
    cutoff: int | None = None

    def __post_init__(self) -> None:
        assert self.rows_out == self.rows_in - self.rows_dropped

    def to_json(self) -> dict:
        data = {
            "stage": self.stage,
            "rows_in": self.rows_in,
            "rows_out": self.rows_out,
            "rows_modified": self.rows_modified,
            "rows_dropped": self.rows_dropped,
        }
        if self.stage == "gaussian_outliers":
            data["cutoff"] = self.cutoff
        return data


@dataclass(frozen=True)
class CleaningReport:
    stages: tuple[StageReport, ...]

    @property
    def rows_in(self) -> int:
        return self.stages[0].rows_in if self.stages else 0

    @property
    def rows_out(self) -> int:
        return self.stages[-1].rows_out if self.stages else 0

    def to_json(self) -> dict:
        return {
            "rows_in": self.rows_in,
            "rows_out": self.rows_out,
            "stages": [stage.to_json() for stage in self.stages],
        }

    def to_text(self) -> str:
        lines = [
            f"{'stage':24}  {'rows_in':>8}  {'rows_out':>8}  {'modified':>8}  {'dropped':>8}"
        ]
        for stage in self.stages:
            lines.append(
                f"{stage.stage:24}  {stage.rows_in:>8}  {stage.rows_out:>8}  "
                f"{stage.rows_modified:>8}  {stage.rows_dropped:>8}"
            )
        lines.append(f"total: {self.rows_in} rows in, {self.rows_out} rows out")
        return "\n".join(lines)

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json(), indent=2) + "\n", encoding="utf-8"
        )


@dataclass(frozen=True)
class CleaningConfig:
    upper_limit: int = 100
    z_threshold: float = 3.0
    fixed_cutoff: int | None = None
    current_year: int = 2024

    def __post_init__(self) -> None:
        if self.current_year < 2001:
            raise ValueError("current_year must be >= 2001")

    @classmethod
    def from_file(cls, path: str | Path) -> "CleaningConfig":
        """Parse a flat ``key = value`` config file ('#' starts a comment)."""
        values: dict[str, str] = {}
        for raw_line in Path(path).read_text(encoding="utf-8").splitlines():
            line = raw_line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
        kwargs = {}
        for key in ("upper_limit", "fixed_cutoff", "current_year"):
            if values.get(key) not in (None, "", "none"):
                kwargs[key] = int(values[key])
        if values.get("z_threshold"):
            kwargs["z_threshold"] = float(values["z_threshold"])
        return cls(**kwargs)


def compute_age(
    birth_year: int | None, death_year: int | None, current_year: int
) -> int | None:
    """death - birth when both known; current - birth for the living;
    unknown birth year means unknown age."""
    if birth_year is None:
        return None
    if death_year is not None:
        return death_year - birth_year
    return current_year - birth_year


def fold_name(name: str) -> str:
    """Canonical form used for name comparison: NFC, underscores as spaces."""
    return unicodedata.normalize("NFC", name).replace("_", " ")


def drop_duplicate_combinations(
    records: Sequence[PersonRecord],
) -> tuple[list[PersonRecord], StageReport]:
    """Collapse rows sharing (instance, wikiDataID, subclass) to the first one.

    Null ids never compare equal (SQL semantics): later stages null ids on
    purpose, and collapsing the resulting twins would make cleaning
    non-idempotent.
    """
    seen: set[tuple[str, str, str]] = set()
    kept = []
    for record in records:
        if record.wikidata_id is not None:
            key = (record.instance, record.wikidata_id, record.subclass)
            if key in seen:
                continue
            seen.add(key)
        kept.append(record)
    return kept, StageReport(
        stage="duplicate_combinations",
        rows_in=len(records),
        rows_out=len(kept),
        rows_modified=0,
        rows_dropped=len(records) - len(kept),
    )


def resolve_multi_id_instances(
    records: Sequence[PersonRecord], resolver: EntityResolver
) -> tuple[list[PersonRecord], StageReport]:
    """Where one (instance, subclass) carries several Q-ids, keep only ids
    whose resolved entity name matches the instance name; null the rest."""
    ids_by_group: dict[tuple[str, str], set[str]] = {}
    for record in records:
        if record.wikidata_id is not None:
            ids_by_group.setdefault(
                (record.instance, record.subclass), set()
            ).add(record.wikidata_id)

    conflicted = {group for group, ids in ids_by_group.items() if len(ids) > 1}
    resolved_names: dict[str, str | None] = {}

    def resolved_name(qid: str) -> str | None:
        if qid not in resolved_names:
            try:
                resolved_names[qid] = resolver.lookup_name(qid)
            except Exception:
                # Resolver failure means the id cannot be verified.
                resolved_names[qid] = None
        return resolved_names[qid]

    out = []
    modified = 0
    for record in records:
        group = (record.instance, record.subclass)
        if record.wikidata_id is not None and group in conflicted:
            name = resolved_name(record.wikidata_id)
            if name is None or fold_name(name) != fold_name(record.instance):
                record = record.with_values(wikidata_id=None)
                modified += 1
        out.append(record)
    return out, StageReport(
        stage="multi_id_resolution",
        rows_in=len(records),
        rows_out=len(out),
        rows_modified=modified,
        rows_dropped=0,
    )


def null_shared_ids(
    records: Sequence[PersonRecord],
) -> tuple[list[PersonRecord], StageReport]:
    """Null every Q-id held by more than one distinct instance name; name
    matching across sources proved unreliable, so no arbitration is tried."""
    holders: dict[str, set[str]] = {}
    for record in records:
        if record.wikidata_id is not None:
            holders.setdefault(record.wikidata_id, set()).add(record.instance)
    shared = {qid for qid, names in holders.items() if len(names) > 1}

    out = []
    modified = 0
    for record in records:
        if record.wikidata_id in shared:
            record = record.with_values(wikidata_id=None)
            modified += 1
        out.append(record)
    return out, StageReport(
        stage="shared_ids",
        rows_in=len(records),
        rows_out=len(out),
        rows_modified=modified,
        rows_dropped=0,
    )


def repair_ages(
    records: Sequence[PersonRecord],
    resolver: EntityResolver,
    current_year: int,
    upper_limit: int = 100,
) -> tuple[list[PersonRecord], StageReport]:
    """Cross-check impossible ages (<= 0 or above the limit) against resolved
    birth/death years; unrecoverable values go to null."""
    out = []
    modified = 0
    for record in records:
        age = record.age
        if age is None or 0 < age <= upper_limit:
            out.append(record)
            continue
        repaired: int | None = None
        if record.wikidata_id is not None:
            try:
                years = resolver.lookup_years(record.wikidata_id)
            except Exception:
                years = None
            if years is not None:
                candidate = compute_age(years[0], years[1], current_year)
                if candidate is not None:
                    if age <= 0 and 0 < candidate <= upper_limit:
                        repaired = candidate
                    elif age > upper_limit and candidate > 0:
                        repaired = candidate
        if repaired != age:
            record = record.with_values(age=repaired)
            modified += 1
        out.append(record)
    return out, StageReport(
        stage="age_repair",
        rows_in=len(records),
        rows_out=len(out),
        rows_modified=modified,
        rows_dropped=0,
    )


def gaussian_outlier_pass(
    records: Sequence[PersonRecord],
    z_threshold: float = 3.0,
    fixed_cutoff: int | None = None,
) -> tuple[list[PersonRecord], StageReport, int | None]:
    """Null ages above floor(mean + z * stddev) of the non-null ages.

    ``fixed_cutoff`` bypasses the fit entirely. With fewer than two non-null
    ages there is nothing to fit and the pass is a no-op.
    """
    if fixed_cutoff is not None:
        cutoff: int | None = fixed_cutoff
    else:
        ages = [r.age for r in records if r.age is not None]
        if len(ages) < 2:
            cutoff = None
        else:
            mean = sum(ages) / len(ages)
            variance = sum((a - mean) ** 2 for a in ages) / len(ages)
            cutoff = math.floor(mean + z_threshold * math.sqrt(variance))

    out = []
    modified = 0
    for record in records:
        if cutoff is not None and record.age is not None and record.age > cutoff:
            record = record.with_values(age=None)
            modified += 1
        out.append(record)
    report = StageReport(
        stage="gaussian_outliers",
        rows_in=len(records),
        rows_out=len(out),
        rows_modified=modified,
        rows_dropped=0,
        cutoff=cutoff,
    )
    return out, report, cutoff


def clean_gender_labels(
    records: Sequence[PersonRecord],
) -> tuple[list[PersonRecord], StageReport]:
    """Drop rows whose gender is a URL (dead hyperlinks, not labels); trim
    surrounding whitespace on the rest, preserving case."""
    out = []
    modified = 0
    dropped = 0
    for record in records:
        if record.gender is None:
            out.append(record)
            continue
        trimmed = record.gender.strip()
        if URL_GENDER_PATTERN.match(trimmed):
            dropped += 1
            continue
        if trimmed != record.gender:
            record = record.with_values(gender=trimmed or None)
            modified += 1
        out.append(record)
    return out, StageReport(
        stage="gender_labels",
        rows_in=len(records),
        rows_out=len(out),
        rows_modified=modified,
        rows_dropped=dropped,
    )


def apply_missing_value_policy(
    records: Sequence[PersonRecord],
) -> tuple[list[PersonRecord], StageReport]:
    """Drop rows missing gender or publication year; keep rows missing age.

    Gender is never imputed; absent labels are dropped rather than guessed
    so non-binary labels stay exactly as recorded.
    """
    out = [
        record
        for record in records
        if record.gender is not None and record.publication_year is not None
    ]
    return out, StageReport(
        stage="missing_values",
        rows_in=len(records),
        rows_out=len(out),
        rows_modified=0,
        rows_dropped=len(records) - len(out),
    )


def run_cleaning(
    records: Sequence[PersonRecord],
    resolver: EntityResolver,
    config: CleaningConfig = CleaningConfig(),
) -> tuple[list[PersonRecord], CleaningReport]:
    """Run every stage in pipeline order and assemble the full report."""
    stages: list[StageReport] = []
    current = list(records)

    current, report = drop_duplicate_combinations(current)
    stages.append(report)
    current, report = resolve_multi_id_instances(current, resolver)
    stages.append(report)
    current, report = null_shared_ids(current)
    stages.append(report)
    current, report = repair_ages(
        current, resolver, config.current_year, config.upper_limit
    )
    stages.append(report)
    current, report, _cutoff = gaussian_outlier_pass(
        current, config.z_threshold, config.fixed_cutoff
    )
    stages.append(report)
    current, report = clean_gender_labels(current)
    stages.append(report)
    current, report = apply_missing_value_policy(current)
    stages.append(report)

    return current, CleaningReport(stages=tuple(stages))


def check_clean_invariants(
    records: Iterable[PersonRecord], cutoff: int | None = None
) -> None:
    """Assert the post-conditions the pipeline guarantees; for tests."""
    holders: dict[str, set[str]] = {}
    for record in records:
        assert record.gender is not None, "null gender survived cleaning"
        assert record.publication_year is not None, "null publicationYear survived"
        assert not URL_GENDER_PATTERN.match(record.gender), "URL gender survived"
        assert record.gender == record.gender.strip(), "untrimmed gender survived"
        if record.age is not None:
            assert record.age > 0, "non-positive age survived"
            if cutoff is not None:
                assert record.age <= cutoff, "age above cutoff survived"
        if record.wikidata_id is not None:
            holders.setdefault(record.wikidata_id, set()).add(record.instance)
    for qid, names in holders.items():
        assert len(names) == 1, f"{qid} shared by {sorted(names)}"
