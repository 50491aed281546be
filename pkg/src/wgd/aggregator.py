"""Aggregation cube over clean records: counts and average ages by
(publication year, subclass, gender), with ALL rollups on subclass and
gender.

Cells keep the exact integer age sum internally; means are computed
unrounded and rounded half-up to two decimals only at presentation
boundaries (CSV, JSON, API), so rollups and range summaries never
accumulate rounding drift.

``__ALL__`` is the reserved encoding for a rolled-up dimension.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass
from decimal import Decimal, ROUND_HALF_UP
from pathlib import Path
from typing import Iterable, Sequence

from .records import PersonRecord

ALL = "__ALL__"

CUBE_CSV_HEADER = ["year", "subclass", "gender", "article_count", "avg_age", "age_sample_size"]

BINARY_GENDERS = frozenset({"male", "female"})


class EmptySelection(Exception):
    """A filter matched no articles; distinct from a zero-share gender."""


def round_half_up(value: float, digits: int = 2) -> float:
    quantum = Decimal(1).scaleb(-digits)
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class AggregateCell:
    year: int
    subclass: str
    gender: str
    article_count: int
    age_sum: int
    age_sample_size: int

    @property
    def avg_age(self) -> float | None:
        """Unrounded mean over non-null ages; None when no ages observed."""
        if self.age_sample_size == 0:
            return None
        return self.age_sum / self.age_sample_size

    @property
    def avg_age_rounded(self) -> float | None:
        mean = self.avg_age
        return None if mean is None else round_half_up(mean)


@dataclass(frozen=True)
class GenderShare:
    gender: str
    count: int
    percent: float


@dataclass(frozen=True)
class AggregationFilter:
    subclass: str | None = None
    year_from: int | None = None
    year_to: int | None = None

    def __post_init__(self) -> None:
        if (
            self.year_from is not None
            and self.year_to is not None
            and self.year_from > self.year_to
        ):
            raise ValueError("year_from must be <= year_to")

    def admits_year(self, year: int) -> bool:
        if self.year_from is not None and year < self.year_from:
            return False
        if self.year_to is not None and year > self.year_to:
            return False
        return True


class Cube:
    """Immutable set of aggregate cells indexed by (year, subclass, gender)."""

    def __init__(self, cells: Iterable[AggregateCell]):
        self._cells = {(c.year, c.subclass, c.gender): c for c in cells}

    @property
    def cells(self) -> list[AggregateCell]:
        return sorted(
            self._cells.values(), key=lambda c: (c.year, c.subclass, c.gender)
        )

    def get(self, year: int, subclass: str, gender: str) -> AggregateCell | None:
        return self._cells.get((year, subclass, gender))

    def years(self) -> list[int]:
        return sorted({key[0] for key in self._cells})

    def subclasses(self) -> list[str]:
        return sorted({key[1] for key in self._cells if key[1] != ALL})

    def genders(self) -> list[str]:
        return sorted({key[2] for key in self._cells if key[2] != ALL})

    def __len__(self) -> int:
        return len(self._cells)


def build_cube(records: Sequence[PersonRecord]) -> Cube:
    """One cell per observed (year, subclass, gender) plus ALL rollups on
    subclass, gender, and both. Requires clean records (non-null gender and
    publication year)."""
    counts: dict[tuple[int, str, str], list[int]] = {}
    for record in records:
        year = record.publication_year
        gender = record.gender
        if year is None or gender is None:
            raise ValueError("build_cube requires clean records")
        for subclass_key in (record.subclass, ALL):
            for gender_key in (gender, ALL):
                bucket = counts.setdefault((year, subclass_key, gender_key), [0, 0, 0])
                bucket[0] += 1
                if record.age is not None:
                    bucket[1] += record.age
                    bucket[2] += 1
    return Cube(
        AggregateCell(
            year=year,
            subclass=subclass,
            gender=gender,
            article_count=bucket[0],
            age_sum=bucket[1],
            age_sample_size=bucket[2],
        )
        for (year, subclass, gender), bucket in counts.items()
    )


def _accumulate(
    cube: Cube, flt: AggregationFilter, gender: str
) -> tuple[int, int, int]:
    """Sum (count, age_sum, age_n) for one gender key across the filter."""
    subclass = flt.subclass if flt.subclass is not None else ALL
    count = age_sum = age_n = 0
    for year in cube.years():
        if not flt.admits_year(year):
            continue
        cell = cube.get(year, subclass, gender)
        if cell is not None:
            count += cell.article_count
            age_sum += cell.age_sum
            age_n += cell.age_sample_size
    return count, age_sum, age_n


def gender_distribution(
    cube: Cube, flt: AggregationFilter = AggregationFilter()
) -> list[GenderShare]:
    """Shares over the filtered rollup, largest first; percents are
    half-up-rounded to two decimals."""
    total, _, _ = _accumulate(cube, flt, ALL)
    if total == 0:
        raise EmptySelection("no articles match the filter")
    shares = []
    for gender in cube.genders():
        count, _, _ = _accumulate(cube, flt, gender)
        if count:
            shares.append(
                GenderShare(
                    gender=gender,
                    count=count,
                    percent=round_half_up(100.0 * count / total),
                )
            )
    shares.sort(key=lambda s: (-s.count, s.gender))
    return shares


def summarize(
    cube: Cube, flt: AggregationFilter = AggregationFilter()
) -> dict:
    """Headline numbers for one filter: article count, average age, shares."""
    total, age_sum, age_n = _accumulate(cube, flt, ALL)
    if total == 0:
        raise EmptySelection("no articles match the filter")
    return {
        "article_count": total,
        "avg_age": round_half_up(age_sum / age_n) if age_n else None,
        "age_sample_size": age_n,
        "gender_distribution": [
            {"gender": s.gender, "count": s.count, "percent": s.percent}
            for s in gender_distribution(cube, flt)
        ],
    }


def yearly_series(
    cube: Cube, gender: str, flt: AggregationFilter = AggregationFilter()
) -> list[dict]:
    """Per-year count and share for one gender, ascending years; years with
    no articles at all are omitted, years without this gender report zero."""
    subclass = flt.subclass if flt.subclass is not None else ALL
    series = []
    for year in cube.years():
        if not flt.admits_year(year):
            continue
        total_cell = cube.get(year, subclass, ALL)
        if total_cell is None or total_cell.article_count == 0:
            continue
        cell = cube.get(year, subclass, gender)
        count = cell.article_count if cell is not None else 0
        series.append(
            {
                "year": year,
                "count": count,
                "percent_of_year": round_half_up(
                    100.0 * count / total_cell.article_count
                ),
            }
        )
    return series


def other_genders_view(cube: Cube) -> dict:
    """The same aggregations restricted to genders that are not the binary
    labels (case-insensitive match on exactly "male"/"female")."""
    gender_counts: dict[str, int] = {}
    year_counts: dict[int, int] = {}
    subclass_stats: dict[str, list[int]] = {}
    for cell in cube.cells:
        if cell.subclass == ALL or cell.gender == ALL:
            continue
        if cell.gender.lower() in BINARY_GENDERS:
            continue
        gender_counts[cell.gender] = gender_counts.get(cell.gender, 0) + cell.article_count
        year_counts[cell.year] = year_counts.get(cell.year, 0) + cell.article_count
        stats = subclass_stats.setdefault(cell.subclass, [0, 0, 0])
        stats[0] += cell.article_count
        stats[1] += cell.age_sum
        stats[2] += cell.age_sample_size
    return {
        "genders": [
            {"gender": gender, "count": count}
            for gender, count in sorted(
                gender_counts.items(), key=lambda item: (-item[1], item[0])
            )
        ],
        "years": [
            {"year": year, "count": count}
            for year, count in sorted(year_counts.items())
        ],
        "subclasses": [
            {
                "subclass": subclass,
                "count": stats[0],
                "avg_age": round_half_up(stats[1] / stats[2]) if stats[2] else None,
            }
            for subclass, stats in sorted(
                subclass_stats.items(), key=lambda item: (-item[1][0], item[0])
            )
        ],
    }


# -- persistence ---------------------------------------------------------


def _format_avg(value: float | None) -> str:
    if value is None:
        return ""
    return f"{value:.2f}"


def write_cube_csv(path: str | Path, cube: Cube) -> None:
    path = Path(path)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CUBE_CSV_HEADER)
    for cell in cube.cells:
        writer.writerow(
            [
                str(cell.year),
                cell.subclass,
                cell.gender,
                str(cell.article_count),
                _format_avg(cell.avg_age_rounded),
                str(cell.age_sample_size),
            ]
        )
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(buffer.getvalue(), encoding="utf-8")
    os.replace(tmp, path)


def cube_to_json(cube: Cube) -> dict:
    """JSON document for the server; age_sum keeps summaries drift-free."""
    return {
        "cells": [
            {
                "year": cell.year,
                "subclass": cell.subclass,
                "gender": cell.gender,
                "article_count": cell.article_count,
                "avg_age": cell.avg_age_rounded,
                "age_sum": cell.age_sum,
                "age_sample_size": cell.age_sample_size,
            }
            for cell in cube.cells
        ]
    }


def cube_from_json(document: dict) -> Cube:
    return Cube(
        AggregateCell(
            year=cell["year"],
            subclass=cell["subclass"],
            gender=cell["gender"],
            article_count=cell["article_count"],
            age_sum=cell["age_sum"],
            age_sample_size=cell["age_sample_size"],
        )
        for cell in document["cells"]
    )


def write_cube_json(path: str | Path, cube: Cube) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(cube_to_json(cube), indent=1) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def read_cube_json(path: str | Path) -> Cube:
    return cube_from_json(json.loads(Path(path).read_text(encoding="utf-8")))
