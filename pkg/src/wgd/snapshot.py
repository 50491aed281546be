"""Immutable, hash-pinned bundle of clean data, cube and cleaning report.

The server refuses to serve a snapshot whose files no longer match the
recorded content hash; publishing a new dataset means building a new
snapshot and restarting.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass
from pathlib import Path


class SnapshotError(Exception):
    """Snapshot file missing, unreadable, or hash-mismatched."""


@dataclass(frozen=True)
class DatasetSnapshot:
    clean_csv: Path
    cube_csv: Path
    cube_json: Path
    report_json: Path
    built_at_utc: str
    content_hash: str

    @property
    def files_in_hash_order(self) -> tuple[Path, ...]:
        return (self.clean_csv, self.cube_csv, self.cube_json, self.report_json)


def _hash_files(paths) -> str:
    digest = hashlib.sha256()
    for path in paths:
        digest.update(Path(path).read_bytes())
        digest.update(b"\x00")
    return digest.hexdigest()


def build_snapshot(
    snapshot_path: str | Path,
    clean_csv: str | Path,
    cube_csv: str | Path,
    cube_json: str | Path,
    report_json: str | Path,
) -> DatasetSnapshot:
    """Write snapshot.json next to the data files, with paths stored
    relative to it so the bundle can be moved as a directory."""
    snapshot_path = Path(snapshot_path)
    base = snapshot_path.parent
    files = [Path(p) for p in (clean_csv, cube_csv, cube_json, report_json)]
    snapshot = DatasetSnapshot(
        clean_csv=files[0],
        cube_csv=files[1],
        cube_json=files[2],
        report_json=files[3],
        built_at_utc=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        content_hash=_hash_files(files),
    )
    document = {
        "clean_csv": os.path.relpath(files[0], base),
        "cube_csv": os.path.relpath(files[1], base),
        "cube_json": os.path.relpath(files[2], base),
        "report_json": os.path.relpath(files[3], base),
        "built_at_utc": snapshot.built_at_utc,
        "content_hash": snapshot.content_hash,
    }
    tmp = snapshot_path.with_name(snapshot_path.name + ".tmp")
    tmp.write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")
    os.replace(tmp, snapshot_path)
    return snapshot


def load_snapshot(snapshot_path: str | Path) -> DatasetSnapshot:
    """Load and verify; raises SnapshotError when the hash does not match."""
    snapshot_path = Path(snapshot_path)
    try:
        document = json.loads(snapshot_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SnapshotError(f"cannot read snapshot {snapshot_path}: {exc}") from None
    base = snapshot_path.parent
    try:
        snapshot = DatasetSnapshot(
            clean_csv=base / document["clean_csv"],
            cube_csv=base / document["cube_csv"],
            cube_json=base / document["cube_json"],
            report_json=base / document["report_json"],
            built_at_utc=document["built_at_utc"],
            content_hash=document["content_hash"],
        )
    except KeyError as exc:
        raise SnapshotError(f"snapshot missing field {exc}") from None
    try:
        actual = _hash_files(snapshot.files_in_hash_order)
    except OSError as exc:
        raise SnapshotError(f"snapshot file unreadable: {exc}") from None
    if actual != snapshot.content_hash:
        raise SnapshotError(
            f"snapshot hash mismatch: recorded {snapshot.content_hash}, files {actual}"
        )
    return snapshot
