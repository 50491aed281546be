import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from wgd.aggregator import build_cube, write_cube_csv, write_cube_json
from wgd.records import write_records_csv
from wgd.server import create_app
from wgd.snapshot import SnapshotError, build_snapshot, load_snapshot

from datagen import dashboard_records


@pytest.fixture(scope="module")
def snapshot_dir(tmp_path_factory):
    base = tmp_path_factory.mktemp("snapshot")
    records = dashboard_records()
    write_records_csv(base / "clean.csv", records)
    cube = build_cube(records)
    write_cube_csv(base / "cube.csv", cube)
    write_cube_json(base / "cube.json", cube)
    (base / "report.json").write_text('{"stages": []}\n', encoding="utf-8")
    build_snapshot(
        base / "snapshot.json",
        clean_csv=base / "clean.csv",
        cube_csv=base / "cube.csv",
        cube_json=base / "cube.json",
        report_json=base / "report.json",
    )
    return base


@pytest.fixture(scope="module")
def client(snapshot_dir):
    snapshot = load_snapshot(snapshot_dir / "snapshot.json")
    app = create_app(snapshot)
    with TestClient(app) as test_client:
        yield test_client


def test_subclasses_listing(client):
    assert client.get("/api/subclasses").json() == [
        "Artist",
        "Athlete",
        "BeautyQueen",
        "Judge",
        "Youtuber",
    ]


def test_summary_whole_dataset(client):
    response = client.get("/api/summary")
    assert response.status_code == 200
    body = response.json()
    assert body["article_count"] == 300
    shares = {s["gender"]: s["percent"] for s in body["gender_distribution"]}
    assert shares["female"] == 17.0


def test_summary_subclass_filter(client):
    body = client.get("/api/summary", params={"subclass": "BeautyQueen"}).json()
    assert body["article_count"] == 12
    assert body["avg_age"] < 40
    top = body["gender_distribution"][0]
    assert top["gender"] == "female" and top["percent"] > 50


def test_summary_year_range(client):
    body = client.get("/api/summary", params={"year_from": 2001, "year_to": 2001}).json()
    assert body["article_count"] == 43


def test_summary_rejects_inverted_year_range(client):
    response = client.get("/api/summary", params={"year_from": 2022, "year_to": 2001})
    assert response.status_code == 400


def test_unknown_subclass_is_404(client):
    assert client.get("/api/summary", params={"subclass": "Nonexistent"}).status_code == 404
    assert client.get(
        "/api/series", params={"gender": "female", "subclass": "Nonexistent"}
    ).status_code == 404


def test_empty_selection_is_422(client):
    response = client.get("/api/summary", params={"year_from": 2002, "year_to": 2003})
    assert response.status_code == 422
    assert "detail" in response.json()


def test_series_trend_endpoints(client):
    body = client.get("/api/series", params={"gender": "female"}).json()
    assert body[0] == {"year": 2001, "count": 3, "percent_of_year": 6.98}
    assert body[-1] == {"year": 2022, "count": 33, "percent_of_year": 23.24}


def test_series_without_gender_is_totals(client):
    body = client.get("/api/series").json()
    assert body == [
        {"year": 2001, "count": 43, "percent_of_year": 100.0},
        {"year": 2010, "count": 115, "percent_of_year": 100.0},
        {"year": 2022, "count": 142, "percent_of_year": 100.0},
    ]


def test_other_genders_view(client):
    body = client.get("/api/other").json()
    assert body["genders"][0] == {"gender": "trans woman", "count": 6}
    artist = next(s for s in body["subclasses"] if s["subclass"] == "Artist")
    assert artist["avg_age"] == 44.82


def test_healthz_reports_snapshot_hash(client, snapshot_dir):
    snapshot = load_snapshot(snapshot_dir / "snapshot.json")
    body = client.get("/healthz").json()
    assert body == {"status": "ok", "snapshot_hash": snapshot.content_hash}


def test_identical_queries_return_identical_bytes(client):
    first = client.get("/api/summary", params={"subclass": "Artist"})
    second = client.get("/api/summary", params={"subclass": "Artist"})
    assert first.content == second.content


def test_no_write_verbs(client):
    assert client.post("/api/summary").status_code == 405
    assert client.delete("/api/subclasses").status_code == 405
    assert client.put("/api/other").status_code == 405


def test_fallback_index_served(client):
    response = client.get("/")
    assert response.status_code == 200
    assert "wgd" in response.text


def test_static_dir_mount(snapshot_dir, tmp_path_factory):
    static = tmp_path_factory.mktemp("static")
    (static / "index.html").write_text("<html><body>dashboard</body></html>")
    snapshot = load_snapshot(snapshot_dir / "snapshot.json")
    app = create_app(snapshot, static_dir=static)
    with TestClient(app) as test_client:
        response = test_client.get("/")
        assert response.status_code == 200
        assert "dashboard" in response.text


FRONTEND_DIST = Path(__file__).parent.parent / "frontend" / "dist"


@pytest.mark.skipif(not FRONTEND_DIST.exists(), reason="frontend not built")
def test_built_dashboard_served_at_root(snapshot_dir):
    snapshot = load_snapshot(snapshot_dir / "snapshot.json")
    app = create_app(snapshot, static_dir=FRONTEND_DIST)
    with TestClient(app) as test_client:
        index = test_client.get("/")
        assert index.status_code == 200
        assert "Wikipedia gender dashboard" in index.text
        script = test_client.get("/main.js")
        assert script.status_code == 200
        assert "setFilter" in script.text or "Dashboard" in script.text
        # API still reachable alongside the static mount.
        assert test_client.get("/api/subclasses").status_code == 200


def test_tampered_snapshot_refused(snapshot_dir, tmp_path):
    snapshot_file = tmp_path / "snapshot.json"
    document = json.loads((snapshot_dir / "snapshot.json").read_text())
    for key in ("clean_csv", "cube_csv", "cube_json", "report_json"):
        document[key] = str(snapshot_dir / document[key])
    snapshot_file.write_text(json.dumps(document))
    load_snapshot(snapshot_file)  # sanity: absolute-path variant verifies

    document["content_hash"] = "0" * 64
    snapshot_file.write_text(json.dumps(document))
    with pytest.raises(SnapshotError):
        load_snapshot(snapshot_file)
