"""Local fixture endpoints for tests: a DBpedia-like SPARQL server, a
Wikidata-like SPARQL server and a MediaWiki-style revisions API.

The servers understand exactly the query shapes the package emits (they
regex out the subclass, LIMIT/OFFSET, the keyed-paging filter, the Q-id),
enforce row limits and the sort cap like the public endpoints do, log every
request with a monotonic timestamp, and can be scripted to fail.
"""

from __future__ import annotations

import json
import re
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from wgd.client import serialize_select_results


@dataclass(frozen=True)
class FixturePerson:
    instance: str
    qid: str | None = None
    age: int | None = None
    birth_year: int | None = None


@dataclass
class FixtureWorld:
    # Raw ontology declarations; may contain duplicates and excluded names.
    ontology_subclasses: list[str] = field(default_factory=list)
    persons: dict[str, list[FixturePerson]] = field(default_factory=dict)
    genders: dict[str, str] = field(default_factory=dict)
    entity_names: dict[str, str] = field(default_factory=dict)
    entity_years: dict[str, tuple[int | None, int | None]] = field(default_factory=dict)
    creation_years: dict[str, int] = field(default_factory=dict)


@dataclass
class LoggedRequest:
    monotonic: float
    method: str
    path: str
    query: str
    user_agent: str


AFTER_FILTER_RE = re.compile(r'FILTER\(STR\(\?instance\) > "((?:[^"\\]|\\.)*)"\)')
SUBCLASS_RE = re.compile(r"a dbo:(\w+)")
QID_RE = re.compile(r"wd:(Q\d+)")
LIMIT_RE = re.compile(r"LIMIT (\d+)")
OFFSET_RE = re.compile(r"OFFSET (\d+)")


def _unescape(value: str) -> str:
    return value.replace('\\"', '"').replace("\\\\", "\\")


class _QuietServer(ThreadingHTTPServer):
    daemon_threads = True

    def handle_error(self, request, client_address) -> None:
        # Scripted timeouts leave half-closed sockets behind; not an error.
        pass


class _Endpoint:
    """One scripted HTTP server plus its request log."""

    def __init__(self, handler_cls):
        self.log: list[LoggedRequest] = []
        self.script: deque[dict] = deque()
        self.active = 0
        self.max_active = 0
        self._lock = threading.Lock()
        self.server = _QuietServer(("127.0.0.1", 0), handler_cls)
        self.server.endpoint = self  # type: ignore[attr-defined]
        self._thread = threading.Thread(
            target=lambda: self.server.serve_forever(poll_interval=0.02), daemon=True
        )
        self._thread.start()

    @property
    def url(self) -> str:
        host, port = self.server.server_address[:2]
        return f"http://{host}:{port}"

    def record(self, request: LoggedRequest) -> None:
        with self._lock:
            self.log.append(request)

    def enter(self) -> None:
        with self._lock:
            self.active += 1
            self.max_active = max(self.max_active, self.active)

    def leave(self) -> None:
        with self._lock:
            self.active -= 1

    def next_directive(self) -> dict | None:
        with self._lock:
            return self.script.popleft() if self.script else None

    def fail_next(self, *directives: dict) -> None:
        with self._lock:
            self.script.extend(directives)

    def close(self) -> None:
        self.server.shutdown()
        self.server.server_close()
        self._thread.join(timeout=5)


class _BaseHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, *args) -> None:
        pass

    @property
    def fixture(self) -> "_Endpoint":
        return self.server.endpoint  # type: ignore[attr-defined]

    @property
    def world(self) -> FixtureWorld:
        return self.server.world  # type: ignore[attr-defined]

    def do_POST(self) -> None:
        self.fixture.enter()
        try:
            self.handle_post()
        finally:
            self.fixture.leave()

    def do_GET(self) -> None:
        self.fixture.enter()
        try:
            self.handle_get()
        finally:
            self.fixture.leave()

    def handle_post(self) -> None:  # pragma: no cover - overridden
        self._send_error_text(405, "POST not supported here")

    def handle_get(self) -> None:  # pragma: no cover - overridden
        self._send_error_text(405, "GET not supported here")

    def _log_and_script(self, query: str) -> bool:
        """Record the request; apply a scripted directive. Returns True when
        the directive already answered (or aborted) the request."""
        self.fixture.record(
            LoggedRequest(
                monotonic=time.monotonic(),
                method=self.command,
                path=self.path,
                query=query,
                user_agent=self.headers.get("User-Agent", ""),
            )
        )
        directive = self.fixture.next_directive()
        if directive is None:
            return False
        if "sleep" in directive:
            time.sleep(directive["sleep"])
            if len(directive) == 1:
                return False
        if directive.get("close"):
            self.connection.close()
            return True
        if "status" in directive:
            body = directive.get("body", b"scripted failure")
            self.send_response(directive["status"])
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
            return True
        return False

    def _send_json(self, payload: bytes, status: int = 200) -> None:
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def _send_error_text(self, status: int, message: str) -> None:
        body = message.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "text/plain")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


class _DbpediaHandler(_BaseHandler):
    def handle_post(self) -> None:
        length = int(self.headers.get("Content-Length", "0"))
        form = parse_qs(self.rfile.read(length).decode("utf-8"))
        query = form.get("query", [""])[0]
        if self._log_and_script(query):
            return

        if "rdfs:subClassOf dbo:Person" in query:
            rows = [{"subclass": name} for name in sorted(self.world.ontology_subclasses)]
            self._send_json(serialize_select_results(rows))
            return

        match = SUBCLASS_RE.search(query)
        if not match:
            self._send_error_text(400, "unrecognized query")
            return
        subclass = match.group(1)
        limit_match = LIMIT_RE.search(query)
        limit = int(limit_match.group(1)) if limit_match else None
        offset_match = OFFSET_RE.search(query)
        offset = int(offset_match.group(1)) if offset_match else 0

        row_limit = self.server.row_limit  # type: ignore[attr-defined]
        sort_cap = self.server.sort_cap  # type: ignore[attr-defined]
        effective_limit = min(limit or row_limit, row_limit)
        if "ORDER BY" in query and sort_cap is not None:
            if offset + effective_limit > sort_cap:
                self._send_error_text(400, "ORDER BY beyond the sorting cap")
                return

        persons = sorted(
            self.world.persons.get(subclass, []), key=lambda p: p.instance
        )
        after_match = AFTER_FILTER_RE.search(query)
        if after_match:
            after_key = _unescape(after_match.group(1))
            persons = [p for p in persons if p.instance > after_key]
        persons = persons[offset : offset + effective_limit]

        rows = []
        for person in persons:
            row = {"instance": person.instance}
            if person.qid is not None:
                row["wikiDataID"] = f"http://www.wikidata.org/entity/{person.qid}"
            if person.age is not None:
                row["age"] = str(person.age)
            if person.birth_year is not None:
                row["birthYear"] = str(person.birth_year)
            rows.append(row)
        self._send_json(serialize_select_results(rows))


class _WikidataHandler(_BaseHandler):
    def handle_post(self) -> None:
        length = int(self.headers.get("Content-Length", "0"))
        form = parse_qs(self.rfile.read(length).decode("utf-8"))
        query = form.get("query", [""])[0]
        if self._log_and_script(query):
            return

        qid_match = QID_RE.search(query)
        if not qid_match:
            self._send_error_text(400, "no entity in query")
            return
        qid = qid_match.group(1)

        if "genderLabel" in query:
            label = self.world.genders.get(qid)
            rows = [{"genderLabel": label}] if label is not None else []
            self._send_json(serialize_select_results(rows))
            return
        if "P569" in query:
            years = self.world.entity_years.get(qid)
            row: dict[str, str] = {}
            if years is not None:
                if years[0] is not None:
                    row["birthYear"] = f"{years[0]:04d}-01-01T00:00:00Z"
                if years[1] is not None:
                    row["deathYear"] = f"{years[1]:04d}-01-01T00:00:00Z"
            self._send_json(serialize_select_results([row] if row else []))
            return
        if "?name" in query:
            name = self.world.entity_names.get(qid)
            rows = [{"name": name}] if name is not None else []
            self._send_json(serialize_select_results(rows))
            return
        self._send_error_text(400, "unrecognized query")


class _WikipediaHandler(_BaseHandler):
    def handle_get(self) -> None:
        parsed = urlparse(self.path)
        params = parse_qs(parsed.query)
        if self._log_and_script(parsed.query):
            return
        titles = params.get("titles", [""])[0]
        title = titles.replace("_", " ")
        year = self.world.creation_years.get(title)
        if year is None:
            payload = {"query": {"pages": {"-1": {"title": titles, "missing": ""}}}}
        else:
            payload = {
                "query": {
                    "pages": {
                        "1": {
                            "title": titles,
                            "revisions": [
                                {"timestamp": f"{year:04d}-07-13T10:00:00Z"}
                            ],
                        }
                    }
                }
            }
        self._send_json(json.dumps(payload).encode("utf-8"))


class FixtureServers:
    """The three endpoints wired to one FixtureWorld."""

    def __init__(
        self,
        world: FixtureWorld,
        row_limit: int = 10_000,
        sort_cap: int | None = 40_000,
    ):
        self.world = world
        self.dbpedia = _Endpoint(_DbpediaHandler)
        self.wikidata = _Endpoint(_WikidataHandler)
        self.wikipedia = _Endpoint(_WikipediaHandler)
        for endpoint in (self.dbpedia, self.wikidata, self.wikipedia):
            endpoint.server.world = world  # type: ignore[attr-defined]
        self.dbpedia.server.row_limit = row_limit  # type: ignore[attr-defined]
        self.dbpedia.server.sort_cap = sort_cap  # type: ignore[attr-defined]
        self.wikidata.server.row_limit = row_limit  # type: ignore[attr-defined]
        self.wikidata.server.sort_cap = None  # type: ignore[attr-defined]

    def close(self) -> None:
        for endpoint in (self.dbpedia, self.wikidata, self.wikipedia):
            endpoint.close()
