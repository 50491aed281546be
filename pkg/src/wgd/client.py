"""Resilient client for SPARQL SELECT endpoints and the wiki revisions API.

Public SPARQL endpoints impose hard limits: a row cap per response, a sort
cap (the largest OFFSET reachable with ORDER BY) and a server-side runtime
cap. This client hides all of that behind three ideas:

* ``execute_select``: one SELECT with retry/backoff and rate spacing,
* ``paged_select``: OFFSET paging below the sort cap, keyed-subquery
  paging past it, yielding the complete result set exactly once,
* single-entity lookups (``fetch_entity_gender``), so each query stays far
  below the runtime cap instead of fighting it with client timeouts.

Endpoint URLs come from flags or the WGD_DBPEDIA_ENDPOINT,
WGD_WIKIDATA_ENDPOINT and WGD_WIKIPEDIA_API environment variables.
"""

from __future__ import annotations

import enum
import json
import logging
import os
import random
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Iterator

import httpx

logger = logging.getLogger(__name__)

DEFAULT_DBPEDIA_ENDPOINT = "https://dbpedia.org/sparql"
DEFAULT_WIKIDATA_ENDPOINT = "https://query.wikidata.org/sparql"
DEFAULT_WIKIPEDIA_API = "https://en.wikipedia.org/w/api.php"

SPARQL_RESULTS_JSON = "application/sparql-results+json"
DEFAULT_USER_AGENT = "wgd/0.1 (gender-dashboard pipeline)"

# Single-entity gender lookup; {qid} is the only slot. The exact property
# path is configuration, not contract: override via EndpointClient.
GENDER_QUERY_TEMPLATE = """\
SELECT ?genderLabel WHERE {{
  wd:{qid} wdt:P21 ?gender .
  ?gender rdfs:label ?genderLabel .
  FILTER(LANG(?genderLabel) = "en")
}}
LIMIT 1
"""


class EndpointKind(enum.Enum):
    DBPEDIA_LIKE = "dbpedia_like"
    WIKIDATA_LIKE = "wikidata_like"
    WIKI_REST = "wiki_rest"


class ErrorClass(enum.Enum):
    TIMEOUT = "timeout"
    RATE_LIMITED = "rate_limited"
    SERVER_ERROR = "server_error"
    NETWORK = "network"


ALL_RETRYABLE = frozenset(ErrorClass)


class ClientError(Exception):
    """Base class for client-layer failures."""


class NonRetryableQueryError(ClientError):
    """The endpoint rejected the query itself; retrying cannot help."""


class RetriesExhausted(ClientError):
    """Transient failures persisted through every allowed attempt."""

    def __init__(self, message: str, attempts: int, last_error: ErrorClass):
        super().__init__(message)
        self.attempts = attempts
        self.last_error = last_error


class ParseError(ClientError):
    """Response body is not in the standard SPARQL JSON results shape."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class CapStrategyError(ClientError):
    """The query template cannot page past the sort cap (no key slot)."""


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    kind: EndpointKind
    row_limit: int = 10_000
    sort_cap: int | None = 40_000
    runtime_cap_seconds: int | None = None
    min_request_interval_ms: int = 0
    max_in_flight: int = 4
    timeout_seconds: float = 90.0
    user_agent: str = DEFAULT_USER_AGENT

    def __post_init__(self) -> None:
        if self.row_limit < 1:
            raise ValueError("row_limit must be >= 1")
        if self.sort_cap is not None and self.sort_cap < self.row_limit:
            raise ValueError("sort_cap must be >= row_limit")
        if self.min_request_interval_ms < 0:
            raise ValueError("min_request_interval_ms must be >= 0")


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 5
    base_backoff_ms: int = 1000
    backoff_multiplier: float = 2.0
    retryable_classes: frozenset[ErrorClass] = ALL_RETRYABLE
    jitter_ratio: float = 0.2

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.base_backoff_ms < 1:
            raise ValueError("base_backoff_ms must be >= 1")
        if self.backoff_multiplier < 1:
            raise ValueError("backoff_multiplier must be >= 1")

    def backoff_seconds(self, failed_attempt: int, rng: random.Random) -> float:
        """Wait after attempt n (1-based): base * multiplier^(n-1), jittered."""
        base = (self.base_backoff_ms / 1000.0) * (
            self.backoff_multiplier ** (failed_attempt - 1)
        )
        if self.jitter_ratio:
            base *= 1.0 + rng.uniform(-self.jitter_ratio, self.jitter_ratio)
        return base


FAST_RETRY = RetryPolicy(max_attempts=3, base_backoff_ms=1, jitter_ratio=0.0)


@dataclass(frozen=True)
class SelectPage:
    rows: list[dict[str, str]]
    offset: int
    is_last: bool


def parse_select_results(body: bytes) -> list[dict[str, str]]:
    """Parse a SPARQL JSON results document into one map per row.

    Unbound variables are absent from the row's map.
    """
    try:
        document = json.loads(body)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", offset=exc.pos) from None
    if not isinstance(document, dict) or "results" not in document:
        raise ParseError("document has no 'results' member")
    bindings = document["results"].get("bindings")
    if not isinstance(bindings, list):
        raise ParseError("'results.bindings' is not a list")
    rows = []
    for binding in bindings:
        row = {}
        for variable, cell in binding.items():
            if not isinstance(cell, dict) or "value" not in cell:
                raise ParseError(f"binding for {variable!r} has no 'value'")
            row[variable] = cell["value"]
        rows.append(row)
    return rows


def serialize_select_results(rows: list[dict[str, str]]) -> bytes:
    """Inverse of parse_select_results, used by fixtures and round-trip tests."""
    variables = sorted({v for row in rows for v in row})
    document = {
        "head": {"vars": variables},
        "results": {
            "bindings": [
                {v: {"type": "literal", "value": row[v]} for v in row} for row in rows
            ]
        },
    }
    return json.dumps(document).encode("utf-8")


class EndpointLimiter:
    """Serializes request admission per endpoint: minimum spacing between
    consecutive requests plus a bounded in-flight count."""

    def __init__(
        self,
        min_interval_ms: int,
        max_in_flight: int,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self._interval = min_interval_ms / 1000.0
        self._slots = threading.BoundedSemaphore(max(1, max_in_flight))
        self._lock = threading.Lock()
        self._clock = clock
        self._sleep = sleep
        self._next_admission = 0.0

    def __enter__(self):
        self._slots.acquire()
        with self._lock:
            now = self._clock()
            wait = self._next_admission - now
            if wait > 0:
                self._sleep(wait)
                now = self._clock()
            self._next_admission = now + self._interval
        return self

    def __exit__(self, *exc_info):
        self._slots.release()
        return False


def _classify_status(status_code: int) -> ErrorClass | None:
    if status_code == 429:
        return ErrorClass.RATE_LIMITED
    if 500 <= status_code < 600:
        return ErrorClass.SERVER_ERROR
    return None


class EndpointClient:
    """Client for one endpoint. Safe for concurrent use by multiple workers;
    the limiter serializes admission. Returned pages are immutable snapshots.
    """

    def __init__(
        self,
        endpoint: EndpointConfig,
        retry: RetryPolicy | None = None,
        gender_query_template: str = GENDER_QUERY_TEMPLATE,
        sleep: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
        before_request: Callable[[], None] | None = None,
    ):
        self.endpoint = endpoint
        self.retry = retry or RetryPolicy()
        self.gender_query_template = gender_query_template
        self._sleep = sleep
        self._rng = rng or random.Random()
        self._before_request = before_request
        self._limiter = EndpointLimiter(
            endpoint.min_request_interval_ms, endpoint.max_in_flight, sleep=sleep
        )
        self._http = httpx.Client(timeout=endpoint.timeout_seconds)

    def close(self) -> None:
        self._http.close()

    def __enter__(self) -> "EndpointClient":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    # -- transport ---------------------------------------------------------

    def _request_once(self, method: str, url: str, **kwargs) -> httpx.Response:
        if self._before_request is not None:
            self._before_request()
        with self._limiter:
            return self._http.request(method, url, **kwargs)

    def _request_with_retry(
        self, retry: RetryPolicy, method: str, url: str, **kwargs
    ) -> httpx.Response:
        attempts = 0
        last_error: ErrorClass | None = None
        while True:
            attempts += 1
            error: ErrorClass | None = None
            try:
                response = self._request_once(method, url, **kwargs)
            except httpx.TimeoutException:
                error = ErrorClass.TIMEOUT
            except httpx.HTTPError:
                error = ErrorClass.NETWORK
            else:
                error = _classify_status(response.status_code)
                if error is None:
                    if 400 <= response.status_code < 500:
                        raise NonRetryableQueryError(
                            f"endpoint rejected request with HTTP "
                            f"{response.status_code}: {response.text[:200]}"
                        )
                    return response
            last_error = error
            if error not in retry.retryable_classes or attempts >= retry.max_attempts:
                raise RetriesExhausted(
                    f"{error.value} persisted after {attempts} attempt(s) to {url}",
                    attempts=attempts,
                    last_error=error,
                )
            wait = retry.backoff_seconds(attempts, self._rng)
            logger.warning(
                "attempt %d/%d failed (%s); retrying in %.3fs",
                attempts,
                retry.max_attempts,
                error.value,
                wait,
            )
            self._sleep(wait)

    # -- SPARQL ------------------------------------------------------------

    def execute_select(self, query: str, retry: RetryPolicy | None = None) -> SelectPage:
        """Run one SELECT, retrying transient failures, and parse the page.

        offset / is_last are derived from the query's own OFFSET and LIMIT
        clauses; a query without LIMIT is a single (last) page.
        """
        response = self._request_with_retry(
            retry or self.retry,
            "POST",
            self.endpoint.base_url,
            data={"query": query},
            headers={
                "Accept": SPARQL_RESULTS_JSON,
                "User-Agent": self.endpoint.user_agent,
            },
        )
        rows = parse_select_results(response.content)
        offset = _extract_clause(query, "OFFSET") or 0
        limit = _extract_clause(query, "LIMIT")
        is_last = True if limit is None else len(rows) < limit
        return SelectPage(rows=rows, offset=offset, is_last=is_last)

    def paged_select(
        self,
        query_template: str,
        page_size: int,
        key_var: str,
        retry: RetryPolicy | None = None,
    ) -> Iterator[SelectPage]:
        """Stream the full result set of an ordered template.

        The template must expose ``{limit}``, ``{offset}`` and ``{after}``
        slots and order by ``key_var``, whose values must be distinct so
        pages partition the result set. Plain OFFSET pages are used while
        the next page stays within the endpoint's sort cap; past it, pages
        are keyed strictly after the last seen ``key_var`` value.
        """
        if page_size < 1 or page_size > self.endpoint.row_limit:
            raise ValueError("page_size must be in [1, row_limit]")
        sort_cap = self.endpoint.sort_cap
        offset = 0
        last_key: str | None = None
        while sort_cap is None or offset + page_size <= sort_cap:
            page = self.execute_select(
                query_template.format(limit=page_size, offset=offset, after=""),
                retry=retry,
            )
            yield page
            if page.is_last:
                return
            last_key = page.rows[-1].get(key_var)
            offset += page_size

        if "{after}" not in query_template:
            raise CapStrategyError(
                "sort cap reached and template has no {after} slot for keyed paging"
            )
        # Every non-last OFFSET page is full, so last_key is bound here.
        if last_key is None:
            raise CapStrategyError(f"rows do not bind key variable {key_var!r}")
        while True:
            page = self.execute_select(
                query_template.format(
                    limit=page_size, offset=0, after=_after_filter(key_var, last_key)
                ),
                retry=retry,
            )
            yield SelectPage(rows=page.rows, offset=offset, is_last=page.is_last)
            if page.is_last:
                return
            last_key = page.rows[-1].get(key_var)
            if last_key is None:
                raise CapStrategyError(f"rows do not bind key variable {key_var!r}")
            offset += page_size

    def fetch_entity_gender(
        self, entity_id: str, retry: RetryPolicy | None = None
    ) -> str | None:
        """Return the English gender label for one entity, or None.

        A single-entity query keeps the per-query runtime far below the
        endpoint's runtime cap.
        """
        if not entity_id or not entity_id.startswith("Q") or not entity_id[1:].isdigit():
            raise ValueError(f"entity id {entity_id!r} is not a Q-id")
        page = self.execute_select(
            self.gender_query_template.format(qid=entity_id), retry=retry
        )
        if not page.rows:
            return None
        return page.rows[0].get("genderLabel")

    # -- wiki REST ---------------------------------------------------------

    def fetch_creation_year(
        self, article_title: str, retry: RetryPolicy | None = None
    ) -> int | None:
        """Year of the article's earliest revision, or None if it does not exist.

        Titles are normalized the wiki way (spaces become underscores).
        """
        if not article_title:
            raise ValueError("article_title must be non-empty")
        response = self._request_with_retry(
            retry or self.retry,
            "GET",
            self.endpoint.base_url,
            params={
                "action": "query",
                "prop": "revisions",
                "titles": article_title.replace(" ", "_"),
                "rvlimit": 1,
                "rvdir": "newer",
                "rvprop": "timestamp",
                "format": "json",
            },
            headers={"User-Agent": self.endpoint.user_agent},
        )
        try:
            pages = response.json()["query"]["pages"]
        except (json.JSONDecodeError, KeyError) as exc:
            raise ParseError(f"unexpected revisions payload: {exc}") from None
        for page in pages.values():
            if "missing" in page:
                return None
            revisions = page.get("revisions")
            if revisions:
                timestamp = revisions[0]["timestamp"]
                return int(timestamp[:4])
        return None


def _extract_clause(query: str, keyword: str) -> int | None:
    """Pull the integer argument of a LIMIT/OFFSET clause out of a query."""
    upper = query.upper()
    position = upper.rfind(keyword)
    if position < 0:
        return None
    rest = query[position + len(keyword) :].split()
    if not rest or not rest[0].isdigit():
        return None
    return int(rest[0])


def _after_filter(key_var: str, last_key: str | None) -> str:
    if last_key is None:
        return ""
    escaped = last_key.replace("\\", "\\\\").replace('"', '\\"')
    return f'FILTER(STR(?{key_var}) > "{escaped}")'


def endpoint_from_env(
    kind: EndpointKind,
    url: str | None = None,
    **overrides,
) -> EndpointConfig:
    """Build an EndpointConfig from an explicit URL or the environment."""
    env_vars = {
        EndpointKind.DBPEDIA_LIKE: ("WGD_DBPEDIA_ENDPOINT", DEFAULT_DBPEDIA_ENDPOINT),
        EndpointKind.WIKIDATA_LIKE: ("WGD_WIKIDATA_ENDPOINT", DEFAULT_WIKIDATA_ENDPOINT),
        EndpointKind.WIKI_REST: ("WGD_WIKIPEDIA_API", DEFAULT_WIKIPEDIA_API),
    }
    variable, default = env_vars[kind]
    base_url = url or os.environ.get(variable) or default
    if kind is EndpointKind.WIKIDATA_LIKE:
        overrides.setdefault("sort_cap", None)
        overrides.setdefault("runtime_cap_seconds", 60)
    return EndpointConfig(base_url=base_url, kind=kind, **overrides)
