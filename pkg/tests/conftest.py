import pytest

from wgd.client import EndpointClient, EndpointConfig, EndpointKind, RetryPolicy

from fixture_world import FixturePerson, FixtureServers, FixtureWorld

FAST_RETRY = RetryPolicy(max_attempts=3, base_backoff_ms=1, jitter_ratio=0.0)


def small_world() -> FixtureWorld:
    """Two real subclasses plus the excluded one, with every enrichment and
    repair path represented."""
    return FixtureWorld(
        ontology_subclasses=["Athlete", "Judge", "OrganizationMember", "Athlete"],
        persons={
            "Athlete": [
                FixturePerson("Alice Runner", qid="Q1", age=30, birth_year=1994),
                FixturePerson("Bob Jumper", qid="Q2", age=-5, birth_year=1990),
                FixturePerson("Carol Swift", qid=None, age=40, birth_year=1984),
            ],
            "Judge": [
                FixturePerson("Alice Runner", qid="Q1", age=30, birth_year=1994),
                FixturePerson("Dan Law", qid="Q3", age=4431, birth_year=1900),
            ],
            "OrganizationMember": [
                FixturePerson("Zed Org", qid="Q9"),
            ],
        },
        genders={"Q1": "female", "Q2": "male"},
        entity_names={"Q1": "Alice Runner", "Q2": "Bob Jumper", "Q3": "Dan Law"},
        entity_years={"Q2": (1990, None), "Q3": (1900, 1960)},
        creation_years={
            "Alice Runner": 2004,
            "Bob Jumper": 2007,
            "Dan Law": 2010,
        },
    )


@pytest.fixture
def world() -> FixtureWorld:
    return small_world()


@pytest.fixture
def servers(world):
    fixture_servers = FixtureServers(world)
    yield fixture_servers
    fixture_servers.close()


def make_client(
    url: str,
    kind: EndpointKind = EndpointKind.DBPEDIA_LIKE,
    retry: RetryPolicy = FAST_RETRY,
    **config_overrides,
) -> EndpointClient:
    config_overrides.setdefault("timeout_seconds", 5.0)
    endpoint = EndpointConfig(base_url=url, kind=kind, **config_overrides)
    return EndpointClient(endpoint, retry=retry)


@pytest.fixture
def dbpedia_client(servers):
    client = make_client(servers.dbpedia.url)
    yield client
    client.close()


@pytest.fixture
def wikidata_client(servers):
    client = make_client(
        servers.wikidata.url, kind=EndpointKind.WIKIDATA_LIKE, sort_cap=None
    )
    yield client
    client.close()


@pytest.fixture
def wikipedia_client(servers):
    client = make_client(servers.wikipedia.url, kind=EndpointKind.WIKI_REST)
    yield client
    client.close()
