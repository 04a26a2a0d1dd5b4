import pytest

from forge.gateway.fakes import FixtureCorpus


@pytest.fixture(scope="session")
def corpus():
    return FixtureCorpus.load()


@pytest.fixture(scope="session")
def corpus_urls(corpus):
    return sorted(corpus.pages)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(RESULTS):
            terminalreporter.write_line(line)
