import sys
from pathlib import Path

import pytest
from loguru import logger

from tests.corpus_text import write_corpus

FIXTURES = Path(__file__).resolve().parent / "fixtures"


@pytest.fixture(autouse=True)
def _stable_logging(monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    yield
    logger.remove()
    logger.add(sys.stderr, level="WARNING")


@pytest.fixture
def caplog(caplog):
    """Routes loguru records into pytest's caplog."""
    handler_id = logger.add(caplog.handler, format="{message}", level=0)
    yield caplog
    try:
        logger.remove(handler_id)
    except ValueError:
        pass


@pytest.fixture
def basic_app() -> Path:
    return FIXTURES / "apps" / "fixture.keystore.basic"


@pytest.fixture
def corpus(tmp_path):
    return write_corpus(tmp_path / "corpus")
