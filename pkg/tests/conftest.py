import logging
from pathlib import Path

import pytest

from plmobs.model import EntityCatalog
from plmobs.pipeline import ingest_lines
from plmobs.store import TraceStore

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

logging.getLogger("plmobs").setLevel(logging.ERROR)


@pytest.fixture
def mini_lines() -> list[str]:
    return (FIXTURES / "mini.log").read_text(encoding="utf-8").splitlines()


@pytest.fixture
def tasks_lines() -> list[str]:
    return (FIXTURES / "tasks.log").read_text(encoding="utf-8").splitlines()


def build_store(lines, path=None, catalog=None) -> TraceStore:
    store = TraceStore(path)
    ingest_lines(store, list(lines), catalog or EntityCatalog())
    return store


@pytest.fixture
def mini_store(mini_lines) -> TraceStore:
    return build_store(mini_lines)


@pytest.fixture
def tasks_store(tasks_lines) -> TraceStore:
    return build_store(tasks_lines)
