from __future__ import annotations

import pytest

from flowequiv.corpus import corpus, fixtures


@pytest.fixture(scope="session")
def fx():
    return fixtures()


@pytest.fixture(scope="session")
def small_corpus():
    return corpus(seeds=range(1, 4), max_edits=3)
