import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from proxyauction.generators import standard_corpus, truthfulness_corpus


@pytest.fixture(scope="session")
def corpus():
    return standard_corpus()


@pytest.fixture(scope="session")
def truthful_corpus():
    return truthfulness_corpus()
