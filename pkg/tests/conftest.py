import sys
from pathlib import Path

import pytest

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))

from fifocheck.io import load_system  # noqa: E402

CORPUS = HERE.parent / "src" / "fifocheck" / "corpus"


@pytest.fixture(scope="session")
def corpus():
    return CORPUS


@pytest.fixture(scope="session")
def fig1():
    return load_system(CORPUS / "fig1.sys")


@pytest.fixture(scope="session")
def fig3():
    return load_system(CORPUS / "fig3.sys")


@pytest.fixture(scope="session")
def fig4a():
    return load_system(CORPUS / "fig4a.sys")
