import pathlib
import sys

import pytest

SRC = pathlib.Path(__file__).resolve().parents[1] / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from kingraph.relations import CompositionTable  # noqa: E402

TABLE_PATH = SRC / "kingraph" / "data" / "composition_table.txt"


@pytest.fixture(scope="session")
def table() -> CompositionTable:
    return CompositionTable.load(TABLE_PATH)
