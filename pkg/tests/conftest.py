import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from somconsensus.dataset import SyntheticSpec, generate_synthetic  # noqa: E402


@pytest.fixture(scope="session")
def cohort():
    """The default 57 x 3 synthetic cohort with 4 clusters."""
    return generate_synthetic(SyntheticSpec(seed=0))


@pytest.fixture
def tiny_csv(tmp_path):
    def write(text: str) -> Path:
        path = tmp_path / "data.csv"
        path.write_text(text, encoding="utf-8")
        return path
    return write
