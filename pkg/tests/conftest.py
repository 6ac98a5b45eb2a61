import json
from pathlib import Path

import pytest

from timing_triage.config import data_path

TESTS = Path(__file__).parent
FIXTURES = TESTS / "fixtures"
REPO = TESTS.parent
DATASET = REPO / "dataset"


def seed_files() -> list[Path]:
    return sorted(data_path("seeds").glob("*.v"))


def dataset_case_dirs() -> list[Path]:
    ids = json.loads((DATASET / "manifest.json").read_text())["cases"]
    return [DATASET / i for i in ids]


def corpus_sources() -> list[tuple[str, str]]:
    """Every Verilog text shipped with the package or dataset, labelled."""
    from timing_triage.kb import iter_demo_sources, load_and_validate

    out = [(f"seed:{p.name}", p.read_text()) for p in seed_files()]
    out += list(iter_demo_sources(load_and_validate()))
    for d in dataset_case_dirs():
        for which in ("faulty.v", "golden.v"):
            out.append((f"{d.name}:{which}", (d / which).read_text()))
    return out


@pytest.fixture(scope="session")
def kb():
    from timing_triage.kb import load_and_validate

    return load_and_validate()


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES
