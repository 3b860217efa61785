from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import pytest

from nomina.ingest import (AddressResolver, CategoryCompatibility, Registry, load_address_vocabulary,
                           load_category_map, parse_publications, parse_registry)
from nomina.model import Publication
from nomina.reports import TruthPair, read_truth_csv

FIXTURES = Path(__file__).parent / "fixtures"
WORKED = FIXTURES / "worked_example"
WORKED_PUB = "PRB-69-045412"


@dataclass
class Corpus:
    publications: list[Publication]
    registry: Registry
    resolver: AddressResolver
    compat: CategoryCompatibility
    truth: list[TruthPair]


def load_worked_example() -> Corpus:
    pubs, _ = parse_publications(WORKED / "publications.csv")
    return Corpus(pubs, parse_registry(WORKED / "registry.csv"),
                  AddressResolver(load_address_vocabulary(WORKED / "vocabulary.csv")),
                  load_category_map(WORKED / "category_map.csv"),
                  read_truth_csv(WORKED / "truth.csv"))


@pytest.fixture
def worked() -> Corpus:
    return load_worked_example()


def worked_paths() -> dict[str, Path]:
    return {"publications": WORKED / "publications.csv", "registry": WORKED / "registry.csv",
            "vocabulary": WORKED / "vocabulary.csv", "category_map": WORKED / "category_map.csv"}


def run_args(paths: dict[str, Path], out: Path, *extra: str) -> list[str]:
    return ["run", "--publications", str(paths["publications"]), "--registry", str(paths["registry"]),
            "--vocabulary", str(paths["vocabulary"]), "--category-map", str(paths["category_map"]),
            "--output-dir", str(out), *extra]


# -- acceptance reporting ---------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


class AcceptanceRecorder:
    def __init__(self, criterion: str):
        self.criterion = criterion

    def check(self, passed: bool, detail: str) -> None:
        """Record one pass/fail line for this criterion, then fail the test if needed."""
        ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {self.criterion}: {detail}")
        assert passed, detail


@pytest.fixture
def acceptance(request) -> AcceptanceRecorder:
    marker = request.node.get_closest_marker("criterion")
    return AcceptanceRecorder(marker.args[0] if marker else request.node.name)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id): acceptance criterion covered by the test")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
