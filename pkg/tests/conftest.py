import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from satselect.data import FeatureMatrix, RuntimeMatrix  # noqa: E402

ACCEPTANCE_LINES = []


def record_acceptance(number, passed, detail):
    status = {True: "PASS", False: "FAIL", None: "SKIP"}[passed]
    ACCEPTANCE_LINES.append((number, f"criterion {number}: {status}  {detail}"))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.line(line)


@pytest.fixture
def runtime_csv(tmp_path):
    def write(text):
        path = tmp_path / "runtimes.csv"
        path.write_text(text, encoding="utf-8")
        return path
    return write


@pytest.fixture
def small_runtimes():
    return RuntimeMatrix(["a", "b", "c"], ["s1", "s2", "s3"],
                         np.array([[420, 599, 187], [10, 3, 8], [1200, 1200, 1200]], float))


@pytest.fixture
def small_features():
    return FeatureMatrix(["a", "b", "c"], ["f1", "f2"],
                         np.array([[1.0, 2.0], [3.0, np.nan], [5.0, 7.0]]))
