import numpy as np
import pytest

from pairstream.dataio import Dataset, Example
from pairstream.rff import MappedExample

ACCEPTANCE: list[tuple[str, str, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{status:4}  {name}: {detail}")


@pytest.fixture
def record():
    """Log one acceptance line, then assert it."""
    def _record(name: str, ok: bool, detail: str):
        status = "PASS" if ok else "FAIL"
        print(f"{status}  {name}: {detail}")
        ACCEPTANCE.append((name, status, detail))
        assert ok, f"{name}: {detail}"
    return _record


@pytest.fixture
def info():
    """Log a non-gating measurement next to the acceptance lines."""
    def _info(name: str, detail: str):
        print(f"INFO  {name}: {detail}")
        ACCEPTANCE.append((name, "INFO", detail))
    return _info


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))


def unit_rows(rng, n, D):
    R = rng.standard_normal((n, D))
    return R / np.linalg.norm(R, axis=1, keepdims=True)


def mapped(r, label, id=0):
    return MappedExample(np.asarray(r, dtype=float), float(label), id)


def toy_dataset(labels, feats=None):
    feats = feats or [{1: float(i + 1)} for i in range(len(labels))]
    return Dataset([Example(f, float(y), i + 1) for i, (f, y) in enumerate(zip(feats, labels))])
