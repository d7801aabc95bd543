import os
import time

import pytest

from gaitscreen import synth
from gaitscreen.config import RunConfig

# 10 healthy and 10 lame cows spread over the four lame scores
SMALL_COUNTS = {1: 10, 2: 3, 3: 3, 4: 2, 5: 2}
N_FILES = 5


def run_config():
    return RunConfig(jobs=int(os.environ.get("GAITSCREEN_JOBS", "0")) or None)


def _dataset(tmp_path_factory, name, spec, counts=SMALL_COUNTS, n_files=N_FILES):
    """Generate once per session; returns (directory, manifest, seconds spent)."""
    start = time.perf_counter()
    out = tmp_path_factory.mktemp(name)
    manifest = synth.gen_dataset(counts, spec, out, n_files=n_files)
    return out, manifest, time.perf_counter() - start


@pytest.fixture(scope="session")
def easy_dataset(tmp_path_factory):
    return _dataset(tmp_path_factory, "easy", synth.preset("easy", seed=0))


@pytest.fixture(scope="session")
def null_dataset(tmp_path_factory):
    return _dataset(tmp_path_factory, "null", synth.preset("null", seed=0))


@pytest.fixture(scope="session")
def gyro_dataset(tmp_path_factory):
    return _dataset(tmp_path_factory, "gyro", synth.preset("easy", seed=0, informative_groups=("gyro",)))


# acceptance criteria report ------------------------------------------------

ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def record_criterion():
    """Store the one-line verdict of an acceptance criterion."""

    def record(number, title, passed, detail, seconds, limit):
        within = seconds < limit
        verdict = "PASS" if passed and within else "FAIL"
        line = f"criterion {number:>2} {verdict}  {title}: {detail} ({seconds:.2f} s, limit {limit:g} s)"
        ACCEPTANCE[number] = line
        print(line)
        return passed and within

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])


@pytest.fixture(scope="session")
def easy_table(easy_dataset):
    from gaitscreen.evaluation import FeatureTable

    return FeatureTable.from_manifest(easy_dataset[1], run_config())
