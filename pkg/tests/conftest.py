import time

import numpy as np
import pytest

from transversality.constants import KINDS, estimate
from transversality.scene import RadiusSchedule, load_corpus


@pytest.fixture(scope="session")
def corpus():
    return load_corpus()


@pytest.fixture(scope="session")
def default_schedule():
    return RadiusSchedule.geometric(0.5, 0.5, 5, 2000)


@pytest.fixture(scope="session")
def small_schedule():
    return RadiusSchedule.geometric(0.5, 0.5, 3, 300)


class EstimateCache:
    """Lazily computed corpus estimates, shared by every test in the session."""

    def __init__(self, corpus, sched):
        self.corpus, self.sched = corpus, sched
        self._store = {}
        self.seconds = {}

    def get(self, scene_id, kind):
        key = (scene_id, kind)
        if key not in self._store:
            t = time.perf_counter()
            self._store[key] = estimate(kind, self.corpus[scene_id], self.sched)
            self.seconds[key] = time.perf_counter() - t
        return self._store[key]

    def all_kinds(self, scene_id):
        return [self.get(scene_id, k) for k in KINDS]


@pytest.fixture(scope="session")
def corpus_estimates(corpus, default_schedule):
    return EstimateCache(corpus, default_schedule)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def estimate_runs(tmp_path_factory, default_schedule):
    """Full-corpus ``cmd_estimate`` at the default schedule, once per parallelism hint."""
    from transversality.cli import RunManifest, cmd_estimate
    from transversality.scene import corpus_dir

    scenes = tuple(sorted(corpus_dir().glob("*.json")))
    runs = {}
    for jobs in (1, 2):
        out = tmp_path_factory.mktemp(f"estimate_jobs{jobs}")
        code = cmd_estimate(RunManifest(scenes, schedule=default_schedule, out=out, seed=0, jobs=jobs))
        runs[jobs] = (code, out)
    return runs


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line, then assert it."""

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
