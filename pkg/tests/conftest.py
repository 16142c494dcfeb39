import os
import time

import numpy as np
import pytest
from hypothesis import settings

from groupteach.config import StudyConfig
from groupteach.mdp import GridEnvironment, normalize
from groupteach.study import build_domain, run_study

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

W_STAR = normalize((-3.0, 3.5, -1.0))

# lines printed again at the end of the run, whatever pytest captured
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def report():
    def emit(k: int, passed: bool, detail: str):
        line = f"CRITERION {k}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return passed
    return emit


@pytest.fixture(scope="session")
def w_star():
    return W_STAR.copy()


@pytest.fixture(scope="session")
def small_config():
    return StudyConfig(n_particles=200, pool_size=24, replicates=1)


@pytest.fixture(scope="session")
def small_domain(small_config):
    return build_domain(small_config)


@pytest.fixture(scope="session")
def default_domain():
    return build_domain(StudyConfig())


@pytest.fixture(scope="session")
def full_study(default_domain):
    """The default 300-session study, run once per test session."""
    t = time.perf_counter()
    records = run_study(default_domain.config, domain=default_domain, parallel=os.cpu_count() or 1)
    return records, time.perf_counter() - t


def random_env(rng, max_w=4, max_h=4, gamma=0.95) -> GridEnvironment:
    w, h = int(rng.integers(1, max_w + 1)), int(rng.integers(1, max_h + 1))
    if w * h < 2:
        w = 2
    cells = [(x, y) for x in range(w) for y in range(h)]
    a, b = rng.choice(len(cells), size=2, replace=False)
    free = [c for i, c in enumerate(cells) if i not in (a, b)]
    rng.shuffle(free)
    charger = free.pop() if free and rng.random() < 0.5 else None
    k = int(rng.integers(0, len(free) // 2 + 1)) if free else 0
    return GridEnvironment(w, h, cells[a], cells[b], rubble=free[:k], charger=charger, gamma=gamma)


def unit_vectors(rng, n):
    g = rng.standard_normal((n, 3))
    return g / np.linalg.norm(g, axis=1, keepdims=True)
