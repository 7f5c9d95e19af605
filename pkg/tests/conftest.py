import numpy as np
import pytest
from hypothesis import strategies as st

from dagconv.dag import new_dag

# 7-node worked example, 1-indexed edges child <- parent shifted to 0-indexed (target, source)
EX7_EDGES = [(2, 0), (3, 0), (3, 1), (4, 1), (5, 0), (6, 3), (6, 4)]


@pytest.fixture
def ex7():
    return new_dag(7, [(i, j, 1.0) for i, j in EX7_EDGES])


def random_dag(rng: np.random.Generator, n: int, p: float = 0.4, signed: bool = True):
    perm = rng.permutation(n)
    edges = []
    for a in range(n):
        for b in range(a):
            if rng.random() < p:
                w = rng.uniform(0.2, 1.2) * (rng.choice([-1.0, 1.0]) if signed else 1.0)
                edges.append((int(perm[a]), int(perm[b]), float(w)))
    return new_dag(n, edges)


@st.composite
def dags(draw, min_n=1, max_n=8):
    n = draw(st.integers(min_n, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    p = draw(st.sampled_from([0.0, 0.2, 0.5, 0.9]))
    return random_dag(np.random.default_rng(seed), n, p)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
