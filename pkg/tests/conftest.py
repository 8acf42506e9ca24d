import numpy as np
import pytest

from gridcoherency.coherency import SimilarityMatrix

# lines recorded by test_acceptance, echoed at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def planted_similarity(rng, sizes, within=(0.9, 1.0), cross=(0.0, 0.3), shuffle=True):
    """Random symmetric similarity matrix with a planted block structure."""
    truth = np.repeat(np.arange(len(sizes)), sizes)
    if shuffle:
        rng.shuffle(truth)
    n = truth.size
    same = truth[:, None] == truth[None, :]
    vals = np.where(same, rng.uniform(*within, (n, n)), rng.uniform(*cross, (n, n)))
    vals = np.triu(vals, 1)
    vals = vals + vals.T
    np.fill_diagonal(vals, 1.0)
    S = SimilarityMatrix(bus_ids=[f"b{i}" for i in range(n)], values=vals)
    return S, truth


def random_distance_matrix(rng, n):
    D = rng.uniform(0.0, 1.0, (n, n))
    D = np.triu(D, 1)
    return D + D.T


def same_clustering(a, b):
    """Equal up to renaming of cluster ids (noise = -1 must match exactly)."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape or not np.array_equal(a == -1, b == -1):
        return False
    pairs = set(zip(a.tolist(), b.tolist()))
    return len(pairs) == len(set(a.tolist())) == len(set(b.tolist()))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
