import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def power_iteration_norm(A, iters=5000, seed=0):
    """Largest |eigenvalue| of a symmetric matrix by power iteration on A^2.

    Independent of LAPACK's eigensolver; used as an oracle for operator norms.
    """
    A = np.asarray(A, dtype=float)
    x = np.random.default_rng(seed).standard_normal(A.shape[0])
    A2 = A @ A
    for _ in range(iters):
        y = A2 @ x
        nrm = np.linalg.norm(y)
        if nrm == 0:
            return 0.0
        x = y / nrm
    return float(np.sqrt(x @ A2 @ x))


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
