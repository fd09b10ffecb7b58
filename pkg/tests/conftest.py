import numpy as np
import pytest
from hypothesis import settings

from matrixldp.kernel import StepKernel

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

_ACCEPTANCE = {}


def random_symmetric(rng, m, scale=1.0):
    a = rng.normal(scale=scale, size=(m, m))
    return np.triu(a) + np.triu(a, 1).T


def random_kernel(rng, m, scale=1.0, uniform=True):
    v = random_symmetric(rng, m, scale)
    if uniform:
        return StepKernel.uniform(v)
    cuts = np.sort(rng.uniform(0.02, 0.98, m - 1))
    while np.any(np.diff(np.concatenate([[0], cuts, [1]])) < 1e-3):
        cuts = np.sort(rng.uniform(0.02, 0.98, m - 1))
    return StepKernel(np.concatenate([[0.0], cuts, [1.0]]), v)


def sign_kernel(rng, m):
    a = rng.choice([-1.0, 1.0], size=(m, m))
    return StepKernel.uniform(np.triu(a) + np.triu(a, 1).T)


@pytest.fixture
def record():
    """Record one acceptance line, printed in the terminal summary."""

    def _record(key, passed, detail):
        _ACCEPTANCE[key] = (passed, detail)
        print(f"{key}: {'PASS' if passed else 'FAIL'} {detail}")

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: int(k[1:])):
        passed, detail = _ACCEPTANCE[key]
        terminalreporter.write_line(f"{key}: {'PASS' if passed else 'FAIL'}  {detail}")
