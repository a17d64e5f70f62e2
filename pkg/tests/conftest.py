import numpy as np
import pytest

_ACCEPTANCE = []


class FixedStream:
    """Stand-in generator returning preset uniforms (for exact noise draws)."""

    def __init__(self, uniforms):
        self._u = list(np.ravel(uniforms))

    def random(self, shape=None):
        n = int(np.prod(shape)) if shape is not None else 1
        out, self._u = self._u[:n], self._u[n:]
        return np.asarray(out).reshape(shape) if shape is not None else out[0]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def report():
    """Record a named acceptance outcome; printed in the terminal summary."""

    def _record(name, passed, detail=""):
        _ACCEPTANCE.append((name, bool(passed), detail))
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {name}  {detail}")
