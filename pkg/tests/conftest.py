import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lorentz_bm.causal import FiniteCausalSpace
from lorentz_bm.measures import DiscreteMeasure

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("thorough", max_examples=400, deadline=None)
settings.load_profile("default")

NEG = -math.inf


@pytest.fixture
def two_by_two():
    """Points a, b in the past of c, d with ell block [[2, 1], [1, 2]]."""
    ell = np.full((4, 4), NEG)
    np.fill_diagonal(ell, 0.0)
    ell[0, 2], ell[0, 3], ell[1, 2], ell[1, 3] = 2.0, 1.0, 1.0, 2.0
    space = FiniteCausalSpace(np.ones(4), ell, labels=["a", "b", "c", "d"])
    mu = DiscreteMeasure(space, [0.5, 0.5, 0, 0])
    nu = DiscreteMeasure(space, [0, 0, 0.5, 0.5])
    return space, mu, nu


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one summary line per acceptance criterion; returns ``record(n, name, ok, detail)``."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number, name, ok, detail=""):
        line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        lines.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
