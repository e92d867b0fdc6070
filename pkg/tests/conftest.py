import re

import numpy as np
import pytest

from phidca.core import GFunction, Oracle, Problem
from phidca.couplings import Quadratic

ACCEPTANCE_DETAILS = {}


def one_d(f, fgrad=None, fhess=None, g=None, coupling=None, name="inline"):
    """Small 1-D problem from scalar callables."""
    f_or = Oracle(
        value=lambda x: f(np.asarray(x, dtype=float)[..., 0]),
        grad=None if fgrad is None else (lambda x: np.atleast_1d(fgrad(x[0])).astype(float)),
        hess=None if fhess is None else (lambda x: np.array([[float(fhess(x[0]))]])),
        name=name,
    )
    return Problem(f=f_or, g=g if g is not None else GFunction(1), coupling=coupling or Quadratic(1.0),
                   dim=1, name=name)


@pytest.fixture
def acceptance():
    """Record a detail string for the running acceptance criterion."""

    def record(number, text):
        ACCEPTANCE_DETAILS[number] = text

    return record


def pytest_terminal_summary(terminalreporter):
    outcomes = {}
    for key in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            m = re.search(r"test_acceptance\.py::test_criterion_(\d+)", getattr(rep, "nodeid", ""))
            if m and (rep.when == "call" or key == "error"):
                n = int(m.group(1))
                ok = key == "passed"
                outcomes[n] = outcomes.get(n, True) and ok
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 11):
        if n not in outcomes:
            continue
        status = "PASS" if outcomes[n] else "FAIL"
        detail = ACCEPTANCE_DETAILS.get(n, "")
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {detail}")
