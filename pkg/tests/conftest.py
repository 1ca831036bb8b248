import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ramsey_gf import ramsey  # noqa: E402
from ramsey_gf.trap_chain import CouplingMatrix, TrapParams, j0_scale, solve_chain  # noqa: E402

from oracles import random_couplings  # noqa: E402


def make_couplings(J):
    return CouplingMatrix(J, j0_scale(J))


@pytest.fixture(scope="session")
def chain6():
    return solve_chain(TrapParams(ion_count=6))


@pytest.fixture(scope="session")
def ramped6(chain6):
    return ramsey.prepare_state(chain6.couplings, 0.94)


@pytest.fixture(scope="session")
def ramped4():
    sol = solve_chain(TrapParams(ion_count=4))
    return ramsey.prepare_state(sol.couplings, 0.74)


@pytest.fixture(scope="session")
def random_ramped():
    """Ramped states of random chains, keyed by N."""
    rng = np.random.default_rng(2024)
    out = {}
    for n in (2, 4, 6, 8):
        cm = make_couplings(random_couplings(n, rng))
        out[n] = ramsey.prepare_state(cm, float(rng.uniform(0.3, 1.5)))
    return out


# --- acceptance summary: one line per criterion, printed after the run ----------

_CRITERIA: dict = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        measured = dict(report.user_properties).get("measured", "")
        _CRITERIA[name] = (report.outcome, measured)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA):
        outcome, measured = _CRITERIA[name]
        num = int(name.split("_")[2])
        label = " ".join(name.split("_")[3:])
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d} {status}  {label}  {measured}".rstrip())
