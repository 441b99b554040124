"""Shared fixtures: the expensive d = 1 continuation runs are computed once per session."""
import pytest

from sgfronts import bvp_solver as bs
from sgfronts.inhomogeneity import InhomogeneityProfile
from sgfronts.mesh import MeshSpec

# criterion number -> (ok, detail); filled by tests/test_acceptance.py
ACCEPTANCE = {}


def record(number, ok, detail):
    ACCEPTANCE[number] = (bool(ok), detail)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def d1_problem():
    prof = InhomogeneityProfile.piecewise(1.0, 1.0)
    return bs.BvpProblem(prof, 0.05, mesh=MeshSpec.for_profile(prof, h_core=0.025))


@pytest.fixture(scope="session")
def d1_trivial(d1_problem):
    """v = 0 branch in alpha from 0.05 to 0.45 with the pitchfork crossing located."""
    return bs.continue_branch(d1_problem, "alpha", 0.45, ds=0.02, ds_max=0.1)


@pytest.fixture(scope="session")
def d1_pitchfork(d1_problem, d1_trivial):
    """Both non-trivial branches leaving the first crossing, followed up to alpha = 0.45."""
    at = d1_trivial.crossings[0]
    return {side: bs.branch_off(at, d1_problem, "alpha", 0.45, side=side, ds=0.01,
                                ds_max=0.05, monitor=False)
            for side in (1, -1)}
