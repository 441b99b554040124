import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgfronts import bvp_solver as bs
from sgfronts import slowfast as sf
from sgfronts.inhomogeneity import GardnerParams, InhomogeneityProfile, gardner_pulse
from sgfronts.mesh import MeshSpec


def test_extended_rhs_fixed_points():
    for u in (0.0, 2 * math.pi):
        st_ = sf.ExtendedState(u, 0.0, 0.0, 0.0, 0.0, 0.0)
        for frame in ("slow", "fast"):
            assert np.max(np.abs(sf.extended_rhs(st_, 0.3, 1.0, 1e-3, 0.1, frame))) < 1e-15


def test_extended_rhs_frames_and_errors():
    y = np.array([1.0, 0.5, 0.2, -0.1, 0.4, 0.05])
    slow = sf.extended_rhs(y, 0.3, 1.0, 1e-3, 0.1, "slow")
    fast = sf.extended_rhs(y, 0.3, 1.0, 1e-3, 0.1, "fast")
    np.testing.assert_allclose(fast, 0.1 * slow, rtol=1e-14)
    tiny = sf.extended_rhs(y, 0.3, 1.0, 1e-3, 1e-8, "fast")
    assert np.max(np.abs(tiny[:4])) < 1e-7 and abs(tiny[4] - 0.05) < 1e-15
    with pytest.raises(ValueError):
        sf.extended_rhs(y, 0.3, 1.0, 1e-3, 0.0, "slow")
    with pytest.raises(ValueError):
        sf.extended_rhs(y, 0.3, 1.0, 1e-3, 0.1, "medium")


def test_pulse_solves_fast_equations():
    p = GardnerParams(0.05, 1e-4)
    x = np.linspace(-1, 1, 2001)
    x = x[np.abs(x) > 1e-3]
    rho, s = gardner_pulse(x, p)
    h = 1e-4

    def d4(k):
        f = lambda t: gardner_pulse(t, p)[k]
        return (f(x - 2 * h) - 8 * f(x - h) + 8 * f(x + h) - f(x + 2 * h)) / (12 * h)

    drho, ds = d4(0), d4(1)
    for i, (r, sv) in enumerate(zip(rho[::50], s[::50])):
        f = sf.extended_rhs([0, 0, 0, 0, r, sv], 0.1, 1.0, p.epsilon, p.delta)
        assert abs(f[4] - drho[50 * i]) < 1e-9 * max(1, abs(f[4]))
        assert abs(f[5] - ds[50 * i]) < 1e-6 * max(1, abs(f[5]))
    assert np.max(np.abs(sf.fast_invariant(rho, s, p.epsilon))) < 1e-14


@settings(max_examples=30, deadline=None)
@given(eps=st.floats(1e-8, 0.05), delta=st.floats(0.01, 0.5), x=st.floats(-3, 3))
def test_fast_invariant_zero_on_pulse(eps, delta, x):
    rho, s = gardner_pulse(np.array([x]), GardnerParams(delta, eps))
    assert abs(sf.fast_invariant(rho[0], s[0], eps)) < 1e-12


@pytest.fixture(scope="module")
def trivial_ref():
    return sf.rho0_front(0.1, 1.0, 1.0, branch="trivial")


def test_hypothesis_check_on_trivial(trivial_ref):
    problem, ref = trivial_ref
    rep = sf.hypothesis_check(ref, problem=problem)
    assert rep["du_nonzero"] and not rep["dv_nonzero"]
    assert rep["jacobian_nonsingular"]
    assert all(p > 0 for p in rep["du_at_Delta"])


def test_extended_consistency(trivial_ref):
    prof = InhomogeneityProfile.gardner(1.0, 0.1, 1.0)
    problem = bs.BvpProblem(prof, 0.1, mesh=MeshSpec.for_profile(prof))
    sol = bs.solve(problem, trivial_ref[1])
    assert sf.extended_consistency(problem, sol) < 1e-8
    with pytest.raises(ValueError):
        sf.extended_consistency(trivial_ref[0], trivial_ref[1])


def test_persistence_short_ladder(trivial_ref, tmp_path):
    rep = sf.persistence_study(0.1, 1.0, 1.0, (0.1, 0.2), reference=trivial_ref)
    assert rep.deltas == [0.2, 0.1]
    assert rep.monotone and rep.order > 0.5
    assert all(s > 0 for s in rep.sigma_min)
    assert max(rep.sigma_min) / min(rep.sigma_min) < 10
    assert math.isnan(rep.order_stderr)
    assert rep.epsilons[1] < rep.epsilons[0]
    d = rep.to_dict()
    assert d["monotone"] and d["diagnostic"] is None
    p = tmp_path / "p.csv"
    rep.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "delta,epsilon,dist_u,dist_v,sigma_min" and len(lines) == 3


def test_persistence_truncates_on_failure(trivial_ref, monkeypatch):
    real = bs.solve
    calls = {"n": 0}

    def flaky(problem, guess=None, **kw):
        calls["n"] += 1
        if calls["n"] == 2:
            raise bs.NonConvergenceError("forced")
        return real(problem, guess, **kw)

    monkeypatch.setattr(bs, "solve", flaky)
    rep = sf.persistence_study(0.1, 1.0, 1.0, (0.2, 0.1, 0.05), reference=trivial_ref)
    assert len(rep.dist_u) == 1
    assert "delta=0.1" in rep.diagnostic
