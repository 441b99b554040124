import math

import numpy as np
import pytest

from sgfronts import bifurcation as bf
from sgfronts import bvp_solver as bs
from sgfronts import front_construction as fc
from sgfronts import spectrum as sp
from sgfronts.inhomogeneity import InhomogeneityProfile
from sgfronts.mesh import MeshSpec


def _problem(alpha, d=1.0, Delta=1.0, h_core=0.025, L=None):
    prof = InhomogeneityProfile.piecewise(Delta, d)
    return bs.BvpProblem(prof, alpha, L=L, mesh=MeshSpec.for_profile(prof, h_core=h_core))


def _near(branch, alpha):
    return min(branch.points, key=lambda b: abs(b.param_value - alpha)).solution


def test_problem_defaults_and_mesh():
    pr = _problem(0.1)
    x = pr.nodes()
    assert pr.L == 50.0 and x[0] == -50.0 and x[-1] == 50.0
    assert np.all(np.diff(x) > 0)
    assert pr.with_(alpha=0.2).alpha == 0.2 and pr.with_(d=2.0).d == 2.0
    assert pr.get("Delta") == 1.0 and pr.get("alpha") == 0.1


def test_solve_trivial_branch_quadratic():
    pr = _problem(0.1)
    sol = bs.solve(pr, fc.front_numeric(1.0, 1.0))
    assert sol.v_norm < 1e-10
    assert sol.residual_norm < 1e-10
    assert bs.residual(pr, sol) < 1e-10
    hist = sol.meta["newton_history"]
    assert len(hist) <= 6
    cold = bs.solve(pr)
    assert np.max(np.abs(cold.u - sol.u)) < 1e-9
    assert np.max(np.abs(sol.u - fc.front_d1(sol.grid, 1.0))) < 1e-5


def test_solve_homogeneous_keeps_translate():
    prof = InhomogeneityProfile.piecewise(1.0, 0.0)
    pr = bs.BvpProblem(prof, 0.0)
    x = pr.nodes()
    shift = 0.7
    u = 4 * np.arctan(np.exp(x - shift))
    guess = fc.FrontSolution(x, u, 2 / np.cosh(x - shift), np.zeros_like(x), np.zeros_like(x),
                             0.0, 0.0, 1.0, prof)
    sol = bs.solve(pr, guess)
    assert sol.meta["near_singular"]
    i = np.searchsorted(sol.u, math.pi)
    xc = np.interp(math.pi, sol.u[i - 1:i + 1], sol.grid[i - 1:i + 1])
    # the continuum kink is not an exact discrete solution; Newton removes that
    # defect partly along the (near) null translation direction
    assert abs(xc - shift) < 1e-3


def test_nonconvergence_reports_history():
    pr = _problem(0.1)
    with pytest.raises(bs.NonConvergenceError) as info:
        bs.solve(pr, max_iter=1)
    assert len(info.value.history) >= 1


def test_solve_from_prediction_reaches_pitchfork_branch():
    pr = _problem(0.4)
    a_star = bf.locus_d1(1.0)
    x, u0, v = bf.branch_predict(1.0, a_star + 0.05, grid=pr.nodes())
    guess = fc.FrontSolution(x, u0, np.gradient(u0, x), v, np.gradient(v, x), 0.4, 1.0, 1.0,
                             pr.profile)
    sol = bs.solve(pr, guess)
    assert sol.v_norm > 0.1
    assert sol.residual_norm < 1e-10


def test_crossing_located_near_018(d1_trivial):
    assert len(d1_trivial.crossings) == 1
    a = d1_trivial.crossings[0].param_value
    assert 0.175 <= a <= 0.185
    assert abs(a - bf.locus_d1(1.0)) < 1e-6
    assert np.all(d1_trivial.v_norms() < 1e-9)
    vals = d1_trivial.values()
    assert vals[0] == 0.05 and vals[-1] >= 0.45


def test_jacobian_spectrum_block_structure(d1_trivial):
    lam = sp.eig_d1_implicit(1.0)
    pt = _near(d1_trivial, 0.3)
    vals, mass = bs.jacobian_spectrum(pt, k=3)
    iv = int(np.argmax(mass))
    assert mass[iv] > 0.999
    assert abs(vals[iv] - (lam + 2 * pt.alpha)) < 1e-5
    iu = int(np.argmin(mass))
    assert mass[iu] < 1e-3 and abs(vals[iu] - lam) < 1e-5


def test_jacobian_zero_at_crossing(d1_trivial):
    at = d1_trivial.crossings[0]
    vals, _ = bs.jacobian_spectrum(at.solution, k=3)
    assert np.min(np.abs(vals)) < 1e-6


def test_pitchfork_branches(d1_trivial, d1_pitchfork):
    a_star = d1_trivial.crossings[0].param_value
    plus, minus = d1_pitchfork[1], d1_pitchfork[-1]
    for br in (plus, minus):
        vals = br.values()
        assert np.all(vals >= a_star - 1e-6)
        assert vals[-1] >= 0.45 - 1e-9
        assert np.all(np.diff(br.v_norms()) > 0)
    sp_ = _near(plus, 0.3)
    sm = bs.solve(_problem(sp_.alpha), _near(minus, sp_.alpha))
    sp2 = bs.solve(_problem(sp_.alpha), sp_)
    assert np.max(np.abs(sp2.v + sm.v)) < 1e-8
    assert np.max(np.abs(sp2.u - sm.u)) < 1e-8
    # the formerly zero eigenvalue moves off zero (it turns stable) on the new branch
    vals, _ = bs.jacobian_spectrum(sp2, k=3)
    assert np.max(vals) < -1e-3


def test_pitchfork_symmetry_preserved(d1_pitchfork):
    sol = _near(d1_pitchfork[1], 0.4)
    pr = _problem(sol.alpha)
    assert np.max(np.abs(sol.u + sol.u[::-1] - 2 * math.pi)) < 1e-8
    assert np.max(np.abs(sol.v - sol.v[::-1])) < 1e-8
    # (u, -v) is again a solution: Newton started there stays there
    mirror = bs.solve(pr, sol.replace(v=-sol.v, q=-sol.q, meta={}))
    assert mirror.meta["iterations"] <= 2
    assert np.max(np.abs(mirror.v + sol.v)) < 1e-8
    assert abs(bs.residual(pr, mirror) - bs.residual(pr, bs.solve(pr, sol))) < 1e-11


def test_switch_branch_seeds(d1_trivial, d1_problem):
    at = d1_trivial.crossings[0]
    s1, s2 = bs.switch_branch(at)
    assert abs(s1.v_norm - 1e-3) < 1e-12 and abs(s2.v_norm - 1e-3) < 1e-12
    np.testing.assert_allclose(s1.v, -s2.v, atol=1e-15)
    np.testing.assert_array_equal(s1.u, at.solution.u)
    # converge both seeds a little past onset
    pr = _problem(at.param_value + 0.01)
    k = 600.0  # seed amplitude near the expected c sqrt(0.01)
    b1 = bs.solve(pr, s1.replace(v=k * s1.v, q=k * s1.q))
    b2 = bs.solve(pr, s2.replace(v=k * s2.v, q=k * s2.q))
    assert b1.v_norm > 1e-2
    assert np.max(np.abs(b1.v + b2.v)) < 1e-8


def test_switch_branch_rejects_u_null_vector():
    # with negative coupling the v-block sits below the u-block, so the eigenvalue
    # nearest zero belongs to u
    pr = _problem(-0.05)
    sol = bs.solve(pr)
    pt = bs.BranchPoint(-0.05, sol, 0.0, 0.0, 0.0)
    with pytest.raises(bs.NotAPitchforkError):
        bs.switch_branch(pt)


def test_branch_amplitude_matches_constant(d1_trivial, d1_pitchfork):
    a_star = d1_trivial.crossings[0].param_value
    c = bf.branch_constant(1.0).c
    for da in (0.002, 0.008):
        pr = _problem(a_star + da)
        sol = bs.solve(pr, _near(d1_pitchfork[1], a_star + da))
        assert abs(sol.v_norm / (c * math.sqrt(da)) - 1) < 0.10


def test_square_root_scaling(d1_trivial, d1_pitchfork):
    a_star = d1_trivial.crossings[0].param_value
    das = np.array([0.001, 0.002, 0.004, 0.008])
    norms = [bs.solve(_problem(a_star + da), _near(d1_pitchfork[1], a_star + da)).v_norm
             for da in das]
    slope = np.polyfit(np.log(das), np.log(norms), 1)[0]
    assert abs(slope - 0.5) < 0.05


def test_mesh_independence(d1_pitchfork):
    base = _near(d1_pitchfork[1], 0.3)
    a = bs.solve(_problem(0.3, h_core=0.025), base)
    b = bs.solve(_problem(0.3, h_core=0.0125), a)
    assert abs(a.v_norm - b.v_norm) < 1e-6


def test_domain_truncation_insensitive():
    a_star = bf.locus_d1(1.0)
    out = []
    for L in (50.0, 60.0):
        sol = bs.solve(_problem(a_star, L=L))
        vals, mass = bs.jacobian_spectrum(sol, k=3)
        lam_v = min(vals[mass > 0.99], key=abs)
        out.append(a_star - lam_v / 2)
    assert abs(out[0] - out[1]) < 1e-8


def test_reverse_continuation_retraces(d1_pitchfork):
    fwd = d1_pitchfork[1]
    end = fwd.points[-1]
    pr = _problem(end.param_value)
    back = bs.continue_branch(pr, "alpha", 0.3, guess=end.solution, ds=0.02, ds_max=0.05,
                              monitor=False)
    assert back.values()[-1] <= 0.3
    for bp in back.points[1::3]:
        ref = bs.solve(_problem(bp.param_value), _near(fwd, bp.param_value))
        assert abs(ref.v_norm - bp.v_norm) < 1e-6


def test_branch_csv(tmp_path, d1_trivial):
    p = tmp_path / "b.csv"
    d1_trivial.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "param,v_norm,smallest_eig,arclength"
    assert len(lines) == len(d1_trivial.points) + 1


def test_vanishing_point_fallback_fit():
    br = bs.Branch("d")
    for d in (2.0, 2.1, 2.2, 2.25):
        br.points.append(bs.BranchPoint(d, None, math.sqrt(3 * (2.3 - d)), 0.0, 0.0))
    assert abs(bs.vanishing_point(br) - 2.3) < 1e-12
    with pytest.raises(ValueError):
        bs.vanishing_point(bs.Branch("d"))


def test_continue_rejects_unknown_param():
    with pytest.raises(ValueError):
        bs.continue_branch(_problem(0.1), "gamma", 1.0)


def test_branch_solution_auto():
    triv = bs.branch_solution(_problem(0.1))
    assert triv.v_norm < 1e-10
    with pytest.raises(ValueError):
        bs.branch_solution(_problem(0.1), branch="other")
