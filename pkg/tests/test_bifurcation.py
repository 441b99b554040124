import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgfronts import bifurcation as bf
from sgfronts import front_construction as fc
from sgfronts import spectrum as sp


def test_locus_d1_value_and_relation():
    a = bf.locus_d1(1.0)
    assert 0.175 <= a <= 0.185
    assert abs(a + sp.eig_d1_implicit(1.0) / 2) < 1e-15
    assert abs(bf.alphabif_relation(a, fc.h_of_Delta_d1(1.0))) < 1e-12


@settings(max_examples=25, deadline=None)
@given(Delta=st.floats(0.05, 20.0))
def test_locus_d1_is_half_eigenvalue(Delta):
    a = bf.locus_d1(Delta)
    assert 0 < a < 0.5
    assert abs(bf.alphabif_relation(a, fc.h_of_Delta_d1(Delta))) < 1e-10


# maximum of the d = 1 locus; agrees with matched shooting and with FD to 1e-10
LOCUS_D1_MAX = (0.8321551974899334, 0.1880810248718874)


def test_locus_d1_max():
    D, a = bf.locus_d1_max()
    assert abs(D - LOCUS_D1_MAX[0]) < 1e-6 and abs(a - LOCUS_D1_MAX[1]) < 1e-12
    assert abs(-sp.eig_matched(1.0, D).Lambda / 2 - a) < 1e-10
    assert a >= max(bf.locus_d1(x) for x in np.linspace(0.1, 20, 50))


def test_locus_dlarge():
    assert abs(bf.locus_dlarge(0.25, 100.0) - 0.5 / math.sqrt(0.5) / 100) < 1e-16
    assert bf.locus_dlarge(1e-9, 100.0) < 1e-10
    with pytest.raises(ValueError):
        bf.locus_dlarge(0.5, 100.0)
    with pytest.raises(ValueError):
        bf.locus_dlarge(0.0, 100.0)


def test_locus_DeltaLarge():
    for d in (1.2, 2.0, 5.0):
        a0 = bf.locus_DeltaLarge(d)
        assert 0 <= a0 < min(d - 1, 1) / 2
        assert abs(bf.bif_DeltaLarge_relation(a0, d)) < 1e-12
    a0 = bf.locus_DeltaLarge(1.05)
    assert abs(a0 - 0.025) < 0.005
    assert abs(a0 - 0.025) < 2 * 0.05**2


def test_locus_DeltaLarge_against_numeric():
    a0 = bf.locus_DeltaLarge(2.0)
    a12 = -sp.eig_matched(2.0, 12.0).Lambda / 2
    assert abs(a12 - a0) < 10 * math.exp(-12.0)


def test_locus_numeric_alpha_delta_matches_closed_form():
    Ds = np.linspace(0.3, 5.0, 12)
    curve = bf.locus_numeric("AlphaDelta", ("d", 1.0), Ds)
    arr = curve.as_array()
    assert arr.shape == (12, 2)
    assert np.max(np.abs(arr[:, 1] - [bf.locus_d1(D) for D in Ds])) < 1e-3
    for (D, a) in arr[::4]:
        assert abs(sp.eig_matched(1.0, D).Lambda + 2 * a) < 1e-6


def test_locus_numeric_fd_route():
    curve = bf.locus_numeric("AlphaDelta", ("d", 1.0), [0.5, 1.0], method="fd")
    arr = curve.as_array()
    assert np.max(np.abs(arr[:, 1] - [bf.locus_d1(0.5), bf.locus_d1(1.0)])) < 1e-4


def test_locus_numeric_d_delta_contains_233():
    curve = bf.locus_numeric("DDelta", ("alpha", 0.4), [1.0])
    (D, d), = curve.points
    assert D == 1.0
    assert abs(d - 2.33) < 0.05
    assert curve.residuals[0] < 1e-8


def test_locus_numeric_alpha_d_plane():
    curve = bf.locus_numeric("AlphaD", ("Delta", 1.0), [0.5, 1.0, 2.0])
    arr = curve.as_array()
    assert abs(arr[1, 1] - bf.locus_d1(1.0)) < 1e-9
    assert np.all(np.diff(arr[:, 1]) > 0)


def test_locus_numeric_truncates_with_diagnostic():
    curve = bf.locus_numeric("DDelta", ("alpha", 0.4), [1.0, -1.0, 2.0])
    assert len(curve.points) == 1
    assert curve.diagnostic is not None and "-1.0" in curve.diagnostic


def test_locus_refinement_inserts_points():
    curve = bf.locus_numeric("AlphaDelta", ("d", 2.0), [0.2, 2.0], max_jump=0.02)
    arr = curve.as_array()
    assert len(arr) > 2
    assert np.all(np.diff(arr[:, 0]) > 0)
    assert np.max(np.abs(np.diff(arr[:, 1]))) <= 0.02


def test_locus_csv(tmp_path):
    curve = bf.locus_numeric("AlphaDelta", ("d", 1.0), [1.0])
    p = tmp_path / "l.csv"
    curve.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "param1,param2,Lambda_residual,method"
    assert float(lines[1].split(",")[1]) == curve.points[0][1]


def test_case3b_trend():
    rep = bf.case3b_trend(0.5, [4.0, 8.0, 12.0])
    assert rep["decreasing"]
    assert rep["alphas"][-1] < 0.01
    with pytest.raises(ValueError):
        bf.case3b_trend(1.5, [4.0])


def test_V21_decay_and_homogeneous_kernel():
    D = 1.0
    data = bf._d1_data(D)
    assert abs(bf.V21_of(60.0, D)) < 1e-12
    z = np.linspace(-5, 5, 101)
    h = 1e-3
    Y1 = lambda t: bf._Y1(t)
    Y2 = lambda t: bf._Y2(t)
    for Y in (Y1, Y2):
        dd = (-Y(z + 2 * h) + 16 * Y(z + h) - 30 * Y(z) + 16 * Y(z - h) - Y(z - 2 * h)) / (12 * h**2)
        assert np.max(np.abs(dd - bf._cos_u0(z) * Y(z)) / np.maximum(1, np.abs(Y(z)))) < 1e-9
    with pytest.raises(ValueError):
        bf.V21_of(0.5, D)
    with pytest.raises(ValueError):
        bf.V21_of(2.0, D, alpha_star=data.alpha_star + 0.01)


@pytest.mark.parametrize("closure", ["zero", "matched"])
def test_V21_ode_residual_and_independent_route(closure):
    D = 1.0
    data = bf._d1_data(D)
    h = 1e-3
    xs = np.array([1.3, 2.0, 3.5, 6.0])
    V = lambda x: bf.V21_of(x, D, closure=closure)
    for x in xs:
        dd = (-V(x + 2 * h) + 16 * V(x + h) - 30 * V(x) + 16 * V(x - h) - V(x - 2 * h)) / (12 * h**2)
        z = x - data.x_star
        res = dd - bf._cos_u0(z) * V(x) + 0.5 * bf._sin_u0(z) * data.psi(x) ** 2
        assert abs(res) < 1e-7
    _, Yo, _ = bf.V21_ode(xs, D, closure=closure)
    assert np.max(np.abs(Yo - [V(x) for x in xs])) < 1e-8


def test_V21_matched_closure_is_odd_c1():
    # inside |x| < Delta the forcing vanishes and u0 = pi, so the odd continuation is linear;
    # the matched closure makes Y(Delta) = Delta Y'(Delta)
    D = 1.0
    x, Y, dY = bf.V21_ode(np.array([D + 1e-9]), D, closure="matched")
    assert abs(Y[0] - D * dY[0]) < 1e-7
    x, Y, dY = bf.V21_ode(np.array([D + 1e-9]), D, closure="zero")
    assert abs(Y[0] - D * dY[0]) > 1e-3


def test_branch_constant():
    bc = bf.branch_constant(1.0)
    assert bc.supercritical and bc.radicand > 0
    assert bc.c > 0 and bc.both == (bc.c, -bc.c)
    assert abs(bc.c - 6.3901) < 1e-3
    assert abs(bc.c - bc.radicand ** -0.5) < 1e-14
    assert abs(bc.alpha_star - bf.locus_d1(1.0)) < 1e-14
    d = bc.to_dict()
    assert d["closure"] == "matched" and len(d["integrand_terms"]) == 3
    zero = bf.branch_constant(1.0, closure="zero")
    assert zero.radicand > 0
    with pytest.raises(ValueError):
        bf.branch_constant(1.0, closure="other")


def test_branch_predict_scaling():
    a_star = bf.locus_d1(1.0)
    with pytest.raises(ValueError):
        bf.branch_predict(1.0, a_star)
    x, u0, v1 = bf.branch_predict(1.0, a_star + 0.002)
    _, _, v2 = bf.branch_predict(1.0, a_star + 0.008, grid=x)
    ratio = np.max(np.abs(v2)) / np.max(np.abs(v1))
    assert abs(ratio - 2) < 1e-12
    assert np.max(np.abs(v1 - v1[::-1])) < 1e-8
    _, _, vm = bf.branch_predict(1.0, a_star + 0.002, grid=x, sign=-1)
    np.testing.assert_array_equal(vm, -v1)
    assert np.max(np.abs(u0 - fc.front_d1(x, 1.0))) == 0.0
