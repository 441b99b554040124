"""Largest eigenvalue of L = D_xx - (1 - d rho(x)) cos u0(x).

Three routes are provided:

* the implicit relation for d = 1 and the explicit eigenfunction,
* a symmetric second-order finite-difference discretization on the front's
  mesh (the general-purpose oracle), with one level of Richardson refinement,
* shooting for the piecewise hat: the interior equation is integrated from
  ``x = 0`` together with the front, and matched at ``x = -Delta`` to the
  decaying sine-Gordon solution, which is known in closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq
from scipy.special import expit

from . import front_construction as fc
from .front_construction import FrontSolution
from .mesh import MeshSpec, domain_half_length, refine_midpoints

__all__ = [
    "EigenResult",
    "SpectralSearchError",
    "NoBoundStateError",
    "eig_d1_implicit",
    "implicit_relation_d1",
    "eigenfunction_d1",
    "eig_numeric",
    "eig_matched",
    "eig_asym_dlarge",
    "eig_asym_DeltaLarge",
    "delta_large_relation",
    "sg_lin_solutions",
    "coupled_operator_spectrum",
    "fd_operator",
]


class SpectralSearchError(RuntimeError):
    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


class NoBoundStateError(SpectralSearchError):
    pass


@dataclass(frozen=True, eq=False)
class EigenResult:
    Lambda: float
    grid: np.ndarray | None = None
    psi: np.ndarray | None = None
    A: float | None = None
    R: float | None = None
    method: str = "NumericFD"
    error_estimate: float | None = None
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {"Lambda": self.Lambda, "A": self.A, "R": self.R, "method": self.method,
                "error_estimate": self.error_estimate}


# --- d = 1 closed forms --------------------------------------------------------

def implicit_relation_d1(Lam, h):
    """LHS - RHS of the d = 1 eigenvalue relation (poles where the tangent blows up)."""
    k = math.sqrt(1.0 + Lam)
    m = math.sqrt(2.0 * (2.0 - h)) / 2.0
    theta = math.sqrt(-Lam / (2.0 * h)) * math.acos(h - 1.0)
    return h / 2.0 - k * (k + m) + math.sqrt(-Lam) * (k + m) * math.tan(theta)


def eig_d1_implicit(Delta, n_scan=2000):
    """Largest root in (-1, 0) of the implicit relation for d = 1."""
    h = fc.h_of_Delta_d1(Delta)
    lo, hi = -1.0 + 1e-9, -1e-9
    lams = np.linspace(lo, hi, n_scan)
    # poles of tan: sqrt(-Lam) * Delta = pi/2 + k pi, i.e. Lam_k = -((pi/2 + k pi)/Delta)^2
    acos_h = math.acos(h - 1.0)
    poles = []
    k = 0
    while True:
        lam_k = -2.0 * h * ((math.pi / 2 + k * math.pi) / acos_h) ** 2
        if lam_k <= lo:
            break
        poles.append(lam_k)
        k += 1
    edges = sorted(set([lo, hi] + poles))
    f = lambda L: implicit_relation_d1(L, h)
    roots = []
    for a, b in zip(edges[:-1], edges[1:]):
        pad = 1e-12 * max(1.0, abs(a))
        seg = lams[(lams > a + pad) & (lams < b - pad)]
        seg = np.concatenate([[a + pad] if a != lo else [lo], seg, [b - pad] if b != hi else [hi]])
        vals = np.array([f(L) for L in seg])
        for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
            roots.append(brentq(f, seg[i], seg[i + 1], xtol=1e-15, rtol=1e-15))
        if vals[-1] == 0:
            roots.append(seg[-1])
    if not roots:
        raise SpectralSearchError("no sign change of the implicit relation",
                                  {"Delta": Delta, "h": h, "poles": poles})
    return max(roots)


def eigenfunction_d1(Delta, Lambda=None, grid=None, L=None):
    """Explicit eigenfunction for d = 1 with matching constant A and norm constant R."""
    if Lambda is None:
        Lambda = eig_d1_implicit(Delta)
    md = fc.matching_data_d1(Delta)
    h, x_star = md.h, md.x_star
    k = math.sqrt(1.0 + Lambda)
    om = math.sqrt(-Lambda)
    cosd = math.cos(om * Delta)
    if abs(cosd) < 1e-14:
        raise SpectralSearchError("cos(sqrt(-Lambda) Delta) = 0: matching singular")
    t4 = math.tan(math.acos(1.0 - h) / 4.0)
    A = -(k + math.sqrt((2.0 - h) / 2.0)) * t4**k / cosd

    def shape(x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        z = -ax + x_star
        with np.errstate(over="ignore", invalid="ignore"):
            tail = np.exp(k * z) * (np.tanh(z) - k)
        return np.where(ax > Delta, tail, A * np.cos(om * x))

    def dshape(x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        z = -ax + x_star
        th = np.tanh(z)
        with np.errstate(over="ignore", invalid="ignore"):
            dtail = np.exp(k * z) * (k * th - Lambda - th**2)
        return np.where(ax > Delta, -np.sign(x) * dtail, -A * om * np.sin(om * x))

    # 1/R^2 = A^2 (sin(2 om Delta)/(2 om) + Delta) + 2 int_Delta^inf tail^2
    tail_int, tail_err = quad(lambda s: float(shape(s)) ** 2, Delta, np.inf,
                              epsabs=1e-14, epsrel=1e-13, limit=200)
    inv_R2 = A**2 * (math.sin(2 * om * Delta) / (2 * om) + Delta) + 2.0 * tail_int
    R = 1.0 / math.sqrt(inv_R2)

    if grid is None:
        L = domain_half_length(Delta, L)
        grid = MeshSpec().nodes(Delta, L)
    grid = np.asarray(grid, dtype=float)
    psi = R * shape(grid)
    return EigenResult(float(Lambda), grid, psi, A=A, R=R, method="ImplicitD1",
                       error_estimate=None,
                       meta={"h": h, "x_star": x_star, "R_closed_form": _R_closed_form(
                           Delta, Lambda, A, x_star),
                           "shape": shape, "dshape": dshape, "tail_quad_error": tail_err})


def _R_closed_form(Delta, Lambda, A, x_star):
    """The bracketed antiderivative printed for 1/R^2, read with x1 := x*.

    Kept only as a cross-check; the normalization actually used is by quadrature.
    """
    a = -Lambda / 2.0
    s = math.sqrt(1.0 - 2.0 * a)

    def F(x):
        num = (1 - 2 * a + (1 - a) * s) * math.exp(-2 * s * (x - x_star))
        den = (math.exp(2 * (x - x_star)) + 1) * a**2 * (2 * a - 1)
        return num / den * (a**2 * math.exp(2 * (x + x_star)) + 2 * (a - 1) * s + a**2 - 4 * a + 2)

    try:
        bracket = 0.0 - F(Delta)  # F -> 0 at +inf for the decaying factor
        inv_R2 = A**2 * (math.sin(2 * math.sqrt(2 * a) * Delta) / (2 * math.sqrt(2 * a)) + Delta) \
            + 2.0 * bracket
        return 1.0 / math.sqrt(inv_R2) if inv_R2 > 0 else float("nan")
    except (OverflowError, ZeroDivisionError, ValueError):
        return float("nan")


# --- finite differences --------------------------------------------------------

def _potential(profile, d, x, u, grid_for_jumps=None):
    """(1 - d rho) cos u, with cell-averaged rho at the jump nodes of a piecewise hat."""
    rho = np.asarray(profile.rho(x), dtype=float).copy()
    if profile.kind == "piecewise" and grid_for_jumps is not None:
        xs = grid_for_jumps
        for xj in (-profile.Delta, profile.Delta):
            idx = np.nonzero(np.abs(xs - xj) < 1e-13 * max(1.0, abs(xj)))[0]
            for i in idx:
                if 0 < i < xs.size - 1:
                    hl, hr = xs[i] - xs[i - 1], xs[i + 1] - xs[i]
                    inside_left = xj > 0
                    rho[i] = (hl if inside_left else hr) / (hl + hr)
    return (1.0 - d * rho) * np.cos(u)


def fd_operator(grid, Q):
    """Symmetrized tridiagonal form of D_xx - Q on the interior nodes (Dirichlet ends).

    Returns ``(diag, off, w)`` for the standard symmetric problem
    ``B y = lambda y`` with ``y = sqrt(w) psi``.
    """
    x = np.asarray(grid, dtype=float)
    hs = np.diff(x)
    hl, hr = hs[:-1], hs[1:]
    w = 0.5 * (hl + hr)
    S_diag = -1.0 / hl - 1.0 / hr - w * Q[1:-1]
    S_off = 1.0 / hr[:-1]
    diag = S_diag / w
    off = S_off / np.sqrt(w[:-1] * w[1:])
    return diag, off, w


def _largest_fd(grid, Q, n_eigs=1):
    diag, off, w = fd_operator(grid, Q)
    n = diag.size
    vals, vecs = eigh_tridiagonal(diag, off, select="i",
                                  select_range=(n - n_eigs, n - 1))
    psi = np.zeros((grid.size, n_eigs))
    psi[1:-1] = vecs / np.sqrt(w)[:, None]
    return vals[::-1], psi[:, ::-1]


def eig_numeric(front: FrontSolution, d=None, Delta=None, grid=None, refine=True,
                n_eigs=1, continuum_tol=1e-6):
    """Largest eigenvalue of the FD discretization on ``front``'s mesh.

    With ``refine`` the mesh is bisected (fields by cubic Hermite
    interpolation) and the two values are Richardson-extrapolated; the
    difference is reported as the error estimate.
    """
    d = front.d if d is None else d
    profile = front.profile if Delta is None else front.profile.with_(Delta=Delta)
    base = front.grid if grid is None else np.asarray(grid, dtype=float)
    spline = CubicHermiteSpline(front.grid, front.u, front.p)

    def level(x):
        u = front.u if x is front.grid else spline(x)
        Q = _potential(profile, d, x, u, grid_for_jumps=x)
        return _largest_fd(x, Q, n_eigs)

    vals0, psi0 = level(base)
    lam0 = vals0[0]
    if refine:
        fine = refine_midpoints(base)
        vals1, _ = level(fine)
        lam = (4.0 * vals1[0] - vals0[0]) / 3.0
        err = abs(vals1[0] - vals0[0]) / 3.0
        others = (4.0 * vals1 - vals0) / 3.0
    else:
        lam, err, others = lam0, None, vals0
    if lam <= -1.0 + continuum_tol:
        raise NoBoundStateError("largest eigenvalue merged into the continuum",
                                {"Lambda": lam, "d": d, "Delta": profile.Delta})
    psi = psi0[:, 0]
    wq = np.zeros_like(base)
    dx = np.diff(base)
    wq[:-1] += 0.5 * dx
    wq[1:] += 0.5 * dx
    psi = psi / math.sqrt(np.dot(wq, psi**2))
    if psi[np.argmax(np.abs(psi))] < 0:
        psi = -psi
    return EigenResult(float(lam), base, psi, method="NumericFD", error_estimate=err,
                       meta={"unrefined": float(lam0), "eigenvalues": [float(v) for v in others]})


# --- shooting for the piecewise hat --------------------------------------------

def _mann_minus(x, Lam, x_star):
    """Decaying solution on x < -Delta and its derivative, with exp factor removed."""
    k = math.sqrt(1.0 + Lam)
    t = math.tanh(x + x_star)
    return t - k, k * t - Lam - t * t


def _inner_solution(d, Delta, Lam, dense=False):
    h, _, md = fc._front_core(float(d), float(Delta))
    k = 1.0 - d

    def rhs(x, y):
        u, p, s, r = y
        return [p, k * math.sin(u), r, (k * math.cos(u) + Lam) * s]

    sol = solve_ivp(rhs, (0.0, -Delta), [math.pi, math.sqrt(2.0 * h), 1.0, 0.0],
                    method="DOP853", rtol=1e-12, atol=1e-14, dense_output=dense)
    return sol, md


def _wronskian(d, Delta, Lam):
    sol, md = _inner_solution(d, Delta, Lam)
    s, r = sol.y[2, -1], sol.y[3, -1]
    a, b = _mann_minus(-Delta, Lam, md.x_star)
    return (s * b - r * a) / math.hypot(s, r)


def eig_matched(d, Delta, grid=None, bracket=None, xtol=1e-14):
    """Largest eigenvalue for the piecewise hat by interior shooting and exact outer matching."""
    if d == 0:
        return EigenResult(0.0, method="Matched", error_estimate=0.0,
                           meta={"note": "translation mode of the homogeneous kink"})
    if bracket is None:
        coarse = fc.front_numeric(d, Delta, mesh=MeshSpec.for_profile(
            fc.InhomogeneityProfile.piecewise(Delta, d), h_core=0.05))
        guess = eig_numeric(coarse, refine=False, n_eigs=2)
        l1, l2 = guess.meta["eigenvalues"][:2]
        pad = 5e-3
        lo = max(l1 - pad, 0.5 * (l1 + l2), -1.0 + 1e-12)
        hi = l1 + pad
    else:
        lo, hi = bracket
    f = lambda L: _wronskian(d, Delta, L)
    flo, fhi = f(lo), f(hi)
    tries = 0
    while flo * fhi > 0 and tries < 8:
        pad *= 2.0
        hi = hi + pad
        lo = max(lo - pad, -1.0 + 1e-12) if bracket is None else lo
        flo, fhi = f(lo), f(hi)
        tries += 1
    if flo * fhi > 0:
        raise SpectralSearchError("matching condition has no sign change",
                                  {"d": d, "Delta": Delta, "bracket": (lo, hi)})
    lam = brentq(f, lo, hi, xtol=xtol, rtol=1e-15, maxiter=200)
    res = EigenResult(float(lam), method="Matched", error_estimate=xtol,
                      meta={"x_star": fc.matching_data(d, Delta).x_star})
    if grid is not None:
        res = _attach_matched_eigenfunction(res, d, Delta, np.asarray(grid, dtype=float))
    return res


def _attach_matched_eigenfunction(res, d, Delta, grid):
    lam = res.Lambda
    sol, md = _inner_solution(d, Delta, lam, dense=True)
    k = math.sqrt(1.0 + lam)
    s_m = sol.y[2, -1]
    a, _ = _mann_minus(-Delta, lam, md.x_star)
    scale = s_m / a  # outer = scale * exp(k (x + x* + Delta - x*)) * (tanh - k), normalized at -Delta
    ax = np.abs(grid)
    psi = np.empty_like(grid)
    inner = ax <= Delta
    psi[inner] = sol.sol(-ax[inner])[2]
    z = -ax[~inner] + md.x_star
    psi[~inner] = scale * np.exp(k * (-ax[~inner] + Delta)) * (np.tanh(z) - k)
    w = np.zeros_like(grid)
    dx = np.diff(grid)
    w[:-1] += 0.5 * dx
    w[1:] += 0.5 * dx
    psi /= math.sqrt(np.dot(w, psi**2))
    if psi[np.argmax(np.abs(psi))] < 0:
        psi = -psi
    return EigenResult(res.Lambda, grid, psi, method=res.method,
                       error_estimate=res.error_estimate, meta=res.meta)


# --- asymptotic relations ------------------------------------------------------

def eig_asym_dlarge(Lambda, d):
    """Leading-order width ``(-Lambda/sqrt(1+Lambda))/d`` at which Lambda is the eigenvalue."""
    if not -1.0 < Lambda < 0.0:
        raise ValueError("Lambda must lie in (-1, 0)")
    return (-Lambda / math.sqrt(1.0 + Lambda)) / d


def delta_large_relation(Lam, d):
    sd = math.sqrt(d)
    r1 = math.sqrt(1.0 + Lam)
    rd = math.sqrt(max(d - 1.0 + Lam, 0.0))
    return ((r1 / sd + Lam + 1.0 / d) * ((d - 1.0) / sd + rd)
            + (1.0 / sd + r1) * ((d - 1.0) / sd * rd + Lam + (d - 1.0) ** 2 / d))


def eig_asym_DeltaLarge(d, n_scan=2000):
    """Root Lambda0 in (-min(d-1, 1), 0) of the large-Delta relation (d > 1)."""
    if not d > 1:
        raise ValueError("eig_asym_DeltaLarge needs d > 1")
    lo = -min(d - 1.0, 1.0)
    lams = np.linspace(lo, 0.0, n_scan + 1)[1:-1]
    f = lambda L: delta_large_relation(L, d)
    vals = np.array([f(L) for L in lams])
    idx = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    roots = [brentq(f, lams[i], lams[i + 1], xtol=1e-16, rtol=1e-15) for i in idx]
    # the root may sit between the open endpoint and the first scan point
    if not roots and vals[0] * f(lo) < 0:
        roots.append(brentq(f, lo, lams[0], xtol=1e-16, rtol=1e-15))
    if not roots:
        raise SpectralSearchError("no root of the large-Delta relation", {"d": d})
    return max(roots)


def sg_lin_solutions(x, Lambda, x_star):
    """Decaying/growing solutions of psi'' - cos(4 arctan e^{x+x*}) psi = Lambda psi."""
    k = math.sqrt(1.0 + Lambda)
    z = np.asarray(x, dtype=float) + x_star
    t = np.tanh(z)
    e_m, e_p = np.exp(-k * z), np.exp(k * z)
    # tanh(z) +- 1 via the logistic function: no cancellation in the tails
    psi1 = e_m * (2.0 * expit(2.0 * z) + (k - 1.0))
    psi2 = e_p * (-2.0 * expit(-2.0 * z) - (k - 1.0))
    dpsi1 = e_m * (-k * t - Lambda - t * t)
    dpsi2 = e_p * (k * t - Lambda - t * t)
    return psi1, psi2, dpsi1, dpsi2


def coupled_operator_spectrum(scalar, alpha):
    """Block eigenvalues of the linearization about (u0, 0) and the continuum edge."""
    lam = scalar.Lambda if isinstance(scalar, EigenResult) else float(scalar)
    return {"u_block": lam, "v_block": lam + 2.0 * alpha, "continuum_edge": -1.0 + 2.0 * alpha,
            "critical_alpha": -lam / 2.0}
