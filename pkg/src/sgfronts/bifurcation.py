"""Pitchfork locus in (alpha, d, Delta) and the branch amplitude constant.

On the ``v = 0`` branch the v-component of the linearization is
``L + 2 alpha``, so the pitchfork sits where the largest eigenvalue of the
scalar operator equals ``-2 alpha``. Loci are traced by composing front
construction with an eigen-solve and a scalar root-find in the free parameter.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq, minimize_scalar

from . import front_construction as fc
from . import spectrum as sp
from .inhomogeneity import InhomogeneityProfile
from .mesh import MeshSpec

log = logging.getLogger(__name__)

__all__ = [
    "LocusCurve",
    "BranchConstant",
    "DegeneratePitchforkError",
    "alphabif_relation",
    "locus_d1",
    "locus_d1_max",
    "locus_dlarge",
    "locus_DeltaLarge",
    "bif_DeltaLarge_relation",
    "scalar_eigenvalue",
    "locus_numeric",
    "case3b_trend",
    "V21_of",
    "V21_ode",
    "branch_constant",
    "branch_predict",
]

PLANES = ("AlphaDelta", "DDelta", "AlphaD")


class DegeneratePitchforkError(ArithmeticError):
    pass


@dataclass
class LocusCurve:
    plane: str
    fixed_param: tuple
    points: list = field(default_factory=list)     # (param1, param2)
    residuals: list = field(default_factory=list)  # |Lambda + 2 alpha|
    method: str = "Numeric"
    diagnostic: str | None = None

    def as_array(self):
        return np.array(self.points, dtype=float).reshape(-1, 2)

    def to_csv(self, path):
        arr = self.as_array()
        with open(path, "w") as fh:
            fh.write("param1,param2,Lambda_residual,method\n")
            for (a, b), r in zip(arr, self.residuals):
                fh.write(f"{a:.16e},{b:.16e},{r:.16e},{self.method}\n")


@dataclass
class BranchConstant:
    alpha_star: float
    c: float
    radicand: float
    integrand_terms: tuple
    closure: str = "matched"
    supercritical: bool = True

    @property
    def both(self):
        return (self.c, -self.c)

    def to_dict(self):
        return {"alpha_star": self.alpha_star, "c": self.c, "radicand": self.radicand,
                "integrand_terms": list(self.integrand_terms), "closure": self.closure,
                "supercritical": self.supercritical}


# --- closed-form and asymptotic loci ---------------------------------------------

def alphabif_relation(alpha, h):
    """Case d = 1 locus relation, left side minus right side."""
    s = math.sqrt(1.0 - 2.0 * alpha)
    m = math.sqrt(2.0 * (2.0 - h)) / 2.0
    lhs = h / 2.0 - s * (s + m)
    rhs = -math.sqrt(2.0 * alpha) * (s + m) * math.tan(math.sqrt(alpha / h) * math.acos(h - 1.0))
    return lhs - rhs


def locus_d1(Delta):
    return -sp.eig_d1_implicit(Delta) / 2.0


def locus_d1_max(Delta_max=20.0, n_scan=200):
    """Maximum of the d = 1 locus over (0, Delta_max]: coarse scan then bounded refinement."""
    Ds = np.linspace(Delta_max / n_scan, Delta_max, n_scan)
    vals = np.array([locus_d1(D) for D in Ds])
    i = int(np.argmax(vals))
    lo, hi = Ds[max(i - 1, 0)], Ds[min(i + 1, n_scan - 1)]
    res = minimize_scalar(lambda D: -locus_d1(D), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-8})
    return float(res.x), float(-res.fun)


def locus_dlarge(alpha, d):
    """Leading-order width ``(1/d) 2 alpha / sqrt(1 - 2 alpha)``; relative error O(d^-1/2)."""
    if not 0.0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 1/2)")
    return (2.0 * alpha / math.sqrt(1.0 - 2.0 * alpha)) / d


def bif_DeltaLarge_relation(alpha0, d):
    return sp.delta_large_relation(-2.0 * alpha0, d)


def locus_DeltaLarge(d):
    return -sp.eig_asym_DeltaLarge(d) / 2.0


# --- numerical loci --------------------------------------------------------------

def scalar_eigenvalue(d, Delta, profile_kind="piecewise", delta=1.0 / 15.0, method="auto",
                      h_core=0.025):
    """Largest eigenvalue of the scalar operator at (d, Delta).

    ``method`` is ``"matched"`` (piecewise only: interior shooting with exact
    outer matching), ``"fd"`` (finite differences on the constructed front),
    or ``"auto"`` (matched for piecewise hats, fd otherwise).
    """
    if method == "auto":
        method = "matched" if profile_kind == "piecewise" else "fd"
    if profile_kind == "piecewise":
        if method == "matched":
            return sp.eig_matched(d, Delta).Lambda
        front = fc.front_numeric(d, Delta, mesh=MeshSpec.for_profile(
            InhomogeneityProfile.piecewise(Delta, d), h_core=h_core))
        return sp.eig_numeric(front).Lambda
    from . import bvp_solver as bs

    prof = InhomogeneityProfile(profile_kind, Delta, delta, d)
    problem = bs.BvpProblem(prof, 0.0, mesh=MeshSpec.for_profile(prof, h_core=h_core))
    front = bs.solve(problem)
    return sp.eig_numeric(front).Lambda


def _secant_root(f, x0, x1, tol=1e-8, max_iter=40):
    f0, f1 = f(x0), f(x1)
    for _ in range(max_iter):
        if abs(f1) < tol:
            return x1
        if f1 == f0:
            break
        x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
        x0, f0 = x1, f1
        x1, f1 = x2, f(x2)
    if abs(f1) < tol:
        return x1
    raise ArithmeticError("secant iteration did not converge")


def locus_numeric(plane, fixed, values, profile_kind="piecewise", delta=1.0 / 15.0,
                  method="auto", solve_for="d", bracket=None, max_jump=None, tol=1e-8,
                  h_core=0.025) -> LocusCurve:
    """Trace a bifurcation curve by eigen-solves along ``values`` of the continuation parameter.

    ``plane``/``fixed``:

    * ``"AlphaDelta"``, ``("d", d)``: points ``(Delta, alpha)``, ``values`` are Delta.
    * ``"AlphaD"``, ``("Delta", Delta)``: points ``(d, alpha)``, ``values`` are d.
    * ``"DDelta"``, ``("alpha", alpha)``: points ``(Delta, d)``. With
      ``solve_for="d"`` the values are Delta and d is found by secant
      iteration (fallback: bracketing); with ``solve_for="Delta"`` the roles swap.

    With ``max_jump`` consecutive points whose second coordinate differs by
    more than that get a midpoint inserted (at most 6 bisections per gap).
    """
    if plane not in PLANES:
        raise ValueError(f"plane must be one of {PLANES}")
    name, fixed_val = fixed
    curve = LocusCurve(plane, (name, float(fixed_val)),
                       method="Numeric" if method != "auto" or profile_kind != "piecewise"
                       else "Numeric")

    def lam(d, D):
        return scalar_eigenvalue(d, D, profile_kind, delta, method, h_core)

    if plane in ("AlphaDelta", "AlphaD"):
        def point(val):
            d, D = (fixed_val, val) if plane == "AlphaDelta" else (val, fixed_val)
            a = -lam(d, D) / 2.0
            return a, 0.0
    else:
        alpha = fixed_val
        state = {"prev": None}

        def lam_or_edge(d, D):
            # a bound state lost in the continuum sits at or below the edge -1
            try:
                return lam(d, D)
            except sp.NoBoundStateError:
                return -1.0

        def point(val):
            if solve_for == "d":
                g = lambda d: lam_or_edge(d, val) + 2.0 * alpha
                seed = state["prev"] or (1.0 + 2.0 * alpha if val > 3 else
                                         max(1.0 + 2.0 * alpha, locus_dlarge(alpha, 1.0) / val))
            else:
                g = lambda D: lam_or_edge(val, D) + 2.0 * alpha
                seed = state["prev"] or locus_dlarge(alpha, val)
            try:
                root = _secant_root(g, seed, seed * (1.0 + 1e-3), tol=tol)
                if not root > 0:
                    raise ArithmeticError("secant left the positive axis")
            except (ArithmeticError, ValueError, sp.SpectralSearchError,
                    fc.ConstructionError):
                lo, hi = bracket if bracket is not None else _expand_bracket(g, seed)
                root = brentq(g, lo, hi, xtol=1e-12)
            state["prev"] = root
            return root, abs(g(root))

    vals = list(values)
    out = []
    for v in vals:
        try:
            y, r = point(v)
        except Exception as exc:  # noqa: BLE001 - truncate the curve and report
            curve.diagnostic = f"stopped at {v!r}: {exc}"
            log.warning("locus truncated: %s", curve.diagnostic)
            break
        out.append((float(v), float(y), float(r)))
    if max_jump is not None:
        out = _refine(out, point, max_jump)
    for v, y, r in out:
        curve.points.append((v, y))
        curve.residuals.append(r)
    return curve


def _expand_bracket(g, seed, factor=1.5, max_tries=30):
    """Geometric search from ``seed`` for a sign change of ``g`` on the positive axis.

    ``g`` decreases in the searched parameter (the largest eigenvalue falls as the
    hat gets stronger or wider), which fixes the search direction.
    """
    x = seed
    gx = g(x)
    step = factor if gx > 0 else 1.0 / factor
    for _ in range(max_tries):
        y = x * step
        gy = g(y)
        if gx * gy <= 0:
            return (x, y) if x < y else (y, x)
        x, gx = y, gy
    raise ArithmeticError(f"no sign change found from {seed!r}")


def _refine(out, point, max_jump, depth=6):
    res = [out[0]] if out else []
    for a, b in zip(out[:-1], out[1:]):
        seg = [a, b]
        for _ in range(depth):
            new = [seg[0]]
            changed = False
            for p, q in zip(seg[:-1], seg[1:]):
                if abs(q[1] - p[1]) > max_jump:
                    m = 0.5 * (p[0] + q[0])
                    y, r = point(m)
                    new.append((m, float(y), float(r)))
                    changed = True
                new.append(q)
            seg = new
            if not changed:
                break
        res.extend(seg[1:])
    return res


def case3b_trend(d, Deltas, method="auto"):
    """alpha*(Delta) along ``Deltas`` for 0 < d < 1, with a monotonicity flag."""
    if not 0.0 < d < 1.0:
        raise ValueError("case 3(b) needs 0 < d < 1")
    curve = locus_numeric("AlphaDelta", ("d", d), Deltas, method=method)
    alphas = curve.as_array()[:, 1]
    decreasing = bool(np.all(np.diff(alphas) < 0))
    if not decreasing:
        log.warning("non-monotone alpha*(Delta) tail for d=%g: %s", d, alphas)
    return {"Deltas": list(map(float, Deltas)), "alphas": alphas.tolist(),
            "decreasing": decreasing, "curve": curve}


# --- variation of parameters for V21 (d = 1) ---------------------------------------

@dataclass(frozen=True)
class _D1Data:
    Delta: float
    alpha_star: float
    x_star: float
    k: float
    eig: sp.EigenResult

    def psi(self, x):
        return self.eig.R * self.eig.meta["shape"](x)


_D1_CACHE: dict = {}


def _d1_data(Delta, alpha_star=None):
    key = float(Delta)
    if key not in _D1_CACHE:
        lam = sp.eig_d1_implicit(Delta)
        eig = sp.eigenfunction_d1(Delta, lam)
        _D1_CACHE[key] = _D1Data(key, -lam / 2.0, eig.meta["x_star"], math.sqrt(1.0 + lam), eig)
    data = _D1_CACHE[key]
    if alpha_star is not None and abs(alpha_star - data.alpha_star) > 1e-8:
        raise ValueError("alpha_star does not match the d = 1 locus at this Delta")
    return data


def _Y1(z):
    return 1.0 / np.cosh(z)


def _Y2(z):
    return np.sinh(z) + z / np.cosh(z)


def _dY1(z):
    return -np.tanh(z) / np.cosh(z)


def _dY2(z):
    return np.cosh(z) + (1.0 - z * np.tanh(z)) / np.cosh(z)


def _sin_u0(z):
    return -2.0 * np.tanh(z) / np.cosh(z)


def _cos_u0(z):
    return 1.0 - 2.0 / np.cosh(z) ** 2


def _truncation(data, tol=1e-14):
    """Point beyond which the integrand envelope exp(-2k(x - x*)) is below ``tol``."""
    return data.x_star + math.log(1.0 / tol) / (2.0 * data.k) + 5.0


def _vop_integrals(x, data, X):
    z0 = data.x_star
    g = lambda s: float(_sin_u0(s - z0) * data.psi(s) ** 2)
    opts = dict(epsabs=1e-13, epsrel=1e-12, limit=400)
    I1, e1 = quad(lambda s: float(_Y2(s - z0)) * g(s), x, X, **opts)
    I2, e2 = quad(lambda s: float(_Y1(s - z0)) * g(s), x, X, **opts)
    return I1, I2, e1 + e2


def _matched_coefficient(data, X):
    D = data.Delta
    I1, I2, _ = _vop_integrals(D, data, X)
    z = D - data.x_star
    Yp = -_Y1(z) * I1 / 4.0 + _Y2(z) * I2 / 4.0
    dYp = -_dY1(z) * I1 / 4.0 + _dY2(z) * I2 / 4.0
    return float((D * dYp - Yp) / (_Y1(z) - D * _dY1(z)))


def V21_of(x, Delta, alpha_star=None, closure="zero", return_error=False):
    """Second-order u-correction on x > Delta by variation of parameters.

    ``closure="zero"`` drops the ``Y1`` multiple (both integration constants
    zero, decay at +infinity). ``closure="matched"`` adds the multiple of
    ``Y1`` that makes the continuation into |x| < Delta (where the forcing
    vanishes and the solution is linear) odd and C^1.
    """
    data = _d1_data(Delta, alpha_star)
    if not x > Delta:
        raise ValueError("V21_of is defined on x > Delta")
    X = _truncation(data)
    if x >= X:
        return (0.0, 0.0) if return_error else 0.0
    I1, I2, err = _vop_integrals(x, data, X)
    if not np.isfinite(I1 + I2):
        raise ArithmeticError(f"quadrature failed (tail truncated at {X:.3f})")
    z = x - data.x_star
    y = float(-_Y1(z) * I1 / 4.0 + _Y2(z) * I2 / 4.0)
    if closure == "matched":
        y += _matched_coefficient(data, X) * float(_Y1(z))
    elif closure != "zero":
        raise ValueError("closure must be 'zero' or 'matched'")
    return (y, err) if return_error else y


def V21_ode(x_eval, Delta, closure="zero", rtol=1e-12, atol=1e-15):
    """Independent route: integrate the forced ODE inward from the truncation point.

    Returns ``(x, Y, Y')`` on ``x_eval`` (all > Delta). The ``matched``
    closure adds the odd-C^1 multiple of Y1 computed from the ODE data at Delta.
    """
    data = _d1_data(Delta)
    X = _truncation(data)
    z0 = data.x_star

    def rhs(x, y):
        z = x - z0
        return [y[1], _cos_u0(z) * y[0] - 0.5 * _sin_u0(z) * data.psi(x) ** 2]

    x_eval = np.sort(np.atleast_1d(np.asarray(x_eval, dtype=float)))[::-1]
    pts = np.concatenate([x_eval[x_eval < X], [Delta]])
    sol = solve_ivp(rhs, (X, Delta), [0.0, 0.0], method="DOP853", rtol=rtol, atol=atol,
                    t_eval=pts)
    Y, dY = sol.y[0], sol.y[1]
    if closure == "matched":
        zD = Delta - z0
        a = (Delta * dY[-1] - Y[-1]) / (float(_Y1(zD)) - Delta * float(_dY1(zD)))
        zz = sol.t - z0
        Y = Y + a * _Y1(zz)
        dY = dY + a * _dY1(zz)
    n = pts.size - 1
    full = np.zeros(x_eval.size), np.zeros(x_eval.size)
    mask = x_eval < X
    full[0][mask], full[1][mask] = Y[:n], dY[:n]
    return x_eval[::-1], full[0][::-1], full[1][::-1]


def branch_constant(Delta, closure="matched") -> BranchConstant:
    """Amplitude constant ``c`` with ``v ~ c sqrt(alpha - alpha*) Psi`` (d = 1)."""
    data = _d1_data(Delta)
    D, z0 = data.Delta, data.x_star
    X = _truncation(data)
    psi = data.psi
    opts = dict(epsabs=1e-12, epsrel=1e-11, limit=400)
    q4_in, _ = quad(lambda s: float(psi(s)) ** 4, 0.0, D, **opts)
    q4_out, _ = quad(lambda s: float(psi(s)) ** 4, D, X, **opts)
    T1 = 4.0 / 3.0 * data.alpha_star * (q4_in + q4_out)
    a = _matched_coefficient(data, X) if closure == "matched" else 0.0
    if closure not in ("zero", "matched"):
        raise ValueError("closure must be 'zero' or 'matched'")

    def v21(s):
        I1, I2, _ = _vop_integrals(s, data, X)
        z = s - z0
        return float(-_Y1(z) * I1 / 4.0 + _Y2(z) * I2 / 4.0 + a * _Y1(z))

    T2, _ = quad(lambda s: v21(s) * float(psi(s)) ** 2 * float(_sin_u0(s - z0)), D, X,
                 epsabs=1e-11, epsrel=1e-10, limit=200)
    T3, _ = quad(lambda s: float(psi(s)) ** 4 * float(_cos_u0(s - z0)) / 6.0, D, X, **opts)
    rad = T1 - T2 - T3
    if not rad > 0:
        raise DegeneratePitchforkError(
            f"radicand {rad:.6g} <= 0 at Delta={Delta}: no supercritical branch prediction")
    return BranchConstant(data.alpha_star, rad ** -0.5, rad, (T1, T2, T3), closure, True)


def branch_predict(Delta, alpha, grid=None, closure="matched", sign=1):
    """Predicted ``(x, u0, v)`` on the non-trivial branch near onset."""
    data = _d1_data(Delta)
    if not alpha > data.alpha_star:
        raise ValueError("alpha must exceed alpha* (only the trivial branch exists below)")
    bc = branch_constant(Delta, closure)
    if grid is None:
        grid = MeshSpec().nodes(Delta, max(50.0, Delta + 40.0))
    grid = np.asarray(grid, dtype=float)
    u0 = fc.front_d1(grid, Delta)
    v = sign * bc.c * math.sqrt(alpha - data.alpha_star) * data.psi(grid)
    return grid, u0, v
