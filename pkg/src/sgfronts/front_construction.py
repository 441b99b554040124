"""Stationary scalar fronts u0 of u'' = (1 - d rho0(x)) sin u by Hamiltonian matching.

Outside the hat the orbit lies on the sine-Gordon heteroclinic ``H0 = 0``;
inside it is a level set ``H1 = h``. Matching the two at ``x = -Delta`` and
imposing ``u(0) = pi`` fixes ``h``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .inhomogeneity import InhomogeneityProfile
from .mesh import MeshSpec, domain_half_length

__all__ = [
    "MatchingData",
    "FrontSolution",
    "ConstructionError",
    "AsymptoticWarning",
    "H0",
    "H1",
    "h_of_Delta_d1",
    "Delta_of_h_d1",
    "matching_coords",
    "front_d1",
    "front_numeric",
    "front_fields",
    "matching_data",
    "front_asym_dlarge",
    "h_asym_dlarge",
    "front_asym_DeltaLarge",
    "perturbed_heteroclinic",
    "L_of_eps",
    "pi_front",
    "sg_kink",
]

TWO_PI = 2.0 * math.pi


class ConstructionError(RuntimeError):
    """No matched front could be built; ``scan`` holds the shooting data."""

    def __init__(self, msg, scan=None):
        super().__init__(msg)
        self.scan = scan


class AsymptoticWarning(UserWarning):
    pass


def H0(u, p):
    return 0.5 * np.square(p) + np.cos(u) - 1.0


def H1(u, p, d):
    return 0.5 * np.square(p) + (1.0 - d) * (1.0 + np.cos(u))


def sg_kink(x, shift=0.0):
    """``(u, p)`` of the sine-Gordon kink ``4 arctan(exp(x + shift))``."""
    z = np.asarray(x, dtype=float) + shift
    return 4.0 * np.arctan(np.exp(z)), 2.0 / np.cosh(z)


def Delta_of_h_d1(h):
    return math.acos(h - 1.0) / math.sqrt(2.0 * h)


def h_of_Delta_d1(Delta):
    """Inner level h in (0, 2) with ``Delta = arccos(h - 1)/sqrt(2h)``."""
    if not Delta > 0:
        raise ValueError("Delta must be positive")
    f = lambda h: Delta_of_h_d1(h) - Delta
    # Delta(h) ~ pi/sqrt(2h) as h -> 0, so the root lies above (pi^2/2)/(Delta+2)^2 / 4
    lo = min(1.0, 0.5 * (math.pi / (Delta + 2.0)) ** 2 / 4.0)
    while f(lo) < 0:
        lo *= 0.25
    return brentq(f, lo, 2.0, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=300)


def _half_angles(h, d, g=None):
    """``(sin^2(u-/2), cos^2(u-/2))`` on the matching set ``H0 = 0, H1 = h``.

    ``g = h - 2 + 2d`` may be passed directly to avoid cancellation.
    """
    if g is None:
        g = h - 2.0 + 2.0 * d
    return g / (2.0 * d), (2.0 - h) / (2.0 * d)


def matching_coords(h, d):
    """``(u_minus, p_minus)`` where the level ``H1 = h`` meets ``H0 = 0``."""
    if d == 0:
        raise ValueError("d = 0: the inner and outer phase planes coincide")
    s2, c2 = _half_angles(h, d)
    if s2 < -1e-15 or c2 < -1e-15:
        raise ValueError(f"no matched front at (h={h}, d={d}): arccos argument out of range")
    u = 2.0 * math.atan2(math.sqrt(max(s2, 0.0)), math.sqrt(max(c2, 0.0)))
    return u, 2.0 * math.sin(0.5 * u)


@dataclass(frozen=True)
class MatchingData:
    h: float
    u_minus: float
    p_minus: float
    x_star: float


@dataclass(frozen=True, eq=False)
class FrontSolution:
    """Stationary solution samples ``(u, p, v, q)`` on ``grid``."""

    grid: np.ndarray
    u: np.ndarray
    p: np.ndarray
    v: np.ndarray
    q: np.ndarray
    alpha: float
    d: float
    Delta: float
    profile: InhomogeneityProfile
    residual_norm: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("grid", "u", "p", "v", "q"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")

    @property
    def L(self):
        return float(self.grid[-1])

    @property
    def weights(self):
        """Trapezoidal quadrature weights on ``grid``."""
        w = np.zeros_like(self.grid)
        dx = np.diff(self.grid)
        w[:-1] += 0.5 * dx
        w[1:] += 0.5 * dx
        return w

    @property
    def v_norm(self):
        return float(math.sqrt(np.dot(self.weights, self.v**2)))

    def state(self):
        return np.vstack([self.u, self.p, self.v, self.q])

    def interpolate(self, x):
        """Cubic Hermite interpolation of all four fields (p = u', q = v')."""
        from scipy.interpolate import CubicHermiteSpline

        U = CubicHermiteSpline(self.grid, self.u, self.p)
        V = CubicHermiteSpline(self.grid, self.v, self.q)
        return U(x), U(x, 1), V(x), V(x, 1)

    def replace(self, **kw):
        data = {k: getattr(self, k) for k in ("grid", "u", "p", "v", "q", "alpha", "d",
                                              "Delta", "profile", "residual_norm")}
        data["meta"] = dict(self.meta)
        data.update(kw)
        return FrontSolution(**data)

    def to_records(self):
        return np.column_stack([self.grid, self.u, self.p, self.v, self.q])

    def sidecar(self):
        return {"alpha": self.alpha, "d": self.d, "Delta": self.Delta,
                "profile": self.profile.to_dict(), "residual_norm": self.residual_norm,
                "v_norm": self.v_norm, **{k: v for k, v in self.meta.items()
                                          if isinstance(v, (int, float, str, bool))}}


def front_d1(x, Delta):
    """Closed-form front for d = 1 (linear inner segment)."""
    h = h_of_Delta_d1(Delta)
    x_star = math.log(math.tan(math.acos(1.0 - h) / 4.0)) + Delta
    x = np.asarray(x, dtype=float)
    out = np.where(x < -Delta, 4.0 * np.arctan(np.exp(x + x_star)),
                   np.where(x > Delta, 4.0 * np.arctan(np.exp(x - x_star)),
                            math.pi + math.sqrt(2.0 * h) * x))
    return out if out.ndim else float(out)


def _front_d1_slope(x, Delta):
    h = h_of_Delta_d1(Delta)
    x_star = math.log(math.tan(math.acos(1.0 - h) / 4.0)) + Delta
    x = np.asarray(x, dtype=float)
    return np.where(x < -Delta, 2.0 / np.cosh(x + x_star),
                    np.where(x > Delta, 2.0 / np.cosh(x - x_star), math.sqrt(2.0 * h)))


def matching_data_d1(Delta):
    h = h_of_Delta_d1(Delta)
    u, p = matching_coords(h, 1.0)
    return MatchingData(h, u, p, Delta + math.log(math.tan(u / 4.0)))


# --- general d: shooting from the centre --------------------------------------

_RTOL, _ATOL = 1e-13, 1e-15


def _inner_rhs(d):
    k = 1.0 - d

    def rhs(x, y):
        return [y[1], k * math.sin(y[0])]

    return rhs


def _level_range(d):
    """``(h_lo, g_max)``: h = h_lo + g with g in (0, g_max) spans admissible levels."""
    if d > 0:
        h_lo = max(0.0, 2.0 - 2.0 * d)
        return h_lo, 2.0 - h_lo
    return 2.0, -2.0 * d


def _shoot(g, d, Delta, dense=False):
    h_lo, _ = _level_range(d)
    h = h_lo + g
    sol = solve_ivp(_inner_rhs(d), (0.0, -Delta), [math.pi, math.sqrt(2.0 * h)],
                    method="DOP853", rtol=_RTOL, atol=_ATOL, dense_output=dense)
    if not sol.success:
        raise ConstructionError(f"inner integration failed: {sol.message}")
    gs = (h_lo - 2.0 + 2.0 * d) + g
    s2, c2 = _half_angles(h, d, gs)
    u_target = 2.0 * math.atan2(math.sqrt(max(s2, 0.0)), math.sqrt(max(c2, 0.0)))
    return sol, h, u_target


def _solve_level(d, Delta):
    _, g_max = _level_range(d)
    F = lambda lg: (lambda s: s[0].y[0, -1] - s[2])(_shoot(math.exp(lg), d, Delta))
    hi = math.log(g_max * (1.0 - 1e-12))
    # scan downward in log g for the sign change
    grid = [hi - k for k in np.arange(0.0, 700.0, 2.0)]
    prev = (grid[0], F(grid[0]))
    scan = [prev]
    for lg in grid[1:]:
        val = F(lg)
        scan.append((lg, val))
        if np.sign(val) != np.sign(prev[1]):
            lg_root = brentq(F, lg, prev[0], xtol=1e-14, rtol=1e-15, maxiter=200)
            return math.exp(lg_root), scan
        prev = (lg, val)
    raise ConstructionError(f"no matching level for d={d}, Delta={Delta}", scan)


@lru_cache(maxsize=256)
def _front_core(d, Delta):
    """Root level and dense inner orbit on [-Delta, 0] (cached)."""
    g, _ = _solve_level(d, Delta)
    sol, h, _ = _shoot(g, d, Delta, dense=True)
    u_m, p_m = float(sol.y[0, -1]), float(sol.y[1, -1])
    return h, sol.sol, MatchingData(h, u_m, p_m, Delta + math.log(math.tan(u_m / 4.0)))


def front_fields(d, Delta, x):
    """``(u, p)`` of the matched front at arbitrary abscissae ``x``."""
    x = np.asarray(x, dtype=float)
    if d == 0:
        return sg_kink(x)
    h, inner_sol, md = _front_core(float(d), float(Delta))
    ax = np.abs(x)
    u = np.empty_like(x)
    p = np.empty_like(x)
    inner = ax <= Delta
    uu, pp = inner_sol(-ax[inner])
    # left half from the integration, right half by point symmetry
    u[inner] = np.where(x[inner] <= 0, uu, TWO_PI - uu)
    p[inner] = pp
    outer = ~inner
    uo, po = sg_kink(-ax[outer], md.x_star)
    u[outer] = np.where(x[outer] < 0, uo, TWO_PI - uo)
    p[outer] = po
    return u, p


def front_numeric(d, Delta, grid=None, L=None, mesh: MeshSpec | None = None) -> FrontSolution:
    """Symmetric scalar front for the piecewise hat at strength ``d``."""
    if not Delta > 0:
        raise ValueError("Delta must be positive")
    L = domain_half_length(Delta, L)
    profile = InhomogeneityProfile.piecewise(Delta, d)
    if grid is None:
        grid = (mesh or MeshSpec.for_profile(profile)).nodes(Delta, L)
    grid = np.asarray(grid, dtype=float)
    u, p = front_fields(d, Delta, grid)
    if d == 0:
        um, pm = sg_kink(-Delta)
        md = MatchingData(2.0, float(um), float(pm), 0.0)
        h1_dev = 0.0
    else:
        h, inner_sol, md = _front_core(float(d), float(Delta))
        xs = -np.abs(grid[np.abs(grid) <= Delta])
        uu, pp = inner_sol(xs)
        h1_dev = float(np.max(np.abs(H1(uu, pp, d) - h)))
    zeros = np.zeros_like(grid)
    return FrontSolution(grid, u, p, zeros, zeros, 0.0, float(d), float(Delta), profile,
                         residual_norm=h1_dev,
                         meta={"h": md.h, "x_star": md.x_star, "u_minus": md.u_minus,
                               "p_minus": md.p_minus, "H1_deviation": h1_dev,
                               "H0_at_match": float(H0(md.u_minus, md.p_minus)),
                               "method": "matching"})


def matching_data(d, Delta) -> MatchingData:
    """Matching data of the numerically constructed front."""
    if d == 0:
        um, pm = sg_kink(-Delta)
        return MatchingData(2.0, float(um), float(pm), 0.0)
    return _front_core(float(d), float(Delta))[2]


# --- asymptotic fronts ----------------------------------------------------------

def _warn(flag, msg):
    if flag:
        warnings.warn(msg, AsymptoticWarning, stacklevel=3)


def h_asym_dlarge(d, Delta):
    """Leading-order inner level for d >> 1: the inner orbit is the saddle
    solution ``pi + (p0/k) sinh(k x)`` with ``k = sqrt(d - 1)`` and
    ``p(-Delta) = 2``, giving ``h = 2 / cosh(k Delta)^2``."""
    return 2.0 / math.cosh(math.sqrt(d - 1.0) * Delta) ** 2


def front_asym_dlarge(x, d, Delta, h=None, xstar_rule="standard"):
    """Plateau approximation for d >> 1.

    ``xstar_rule="standard"`` uses ``x* = Delta - 2 sqrt(2(2-h))/sqrt(d)``;
    ``"expanded"`` uses the direct expansion of ``Delta + ln tan(u-/4)`` with
    ``u- = pi - sqrt(2(2-h)/d)``, i.e. ``x* = Delta - sqrt(2(2-h))/(2 sqrt(d))``.
    """
    _warn(d < 25, f"front_asym_dlarge used at d={d} < 25")
    if h is None:
        h = h_asym_dlarge(d, Delta)
    r = math.sqrt(2.0 * (2.0 - h)) / math.sqrt(d)
    if xstar_rule == "standard":
        x_star = Delta - 2.0 * r
    elif xstar_rule == "expanded":
        x_star = Delta - 0.5 * r
    else:
        raise ValueError(xstar_rule)
    x = np.asarray(x, dtype=float)
    out = np.where(x < -Delta, 4.0 * np.arctan(np.exp(x + x_star)),
                   np.where(x > Delta, 4.0 * np.arctan(np.exp(x - x_star)), math.pi))
    return out if out.ndim else float(out)


def front_asym_DeltaLarge(x, d, Delta, return_info=False):
    """Approximate front for Delta >> 1 (d > 1 or 0 < d < 1)."""
    _warn(Delta < 5, f"front_asym_DeltaLarge used at Delta={Delta} < 5")
    if d == 1:
        raise ValueError("d = 1: use front_d1")
    if d <= 0:
        raise ValueError("front_asym_DeltaLarge needs d > 0")
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    if d > 1:
        u0m = math.acos((2.0 - d) / d)
        Lc = math.log(math.tan((u0m + math.pi) / 4.0))
        x_star = Delta + math.log(math.tan(u0m / 4.0))
        xt = math.sqrt(d - 1.0) * (-ax + Delta) + Lc
        inner_left = 4.0 * np.arctan(np.exp(xt)) - math.pi
        info = {"u0_minus": u0m, "L": Lc, "x_star": x_star}
    else:
        s = math.sqrt(1.0 - d)
        eps = 8.0 * (1.0 - s) / math.sqrt(d) * math.exp(-Delta * s)
        x_star = Delta * (1.0 - s) + math.log(2.0 * s * (1.0 - s) / d)
        xi = -ax * s
        # correction coefficient eps^2/8, the value consistent with the
        # initial slope sqrt(4 + eps^2) of the perturbed heteroclinic
        inner_left = 4.0 * np.arctan(np.exp(xi)) + eps**2 / 8.0 * (xi / np.cosh(xi) + np.sinh(xi))
        info = {"eps": eps, "x_star": x_star}
    outer_left = 4.0 * np.arctan(np.exp(-ax + x_star))
    left = np.where(ax > Delta, outer_left, inner_left)
    out = np.where(x <= 0, left, TWO_PI - left)
    if return_info:
        return out, info
    return out if out.ndim else float(out)


def perturbed_heteroclinic(xi, eps):
    """``4 arctan(e^xi) - pi + (eps^2/8)(xi/cosh xi + sinh xi)`` on ``|xi| <= L(eps)``."""
    if not 0 <= eps <= 0.2:
        raise ValueError("eps must lie in [0, 0.2]")
    xi = np.asarray(xi, dtype=float)
    if eps > 0 and np.any(np.abs(xi) > L_of_eps(eps) + 1e-12):
        raise ValueError("|xi| exceeds L(eps): approximation not valid there")
    out = 4.0 * np.arctan(np.exp(xi)) - math.pi + eps**2 / 8.0 * (xi / np.cosh(xi) + np.sinh(xi))
    return out if out.ndim else float(out)


def L_of_eps(eps, refine=True):
    """Half-length where the perturbed orbit reaches ``+-pi``; ``ln(8/eps)`` to leading order."""
    lead = math.log(8.0 / eps)
    if not refine:
        return lead
    f = lambda xi: (4.0 * math.atan(math.exp(xi)) - math.pi
                    + eps**2 / 8.0 * (xi / math.cosh(xi) + math.sinh(xi)) - math.pi)
    return brentq(f, 0.5 * lead, lead + 2.0, xtol=1e-14)


def pi_front(x, d):
    """Front connecting 0 to pi for the single-step inhomogeneity (d > 1)."""
    if not d > 1:
        raise ValueError("pi_front needs d > 1")
    u0m = math.acos((2.0 - d) / d)
    x1 = math.log(math.tan(u0m / 4.0))
    x2 = math.log(math.tan((u0m + math.pi) / 4.0))
    x = np.asarray(x, dtype=float)
    out = np.where(x < 0, 4.0 * np.arctan(np.exp(x + x1)),
                   4.0 * np.arctan(np.exp(math.sqrt(d - 1.0) * x + x2)) - math.pi)
    return out if out.ndim else float(out)
