"""Extended six-dimensional system and numerical persistence checks for the smooth pulse.

The steep inhomogeneity is itself the solution of an autonomous planar
system, so appending ``(rho, s)`` to the four stationary-front variables
gives a slow/fast system. Persistence of fronts as ``delta -> 0`` is checked
through the BVP with the closed-form pulse entering as a coefficient.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import bvp_solver as bs
from .front_construction import FrontSolution
from .inhomogeneity import InhomogeneityProfile, gardner_pulse, gardner_rhs
from .mesh import MeshSpec

log = logging.getLogger(__name__)

__all__ = [
    "ExtendedState",
    "PersistenceReport",
    "extended_rhs",
    "fast_invariant",
    "extended_consistency",
    "rho0_front",
    "persistence_study",
    "hypothesis_check",
]


@dataclass(frozen=True)
class ExtendedState:
    u: float
    p: float
    v: float
    q: float
    rho: float
    s: float

    def as_array(self):
        return np.array([self.u, self.p, self.v, self.q, self.rho, self.s])


def extended_rhs(state, alpha, d, eps, delta, frame="slow"):
    """Derivative of ``(u, p, v, q, rho, s)`` in the slow (x) or fast (x/delta) variable."""
    y = state.as_array() if isinstance(state, ExtendedState) else np.asarray(state, dtype=float)
    u, p, v, q, rho, s = y
    w = 1.0 - d * rho
    slow = np.array([p, w * np.sin(u) * np.cos(v), q,
                     w * np.sin(v) * np.cos(u) - alpha * np.sin(2.0 * v)])
    fast = np.array([s, gardner_rhs(rho, eps)])
    if frame == "slow":
        if not delta > 0:
            raise ValueError("the slow frame needs delta > 0")
        return np.concatenate([slow, fast / delta])
    if frame == "fast":
        return np.concatenate([delta * slow, fast])
    raise ValueError("frame must be 'slow' or 'fast'")


def fast_invariant(rho, s, eps):
    """First integral ``s^2/2 - G(rho)`` of the fast subsystem (zero on the pulse)."""
    G = rho**4 - (2.0 + 4.0 * eps / 3.0) * rho**3 + (1.0 + eps) * rho**2
    return 0.5 * s**2 - G


def extended_consistency(problem: bs.BvpProblem, solution: FrontSolution):
    """Sup of ``|K - extended_rhs|`` (slow components) at the collocation points.

    Uses the pulse in closed form for ``(rho, s)``; the solver's own right-hand
    side is not involved, so this checks that the converged BVP solution is an
    orbit of the extended system.
    """
    prof = problem.profile
    if prof.kind != "gardner":
        raise ValueError("extended consistency needs a gardner profile")
    gp = prof.gardner_params
    xs, Ys, K = bs.stage_data(problem, solution)
    rho, s = gardner_pulse(xs, gp)
    worst = 0.0
    for j in range(2):
        Y = Ys[:, j]
        states = np.column_stack([Y, rho[:, j], s[:, j]])
        f = np.array([extended_rhs(st, problem.alpha, prof.d, gp.epsilon, gp.delta)
                      for st in states])
        worst = max(worst, float(np.max(np.abs(K[:, j] - f[:, :4]))))
    return worst


@dataclass
class PersistenceReport:
    alpha: float
    d: float
    Delta: float
    deltas: list
    dist_u: list = field(default_factory=list)
    dist_v: list = field(default_factory=list)
    sigma_min: list = field(default_factory=list)
    epsilons: list = field(default_factory=list)
    order: float = float("nan")
    order_stderr: float = float("nan")
    hypotheses: dict = field(default_factory=dict)
    diagnostic: str | None = None

    @property
    def dist(self):
        return [max(a, b) for a, b in zip(self.dist_u, self.dist_v)]

    @property
    def monotone(self):
        dd = self.dist
        return all(b < a for a, b in zip(dd[:-1], dd[1:]))

    def to_dict(self):
        return {"alpha": self.alpha, "d": self.d, "Delta": self.Delta, "deltas": self.deltas,
                "dist_u": self.dist_u, "dist_v": self.dist_v, "sigma_min": self.sigma_min,
                "epsilons": self.epsilons, "order": self.order,
                "order_stderr": self.order_stderr, "hypotheses": self.hypotheses,
                "monotone": self.monotone, "diagnostic": self.diagnostic}

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("delta,epsilon,dist_u,dist_v,sigma_min\n")
            for row in zip(self.deltas, self.epsilons, self.dist_u, self.dist_v, self.sigma_min):
                fh.write(",".join(f"{v:.16e}" for v in row) + "\n")


def rho0_front(alpha, d, Delta, branch="auto", h_core=0.025):
    """Converged front for the piecewise hat.

    ``branch="trivial"`` gives the v = 0 front. ``branch="pitchfork"`` follows
    the trivial branch in alpha to the first zero crossing of the leading
    eigenvalue and then the bifurcating branch up to ``alpha``. ``"auto"``
    chooses by the sign of the leading eigenvalue on the trivial front.
    """
    prof = InhomogeneityProfile.piecewise(Delta, d)
    problem = bs.BvpProblem(prof, alpha, mesh=MeshSpec.for_profile(prof, h_core=h_core))
    return problem, bs.branch_solution(problem, branch)


def hypothesis_check(front: FrontSolution, Delta=None, problem: bs.BvpProblem | None = None,
                     slope_tol=1e-6, sigma_tol=1e-8):
    """Slope conditions at +-Delta and nonsingularity of the Newton Jacobian."""
    Delta = front.Delta if Delta is None else Delta
    _, p, _, q = front.interpolate(np.array([-Delta, Delta]))
    out = {"du_at_Delta": [float(p[0]), float(p[1])], "dv_at_Delta": [float(q[0]), float(q[1])],
           "du_nonzero": bool(np.all(np.abs(p) > slope_tol)),
           "dv_nonzero": bool(np.all(np.abs(q) > slope_tol))}
    if problem is not None:
        sig = bs.smallest_singular_value(problem, front)
        out["sigma_min"] = sig
        out["jacobian_nonsingular"] = bool(sig > sigma_tol)
    return out


def _sup_distance(a: FrontSolution, b: FrontSolution, x):
    ua, _, va, _ = a.interpolate(x)
    ub, _, vb, _ = b.interpolate(x)
    return float(np.max(np.abs(ua - ub))), float(np.max(np.abs(va - vb)))


def persistence_study(alpha, d, Delta, delta_ladder=(0.2, 0.1, 0.05, 0.025), branch="auto",
                      h_core=0.025, reference=None) -> PersistenceReport:
    """Distances between Gardner-pulse fronts and the piecewise-hat front along ``delta_ladder``."""
    ladder = sorted(map(float, delta_ladder), reverse=True)
    if reference is None:
        ref_problem, ref = rho0_front(alpha, d, Delta, branch, h_core)
    else:
        ref_problem, ref = reference
    rep = PersistenceReport(alpha, d, Delta, ladder)
    rep.hypotheses = hypothesis_check(ref, Delta, ref_problem)
    # compare on a fine common grid covering the core and the tails
    xc = np.linspace(-ref.L, ref.L, 40001)
    guess = ref
    for delta in ladder:
        prof = InhomogeneityProfile.gardner(Delta, delta, d)
        problem = bs.BvpProblem(prof, alpha, L=ref.L,
                                mesh=MeshSpec.for_profile(prof, h_core=h_core))
        try:
            sol = bs.solve(problem, guess)
        except bs.NonConvergenceError as exc:
            rep.diagnostic = f"solve failed at delta={delta}: {exc}"
            log.warning(rep.diagnostic)
            break
        du, dv = _sup_distance(sol, ref, xc)
        rep.dist_u.append(du)
        rep.dist_v.append(dv)
        rep.epsilons.append(float(prof.epsilon))
        rep.sigma_min.append(bs.smallest_singular_value(problem, sol))
        guess = sol
    n = len(rep.dist_u)
    if n >= 2:
        X = np.log(np.array(rep.deltas[:n]))
        Y = np.log(np.array(rep.dist[:n]))
        A = np.column_stack([X, np.ones_like(X)])
        coef, res, *_ = np.linalg.lstsq(A, Y, rcond=None)
        rep.order = float(coef[0])
        if n > 2:
            s2 = float(np.sum((Y - A @ coef) ** 2)) / (n - 2)
            cov = s2 * np.linalg.inv(A.T @ A)
            rep.order_stderr = float(math.sqrt(cov[0, 0]))
    return rep
