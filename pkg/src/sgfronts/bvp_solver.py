"""Collocation Newton solver and pseudo-arclength continuation for the coupled system.

The first-order system

    u' = p,  p' = w sin u cos v,  v' = q,  q' = w sin v cos u - alpha sin 2v,

with ``w = 1 - d rho(x)``, is discretized by two-stage Gauss-Legendre
collocation (order 4) on a symmetric graded mesh. The unknown vector stores,
interval by interval, the nodal state followed by the two stage slopes, which
keeps the Jacobian narrowly banded.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sps
from scipy.sparse.linalg import eigsh, splu

from .front_construction import FrontSolution, front_fields, sg_kink
from .inhomogeneity import InhomogeneityProfile
from .mesh import MeshSpec, domain_half_length, refine_midpoints

log = logging.getLogger(__name__)

__all__ = [
    "BvpProblem",
    "BranchPoint",
    "Branch",
    "NonConvergenceError",
    "NotAPitchforkError",
    "solve",
    "residual",
    "continue_branch",
    "locate_crossing",
    "switch_branch",
    "branch_off",
    "vanishing_point",
    "jacobian_spectrum",
    "trivial_guess",
    "stage_data",
    "branch_solution",
    "smallest_singular_value",
]

TWO_PI = 2.0 * math.pi
_S3 = math.sqrt(3.0)
_C = np.array([0.5 - _S3 / 6.0, 0.5 + _S3 / 6.0])
_A = np.array([[0.25, 0.25 - _S3 / 6.0], [0.25 + _S3 / 6.0, 0.25]])
PARAMS = ("alpha", "d", "Delta")


class NonConvergenceError(RuntimeError):
    def __init__(self, msg, history=None):
        super().__init__(msg)
        self.history = history or []


class NotAPitchforkError(RuntimeError):
    pass


@dataclass(frozen=True)
class BvpProblem:
    """Coupled stationary problem on [-L, L] with Dirichlet data (0, 0) and (2 pi, 0)."""

    profile: InhomogeneityProfile
    alpha: float
    L: float | None = None
    mesh: MeshSpec | None = None

    def __post_init__(self):
        object.__setattr__(self, "L", domain_half_length(self.profile.Delta, self.L))
        if self.mesh is None:
            object.__setattr__(self, "mesh", MeshSpec.for_profile(self.profile))

    @property
    def d(self):
        return self.profile.d

    @property
    def Delta(self):
        return self.profile.Delta

    def nodes(self):
        return self.mesh.nodes(self.Delta, self.L)

    def get(self, name):
        return self.alpha if name == "alpha" else getattr(self.profile, name)

    def with_(self, **kw):
        alpha = kw.pop("alpha", self.alpha)
        prof = self.profile.with_(**kw) if kw else self.profile
        L = self.L if "Delta" not in kw else domain_half_length(prof.Delta)
        return BvpProblem(prof, alpha, L, self.mesh)

    def frozen_mesh(self):
        """Same problem with node counts pinned, so the mesh moves smoothly with Delta."""
        return replace(self, mesh=self.mesh.frozen(self.Delta, self.L))


@dataclass
class BranchPoint:
    param_value: float
    solution: FrontSolution
    v_norm: float
    smallest_eig: float
    arclength: float
    leading_eig: float | None = None

    def row(self):
        return (self.param_value, self.v_norm, self.smallest_eig, self.arclength)


@dataclass
class Branch:
    param: str
    points: list = field(default_factory=list)
    crossings: list = field(default_factory=list)
    diagnostic: str | None = None
    vanish: BranchPoint | None = None

    def values(self):
        return np.array([b.param_value for b in self.points])

    def v_norms(self):
        return np.array([b.v_norm for b in self.points])

    def to_csv(self, path):
        rows = np.array([b.row() for b in self.points])
        np.savetxt(path, rows, delimiter=",", fmt="%.16e",
                   header="param,v_norm,smallest_eig,arclength", comments="")


# --- discretization --------------------------------------------------------------

def _rhs(w, alpha, y):
    u, p, v, q = y[..., 0], y[..., 1], y[..., 2], y[..., 3]
    su, cu, sv, cv = np.sin(u), np.cos(u), np.sin(v), np.cos(v)
    f = np.stack([p, w * su * cv, q, w * sv * cu - alpha * np.sin(2.0 * v)], axis=-1)
    J = np.zeros(y.shape + (4,))
    J[..., 0, 1] = 1.0
    J[..., 1, 0] = w * cu * cv
    J[..., 1, 2] = -w * su * sv
    J[..., 2, 3] = 1.0
    J[..., 3, 0] = -w * sv * su
    J[..., 3, 2] = w * cv * cu - 2.0 * alpha * np.cos(2.0 * v)
    return f, J


class _Collocation:
    """Residual and sparse Jacobian of the Gauss-2 collocation equations on fixed nodes."""

    def __init__(self, problem: BvpProblem, x=None):
        self.problem = problem
        self.x = problem.nodes() if x is None else np.asarray(x, dtype=float)
        self.h = np.diff(self.x)
        self.N = self.h.size
        xs = self.x[:-1, None] + _C[None, :] * self.h[:, None]
        self.w = 1.0 - problem.d * np.asarray(problem.profile.rho(xs), dtype=float)
        self.size = 12 * self.N + 4
        self._pattern = None

    def split(self, Z):
        N = self.N
        body = Z[:12 * N].reshape(N, 12)
        Y = np.vstack([body[:, :4], Z[12 * N:][None, :]])
        K = body[:, 4:].reshape(N, 2, 4)
        return Y, K

    def pack(self, Y, K):
        body = np.concatenate([Y[:-1], K.reshape(self.N, 8)], axis=1)
        return np.concatenate([body.ravel(), Y[-1]])

    def _stages(self, Y, K):
        h = self.h[:, None, None]
        return Y[:-1, None, :] + h * np.einsum("jl,nlc->njc", _A, K)

    def residual(self, Z):
        Y, K = self.split(Z)
        f, _ = _rhs(self.w, self.problem.alpha, self._stages(Y, K))
        G = K - f
        E = Y[1:] - Y[:-1] - 0.5 * self.h[:, None] * (K[:, 0] + K[:, 1])
        body = np.concatenate([G.reshape(self.N, 8), E], axis=1)
        return np.concatenate([[Y[0, 0], Y[0, 2]], body.ravel(),
                               [Y[-1, 0] - TWO_PI, Y[-1, 2]]])

    def jacobian(self, Z):
        Y, K = self.split(Z)
        _, J = _rhs(self.w, self.problem.alpha, self._stages(Y, K))  # (N, 2, 4, 4)
        N, h = self.N, self.h
        n = np.arange(N)
        eye = np.eye(4)
        rows, cols, vals = [], [], []

        def add(r, c, v):
            rows.append(r.ravel())
            cols.append(c.ravel())
            vals.append(v.ravel())

        cy = 12 * n[:, None] + np.arange(4)[None, :]            # y_i columns
        cyn = 12 * (n[:, None] + 1) + np.arange(4)[None, :]     # y_{i+1} columns
        ck = [12 * n[:, None] + 4 + 4 * j + np.arange(4)[None, :] for j in range(2)]
        for j in range(2):
            r = 2 + 12 * n[:, None] + 4 * j + np.arange(4)[None, :]
            rr = np.broadcast_to(r[:, :, None], (N, 4, 4))
            add(rr, np.broadcast_to(cy[:, None, :], (N, 4, 4)), -J[:, j])
            for l in range(2):
                blk = eye[None] * (j == l) - h[:, None, None] * _A[j, l] * J[:, j]
                add(rr, np.broadcast_to(ck[l][:, None, :], (N, 4, 4)), blk)
        r = 2 + 12 * n[:, None] + 8 + np.arange(4)[None, :]
        add(r, cy, -np.ones((N, 4)))
        add(r, cyn, np.ones((N, 4)))
        for l in range(2):
            add(r, ck[l], np.broadcast_to(-0.5 * h[:, None], (N, 4)))
        last = 12 * N
        add(np.array([0, 1]), np.array([0, 2]), np.ones(2))
        add(np.array([self.size - 2, self.size - 1]), np.array([last, last + 2]), np.ones(2))
        return sps.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                              shape=(self.size, self.size))

    def initial(self, fields):
        """Unknown vector from nodal fields (u, p, v, q), with stage slopes from the rhs."""
        Y = np.column_stack(fields)
        # stage slopes by evaluating f on the Hermite interpolant at the Gauss points
        from scipy.interpolate import CubicHermiteSpline

        U = CubicHermiteSpline(self.x, Y[:, 0], Y[:, 1])
        V = CubicHermiteSpline(self.x, Y[:, 2], Y[:, 3])
        xs = self.x[:-1, None] + _C[None, :] * self.h[:, None]
        st = np.stack([U(xs), U(xs, 1), V(xs), V(xs, 1)], axis=-1)
        K, _ = _rhs(self.w, self.problem.alpha, st)
        return self.pack(Y, K)

    def to_solution(self, Z, res_norm, meta):
        Y, _ = self.split(Z)
        pr = self.problem
        meta = dict(meta)
        meta["collocation"] = Z.copy()
        return FrontSolution(self.x, Y[:, 0], Y[:, 1], Y[:, 2], Y[:, 3], pr.alpha, pr.d, pr.Delta,
                             pr.profile, residual_norm=res_norm, meta=meta)


def _fields_on(guess: FrontSolution, x):
    if guess.grid.size == x.size and np.array_equal(guess.grid, x):
        return guess.u, guess.p, guess.v, guess.q
    return guess.interpolate(x)


def _unknowns(col, sol: FrontSolution):
    """Collocation unknowns for ``sol``: stored stage data when the grid matches, else rebuilt."""
    Z = sol.meta.get("collocation") if isinstance(sol.meta, dict) else None
    if Z is not None and Z.size == col.size and sol.grid.size == col.x.size \
            and np.array_equal(sol.grid, col.x):
        Y, _ = col.split(Z)
        if np.array_equal(Y[:, 0], sol.u) and np.array_equal(Y[:, 2], sol.v):
            return Z.copy()
    return col.initial(_fields_on(sol, col.x))


def stage_data(problem: BvpProblem, solution: FrontSolution):
    """Gauss points, stage states and stage slopes of a collocation solution."""
    col = _Collocation(problem, solution.grid)
    Z = _unknowns(col, solution)
    Y, K = col.split(Z)
    xs = col.x[:-1, None] + _C[None, :] * col.h[:, None]
    return xs, col._stages(Y, K), K


def residual(problem: BvpProblem, solution: FrontSolution):
    """Sup-norm of the collocation equations at ``solution`` on its own grid."""
    col = _Collocation(problem, solution.grid)
    return float(np.max(np.abs(col.residual(_unknowns(col, solution)))))


def trivial_guess(problem: BvpProblem, x=None):
    """Scalar front of the piecewise hat with the same (d, Delta) and v = 0."""
    x = problem.nodes() if x is None else x
    if problem.d == 0:
        u, p = sg_kink(x)
    else:
        u, p = front_fields(problem.d, problem.Delta, x)
    z = np.zeros_like(x)
    return FrontSolution(x, u, p, z, z, problem.alpha, problem.d, problem.Delta, problem.profile)


def _newton(F, Jac, Z, tol, max_iter, symmetric_fix=None):
    history = []
    r = F(Z)
    nr = float(np.linalg.norm(r))
    for it in range(max_iter):
        sup = float(np.max(np.abs(r)))
        history.append(sup)
        if sup < tol:
            return Z, r, history, it
        lu = splu(Jac(Z))
        dZ = lu.solve(-r)
        lam = 1.0
        while True:
            Zn = Z + lam * dZ
            rn = F(Zn)
            nrn = float(np.linalg.norm(rn))
            if nrn <= (1.0 - 1e-4 * lam) * nr or lam < 1e-10:
                break
            lam *= 0.5
        if lam < 1e-10:
            raise NonConvergenceError("Armijo backtracking failed", history)
        Z, r, nr = Zn, rn, nrn
        # Stop when the Newton step itself is at round-off level
        if lam == 1.0 and np.max(np.abs(dZ)) < 1e-13 * max(1.0, np.max(np.abs(Z))):
            history.append(float(np.max(np.abs(r))))
            if history[-1] < tol:
                return Z, r, history, it + 1
    raise NonConvergenceError(f"no convergence in {max_iter} Newton iterations", history)


def solve(problem: BvpProblem, guess: FrontSolution | None = None, tol=1e-10, max_iter=50,
          x=None) -> FrontSolution:
    """Newton-converged collocation solution; no phase condition is imposed."""
    col = _Collocation(problem, x)
    guess = trivial_guess(problem, col.x) if guess is None else guess
    Z0 = _unknowns(col, guess)
    Z, r, hist, nit = _newton(col.residual, col.jacobian, Z0, tol * 0.1, max_iter)
    res = float(np.max(np.abs(r)))
    meta = {"newton_history": hist, "iterations": nit, "method": "gauss2"}
    # flag the translation mode of the homogeneous problem
    if problem.d == 0 and problem.alpha == 0:
        meta["near_singular"] = True
    return col.to_solution(Z, res, meta)


def smallest_singular_value(problem: BvpProblem, solution: FrontSolution, iters=30):
    """Smallest singular value of the collocation Jacobian at ``solution``.

    The continuity rows are divided by the local step so that every row
    approximates a derivative; the value then tends to a mesh-independent
    limit. Computed by power iteration on ``(J^T J)^{-1}`` with one LU.
    """
    col = _Collocation(problem, solution.grid)
    Z = _unknowns(col, solution)
    J = col.jacobian(Z).tocsr()
    scale = np.ones(col.size)
    rows_E = 2 + 12 * np.arange(col.N)[:, None] + 8 + np.arange(4)[None, :]
    scale[rows_E] = 1.0 / np.repeat(col.h[:, None], 4, axis=1)
    J = sps.diags(scale) @ J
    lu = splu(J.tocsc())
    rng = np.random.default_rng(0)
    z = rng.standard_normal(col.size)
    z /= np.linalg.norm(z)
    mu = 0.0
    for _ in range(iters):
        y = lu.solve(lu.solve(z), trans="T")
        mu_new = float(np.linalg.norm(y))
        z = y / mu_new
        if abs(mu_new - mu) < 1e-10 * mu_new:
            mu = mu_new
            break
        mu = mu_new
    return 1.0 / math.sqrt(mu)


# --- linearization ---------------------------------------------------------------

def _lin_coeffs(sol: FrontSolution, x, profile, d, alpha):
    u, _, v, _ = _fields_on(sol, x)
    w = 1.0 - d * np.asarray(profile.rho(x), dtype=float)
    if profile.kind == "piecewise":
        # cell-averaged weight at the jump nodes keeps the scheme second order
        for xj in (-profile.Delta, profile.Delta):
            for i in np.nonzero(np.abs(x - xj) < 1e-13 * max(1.0, abs(xj)))[0]:
                if 0 < i < x.size - 1:
                    hl, hr = x[i] - x[i - 1], x[i + 1] - x[i]
                    frac_in = (hl if xj > 0 else hr) / (hl + hr)
                    w[i] = 1.0 - d * frac_in
    a = w * np.cos(u) * np.cos(v)
    c = w * np.cos(v) * np.cos(u) - 2.0 * alpha * np.cos(2.0 * v)
    b = -w * np.sin(u) * np.sin(v)
    return a, b, c


def _top_eigs(x, a, b, c, k):
    """Largest ``k`` eigenvalues of [[D2 - a, -b], [-b, D2 - c]] with Dirichlet ends."""
    hs = np.diff(x)
    hl, hr = hs[:-1], hs[1:]
    wq = 0.5 * (hl + hr)
    m = wq.size
    sq = np.sqrt(wq)
    lap_d = (-1.0 / hl - 1.0 / hr) / wq
    lap_o = (1.0 / hr[:-1]) / (sq[:-1] * sq[1:])
    ai, bi, ci = a[1:-1], b[1:-1], c[1:-1]
    # interleaved ordering (U_0, V_0, U_1, V_1, ...) keeps the matrix pentadiagonal
    n = 2 * m
    main = np.empty(n)
    main[0::2] = lap_d - ai
    main[1::2] = lap_d - ci
    off1 = np.zeros(n - 1)
    off1[0::2] = -bi
    off2 = np.empty(n - 2)
    off2[0::2] = lap_o
    off2[1::2] = lap_o
    M = sps.diags([off2, off1, main, off1, off2], [-2, -1, 0, 1, 2], format="csc")
    # the Laplacian part is negative semidefinite, so the pointwise 2x2 potential
    # blocks bound the spectrum from above; shift just beyond that bound
    tr, det = -(ai + ci), ai * ci - bi * bi
    top = np.max(0.5 * tr + np.sqrt(np.maximum(0.25 * tr * tr - det, 0.0)))
    sigma = float(top) + 0.05
    vals, vecs = eigsh(M, k=k, sigma=sigma, which="LM", v0=np.ones(n))
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    vmass = np.sum(vecs[1::2] ** 2, axis=0)
    return vals, vmass, vecs


def jacobian_spectrum(solution: FrontSolution, k=4, refine=True, alpha=None):
    """Leading eigenvalues of the self-adjoint linearization at ``solution``.

    Returns ``(eigenvalues, v_mass)`` sorted in decreasing order; ``v_mass`` is
    the fraction of each eigenvector carried by the v-component. With
    ``refine`` one bisection of the mesh is Richardson-combined.
    """
    alpha = solution.alpha if alpha is None else alpha
    prof, d = solution.profile, solution.d
    x = solution.grid
    vals0, mass0, _ = _top_eigs(x, *_lin_coeffs(solution, x, prof, d, alpha), k)
    if not refine:
        return vals0, mass0
    xf = refine_midpoints(x)
    vals1, mass1, _ = _top_eigs(xf, *_lin_coeffs(solution, xf, prof, d, alpha), k)
    # pair eigenvalues by proximity before extrapolating
    out = np.empty_like(vals0)
    for i, lam in enumerate(vals0):
        j = int(np.argmin(np.abs(vals1 - lam)))
        out[i] = (4.0 * vals1[j] - lam) / 3.0
    order = np.argsort(out)[::-1]
    return out[order], mass1[order]


def _monitor(sol):
    vals, mass = jacobian_spectrum(sol, k=3)
    smallest = float(vals[np.argmin(np.abs(vals))])
    return smallest, float(vals[0]), mass


# --- continuation ----------------------------------------------------------------

class _Extended:
    """Collocation equations with one parameter appended as an unknown."""

    def __init__(self, problem: BvpProblem, param, x):
        self.base = problem
        self.param = param
        self.x = x
        self._cache = {}

    def col(self, value):
        key = float(value)
        if key not in self._cache:
            if len(self._cache) > 8:
                self._cache.clear()
            pr = self.base.with_(**{self.param: key})
            x = self.x if self.param != "Delta" else pr.nodes()
            self._cache[key] = _Collocation(pr, x)
        return self._cache[key]

    def F(self, Z, lam):
        return self.col(lam).residual(Z)

    def dF_dlam(self, Z, lam, eps=None):
        eps = eps or 1e-7 * max(1.0, abs(lam))
        return (self.F(Z, lam + eps) - self.F(Z, lam - eps)) / (2.0 * eps)


def _wnorm(tZ, tl):
    return math.sqrt(np.dot(tZ, tZ) / tZ.size + tl * tl)


def _bordered_newton(ext, Z, lam, tangent, Z0, lam0, ds, tol, max_iter=15):
    """Corrector for F = 0 plus the arclength condition in the RMS-weighted inner product."""
    tZ, tl = tangent
    n = Z.size
    hist = []
    for it in range(max_iter):
        r = ext.F(Z, lam)
        g = np.dot(tZ, Z - Z0) / n + tl * (lam - lam0) - ds
        sup = max(float(np.max(np.abs(r))), abs(g))
        hist.append(sup)
        if sup < tol:
            return Z, lam, hist
        J = ext.col(lam).jacobian(Z)
        Fl = ext.dF_dlam(Z, lam)
        M = sps.bmat([[J, Fl[:, None]], [tZ[None, :] / n, np.array([[tl]])]], format="csc")
        step = splu(M).solve(-np.concatenate([r, [g]]))
        Z = Z + step[:-1]
        lam = lam + step[-1]
        if it > 3 and hist[-1] > hist[-2]:
            break
    raise NonConvergenceError("corrector failed", hist)


def _tangent(ext, Z, lam, prev=None):
    J = ext.col(lam).jacobian(Z)
    Fl = ext.dF_dlam(Z, lam)
    if prev is None:
        # dZ/dlam from J dZ = -F_lam, tangent (dZ, 1) normalized
        dZ = splu(J).solve(-Fl)
        t = np.concatenate([dZ, [1.0]])
    else:
        n = Z.size
        M = sps.bmat([[J, Fl[:, None]], [prev[0][None, :] / n, np.array([[prev[1]]])]],
                     format="csc")
        rhs = np.zeros(J.shape[0] + 1)
        rhs[-1] = 1.0
        t = splu(M).solve(rhs)
    t /= _wnorm(t[:-1], t[-1])
    return t[:-1], t[-1]


def continue_branch(problem: BvpProblem, param, stop, guess: FrontSolution | None = None,
                    ds=0.02, ds_min=1e-6, ds_max=0.1, max_steps=2000, tol=1e-10,
                    locate=True, locate_tol=1e-7, monitor=True, vanish_tol=None) -> Branch:
    """Pseudo-arclength continuation in ``param`` from ``problem`` towards ``stop``.

    The leading eigenvalue of the linearization is tracked; sign changes are
    bracketed and refined to ``locate_tol`` in the parameter. With
    ``vanish_tol`` the run stops once ``||v||`` falls below it, and the
    parameter where ``v`` vanishes is extrapolated from the square-root law.
    """
    if param not in PARAMS:
        raise ValueError(f"param must be one of {PARAMS}")
    if param == "Delta":
        problem = problem.frozen_mesh()
    sol = solve(problem, guess, tol=tol)
    ext = _Extended(problem, param, sol.grid)
    lam = problem.get(param)
    Z = _unknowns(ext.col(lam), sol)
    tZ, tl = _tangent(ext, Z, lam)
    direction = 1.0 if stop > lam else -1.0
    if tl * direction < 0:
        tZ, tl = -tZ, -tl
    return _march(ext, problem, Z, lam, tZ, tl, stop, ds, ds_min, ds_max, max_steps, tol,
                  locate, locate_tol, monitor, vanish_tol)


def branch_off(at: BranchPoint, problem: BvpProblem, param, stop, side=1, ds=0.01,
               ds_min=1e-6, ds_max=0.05, max_steps=2000, tol=1e-10, monitor=True,
               vanish_tol=None) -> Branch:
    """Continue the non-trivial pitchfork branch leaving ``at``.

    The first tangent is the null vector of the collocation Jacobian at the
    crossing (found by inverse iteration), with zero parameter component;
    ``side`` picks the sign of v.
    """
    sol = at.solution
    base = problem.with_(**{param: at.param_value})
    ext = _Extended(base, param, sol.grid)
    lam = at.param_value
    col = ext.col(lam)
    Z = _unknowns(col, sol)
    s1, _ = switch_branch(at, amplitude=1.0)
    seed = col.initial((s1.u - sol.u, s1.p - sol.p, s1.v - sol.v, s1.q - sol.q))
    J = col.jacobian(Z)
    lu = splu(J)
    t = seed / np.linalg.norm(seed)
    best, best_res = t, np.inf
    for _ in range(6):
        t = lu.solve(t)
        t /= np.linalg.norm(t)
        res = float(np.max(np.abs(J @ t)))
        if res < best_res:
            best, best_res = t, res
    t = best
    Y, _ = col.split(t)
    if np.dot(Y[:, 2], col.split(seed)[0][:, 2]) < 0:
        t = -t
    tZ, tl = side * t, 0.0
    nrm = _wnorm(tZ, tl)
    tZ = tZ / nrm
    return _march(ext, base, Z, lam, tZ, tl, stop, ds, ds_min, ds_max, max_steps, tol,
                  False, 1e-7, monitor, vanish_tol, first_tangent_only=True)


def _march(ext, problem, Z, lam, tZ, tl, stop, ds, ds_min, ds_max, max_steps, tol,
           locate, locate_tol, monitor, vanish_tol, first_tangent_only=False):
    param = ext.param
    branch = Branch(param)
    s = 0.0
    direction = None if first_tangent_only else (1.0 if stop > lam else -1.0)

    def record(Z, lam, s):
        c = ext.col(lam)
        res = float(np.max(np.abs(c.residual(Z))))
        so = c.to_solution(Z, res, {"param": param})
        if monitor:
            smallest, lead, _ = _monitor(so)
        else:
            smallest = lead = float("nan")
        bp = BranchPoint(float(lam), so, so.v_norm, smallest, s, lead)
        branch.points.append(bp)
        return bp

    prev = record(Z, lam, s)
    peak = prev.v_norm
    steps = 0
    while steps < max_steps:
        steps += 1
        if direction is not None and (lam - stop) * direction >= 0:
            break
        try:
            Zp, lp = Z + ds * tZ, lam + ds * tl
            Zn, ln, hist = _bordered_newton(ext, Zp, lp, (tZ, tl), Z, lam, ds, 0.1 * tol)
        except (NonConvergenceError, RuntimeError, np.linalg.LinAlgError) as exc:
            ds *= 0.5
            if ds < ds_min:
                branch.diagnostic = f"step collapse at {param}={lam:.10g}: {exc}"
                log.warning(branch.diagnostic)
                break
            continue
        s += ds
        tZn, tln = _tangent(ext, Zn, ln, prev=(tZ, tl))
        Z, lam, tZ, tl = Zn, ln, tZn, tln
        if direction is None:
            direction = 1.0 if stop > branch.points[0].param_value else -1.0
            if tl * direction < 0:
                # the first step went the wrong way along the parameter; turn around
                branch.points.clear()
                tZ, tl = -tZ, -tl
        bp = record(Z, lam, s)
        if monitor and locate and len(branch.points) > 1 and np.isfinite(prev.leading_eig) \
                and np.sign(bp.leading_eig) != np.sign(prev.leading_eig):
            try:
                branch.crossings.append(locate_crossing(problem, param, prev, bp, tol=locate_tol))
            except (NonConvergenceError, ValueError) as exc:
                log.warning("crossing not refined: %s", exc)
        prev = bp
        peak = max(peak, bp.v_norm)
        if vanish_tol is not None and peak > 10 * vanish_tol and bp.v_norm < vanish_tol:
            branch.diagnostic = "v vanished"
            if monitor and len(branch.points) > 1:
                _refine_vanishing(branch, problem)
            break
        if len(hist) <= 3:
            ds = min(ds * 1.5, ds_max)
        elif len(hist) > 6:
            ds = max(ds * 0.5, ds_min)
    return branch


def _refine_vanishing(branch: Branch, problem: BvpProblem):
    """Locate where the non-trivial branch rejoins v = 0 as a crossing on the trivial branch."""
    last, before = branch.points[-1], branch.points[-2]
    if before.v_norm <= 10 * last.v_norm:
        return
    param = branch.param
    sol = before.solution
    z = np.zeros_like(sol.v)
    pr = problem.with_(**{param: before.param_value})
    x = sol.grid if param != "Delta" else None
    try:
        triv = solve(pr, sol.replace(v=z, q=z, meta={}), x=x)
        smallest, lead, _ = _monitor(triv)
        a = BranchPoint(before.param_value, triv, triv.v_norm, smallest, float("nan"), lead)
        if np.sign(lead) != np.sign(last.leading_eig):
            branch.vanish = locate_crossing(problem, param, a, last)
            branch.crossings.append(branch.vanish)
    except NonConvergenceError as exc:
        log.warning("vanishing point not refined: %s", exc)


def vanishing_point(branch: Branch, n_fit=4, floor=1e-6):
    """Parameter where ``||v||`` reaches zero.

    Uses the refined crossing on the trivial branch when the run located it,
    otherwise a linear fit of ``||v||^2`` over the last non-trivial points.
    """
    if branch.vanish is not None:
        return branch.vanish.param_value
    pts = [b for b in branch.points if b.v_norm > floor]
    if len(pts) < 2:
        raise ValueError("not enough non-trivial points to extrapolate")
    pts = pts[-n_fit:]
    x = np.array([b.param_value for b in pts])
    y = np.array([b.v_norm ** 2 for b in pts])
    slope, icpt = np.polyfit(x, y, 1)
    return float(-icpt / slope)


def locate_crossing(problem: BvpProblem, param, a: BranchPoint, b: BranchPoint, tol=1e-7,
                    max_iter=60) -> BranchPoint:
    """Refine a sign change of the leading eigenvalue between two branch points (Illinois)."""
    pa, pb = a.param_value, b.param_value
    fa, fb = a.leading_eig, b.leading_eig
    sa, sb = a.solution, b.solution
    side = 0
    best = a if abs(fa) < abs(fb) else b
    for _ in range(max_iter):
        if abs(pb - pa) < tol:
            break
        pm = (pa * fb - pb * fa) / (fb - fa)
        if not min(pa, pb) < pm < max(pa, pb):
            pm = 0.5 * (pa + pb)
        pr = problem.with_(**{param: pm})
        guess = sa if abs(pm - pa) < abs(pm - pb) else sb
        x = sa.grid if param != "Delta" else None
        sm = solve(pr, guess, x=x)
        smallest, lead, _ = _monitor(sm)
        best = BranchPoint(pm, sm, sm.v_norm, smallest, float("nan"), lead)
        if lead == 0.0:
            break
        if np.sign(lead) == np.sign(fa):
            pa, fa, sa = pm, lead, sm
            if side == -1:
                fb *= 0.5
            side = -1
        else:
            pb, fb, sb = pm, lead, sm
            if side == 1:
                fa *= 0.5
            side = 1
    return best


def switch_branch(at: BranchPoint, amplitude=1e-3, mass_threshold=0.99):
    """Two seeds off a pitchfork point: u unchanged, v = +-(null vector) with ||v|| = amplitude."""
    sol = at.solution
    x = sol.grid
    vals, mass, vecs = _top_eigs(x, *_lin_coeffs(sol, x, sol.profile, sol.d, sol.alpha), 3)
    i = int(np.argmin(np.abs(vals)))
    if mass[i] < mass_threshold:
        raise NotAPitchforkError(f"null vector v-mass {mass[i]:.3f} below {mass_threshold}")
    hs = np.diff(x)
    wq = 0.5 * (hs[:-1] + hs[1:])
    V = np.zeros_like(x)
    V[1:-1] = vecs[1::2, i] / np.sqrt(wq)
    if V[np.argmax(np.abs(V))] < 0:
        V = -V
    Vp = np.gradient(V, x, edge_order=2)
    tmp = sol.replace(v=V, q=Vp)
    V = V * amplitude / tmp.v_norm
    Vp = Vp * amplitude / tmp.v_norm
    return sol.replace(v=sol.v + V, q=sol.q + Vp), sol.replace(v=sol.v - V, q=sol.q - Vp)


def branch_solution(problem: BvpProblem, branch="auto", alpha_start=0.01):
    """Converged solution of ``problem`` on the trivial or the pitchfork branch.

    ``"pitchfork"`` follows the v = 0 branch in alpha from ``alpha_start`` to
    the first zero crossing of the leading eigenvalue, then the bifurcating
    branch up to ``problem.alpha``. ``"auto"`` picks the pitchfork branch when
    the v = 0 front is unstable.
    """
    trivial = solve(problem)
    if branch == "auto":
        lead = jacobian_spectrum(trivial, k=2)[0][0]
        branch = "pitchfork" if lead > 0 else "trivial"
    if branch == "trivial":
        return trivial
    if branch != "pitchfork":
        raise ValueError("branch must be 'auto', 'trivial' or 'pitchfork'")
    start = problem.with_(alpha=alpha_start)
    br = continue_branch(start, "alpha", problem.alpha, ds=0.05, ds_max=0.1)
    if not br.crossings:
        raise NonConvergenceError("no pitchfork crossing below the requested alpha")
    nb = branch_off(br.crossings[0], start, "alpha", problem.alpha, ds=0.01, ds_max=0.05,
                    monitor=False)
    near = min(nb.points, key=lambda b: abs(b.param_value - problem.alpha))
    return solve(problem, near.solution)
