"""Spatial inhomogeneity profiles rho(x).

Three kinds are supported:

* ``piecewise``: the hat ``rho0`` equal to 1 on ``|x| < Delta`` and 0 outside,
* ``tanh``: the smooth hat ``[tanh((x+Delta)/delta) + tanh((Delta-x)/delta)]/2``,
* ``gardner``: the homoclinic pulse ``a / (1 + b cosh(c x / delta))`` of
  ``delta^2 rho'' = 4 rho^3 - (6 + 4 eps) rho^2 + 2 (1 + eps) rho``,
  with ``eps`` calibrated so that ``rho(+-Delta) = 1/2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "HatParams",
    "GardnerParams",
    "InhomogeneityProfile",
    "InfeasibleGeometryError",
    "rho0",
    "rho_tanh",
    "gardner_pulse",
    "gardner_rhs",
    "epsilon_of",
    "heteroclinic_rho",
    "pulse_vs_step_report",
]

KINDS = ("piecewise", "tanh", "gardner")


class InfeasibleGeometryError(ValueError):
    """Raised when no pulse with rho(+-Delta) = 1/2 exists for the given Delta/delta."""


def _check_delta(Delta):
    if not Delta > 0:
        raise ValueError(f"Delta must be positive, got {Delta!r}")


def rho0(x, Delta):
    """Piecewise-constant hat, with the midpoint value 1/2 at ``|x| = Delta``."""
    _check_delta(Delta)
    ax = np.abs(np.asarray(x, dtype=float))
    out = np.where(ax < Delta, 1.0, 0.0)
    out = np.where(ax == Delta, 0.5, out)
    return out if out.ndim else float(out)


def rho_tanh(x, Delta, delta):
    _check_delta(Delta)
    if not delta > 0:
        raise ValueError("delta must be positive; use rho0 for the sharp limit")
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)  # evaluate on |x| so that evenness is exact
    out = 0.5 * (np.tanh((ax + Delta) / delta) + np.tanh((Delta - ax) / delta))
    return out if out.ndim else float(out)


def _rho_tanh_dx(x, Delta, delta):
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    g = 0.5 / delta * (1.0 / np.cosh((ax + Delta) / delta) ** 2
                       - 1.0 / np.cosh((Delta - ax) / delta) ** 2)
    return np.sign(x) * g


@dataclass(frozen=True)
class HatParams:
    Delta: float
    delta: float = 0.0

    def __post_init__(self):
        _check_delta(self.Delta)
        if self.delta < 0:
            raise ValueError("delta must be >= 0")


@dataclass(frozen=True)
class GardnerParams:
    """Pulse coefficients for steepness ``delta`` and perturbation ``epsilon``."""

    delta: float
    epsilon: float
    a: float = field(init=False)
    b: float = field(init=False)
    c: float = field(init=False)

    def __post_init__(self):
        eps = self.epsilon
        if not (0.0 < eps < 1.0):
            raise ValueError(f"epsilon must lie in (0, 1), got {eps!r}")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        object.__setattr__(self, "a", 12.0 * (1.0 + eps) / (12.0 + 8.0 * eps))
        # 1 - 144(1+eps)/(12+8eps)^2 simplifies to eps(3+4eps)/(3+2eps)^2;
        # the simplified form keeps full precision for tiny eps.
        object.__setattr__(self, "b", math.sqrt(eps * (3.0 + 4.0 * eps)) / (3.0 + 2.0 * eps))
        object.__setattr__(self, "c", math.sqrt(2.0 * (1.0 + eps)))


def gardner_pulse(x, params: GardnerParams):
    """Return ``(rho, s)`` with ``s = delta * drho/dx``.

    ``b cosh(z)`` is written as ``exp(w) + (b/2) exp(-|z|)`` with
    ``w = log(b/2) + |z|`` so that neither term overflows for large ``|x|``.
    """
    a, b, c = params.a, params.b, params.c
    x = np.asarray(x, dtype=float)
    z = c * np.abs(x) / params.delta
    w = math.log(b / 2.0) + z
    tail = (b / 2.0) * np.exp(-z)
    # log(1 + b cosh z) computed stably
    log_den = np.logaddexp(np.log1p(tail), w)
    rho = a * np.exp(-log_den)
    # rho * b sinh(z) = rho * (e^w - tail); rho * e^w = a / (e^{-w}(1 + tail) + 1)
    rho_ew = a * np.exp(w - log_den)
    s = -np.sign(x) * c * (rho / a) * (rho_ew - rho * tail)
    if rho.ndim == 0:
        return float(rho), float(s)
    return rho, s


def gardner_rhs(rho, epsilon):
    """Right-hand side ``4 rho^3 - (6 + 4 eps) rho^2 + 2 (1 + eps) rho``."""
    return 4.0 * rho**3 - (6.0 + 4.0 * epsilon) * rho**2 + 2.0 * (1.0 + epsilon) * rho


def _half_width_ratio(eps):
    # Delta/delta at which the pulse crosses 1/2. The arccosh argument
    # (3+4eps)/(b(3+2eps)) reduces to sqrt(4 + 3/eps).
    return math.acosh(math.sqrt(4.0 + 3.0 / eps)) / math.sqrt(2.0 * (1.0 + eps))


def epsilon_of(Delta, delta):
    """Calibrate eps so the Gardner pulse takes the value 1/2 at ``x = +-Delta``.

    Brent's method on ``log eps``; the bracket is centred on the leading-order
    value ``12 exp(-2 sqrt(2) Delta/delta)``.
    """
    _check_delta(Delta)
    if not delta > 0:
        raise ValueError("delta must be positive")
    r = Delta / delta
    if r <= _half_width_ratio(1.0 - 1e-12):
        raise InfeasibleGeometryError(
            f"Delta/delta = {r:.6g} too small: no eps in (0,1) gives rho(Delta) = 1/2")
    log_lead = math.log(12.0) - 2.0 * math.sqrt(2.0) * r
    lo = log_lead - 10.0
    hi = min(log_lead + 10.0, math.log1p(-1e-12))
    if lo < -740.0:
        raise InfeasibleGeometryError(f"eps underflows double precision at Delta/delta = {r:.6g}")
    g = lambda le: _half_width_ratio(math.exp(le)) - r
    if g(lo) * g(hi) > 0:
        raise InfeasibleGeometryError(f"no bracket for eps at Delta/delta = {r:.6g}")
    le = brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return math.exp(le)


def heteroclinic_rho(xi, sign=1):
    """Heteroclinic connection of the eps = 0 fast system, ``(rho, s)``."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    xi = np.asarray(xi, dtype=float)
    t = xi / math.sqrt(2.0)
    rho = 0.5 * (np.tanh(sign * t) + 1.0)
    s = sign * math.sqrt(2.0) / 4.0 / np.cosh(t) ** 2
    if rho.ndim == 0:
        return float(rho), float(s)
    return rho, s


@dataclass(frozen=True)
class InhomogeneityProfile:
    """Evaluable even profile rho(x) with strength ``d``.

    ``delta`` is 0 for the piecewise hat. For the Gardner pulse ``epsilon`` is
    calibrated from ``(Delta, delta)`` unless given explicitly.
    """

    kind: str
    Delta: float
    delta: float = 0.0
    d: float = 1.0
    epsilon: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}; expected one of {KINDS}")
        _check_delta(self.Delta)
        if self.kind == "piecewise":
            if self.delta != 0.0:
                object.__setattr__(self, "delta", 0.0)
        elif not self.delta > 0:
            raise ValueError(f"{self.kind} profile needs delta > 0")
        if self.kind == "gardner" and self.epsilon is None:
            object.__setattr__(self, "epsilon", epsilon_of(self.Delta, self.delta))

    @classmethod
    def piecewise(cls, Delta, d=1.0):
        return cls("piecewise", Delta, 0.0, d)

    @classmethod
    def tanh(cls, Delta, delta, d=1.0):
        return cls("tanh", Delta, delta, d)

    @classmethod
    def gardner(cls, Delta, delta, d=1.0, epsilon=None):
        return cls("gardner", Delta, delta, d, epsilon)

    @property
    def gardner_params(self) -> GardnerParams:
        if self.kind != "gardner":
            raise AttributeError("only gardner profiles carry pulse coefficients")
        return GardnerParams(self.delta, self.epsilon)

    def with_(self, **changes) -> "InhomogeneityProfile":
        kw = dict(kind=self.kind, Delta=self.Delta, delta=self.delta, d=self.d,
                  epsilon=self.epsilon)
        kw.update(changes)
        if self.kind == "gardner" and ("Delta" in changes or "delta" in changes) \
                and "epsilon" not in changes:
            kw["epsilon"] = None
        return InhomogeneityProfile(**kw)

    def rho(self, x):
        if self.kind == "piecewise":
            return rho0(x, self.Delta)
        if self.kind == "tanh":
            return rho_tanh(x, self.Delta, self.delta)
        return gardner_pulse(x, self.gardner_params)[0]

    __call__ = rho

    def drho(self, x):
        """dρ/dx (zero away from the jumps for the piecewise hat)."""
        if self.kind == "piecewise":
            return np.zeros_like(np.asarray(x, dtype=float))
        if self.kind == "tanh":
            return _rho_tanh_dx(x, self.Delta, self.delta)
        return gardner_pulse(x, self.gardner_params)[1] / self.delta

    def support_extent(self, tol=1e-17):
        """Half-width beyond which rho < tol."""
        if self.kind == "piecewise":
            return self.Delta
        if self.kind == "tanh":
            # rho ~ exp(-2(|x|-Delta)/delta) far out
            return self.Delta + 0.5 * self.delta * math.log(1.0 / tol)
        p = self.gardner_params
        # rho ~ (2a/b) exp(-c|x|/delta)
        return self.delta / p.c * math.log(2.0 * p.a / (p.b * tol))

    def to_dict(self):
        return {"kind": self.kind, "Delta": self.Delta, "delta": self.delta,
                "epsilon": self.epsilon, "d": self.d}

    @classmethod
    def from_dict(cls, data):
        return cls(data["kind"], data["Delta"], data.get("delta", 0.0),
                   data.get("d", 1.0), data.get("epsilon"))


def pulse_vs_step_report(params: GardnerParams, Delta, a_exp, n=100_001, reach=10.0):
    """Sup distances between the pulse and the hat on the three regions.

    R- = (-inf, -Delta - delta^a], R0 = [-Delta + delta^a, Delta - delta^a],
    R+ = [Delta + delta^a, inf); the far field is sampled out to
    ``Delta + reach``, beyond which both profiles are below 1e-17 for the
    steepnesses of interest.
    """
    _check_delta(Delta)
    if not 0.0 < a_exp < 1.0:
        raise ValueError("a_exp must lie in (0, 1)")
    gap = params.delta**a_exp
    if gap >= Delta:
        raise ValueError("delta^a >= Delta: the interior region is empty")
    x = np.linspace(-Delta - reach, Delta + reach, n)
    rho, s = gardner_pulse(x, params)
    step = rho0(x, Delta)
    regions = {
        "R_minus": x <= -Delta - gap,
        "R_zero": np.abs(x) <= Delta - gap,
        "R_plus": x >= Delta + gap,
    }
    out = {"delta": params.delta, "epsilon": params.epsilon, "a": a_exp, "gap": gap,
           "bound": math.exp(-math.sqrt(2.0) * params.delta ** (a_exp - 1.0)),
           "R_plus_literal_start": Delta + params.delta ** (a_exp - 1.0)}
    for name, mask in regions.items():
        out[name] = {"rho": float(np.max(np.abs(rho[mask] - step[mask]))),
                     "s": float(np.max(np.abs(s[mask])))}
    return out
