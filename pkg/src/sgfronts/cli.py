"""Batch command-line front end.

Every run writes plain data (CSV with 17 significant digits, JSON) plus a
``manifest.json`` holding the resolved configuration, library versions and
SHA-256 checksums of the outputs. Parameters come from an optional JSON
config (a path or the name of a shipped recipe) and are overridden by flags.

Exit codes: 0 success, 1 computation failure (``error.json`` is written),
2 usage error (nothing is written).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import platform
import sys
import traceback
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import __version__

log = logging.getLogger("sgfronts")

COMMANDS = ("front", "spectrum", "locus", "branch", "simulate", "slowfast")
PLANES = {"alpha-delta": "AlphaDelta", "d-delta": "DDelta", "alpha-d": "AlphaD"}
PLANE_FIXED = {"alpha-delta": "d", "d-delta": "alpha", "alpha-d": "Delta"}
# default sweep of the free parameter: Delta, Delta (or d with solve_for="Delta"), d
LOCUS_RANGES = {"alpha-delta": (0.02, 20.0), "d-delta": (0.1, 8.0), "alpha-d": (1.001, 4.0)}
CSV_FMT = "%.16e"


class UsageError(ValueError):
    """Invalid command line or configuration; maps to exit status 2."""


# --- parameter schemas -------------------------------------------------------------

@dataclass(frozen=True)
class Param:
    kind: str                       # "float", "int", "str", "floats"
    default: object = None
    required: bool = False
    choices: tuple | None = None
    low: float | None = None        # inclusive lower bound
    high: float | None = None       # exclusive upper bound
    positive: bool = False
    help: str = ""


_PROFILE = Param("str", "piecewise", choices=("piecewise", "tanh", "gardner"),
                 help="inhomogeneity shape")
_DELTA_SMALL = Param("float", 1.0 / 15.0, positive=True, help="transition width of smooth hats")
_H_CORE = Param("float", 0.025, positive=True, help="mesh spacing inside the hat")

SCHEMAS: dict[str, dict[str, Param]] = {
    "front": {
        "d": Param("floats", required=True, low=0.0, help="inhomogeneity strength(s)"),
        "Delta": Param("float", required=True, positive=True, help="hat half-width"),
        "profile": _PROFILE,
        "delta": _DELTA_SMALL,
        "alpha": Param("float", 0.0, low=0.0, high=0.5, help="coupling"),
        "branch": Param("str", "trivial", choices=("trivial", "pitchfork", "auto")),
        "L": Param("float", None, positive=True, help="domain half-length"),
        "h_core": _H_CORE,
    },
    "spectrum": {
        "d": Param("float", required=True, low=0.0),
        "Delta": Param("float", required=True, positive=True),
        "profile": Param("str", "piecewise", choices=("piecewise", "tanh")),
        "delta": _DELTA_SMALL,
        "method": Param("str", "auto", choices=("auto", "matched", "fd", "implicit")),
        "alpha": Param("float", None, low=0.0, high=0.5,
                       help="if given, also report the coupled-operator blocks"),
        "h_core": _H_CORE,
    },
    "locus": {
        "plane": Param("str", required=True, choices=tuple(PLANES)),
        "d": Param("floats", None, positive=True),
        "Delta": Param("floats", None, positive=True),
        "alpha": Param("floats", None, low=0.0, high=0.5),
        "from": Param("float", None, positive=True,
                      help="start of the swept parameter (default depends on the plane)"),
        "to": Param("float", None, positive=True),
        "num": Param("int", 50, low=2),
        "profile": Param("str", "piecewise", choices=("piecewise", "tanh")),
        "delta": _DELTA_SMALL,
        "method": Param("str", "auto",
                        choices=("auto", "closed-form", "matched", "fd", "asymptotic")),
        "solve_for": Param("str", "d", choices=("d", "Delta")),
        "max_jump": Param("float", None, positive=True),
        "h_core": _H_CORE,
    },
    "branch": {
        "param": Param("str", required=True, choices=("alpha", "d", "Delta")),
        "from": Param("float", required=True, low=0.0),
        "to": Param("float", required=True, low=0.0),
        "d": Param("float", None, low=0.0),
        "Delta": Param("float", None, positive=True),
        "alpha": Param("float", None, low=0.0, high=0.5),
        "profile": Param("str", "piecewise", choices=("piecewise", "tanh", "gardner")),
        "delta": _DELTA_SMALL,
        "sides": Param("str", "both", choices=("both", "plus", "minus")),
        "ds": Param("float", 0.02, positive=True),
        "ds_max": Param("float", 0.1, positive=True),
        "h_core": _H_CORE,
    },
    "simulate": {
        "scenario": Param("str", required=True, choices=("separate", "pin", "bifurcate")),
        "T": Param("float", 200.0, positive=True),
        "dx": Param("float", 0.05, positive=True),
        "dt": Param("float", 0.04, positive=True),
        "L": Param("float", 50.0, positive=True),
        "gamma": Param("float", None, low=0.0),
        "perturbation": Param("float", 1e-3, low=0.0),
        "sample_every": Param("float", 1.0, positive=True),
        "field_every": Param("float", 0.0, low=0.0,
                             help="time between stored field snapshots (0: final only)"),
        "field_stride": Param("int", 10, low=1, help="spatial subsampling of snapshots"),
    },
    "slowfast": {
        "alpha": Param("float", required=True, low=0.0, high=0.5),
        "d": Param("float", 1.0, positive=True),
        "Delta": Param("float", 1.0, positive=True),
        "deltas": Param("floats", [0.2, 0.1, 0.05, 0.025], positive=True, high=1.0),
        "branch": Param("str", "auto", choices=("auto", "trivial", "pitchfork")),
        "h_core": _H_CORE,
    },
}


def _coerce(cmd, name, spec: Param, value):
    where = f"{cmd}.{name}"
    if spec.kind == "floats":
        items = value if isinstance(value, (list, tuple)) else [value]
        if not items:
            raise UsageError(f"{where}: empty list")
        return [_coerce(cmd, name, Param("float", low=spec.low, high=spec.high,
                                         positive=spec.positive), v) for v in items]
    if spec.kind == "str":
        if not isinstance(value, str):
            raise UsageError(f"{where}: expected a string, got {value!r}")
        if spec.choices and value not in spec.choices:
            raise UsageError(f"{where}: {value!r} not in {list(spec.choices)}")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise UsageError(f"{where}: expected a number, got {value!r}")
    if spec.kind == "int":
        if int(value) != value:
            raise UsageError(f"{where}: expected an integer, got {value!r}")
        value = int(value)
    else:
        value = float(value)
        if value != value or value in (float("inf"), float("-inf")):
            raise UsageError(f"{where}: must be finite")
    if spec.positive and not value > 0:
        raise UsageError(f"{where}: must be positive, got {value}")
    if spec.low is not None and value < spec.low:
        raise UsageError(f"{where}: must be >= {spec.low}, got {value}")
    if spec.high is not None and not value < spec.high:
        raise UsageError(f"{where}: must be < {spec.high}, got {value}")
    return value


def validate(command, params: dict) -> dict:
    """Check ``params`` against the schema of ``command`` and fill defaults."""
    if command not in SCHEMAS:
        raise UsageError(f"unknown command {command!r}; expected one of {list(COMMANDS)}")
    schema = SCHEMAS[command]
    unknown = sorted(set(params) - set(schema))
    if unknown:
        raise UsageError(f"{command}: unknown parameter(s) {unknown}")
    out = {}
    for name, spec in schema.items():
        if name in params and params[name] is not None:
            out[name] = _coerce(command, name, spec, params[name])
        elif spec.required:
            raise UsageError(f"{command}: missing required parameter {name!r}")
        else:
            out[name] = spec.default
    _CHECKS[command](out)
    return out


def _check_front(p):
    if p["alpha"] == 0 and p["branch"] == "pitchfork":
        raise UsageError("front: the pitchfork branch needs alpha > 0")


def _check_spectrum(p):
    if p["method"] == "implicit" and (p["d"] != 1 or p["profile"] != "piecewise"):
        raise UsageError("spectrum: method 'implicit' needs d = 1 and the piecewise profile")
    if p["method"] == "matched" and p["profile"] != "piecewise":
        raise UsageError("spectrum: method 'matched' needs the piecewise profile")


def _check_locus(p):
    plane = p["plane"]
    fixed = PLANE_FIXED[plane]
    for name in ("d", "Delta", "alpha"):
        if name != fixed and p[name] is not None:
            raise UsageError(f"locus: {name!r} cannot be fixed in the {plane} plane "
                             f"(fix {fixed!r})")
    if p[fixed] is None:
        raise UsageError(f"locus: the {plane} plane needs {fixed!r}")
    lo, hi = LOCUS_RANGES[plane]
    p["from"] = lo if p["from"] is None else p["from"]
    p["to"] = hi if p["to"] is None else p["to"]
    if p["from"] == p["to"]:
        raise UsageError("locus: 'from' and 'to' must differ")
    m = p["method"]
    if m == "closed-form" and not (plane == "alpha-delta" and p["profile"] == "piecewise"
                                   and all(v == 1 for v in p["d"])):
        raise UsageError("locus: the closed form exists for the piecewise alpha-delta plane "
                         "at d = 1 only")
    if m == "asymptotic" and plane != "d-delta":
        raise UsageError("locus: asymptotic curves are provided in the d-delta plane")
    if m == "matched" and p["profile"] != "piecewise":
        raise UsageError("locus: method 'matched' needs the piecewise profile")
    if plane == "alpha-delta" and m != "asymptotic" and any(v == 0 for v in p[fixed]):
        raise UsageError("locus: d must be positive")


def _check_branch(p):
    param = p["param"]
    if p[param] is not None:
        raise UsageError(f"branch: {param!r} is the continuation parameter; "
                         "give its range with from/to")
    missing = [n for n in ("d", "Delta", "alpha") if n != param and p[n] is None]
    if missing:
        raise UsageError(f"branch: missing fixed parameter(s) {missing}")
    if p["from"] == p["to"]:
        raise UsageError("branch: 'from' and 'to' must differ")
    if param == "alpha" and not (p["from"] < 0.5 and p["to"] < 0.5):
        raise UsageError("branch: alpha range must lie in [0, 1/2)")
    if param == "Delta" and min(p["from"], p["to"]) <= 0:
        raise UsageError("branch: Delta range must be positive")
    if p["ds_max"] < p["ds"]:
        raise UsageError("branch: ds_max must be >= ds")


def _check_simulate(p):
    if p["dt"] > 0.9 * p["dx"]:
        raise UsageError(f"simulate: dt={p['dt']} violates dt <= 0.9 dx")
    if p["L"] <= 10 * p["dx"]:
        raise UsageError("simulate: domain too small for dx")


def _check_slowfast(p):
    if len(set(p["deltas"])) != len(p["deltas"]):
        raise UsageError("slowfast: deltas must be distinct")


_CHECKS = {"front": _check_front, "spectrum": _check_spectrum, "locus": _check_locus,
           "branch": _check_branch, "simulate": _check_simulate, "slowfast": _check_slowfast}


# --- configuration ----------------------------------------------------------------

@dataclass
class RunConfig:
    command: str
    parameters: dict = field(default_factory=dict)
    output_dir: str = "sgfronts-out"

    def to_dict(self):
        return {"command": self.command, "parameters": self.parameters,
                "output_dir": self.output_dir}


def recipe_names():
    base = resources.files("sgfronts") / "configs"
    return sorted(p.name[:-5] for p in base.iterdir() if p.name.endswith(".json"))


def load_config(ref) -> dict:
    """Read a JSON config from a path, or a shipped recipe by name."""
    path = Path(ref)
    if path.is_file():
        text = path.read_text()
    else:
        res = resources.files("sgfronts") / "configs" / f"{ref}.json"
        if not res.is_file():
            raise UsageError(f"config {ref!r} is neither a file nor a recipe "
                             f"({', '.join(recipe_names())})")
        text = res.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {ref!r}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise UsageError(f"config {ref!r}: top level must be an object")
    extra = set(data) - {"command", "parameters", "output_dir", "description"}
    if extra:
        raise UsageError(f"config {ref!r}: unknown key(s) {sorted(extra)}")
    if not isinstance(data.get("parameters", {}), dict):
        raise UsageError(f"config {ref!r}: 'parameters' must be an object")
    return data


# --- argument parsing -------------------------------------------------------------

_FLAG_TYPES = {"float": float, "int": int, "str": str, "floats": float}


def _global_flags(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default,
                        help="JSON config path or shipped recipe name")
    parser.add_argument("--out", default=default, help="output directory")
    parser.add_argument("--threads", type=int, default=default,
                        help="BLAS/OpenMP threads (default 1)")
    parser.add_argument("--verbose", "-v", action="count", default=default)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sgfronts", description="Stationary fronts of coupled inhomogeneous "
        "sine-Gordon equations: fronts, spectra, loci, branches, dynamics.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", metavar="command")
    for cmd in COMMANDS:
        sp = sub.add_parser(cmd, help=f"{cmd} computation")
        _global_flags(sp, suppress=True)
        for name, spec in SCHEMAS[cmd].items():
            kw = {"dest": f"p_{name}", "default": argparse.SUPPRESS,
                  "type": _FLAG_TYPES[spec.kind], "help": spec.help or None}
            if spec.kind == "floats":
                kw["nargs"] = "+"
            flag = "--" + name.replace("_", "-")
            sp.add_argument(flag, **kw)
    return parser


def resolve(argv) -> tuple[RunConfig, dict]:
    """Parse ``argv`` into a validated run configuration and global options."""
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        raise UsageError("invalid command line") if exc.code else exc
    opts = {"threads": getattr(ns, "threads", None) or 1,
            "verbose": getattr(ns, "verbose", None) or 0}
    if opts["threads"] < 1:
        raise UsageError("--threads must be >= 1")
    base = load_config(ns.config) if getattr(ns, "config", None) else {}
    command = ns.command or base.get("command")
    if command is None:
        raise UsageError("no command given (use a subcommand or a config with 'command')")
    if base.get("command") not in (None, command):
        raise UsageError(f"config is for {base['command']!r}, command line asks for {command!r}")
    params = dict(base.get("parameters", {}))
    params.update({k[2:]: v for k, v in vars(ns).items() if k.startswith("p_")})
    out = getattr(ns, "out", None) or base.get("output_dir") or "sgfronts-out"
    return RunConfig(command, validate(command, params), str(out)), opts


# --- output helpers --------------------------------------------------------------

class _Writer:
    def __init__(self, out_dir):
        self.dir = Path(out_dir)
        self.files = []

    def path(self, name):
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files.append(name)
        return self.dir / name

    def csv(self, name, header, columns):
        import numpy as np

        data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
        np.savetxt(self.path(name), data, delimiter=",", fmt=CSV_FMT,
                   header=",".join(header), comments="")

    def json(self, name, obj):
        with open(self.path(name), "w") as fh:
            json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _jsonable(obj):
    import numpy as np

    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if v == v and abs(v) != float("inf") else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if obj is None or isinstance(obj, (str, int, bool)):
        return obj
    return repr(obj)


def _tag(name, value, many):
    return f"_{name}={value:g}" if many else ""


def _profile(kind, Delta, delta, d):
    from .inhomogeneity import InhomogeneityProfile

    if kind == "piecewise":
        return InhomogeneityProfile.piecewise(Delta, d)
    if kind == "tanh":
        return InhomogeneityProfile.tanh(Delta, delta, d)
    return InhomogeneityProfile.gardner(Delta, delta, d)


# --- commands ---------------------------------------------------------------------

def cmd_front(p, w: _Writer):
    from . import bvp_solver as bs
    from . import front_construction as fc
    from .mesh import MeshSpec

    many = len(p["d"]) > 1
    summary = []
    for d in p["d"]:
        prof = _profile(p["profile"], p["Delta"], p["delta"], d)
        mesh = MeshSpec.for_profile(prof, h_core=p["h_core"])
        if p["profile"] == "piecewise" and p["alpha"] == 0:
            sol = fc.front_numeric(d, p["Delta"], L=p["L"], mesh=mesh)
        else:
            problem = bs.BvpProblem(prof, p["alpha"], L=p["L"], mesh=mesh)
            sol = bs.branch_solution(problem, p["branch"])
        tag = _tag("d", d, many)
        w.csv(f"front{tag}.csv", ["x", "u", "p", "v", "q", "rho"],
              [sol.grid, sol.u, sol.p, sol.v, sol.q, prof.rho(sol.grid)])
        summary.append(sol.sidecar())
    w.json("front.json", {"fronts": summary})


def cmd_spectrum(p, w: _Writer):
    from . import bvp_solver as bs
    from . import front_construction as fc
    from . import spectrum as sp
    from .mesh import MeshSpec

    d, Delta, method = p["d"], p["Delta"], p["method"]
    if method == "auto":
        method = "matched" if p["profile"] == "piecewise" and d > 0 else "fd"
    prof = _profile(p["profile"], Delta, p["delta"], d)
    mesh = MeshSpec.for_profile(prof, h_core=p["h_core"])
    if p["profile"] == "piecewise":
        front = fc.front_numeric(d, Delta, mesh=mesh)
    else:
        front = bs.solve(bs.BvpProblem(prof, 0.0, mesh=mesh))
    if method == "implicit":
        res = sp.eigenfunction_d1(Delta, grid=front.grid)
    elif method == "matched":
        res = sp.eig_matched(d, Delta, grid=front.grid)
    else:
        res = sp.eig_numeric(front)
    info = {"d": d, "Delta": Delta, "profile": p["profile"], **res.to_dict()}
    if p["alpha"] is not None:
        info["coupled"] = sp.coupled_operator_spectrum(res, p["alpha"])
    w.json("eigen.json", info)
    if res.psi is not None:
        w.csv("eigenfunction.csv", ["x", "psi", "u0"], [res.grid, res.psi,
                                                       front.interpolate(res.grid)[0]])


def cmd_locus(p, w: _Writer):
    import numpy as np

    from . import bifurcation as bf

    plane = p["plane"]
    fixed = PLANE_FIXED[plane]
    vals = np.linspace(p["from"], p["to"], p["num"])
    many = len(p[fixed]) > 1
    method = p["method"]
    if method == "auto" and plane == "alpha-delta" and p["profile"] == "piecewise" \
            and all(v == 1 for v in p["d"]):
        method = "closed-form"
    report = []
    for fv in p[fixed]:
        tag = _tag(fixed, fv, many)
        if method == "closed-form":
            pts = [(D, bf.locus_d1(D)) for D in vals]
            rows = [[a for a, _ in pts], [b for _, b in pts], [0.0] * len(pts)]
            w.csv(f"locus{tag}.csv", ["Delta", "alpha", "Lambda_residual"], rows)
            report.append({fixed: fv, "points": len(pts), "method": "ClosedForm",
                           "diagnostic": None})
            continue
        if method == "asymptotic":
            ds = vals
            w.csv(f"locus{tag}.csv", ["Delta", "d"], [[bf.locus_dlarge(fv, d) for d in ds], ds])
            entry = {fixed: fv, "points": len(ds), "method": "AsymptoticLargeD"}
            entry["d_limit_large_Delta"] = _d_limit(fv)
            report.append(entry)
            continue
        curve = bf.locus_numeric(PLANES[plane], (fixed, fv), vals, p["profile"], p["delta"],
                                 method, solve_for=p["solve_for"], max_jump=p["max_jump"],
                                 h_core=p["h_core"])
        arr = curve.as_array()
        names = {"alpha-delta": ["Delta", "alpha"], "alpha-d": ["d", "alpha"],
                 "d-delta": ["Delta", "d"] if p["solve_for"] == "d" else ["d", "Delta"]}[plane]
        w.csv(f"locus{tag}.csv", names + ["Lambda_residual"],
              [arr[:, 0], arr[:, 1], curve.residuals])
        report.append({fixed: fv, "points": len(arr), "method": curve.method,
                       "diagnostic": curve.diagnostic})
    w.json("locus.json", {"plane": plane, "fixed": fixed, "curves": report})


def _d_limit(alpha):
    """d > 1 with alpha0(d) = alpha (large-Delta asymptote), or None outside the range."""
    from scipy.optimize import brentq

    from . import bifurcation as bf

    f = lambda d: bf.locus_DeltaLarge(d) - alpha
    try:
        return float(brentq(f, 1.0 + 1e-9, 50.0, xtol=1e-12))
    except ValueError:
        return None


def _branch_rows(branch, sign=1.0):
    import numpy as np

    pts = branch.points
    return [[b.param_value for b in pts], [sign * b.v_norm for b in pts],
            [b.leading_eig for b in pts], [b.smallest_eig for b in pts],
            [b.arclength for b in pts],
            [float(np.sign(b.solution.v[np.argmax(np.abs(b.solution.v))]) or 0.0)
             for b in pts]]


_BRANCH_HEADER = ["param", "signed_v_norm", "leading_eig", "smallest_eig", "arclength",
                  "v_sign"]


def cmd_branch(p, w: _Writer):
    from . import bvp_solver as bs
    from .mesh import MeshSpec

    param = p["param"]
    fixed = {n: p[n] for n in ("d", "Delta", "alpha") if n != param}
    start = {**fixed, param: p["from"]}
    prof = _profile(p["profile"], start["Delta"], p["delta"], start["d"])
    problem = bs.BvpProblem(prof, start["alpha"], mesh=MeshSpec.for_profile(prof, h_core=p["h_core"]))
    trivial = bs.continue_branch(problem, param, p["to"], ds=p["ds"], ds_max=p["ds_max"])
    w.csv("trivial.csv", _BRANCH_HEADER, _branch_rows(trivial))
    summary = {"param": param, "fixed": fixed, "trivial_diagnostic": trivial.diagnostic,
               "crossings": [c.param_value for c in trivial.crossings], "branches": {}}
    if trivial.crossings:
        at = trivial.crossings[0]
        last = trivial.points[-1]
        # the non-trivial branch lives where the v = 0 front is unstable
        stop = p["to"] if last.leading_eig > 0 else p["from"]
        sides = {"both": (1, -1), "plus": (1,), "minus": (-1,)}[p["sides"]]
        for side in sides:
            nb = bs.branch_off(at, problem, param, stop, side=side, ds=0.5 * p["ds"],
                               ds_max=0.5 * p["ds_max"], monitor=False)
            name = "plus" if side > 0 else "minus"
            w.csv(f"pitchfork_{name}.csv", _BRANCH_HEADER, _branch_rows(nb, side))
            end = nb.points[-1].solution
            w.csv(f"solution_{name}.csv", ["x", "u", "p", "v", "q"],
                  [end.grid, end.u, end.p, end.v, end.q])
            summary["branches"][name] = {"end": nb.points[-1].param_value,
                                         "end_v_norm": nb.points[-1].v_norm,
                                         "points": len(nb.points),
                                         "diagnostic": nb.diagnostic}
    w.json("branch.json", summary)


def cmd_simulate(p, w: _Writer):
    import numpy as np

    from . import dynamics as dyn

    snaps_t, snaps = [], []
    stride = p["field_stride"]
    kw = dict(T=p["T"], dx=p["dx"], dt=p["dt"], L=p["L"], gamma=p["gamma"],
              perturbation=p["perturbation"], sample_every=p["sample_every"])
    if p["field_every"] > 0:
        every = p["field_every"]

        def on_sample(state):
            if state.t + 1e-9 >= every * len(snaps_t):
                snaps_t.append(state.t)
                snaps.append(np.concatenate([state.theta[::stride], state.psi[::stride]]))

        kw["on_sample"] = on_sample
    res = dyn.simulate_scenario(p["scenario"], **kw)
    w.csv("timeseries.csv", ["t", "kink_theta", "kink_psi", "separation", "energy"],
          [res.times, res.kink_theta, res.kink_psi, res.separation, res.energies])
    u, v = res.final_uv()
    f = res.final
    w.csv("final.csv", ["x", "theta", "psi", "u", "v"], [f.x, f.theta, f.psi, u, v])
    if snaps:
        n = f.x[::stride].size
        arr = np.array(snaps)
        xs = f.x[::stride]
        w.csv("spacetime_theta.csv", ["t"] + [f"x={x:.6g}" for x in xs],
              [snaps_t] + [arr[:, j] for j in range(n)])
        w.csv("spacetime_psi.csv", ["t"] + [f"x={x:.6g}" for x in xs],
              [snaps_t] + [arr[:, n + j] for j in range(n)])
    E = res.energies
    info = res.summary()
    for key in ("times", "kink_theta", "kink_psi", "energies"):
        info.pop(key)
    info["energy_rel_deviation"] = float(np.max(np.abs(E - E[0])) / abs(E[0]))
    info["final_separation"] = float(res.separation[-1])
    w.json("simulate.json", info)


def cmd_slowfast(p, w: _Writer):
    from . import slowfast as sf

    rep = sf.persistence_study(p["alpha"], p["d"], p["Delta"], p["deltas"], branch=p["branch"],
                               h_core=p["h_core"])
    rep.to_csv(w.path("persistence.csv"))
    w.json("persistence.json", rep.to_dict())


HANDLERS = {"front": cmd_front, "spectrum": cmd_spectrum, "locus": cmd_locus,
            "branch": cmd_branch, "simulate": cmd_simulate, "slowfast": cmd_slowfast}


# --- driver ----------------------------------------------------------------------

def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _versions():
    import numpy
    import scipy

    return {"sgfronts": __version__, "numpy": numpy.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _manifest(cfg: RunConfig, w: _Writer, status):
    files = {name: _sha256(w.dir / name) for name in sorted(set(w.files))}
    w.json("manifest.json", {"command": cfg.command, "parameters": cfg.parameters,
                             "status": status, "versions": _versions(), "files": files})


def run(cfg: RunConfig) -> int:
    """Execute a validated configuration; returns the exit status."""
    w = _Writer(cfg.output_dir)
    try:
        HANDLERS[cfg.command](cfg.parameters, w)
    except Exception as exc:  # noqa: BLE001 - every failure becomes a diagnostic file
        log.error("%s failed: %s", cfg.command, exc)
        diag = getattr(exc, "diagnostics", None) or getattr(exc, "history", None)
        w.json("error.json", {"command": cfg.command, "parameters": cfg.parameters,
                              "error_type": type(exc).__name__, "message": str(exc),
                              "diagnostics": diag,
                              "where": traceback.extract_tb(exc.__traceback__)[-1].name})
        _manifest(cfg, w, "error")
        return 1
    _manifest(cfg, w, "ok")
    log.info("wrote %d file(s) to %s", len(set(w.files)) + 1, w.dir)
    return 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg, opts = resolve(argv)
    except UsageError as exc:
        print(f"sgfronts: error: {exc}", file=sys.stderr)
        return 2
    level = logging.WARNING - 10 * min(opts["verbose"], 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    # only effective before numpy is first imported, i.e. in a fresh process
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(opts["threads"]))
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
