"""Run configurations, solver dispatch, CSV output and solver comparison."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from . import analytic
from .errors import DomainError
from .montecarlo import EnsembleSpec, estimate_F
from .noise import Coupling, OuParams, RtnParams
from .reduced import extract_rates, tcl2_solve_ou_linear, volterra_solve_rtn_linear
from .sle import GridSpec, max_rtn_step, solve_ou_marginal, solve_rtn_marginal

__all__ = [
    "SOLVERS",
    "CSV_COLUMNS",
    "RunConfig",
    "DecoherenceTrace",
    "run_solver",
    "format_csv",
    "write_csv",
    "read_config",
    "compare",
    "FIGURE_PRESETS",
    "figure",
    "steady",
]

SOLVERS = ("analytic", "mc", "sle", "tcl", "volterra")
CSV_COLUMNS = ("t", "re_F", "im_F", "abs_F", "gamma", "shift", "diverged", "se_re", "se_im")

# pairwise tolerances on max |F_i - F_j|
EXACT_TOL = 1e-8
PDE_TOL = 1e-3
MC_SIGMAS = 3.0
MC_FRACTION = 0.95
# SE floor so that exactly-known points (t = 0, zero-variance cases) still compare
SE_FLOOR = 1e-12

# internal step bounds of the numerical solvers
OU_PDE_STEP = 2e-3  # in units of 1/gamma
ODE_STEP = 1e-4  # in units of the fastest rate


@dataclass(frozen=True)
class RunConfig:
    """One case plus one solver on a uniform output grid ``0, dt, ..., t_max``."""

    noise: str = "oun"
    gamma: float = 1.0
    sigma: float = 1.0
    b: float = 0.0
    chi: float = 0.0
    lam: float = 1.0
    nu: float = 1.0
    a: float = 0.0
    c: float = 1.0
    k: int = 1
    solver: str = "analytic"
    t_max: float = 5.0
    dt: float = 0.05
    n_traj: int = 100_000
    seed: int = 0
    ou_substeps: int = 16
    n_x: int = 1025
    x_half_width: float = 8.0
    out: Optional[str] = None

    def __post_init__(self):
        if self.noise not in ("oun", "rtn"):
            raise DomainError(f"noise must be 'oun' or 'rtn', got {self.noise!r}")
        if self.solver not in SOLVERS:
            raise DomainError(f"solver must be one of {', '.join(SOLVERS)}, got {self.solver!r}")
        if not self.dt > 0 or not self.t_max > 0:
            raise DomainError("dt and t_max must be > 0")
        n = round(self.t_max / self.dt)
        if n < 2 or abs(n * self.dt - self.t_max) > 1e-9 * self.t_max:
            raise DomainError("t_max must be an integer multiple (>= 2) of dt")
        # builds and validates the domain objects
        self.model()
        self.coupling()
        self.check_solver()

    def model(self):
        if self.noise == "oun":
            return OuParams(self.gamma, self.sigma, self.b, self.chi)
        return RtnParams(self.lam, self.nu, self.a)

    def coupling(self) -> Coupling:
        return Coupling(self.c, self.k)

    def check_solver(self) -> None:
        """Raise ``DomainError`` if the solver does not handle this case."""
        if self.solver == "tcl" and not (self.noise == "oun" and self.k == 1):
            raise DomainError("solver 'tcl' applies to OU noise with k = 1 only")
        if self.solver == "volterra" and not (self.noise == "rtn" and self.k == 1):
            raise DomainError("solver 'volterra' applies to RTN noise with k = 1 only")

    @property
    def n_steps(self) -> int:
        return round(self.t_max / self.dt)

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)

    def case_key(self) -> dict:
        """Fields that define the physical case and grid (not the solver)."""
        keys = ["noise", "c", "k", "t_max", "dt"]
        keys += ["gamma", "sigma", "b", "chi"] if self.noise == "oun" else ["lam", "nu", "a"]
        return {k: getattr(self, k) for k in keys}

    def header_items(self) -> List[Tuple[str, object]]:
        """Everything that determines the output, in a stable order."""
        return [(f.name, getattr(self, f.name)) for f in dataclasses.fields(self) if f.name != "out"]

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


@dataclass
class DecoherenceTrace:
    """``F``, ``Gamma`` and ``S`` on a time grid, with optional MC errors."""

    times: np.ndarray
    F: np.ndarray
    gamma: np.ndarray
    shift: np.ndarray
    diverged: np.ndarray
    se_re: Optional[np.ndarray] = None
    se_im: Optional[np.ndarray] = None
    solver: str = ""


def _substeps(dt_out: float, h_max: float) -> Tuple[float, int]:
    m = max(1, math.ceil(dt_out / h_max - 1e-9))
    return dt_out / m, m


def _with_rates(times, F, solver, se_re=None, se_im=None) -> DecoherenceTrace:
    r = extract_rates(F, times[1] - times[0], times)
    return DecoherenceTrace(times, F, r.gamma, r.shift, r.diverged, se_re, se_im, solver)


def run_solver(cfg: RunConfig, threads: int = 1) -> DecoherenceTrace:
    """Compute the trace for ``cfg`` with its selected solver.

    Numerical routes report ``Gamma`` and ``S`` extracted from their ``F`` by
    finite differences on the output grid.
    """
    model, coupling, times = cfg.model(), cfg.coupling(), cfg.times()
    if cfg.solver == "analytic":
        res = analytic.closed_form(model, coupling, times)
        return DecoherenceTrace(times, res.F, res.gamma, res.shift, res.diverged, solver="analytic")

    if cfg.solver == "mc":
        spec = EnsembleSpec(cfg.n_traj, cfg.seed, times, cfg.ou_substeps)
        tr = estimate_F(model, coupling, spec, threads=threads)
        return _with_rates(times, tr.F, "mc", tr.se_re, tr.se_im)

    if cfg.solver == "sle":
        if isinstance(model, OuParams):
            h, m = _substeps(cfg.dt, OU_PDE_STEP / model.gamma)
            grid = GridSpec(h, m * cfg.n_steps * h, cfg.x_half_width, cfg.n_x)
            F = solve_ou_marginal(model, coupling, grid, save_every=m).F
        else:
            h, m = _substeps(cfg.dt, max_rtn_step(model, coupling))
            F = solve_rtn_marginal(model, coupling, h, m * cfg.n_steps * h, save_every=m).F
        return _with_rates(times, F, "sle")

    if cfg.solver == "tcl":
        h, m = _substeps(cfg.dt, ODE_STEP / model.gamma)
        _, F = tcl2_solve_ou_linear(model, coupling, h, m * cfg.n_steps * h, save_every=m)
        return _with_rates(times, F, "tcl")

    # volterra
    h, m = _substeps(cfg.dt, ODE_STEP * min(1.0 / model.lam, 1.0 / (abs(cfg.c) * model.nu)))
    _, F = volterra_solve_rtn_linear(model, coupling, h, m * cfg.n_steps * h, save_every=m)
    return _with_rates(times, F, "volterra")


def _fmt(x) -> str:
    return repr(float(x))


def format_csv(trace: DecoherenceTrace, cfg: Optional[RunConfig] = None) -> str:
    """Render a trace as CSV text; the config is echoed as ``#`` comment lines.

    Flagged rates are written as ``nan``; MC error columns are blank for
    the other solvers.
    """
    buf = io.StringIO()
    if cfg is not None:
        for key, val in cfg.header_items():
            buf.write(f"# {key} = {val}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for j, t in enumerate(trace.times):
        flagged = bool(trace.diverged[j])
        F = trace.F[j]
        w.writerow(
            [
                _fmt(t),
                _fmt(F.real),
                _fmt(F.imag),
                _fmt(abs(F)),
                "nan" if flagged else _fmt(trace.gamma[j]),
                "nan" if flagged else _fmt(trace.shift[j]),
                int(flagged),
                "" if trace.se_re is None else _fmt(trace.se_re[j]),
                "" if trace.se_im is None else _fmt(trace.se_im[j]),
            ]
        )
    return buf.getvalue()


def write_csv(trace: DecoherenceTrace, path: str, cfg: Optional[RunConfig] = None) -> None:
    text = format_csv(trace, cfg)
    with open(path, "w", newline="") as fh:
        fh.write(text)


_CONFIG_ALIASES = {"lambda": "lam", "t-max": "t_max", "n-traj": "n_traj", "ou-substeps": "ou_substeps"}


def parse_config_text(text: str) -> Dict[str, object]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    types = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    out: Dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"config line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        key = _CONFIG_ALIASES.get(key, key).replace("-", "_")
        if key in ("solvers", "threads"):
            out[key] = val
            continue
        if key not in types:
            raise DomainError(f"config line {lineno}: unknown key {key!r}")
        out[key] = _coerce(key, val, types[key])
    return out


def _coerce(key, val: str, typ):
    typ = str(typ)
    try:
        if typ.startswith("int"):
            try:
                return int(val)
            except ValueError:
                f = float(val)
                if not f.is_integer():
                    raise
                return int(f)
        if typ.startswith("float"):
            return float(val)
    except ValueError:
        raise DomainError(f"config key {key!r}: cannot parse {val!r}") from None
    if val in ("None", ""):
        return None
    return val


def read_config(path: str) -> Dict[str, object]:
    with open(path) as fh:
        return parse_config_text(fh.read())


# --------------------------------------------------------------------------
# comparison


def _pair_check(a: DecoherenceTrace, b: DecoherenceTrace) -> dict:
    dev = np.abs(a.F - b.F)
    out = {
        "solvers": [a.solver, b.solver],
        "max_abs_dev": float(dev.max()),
        "rms_dev": float(np.sqrt(np.mean(dev**2))),
    }
    mcs = [t for t in (a, b) if t.se_re is not None]
    if mcs:
        se_re = np.sqrt(sum(t.se_re**2 for t in mcs))
        se_im = np.sqrt(sum(t.se_im**2 for t in mcs))
        se_re, se_im = np.maximum(se_re, SE_FLOOR), np.maximum(se_im, SE_FLOOR)
        inside = (np.abs(a.F.real - b.F.real) <= MC_SIGMAS * se_re) & (
            np.abs(a.F.imag - b.F.imag) <= MC_SIGMAS * se_im
        )
        frac = float(inside.mean())
        out["tolerance"] = f"{MC_SIGMAS:g}*SE on re and im at >= {MC_FRACTION:.0%} of points"
        out["fraction_within"] = frac
        out["pass"] = frac >= MC_FRACTION
        return out
    tol = PDE_TOL if "sle" in (a.solver, b.solver) else EXACT_TOL
    out["tolerance"] = tol
    out["pass"] = bool(out["max_abs_dev"] < tol)
    return out


def compare(configs: List[RunConfig], threads: int = 1) -> dict:
    """Run every config and check all solver pairs against their tolerances.

    Configs must share the case and grid; this is checked before anything
    runs. Solvers that do not apply to the case are listed under
    ``incompatible`` and skipped.
    """
    if not configs:
        raise DomainError("nothing to compare")
    key = configs[0].case_key()
    for cfg in configs[1:]:
        if cfg.case_key() != key:
            raise DomainError(
                f"configs do not share case and grid: {cfg.case_key()} != {key}"
            )
    traces = [run_solver(cfg, threads=threads) for cfg in configs]
    pairs = [_pair_check(traces[i], traces[j]) for i in range(len(traces)) for j in range(i + 1, len(traces))]
    return {
        "case": key,
        "solvers": [t.solver for t in traces],
        "pairs": pairs,
        "max_abs_dev": max((p["max_abs_dev"] for p in pairs), default=0.0),
        "rms_dev": max((p["rms_dev"] for p in pairs), default=0.0),
        "tolerance": {"exact": EXACT_TOL, "sle": PDE_TOL, "mc": f"{MC_SIGMAS:g}*SE"},
        "pass": all(p["pass"] for p in pairs),
    }


def compare_solvers(base: RunConfig, solvers: Iterable[str], threads: int = 1) -> dict:
    """Build one config per solver from ``base`` and compare them."""
    configs, incompatible = [], {}
    for s in solvers:
        try:
            configs.append(base.replace(solver=s))
        except DomainError as exc:
            incompatible[s] = str(exc)
    report = compare(configs, threads=threads) if configs else {
        "case": base.case_key(), "solvers": [], "pairs": [], "max_abs_dev": 0.0,
        "rms_dev": 0.0, "tolerance": {}, "pass": True,
    }
    report["incompatible"] = incompatible
    return report


# --------------------------------------------------------------------------
# figure presets

_B_VALUES = (0.0, 0.3, 0.6, 0.9)
_OU_FIG1 = dict(noise="oun", gamma=1.0, sigma=2.0, chi=1.0, c=1.0, k=1, t_max=5.0, dt=0.01)
_OU_FIG2 = dict(_OU_FIG1, k=2)
_RTN_WEAK = dict(noise="rtn", lam=1.0, nu=1.0, c=0.8, k=1, t_max=10.0, dt=0.01)
_RTN_STRONG = dict(_RTN_WEAK, c=3.0)


def _sweep(base: dict, name: str, values) -> List[Tuple[str, RunConfig]]:
    return [(f"{name}{v:+.1f}", RunConfig(**base, **{name: v})) for v in values]


def _presets() -> Dict[str, Tuple[str, List[Tuple[str, RunConfig]]]]:
    signed = tuple(sorted({-v for v in _B_VALUES} | set(_B_VALUES)))
    # strong-coupling RTN presets also show the |a| = 1 curve discussed with them
    a_strong = _B_VALUES + (1.0,)
    fig34 = lambda sigma: [
        (f"k{k}", RunConfig(noise="oun", gamma=1.0, sigma=sigma, c=1.0, k=k, t_max=5.0, dt=0.01))
        for k in (1, 2)
    ]
    return {
        "fig1a": ("abs_F", _sweep(_OU_FIG1, "b", _B_VALUES)),
        "fig1b": ("gamma", _sweep(_OU_FIG1, "b", _B_VALUES)),
        "fig1c": ("shift", _sweep(_OU_FIG1, "b", signed)),
        "fig2a": ("abs_F", _sweep(_OU_FIG2, "b", _B_VALUES)),
        "fig2b": ("gamma", _sweep(_OU_FIG2, "b", _B_VALUES)),
        "fig2c": ("shift", _sweep(_OU_FIG2, "b", _B_VALUES)),
        "fig3a": ("abs_F", fig34(0.7)),
        "fig3b": ("gamma", fig34(0.7)),
        "fig4a": ("abs_F", fig34(2.0)),
        "fig4b": ("gamma", fig34(2.0)),
        "fig5a": ("abs_F", _sweep(_RTN_WEAK, "a", _B_VALUES)),
        "fig5b": ("abs_F", _sweep(_RTN_STRONG, "a", a_strong)),
        "fig6a": ("gamma", _sweep(_RTN_WEAK, "a", _B_VALUES)),
        "fig6b": ("gamma", _sweep(_RTN_STRONG, "a", a_strong)),
        "fig7a": ("shift", _sweep(_RTN_WEAK, "a", signed)),
        "fig7b": ("shift", _sweep(_RTN_STRONG, "a", tuple(sorted({-v for v in a_strong} | set(a_strong))))),
    }


FIGURE_PRESETS = tuple(_presets())


def figure(preset: str, out_dir: str) -> List[str]:
    """Write one analytic CSV per curve of ``preset`` into ``out_dir``.

    Time is in units of ``1/gamma`` (OU) or ``1/lam`` (RTN), both set to 1.
    Returns the written paths.
    """
    presets = _presets()
    if preset not in presets:
        raise DomainError(f"unknown preset {preset!r}; valid presets: {', '.join(presets)}")
    os.makedirs(out_dir, exist_ok=True)
    quantity, curves = presets[preset]
    paths = []
    for label, cfg in curves:
        path = os.path.join(out_dir, f"{preset}_{label}.csv")
        write_csv(run_solver(cfg), path, cfg)
        paths.append(path)
    return paths


def figure_quantity(preset: str) -> str:
    """Column that the preset's panel plots."""
    return _presets()[preset][0]


def figure_curves(preset: str) -> List[Tuple[str, RunConfig]]:
    return _presets()[preset][1]


def steady(cfg: RunConfig) -> dict:
    return analytic.steady_values(cfg.model(), cfg.coupling())


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=True)
