"""Experiments comparing solver trajectories with the closed-form theory."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from . import theory
from .solver import SolverConfig, Trajectory, evolve, picard_solve, weighted_solution_norm
from .spectral import Field, Grid, StatePair
from .theory import ModelParams

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SLOPE_THRESHOLD = 0.05

PROFILE_KINDS = ("gaussian", "bump", "zero")


class ExperimentRefused(ValueError):
    """The theory engine does not cover the requested experiment."""


class ConfigError(ValueError):
    pass


def _strict(d: dict, allowed: set, where: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown key {sorted(unknown)[0]!r}")


@dataclass(frozen=True)
class Profile:
    """Radial data profile. ``scale`` is the Gaussian width or the bump radius."""
    kind: str
    scale: float = 1.0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ConfigError(f"profile kind must be one of {PROFILE_KINDS}, got {self.kind!r}")
        if not self.scale > 0:
            raise ConfigError("profile scale must be > 0")

    @property
    def radius(self) -> float:
        return 0.0 if self.kind == "zero" else self.scale

    def sample(self, grid: Grid, center=None) -> np.ndarray:
        xs = grid.mesh()
        if center is not None:
            xs = [x - c for x, c in zip(xs, center)]
        r2 = sum(x * x for x in xs)
        if self.kind == "zero":
            return np.zeros(grid.sizes)
        if self.kind == "gaussian":
            return self.amplitude * np.exp(-r2 / self.scale ** 2)
        s = r2 / self.scale ** 2
        out = np.zeros(grid.sizes)
        inside = s < 1
        out[inside] = self.amplitude * np.exp(1.0 - 1.0 / (1.0 - s[inside]))
        return out

    def with_amplitude(self, a: float) -> "Profile":
        return self if self.kind == "zero" else replace(self, amplitude=float(a))

    @classmethod
    def from_dict(cls, d: dict) -> "Profile":
        _strict(d, {"kind", "scale", "amplitude"}, "profile")
        return cls(d["kind"], float(d.get("scale", 1.0)), float(d.get("amplitude", 1.0)))


_SOLVER_KEYS = {"p", "dt", "T", "integrator", "oversample", "blowup_threshold",
                "record_every", "nonlinear"}


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    params: ModelParams
    grid: Grid
    u0: Profile
    u1: Profile
    solver: SolverConfig
    fit_window: Optional[tuple] = None
    seed: int = 0
    random_center: bool = False
    subtract_mean: bool = True

    def __post_init__(self):
        s = self.solver
        if self.grid.dim != int(self.params.n) or self.params.non_integer_n:
            raise ConfigError(f"grid dimension {self.grid.dim} != n = {theory.fmt(self.params.n)}")
        for name in ("sigma", "q", "m2"):
            if not math.isclose(getattr(s, name), float(getattr(self.params, name))):
                raise ConfigError(f"solver.{name} must equal params.{name}")
        if self.params.p is not None and not math.isclose(s.p, float(self.params.p)):
            raise ConfigError("solver.p must equal params.p")
        lo, hi = self.window
        if not (0 < lo < hi <= s.T * (1 + 1e-12)):
            raise ConfigError(f"fit_window {self.window} must lie in (0, T]")

    @property
    def window(self) -> tuple:
        if self.fit_window is None:
            return (self.solver.T / 10, self.solver.T)
        return tuple(float(x) for x in self.fit_window)

    @property
    def data_radius(self) -> float:
        return max(self.u0.radius, self.u1.radius)

    @property
    def guard_ok(self) -> bool:
        return self.grid.wrap_guard(self.solver.T, self.data_radius, float(self.params.sigma))

    def center(self):
        if not self.random_center:
            return None
        rng = np.random.default_rng(self.seed)
        return [rng.uniform(-L / 4, L / 4) for L in self.grid.half_length]

    def initial_state(self) -> tuple:
        """Initial StatePair and the means removed from (u0, u1)."""
        c = self.center()
        u0 = Field(self.grid, values=self.u0.sample(self.grid, c))
        u1 = Field(self.grid, values=self.u1.sample(self.grid, c))
        means = (u0.mean(), u1.mean())
        if self.subtract_mean:
            u0, u1 = u0.minus_mean(), u1.minus_mean()
        return StatePair(u0, u1, 0.0), means

    def with_p(self, p: float) -> "ExperimentSpec":
        return replace(self, params=self.params.with_p(p), solver=self.solver.replace(p=float(p)))

    def with_epsilon(self, eps: float) -> "ExperimentSpec":
        return replace(self, u0=self.u0.with_amplitude(eps), u1=self.u1.with_amplitude(eps))

    def to_dict(self) -> dict:
        s = self.solver.to_dict()
        return {
            "name": self.name,
            "params": self.params.to_dict(),
            "grid": self.grid.to_dict(),
            "u0": asdict(self.u0),
            "u1": asdict(self.u1),
            "solver": {k: s[k] for k in sorted(_SOLVER_KEYS)},
            "fit_window": None if self.fit_window is None else list(self.window),
            "seed": self.seed,
            "random_center": self.random_center,
            "subtract_mean": self.subtract_mean,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        _strict(d, {"name", "params", "grid", "u0", "u1", "solver", "fit_window", "seed",
                    "random_center", "subtract_mean"}, "experiment")
        for key in ("name", "params", "grid", "u0", "u1", "solver"):
            if key not in d:
                raise ConfigError(f"experiment: missing key {key!r}")
        try:
            params = ModelParams.from_dict(d["params"])
        except theory.ParameterError as exc:
            raise ConfigError(f"params.{exc}") from exc
        _strict(d["grid"], {"sizes", "half_length"}, "grid")
        grid = Grid(tuple(d["grid"]["sizes"]), d["grid"]["half_length"])
        sd = dict(d["solver"])
        _strict(sd, _SOLVER_KEYS, "solver")
        sd.setdefault("p", float(params.p) if params.p is not None else 2.0)
        solver = SolverConfig(sigma=float(params.sigma), q=float(params.q), m2=float(params.m2), **sd)
        fw = d.get("fit_window")
        return cls(
            name=str(d["name"]), params=params, grid=grid,
            u0=Profile.from_dict(d["u0"]), u1=Profile.from_dict(d["u1"]), solver=solver,
            fit_window=None if fw is None else tuple(float(x) for x in fw),
            seed=int(d.get("seed", 0)), random_center=bool(d.get("random_center", False)),
            subtract_mean=bool(d.get("subtract_mean", True)),
        )


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    r2: float
    window: tuple
    samples: int


def fit_decay_rate(t, values, window) -> DecayFit:
    """Least-squares slope of log(value) against log(1+t) inside ``window``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(values, dtype=float)
    lo, hi = window
    m = (t >= lo) & (t <= hi)
    if m.sum() < 8:
        raise ValueError(f"need >= 8 samples in window {window}, got {int(m.sum())}")
    if np.any(y[m] <= 0) or not np.all(np.isfinite(y[m])):
        raise ValueError("values must be positive and finite inside the fit window")
    x, ly = np.log1p(t[m]), np.log(y[m])
    slope, intercept = np.polyfit(x, ly, 1)
    resid = ly - (slope * x + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, min(1.0, 1.0 - float(np.sum(resid ** 2)) / ss_tot))
    return DecayFit(float(slope), float(intercept), r2, (float(lo), float(hi)), int(m.sum()))


@dataclass(eq=False)
class DecayReport:
    spec: ExperimentSpec
    regime: str
    regime_reason: str
    theory_source: str
    theory_rates: theory.DecayRates
    outcome: str
    blowup_time: Optional[float]
    fit_u: Optional[DecayFit]
    fit_grad: Optional[DecayFit]
    weights: Optional[tuple]
    weighted_norm: Optional[float]
    means_removed: tuple
    warnings: list
    trajectory: Trajectory = field(repr=False)

    kind = "decay"

    def to_dict(self) -> dict:
        rates = {"rate_u": float(self.theory_rates.rate_u),
                 "rate_grad": float(self.theory_rates.rate_grad)}

        def cmp(fit, rate):
            if fit is None:
                return None
            return {"measured": fit.slope, "theoretical": rate, "difference": fit.slope - rate,
                    "r2": fit.r2, "intercept": fit.intercept, "window": list(fit.window),
                    "samples": fit.samples}

        return {
            "kind": self.kind,
            "spec": self.spec.to_dict(),
            "regime": self.regime,
            "regime_reason": self.regime_reason,
            "theory_source": self.theory_source,
            "theory": rates,
            "outcome": self.outcome,
            "blowup_time": self.blowup_time,
            "blowup_is_heuristic": True,
            "fit_u": cmp(self.fit_u, rates["rate_u"]),
            "fit_grad": cmp(self.fit_grad, rates["rate_grad"]),
            "weights": None if self.weights is None else [float(w) for w in self.weights],
            "weighted_norm": self.weighted_norm,
            "means_removed": {"u0": self.means_removed[0], "u1": self.means_removed[1],
                              "subtracted": self.spec.subtract_mean},
            "warnings": list(self.warnings),
        }

    def series(self) -> dict:
        """Plot data: measured norm and theory envelope anchored at the window start."""
        tr = self.trajectory
        out = {}
        for name, y, rate in (("u", tr.column("norm_lq"), self.theory_rates.rate_u),
                              ("grad", tr.grad_pair, self.theory_rates.rate_grad)):
            lo = self.spec.window[0]
            idx = int(np.searchsorted(tr.times, lo)) if len(tr.times) else 0
            idx = min(idx, len(tr.times) - 1)
            t0, y0 = tr.times[idx], y[idx]
            env = y0 * ((1 + tr.times) / (1 + t0)) ** float(rate)
            out[name] = list(zip(tr.times.tolist(), y.tolist(), env.tolist()))
        return out


def _annotate(spec: ExperimentSpec):
    params = spec.params
    cls = theory.classify_regime(params)
    if spec.solver.nonlinear:
        if not cls.regime.covered:
            raise ExperimentRefused(cls.reason)
        rng = theory.admissible_p_range(params.with_p(spec.solver.p))
        p = spec.params.p if spec.params.p is not None else spec.solver.p
        if not rng.contains(theory.as_number(p)):
            raise ExperimentRefused(f"p = {spec.solver.p} outside admissible range {rng} ({rng.reason})")
        return cls, theory.decay_rates(params, cls.regime), "decay_rates", \
            theory.solution_norm_weights(params, cls.regime)
    rates = theory.linear_decay_rates(params, spec.u0.kind != "zero", spec.u1.kind != "zero")
    weights = None
    if cls.regime.covered:
        weights = theory.solution_norm_weights(params, cls.regime)
    return cls, rates, "linear_decay_rates", weights


def run_decay_experiment(spec: ExperimentSpec) -> DecayReport:
    cls, rates, source, weights = _annotate(spec)
    warnings = []
    if not spec.guard_ok:
        warnings.append(
            f"wrap-around guard violated: L = {min(spec.grid.half_length):g} < "
            f"8 (1+T)^(1/sigma) r = {8 * (1 + spec.solver.T) ** (1 / float(spec.params.sigma)) * spec.data_radius:g}")
    if spec.params.non_integer_n:
        warnings.append("non-integer n")
    state0, means = spec.initial_state()
    traj = evolve(state0, spec.solver)
    fit_u = fit_g = None
    wnorm = None
    if traj.completed:
        fit_u = fit_decay_rate(traj.times, traj.column("norm_lq"), spec.window)
        fit_g = fit_decay_rate(traj.times, traj.grad_pair, spec.window)
        if weights is not None:
            wnorm = weighted_solution_norm(traj, weights)
    return DecayReport(spec, cls.regime.value, cls.reason, source, rates, traj.outcome,
                       traj.blowup_time, fit_u, fit_g, weights, wnorm, means, warnings, traj)


def linear_reference(spec: ExperimentSpec) -> Trajectory:
    """Same data and recording cadence with the source switched off."""
    state0, _ = spec.initial_state()
    return evolve(state0, spec.solver.replace(nonlinear=False))


def calibrate_epsilon(spec: ExperimentSpec, target_ratio: float = 0.5, horizon: float = 10.0,
                      start: float = 1.0, iterations: int = 5) -> tuple:
    """Largest data size (to bisection accuracy) whose first Picard ratio is below target.

    Returns (epsilon, first_ratio). The search halves ``start`` until the
    ratio is below target, then bisects geometrically between that value and
    its double.
    """
    cfg = spec.solver.replace(T=horizon, nonlinear=True)
    weights = _weights_or_zero(spec.params)

    def ratio(eps):
        s0, _ = spec.with_epsilon(eps).initial_state()
        res = picard_solve(s0, cfg, K=2, weights=weights)
        if not res.contractive or len(res.distances) < 2:
            return math.inf
        return res.ratios[0]

    lo = start
    r_lo = ratio(lo)
    while not r_lo < target_ratio:
        lo /= 2
        r_lo = ratio(lo)
        if lo < 1e-8:
            raise RuntimeError("no contractive epsilon found")
    hi = 2 * lo
    if lo == start:
        return lo, r_lo
    for _ in range(iterations):
        mid = math.sqrt(lo * hi)
        r = ratio(mid)
        if r < target_ratio:
            lo, r_lo = mid, r
        else:
            hi = mid
    return lo, r_lo


def _weights_or_zero(params: ModelParams) -> tuple:
    cls = theory.classify_regime(params)
    if not cls.regime.covered:
        return (0.0, 0.0)
    return tuple(float(w) for w in theory.solution_norm_weights(params, cls.regime))


@dataclass(eq=False)
class SweepReport:
    spec: ExperimentSpec
    epsilon: float
    p_grid: list
    entries: list
    bracket: Optional[tuple]
    theory: dict
    violations: list

    kind = "sweep"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "spec": self.spec.to_dict(),
            "epsilon": self.epsilon,
            "p_grid": list(self.p_grid),
            "entries": list(self.entries),
            "bracket": None if self.bracket is None else list(self.bracket),
            "theory": dict(self.theory),
            "monotonicity_violations": list(self.violations),
            "blowup_is_heuristic": True,
        }


def classify_run(traj: Trajectory, window) -> tuple:
    """(classification, slope) with the +/-0.05 slope thresholds."""
    if not traj.completed:
        return "BlowUp", None
    fit = fit_decay_rate(traj.times, traj.column("norm_lq"), window)
    if fit.slope < -SLOPE_THRESHOLD:
        return "Decaying", fit.slope
    if fit.slope > SLOPE_THRESHOLD:
        return "Growing", fit.slope
    return "Marginal", fit.slope


def _sweep_point(spec_dict: dict, p: float, eps: float) -> dict:
    spec = ExperimentSpec.from_dict(spec_dict).with_p(p).with_epsilon(eps)
    spec = replace(spec, solver=spec.solver.replace(nonlinear=True))
    entry = {"p": float(p), "classification": None, "slope": None, "outcome": None,
             "blowup_time": None, "error": None}
    try:
        state0, _ = spec.initial_state()
        traj = evolve(state0, spec.solver)
        entry["outcome"] = traj.outcome
        entry["blowup_time"] = traj.blowup_time
        entry["classification"], entry["slope"] = classify_run(traj, spec.window)
    except Exception as exc:  # recorded per point, the sweep continues
        entry["error"] = f"{type(exc).__name__}: {exc}"
    return entry


def _theory_exponents(params: ModelParams) -> dict:
    out = {}
    cls = theory.classify_regime(params)
    out["regime"] = cls.regime.value
    if theory.num_lt(params.m2 * params.sigma, params.n):
        out["p1"] = float(theory.p1_exponent(params.m2, params.n, params.sigma))
    if params.m2 < params.m1:
        out["p2"] = float(theory.p2_exponent(params.m1, params.m2, params.n, params.sigma))
    return out


def critical_sweep(spec: ExperimentSpec, p_grid, eps: float, workers: int = 1) -> SweepReport:
    p_grid = [float(p) for p in p_grid]
    if any(b <= a for a, b in zip(p_grid, p_grid[1:])):
        raise ValueError("p_grid must be strictly increasing")
    if any(p <= 1 for p in p_grid):
        raise ValueError("p_grid must lie in (1, inf)")
    d = spec.to_dict()
    if workers > 1 and len(p_grid) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(_sweep_point, [d] * len(p_grid), p_grid, [eps] * len(p_grid)))
    else:
        entries = [_sweep_point(d, p, eps) for p in p_grid]

    classes = [e["classification"] for e in entries]
    bracket, violations = transition_bracket(p_grid, classes)
    return SweepReport(spec, float(eps), p_grid, entries, bracket,
                       _theory_exponents(spec.params), violations)


def transition_bracket(p_grid, classes) -> tuple:
    """(bracket, monotonicity violations) for classifications along increasing p.

    The bracket is the pair of neighbouring grid points where the topmost
    switch from a non-decaying class to Decaying happens; runs that errored
    (class None) never bound it.
    """
    bracket = None
    for i in range(len(classes) - 1, 0, -1):
        if classes[i] == "Decaying" and classes[i - 1] not in (None, "Decaying"):
            bracket = (p_grid[i - 1], p_grid[i])
            break
    violations = []
    seen_decay = None
    for p, c in zip(p_grid, classes):
        if c == "Decaying":
            seen_decay = p
        elif seen_decay is not None and c in ("BlowUp", "Growing"):
            violations.append(f"Decaying at p={seen_decay:g} but {c} at p={p:g}")
    return bracket, violations


@dataclass(frozen=True)
class LemmaCheck:
    a: float
    b: float
    branch: str
    predicted: float
    log_factor: bool
    fitted: float
    agree: bool
    tolerance: float
    t_grid: list
    values: list

    kind = "lemma"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind
        return d


DEFAULT_T_GRID = tuple(np.geomspace(1e2, 1e4, 9))


def convolution_integral(t: float, a: float, b: float) -> float:
    """int_0^t (1+t-s)^-a (1+s)^-b ds by adaptive quadrature (rtol 1e-10)."""
    f = lambda s: (1 + t - s) ** (-a) * (1 + s) ** (-b)
    total = 0.0
    for lo, hi in ((0.0, t / 2), (t / 2, t)):
        val, _, info, *rest = quad(f, lo, hi, epsabs=0.0, epsrel=1e-10, limit=500, full_output=1)
        if rest:
            raise ArithmeticError(f"quadrature did not converge at t={t}: {rest[0]}")
        total += val
    return total


def verify_integral_lemma(a: float, b: float, t_grid=None, tol: float = 0.05) -> LemmaCheck:
    t = np.asarray(DEFAULT_T_GRID if t_grid is None else t_grid, dtype=float)
    if t.size < 6 or t.min() < 10 or t.max() > 1e5:
        raise ValueError("t_grid needs >= 6 points inside [10, 1e5]")
    ratios = t[1:] / t[:-1]
    if not np.allclose(ratios, ratios[0], rtol=1e-6):
        raise ValueError("t_grid must be geometrically spaced")
    br = theory.integral_branch(a, b)
    import warnings as _w
    with _w.catch_warnings():
        _w.simplefilter("error", IntegrationWarning)
        try:
            vals = np.array([convolution_integral(x, a, b) for x in t])
        except IntegrationWarning as exc:
            raise ArithmeticError(f"quadrature did not converge: {exc}") from exc
    y = vals / np.log(2 + t) if br.log_factor else vals
    fit = fit_decay_rate(t, y, (t.min(), t.max()))
    pred = float(br.exponent)
    return LemmaCheck(float(a), float(b), br.branch.value, pred, br.log_factor, fit.slope,
                      abs(fit.slope - pred) < tol, tol, t.tolist(), vals.tolist())


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow(["" if x is None else (repr(x) if isinstance(x, float) else x) for x in r])


def emit_report(report, out_dir, name: Optional[str] = None) -> list:
    """Write ``<out>/<name>/report.json`` plus CSV plot data; returns written paths."""
    if name is None:
        name = report.spec.name if hasattr(report, "spec") else f"lemma_a{report.a:g}_b{report.b:g}"
    target = Path(out_dir) / name
    try:
        target.mkdir(parents=True, exist_ok=True)
        payload = {"schema": SCHEMA_VERSION, "generated_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())}
        payload.update(report.to_dict())
        paths = [target / "report.json"]
        paths[0].write_text(_dump(payload))
        if isinstance(report, DecayReport):
            for key, rows in report.series().items():
                p = target / f"series_{key}.csv"
                _write_csv(p, ("t", "measured", "theory_envelope"), rows)
                paths.append(p)
            p = target / "series_norms.csv"
            report.trajectory.to_csv(p)
            paths.append(p)
        elif isinstance(report, SweepReport):
            p = target / "sweep.csv"
            _write_csv(p, ("p", "classification", "slope", "outcome", "blowup_time", "error"),
                       [(e["p"], e["classification"], e["slope"], e["outcome"],
                         e["blowup_time"], e["error"]) for e in report.entries])
            paths.append(p)
    except OSError as exc:
        raise OSError(f"cannot write report to {target}: {exc}") from exc
    return paths


@dataclass(frozen=True)
class SweepPlan:
    p_grid: tuple
    epsilon: float
    workers: int = 1

    @classmethod
    def from_dict(cls, d: dict) -> "SweepPlan":
        _strict(d, {"p_grid", "p_start", "p_stop", "p_step", "epsilon", "workers"}, "sweep")
        if "epsilon" not in d:
            raise ConfigError("sweep: missing key 'epsilon'")
        if "p_grid" in d:
            if any(k in d for k in ("p_start", "p_stop", "p_step")):
                raise ConfigError("sweep: give either p_grid or p_start/p_stop/p_step")
            grid = tuple(float(p) for p in d["p_grid"])
        else:
            try:
                a, b, h = float(d["p_start"]), float(d["p_stop"]), float(d["p_step"])
            except KeyError as exc:
                raise ConfigError(f"sweep: missing key {exc.args[0]!r}") from None
            if not h > 0 or b < a:
                raise ConfigError("sweep: need p_step > 0 and p_stop >= p_start")
            count = int(round((b - a) / h)) + 1
            grid = tuple(round(a + i * h, 12) for i in range(count))
        eps = float(d["epsilon"])
        if not eps > 0:
            raise ConfigError("sweep.epsilon must be > 0")
        workers = int(d.get("workers", 1))
        if workers < 1:
            raise ConfigError("sweep.workers must be >= 1")
        return cls(grid, eps, workers)

    def to_dict(self) -> dict:
        return {"p_grid": list(self.p_grid), "epsilon": self.epsilon, "workers": self.workers}


def parse_config(raw: bytes) -> tuple:
    """Parse a JSON config into (ExperimentSpec, SweepPlan or None)."""
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"config is not UTF-8 (byte {exc.start})") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[:exc.pos].encode("utf-8"))
        raise ConfigError(f"malformed JSON at byte {offset} (line {exc.lineno}, "
                          f"column {exc.colno}): {exc.msg}") from None
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    d = dict(d)
    schema = d.pop("schema", SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema {schema!r}; expected {SCHEMA_VERSION}")
    sweep = d.pop("sweep", None)
    d.pop("comment", None)
    try:
        spec = ExperimentSpec.from_dict(d)
        plan = None if sweep is None else SweepPlan.from_dict(sweep)
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    return spec, plan
