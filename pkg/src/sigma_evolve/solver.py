"""Time integration of the semilinear problem in Duhamel form.

The linear part is propagated exactly mode by mode (see
:mod:`sigma_evolve.spectral`), so the only discretization error comes from
the treatment of the source |u|^p inside the Duhamel integral.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.fft as sfft

from .spectral import (
    FFT_WORKERS,
    Field,
    Grid,
    PropagatorTable,
    StatePair,
    apply_flow,
    build_propagator,
    fractional_laplacian,
    inverse,
    lq_norm,
    sup_norm,
)

log = logging.getLogger(__name__)

INTEGRATORS = ("ETD1", "ETD2RK")
NORM_COLUMNS = ("norm_lq", "norm_lm2p", "norm_lqp", "seminorm", "dtnorm")


@dataclass(frozen=True)
class SolverConfig:
    p: float
    dt: float
    T: float
    integrator: str = "ETD2RK"
    oversample: float = 1.5
    blowup_threshold: float = 1e8
    sigma: float = 1.0
    q: float = 2.0
    m2: float = 1.0
    record_every: int = 1
    nonlinear: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not self.T >= self.dt:
            raise ValueError(f"T must be >= dt, got T={self.T}, dt={self.dt}")
        if not self.p > 1:
            raise ValueError(f"p must be > 1, got {self.p}")
        if not self.oversample >= 1:
            raise ValueError(f"oversample must be >= 1, got {self.oversample}")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}, got {self.integrator!r}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        steps = self.T / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError(f"T={self.T} is not a whole number of steps dt={self.dt}")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    def replace(self, **changes) -> "SolverConfig":
        d = asdict(self)
        d.update(changes)
        return SolverConfig(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise KeyError(f"unknown solver key {sorted(unknown)[0]!r}")
        return cls(**d)


def _padded_size(n: int, factor: float) -> int:
    m = int(math.ceil(n * factor))
    return m + (m % 2)


def _mode_index(n: int, m: int, last: bool):
    """Source/destination indices of the non-Nyquist modes of an n-grid in an m-grid."""
    half = n // 2
    if last:
        idx = np.arange(half)
        return idx, idx
    src = np.concatenate([np.arange(half), np.arange(half + 1, n)])
    dst = np.concatenate([np.arange(half), np.arange(m - half + 1, m)])
    return src, dst


class _Dealiaser:
    """Zero-padding to an oversampled grid and truncation back (Nyquist dropped)."""

    def __init__(self, grid: Grid, factor: float):
        self.grid = grid
        self.fine = tuple(_padded_size(n, factor) for n in grid.sizes)
        self.active = self.fine != grid.sizes
        d = grid.dim
        src, dst = [], []
        for a, (n, m) in enumerate(zip(grid.sizes, self.fine)):
            s, t = _mode_index(n, m, a == d - 1)
            src.append(s)
            dst.append(t)
        self._src = np.ix_(*src)
        self._dst = np.ix_(*dst)
        self.fine_shape = self.fine[:-1] + (self.fine[-1] // 2 + 1,)
        self.scale = float(np.prod(self.fine)) / grid.npoints

    def to_fine(self, coeffs: np.ndarray) -> np.ndarray:
        out = np.zeros(self.fine_shape, dtype=complex)
        out[self._dst] = coeffs[self._src] * self.scale
        return _irfft(out, self.fine)

    def to_coarse(self, fine_values: np.ndarray) -> np.ndarray:
        fc = _rfft(fine_values)
        out = np.zeros(self.grid.coeff_shape, dtype=complex)
        out[self._src] = fc[self._dst] / self.scale
        return out


def _rfft(a):
    return sfft.rfftn(a, workers=FFT_WORKERS)


def _irfft(c, shape):
    return sfft.irfftn(c, s=shape, workers=FFT_WORKERS)


_DEALIASERS: dict = {}


def _dealiaser(grid: Grid, factor: float) -> _Dealiaser:
    key = (grid, float(factor))
    d = _DEALIASERS.get(key)
    if d is None:
        d = _DEALIASERS[key] = _Dealiaser(grid, factor)
    return d


def source_coeffs(uc: np.ndarray, grid: Grid, p: float, oversample: float = 1.5):
    """Coefficients of |u|^p and the sup of |u| seen on the evaluation grid."""
    dl = _dealiaser(grid, oversample)
    if dl.active:
        u = dl.to_fine(uc)
    else:
        u = inverse(uc, grid)
    a = np.abs(u)
    sup = float(a.max())
    if not math.isfinite(sup):
        raise FloatingPointError("non-finite samples in nonlinearity")
    with np.errstate(over="ignore", invalid="ignore"):
        a **= p
    if not np.isfinite(a).all():
        raise FloatingPointError("|u|^p overflowed")
    if dl.active:
        return dl.to_coarse(a), sup
    return _rfft(a), sup


def nonlinearity(f: Field, p: float, oversample: float = 1.5) -> Field:
    """Pointwise |u|^p, evaluated on an oversampled grid and truncated back."""
    if not np.all(np.isfinite(f.coeffs)):
        raise ValueError("non-finite field passed to nonlinearity")
    try:
        c, _ = source_coeffs(f.coeffs, f.grid, p, oversample)
    except FloatingPointError as exc:
        raise ValueError(str(exc)) from exc
    return Field(f.grid, coeffs=c)


def _advance(uc, vc, table: PropagatorTable, cfg: SolverConfig):
    """One step on coefficient arrays; returns (u, v, sup|u_n|)."""
    lu, lv = apply_flow(table, uc, vc)
    if not cfg.nonlinear:
        return lu, lv, None
    f0, sup = source_coeffs(uc, table.grid, cfg.p, cfg.oversample)
    au = lu + table.W1 * f0
    av = lv + table.G2 * f0
    if cfg.integrator == "ETD1":
        return au, av, sup
    df = source_coeffs(au, table.grid, cfg.p, cfg.oversample)[0] - f0
    h = table.dt
    return au + (table.W1 - table.W2 / h) * df, av + (table.W1 / h) * df, sup


def _check_table(state: StatePair, table: PropagatorTable, cfg: SolverConfig):
    if state.grid != table.grid:
        raise ValueError("state grid does not match propagator grid")
    if not math.isclose(cfg.dt, table.dt, rel_tol=1e-12):
        raise ValueError(f"cfg.dt={cfg.dt} differs from table dt={table.dt}")


def step(state: StatePair, table: PropagatorTable, cfg: SolverConfig) -> StatePair:
    """Advance by one exponential-integrator step of size ``table.dt``.

    ETD1 freezes the source at the left endpoint and integrates the exact
    kernel against it; ETD2RK adds the Cox-Matthews corrector built from the
    source at the predicted endpoint.
    """
    _check_table(state, table, cfg)
    uc, vc, _ = _advance(state.u.coeffs, state.v.coeffs, table, cfg)
    g = table.grid
    return StatePair(Field(g, coeffs=uc), Field(g, coeffs=vc), state.time + table.dt)


def norm_record(u: Field, v: Field, cfg: SolverConfig) -> tuple:
    return (
        lq_norm(u, cfg.q),
        lq_norm(u, cfg.m2 * cfg.p),
        lq_norm(u, cfg.q * cfg.p),
        lq_norm(fractional_laplacian(u, cfg.sigma), cfg.q),
        lq_norm(v, cfg.q),
    )


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    norms: np.ndarray
    outcome: str
    blowup_time: Optional[float] = None
    final_state: Optional[StatePair] = field(default=None, repr=False)

    def __post_init__(self):
        for a in (self.times, self.norms):
            a.flags.writeable = False

    @property
    def completed(self) -> bool:
        return self.outcome == "Completed"

    def column(self, name: str) -> np.ndarray:
        return self.norms[:, NORM_COLUMNS.index(name)]

    @property
    def grad_pair(self) -> np.ndarray:
        return self.column("seminorm") + self.column("dtnorm")

    def to_csv(self, path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("t",) + NORM_COLUMNS)
            for t, row in zip(self.times, self.norms):
                w.writerow([f"{t:.17g}"] + [f"{x:.17g}" for x in row])
        return path


def evolve(state0: StatePair, cfg: SolverConfig, table: Optional[PropagatorTable] = None) -> Trajectory:
    """Integrate to ``cfg.T`` recording norms every ``cfg.record_every`` steps.

    Blow-up is declared (heuristically) when sup|u| exceeds
    ``blowup_threshold`` times the initial data size or turns non-finite.
    """
    if table is None:
        table = build_propagator(state0.grid, cfg.sigma, cfg.dt)
    _check_table(state0, table, cfg)
    g = state0.grid
    ref = max(sup_norm(state0.u), sup_norm(state0.v))
    limit = cfg.blowup_threshold * ref if ref > 0 else math.inf

    uc, vc = state0.u.coeffs, state0.v.coeffs
    times = [state0.time]
    norms = [norm_record(state0.u, state0.v, cfg)]
    n = cfg.n_steps
    for k in range(1, n + 1):
        t = state0.time + k * cfg.dt
        try:
            uc, vc, sup = _advance(uc, vc, table, cfg)
        except FloatingPointError:
            return _blowup(times, norms, t - cfg.dt)
        if sup is not None and sup > limit:
            return _blowup(times, norms, t - cfg.dt)
        if k % cfg.record_every == 0 or k == n:
            u, v = Field(g, coeffs=uc), Field(g, coeffs=vc)
            rec = norm_record(u, v, cfg)
            if not all(math.isfinite(x) for x in rec) or sup_norm(u) > limit:
                return _blowup(times, norms, t)
            times.append(t)
            norms.append(rec)
    final = StatePair(Field(g, coeffs=uc), Field(g, coeffs=vc), state0.time + n * cfg.dt)
    return Trajectory(np.array(times), np.array(norms), "Completed", None, final)


def _blowup(times, norms, t_star) -> Trajectory:
    log.info("blow-up declared at t=%g", t_star)
    return Trajectory(np.array(times), np.array(norms).reshape(-1, len(NORM_COLUMNS)),
                      "BlowUp", float(t_star))


def weighted_solution_norm(traj: Trajectory, weights) -> float:
    """sup_t (1+t)^w_u ||u||_q + (1+t)^w_grad (||(-Delta)^{sigma/2} u||_q + ||u_t||_q)."""
    if not traj.completed:
        raise ValueError("weighted norm needs a completed trajectory")
    w_u, w_grad = (float(w) for w in weights)
    t1 = 1.0 + traj.times
    vals = t1 ** w_u * traj.column("norm_lq") + t1 ** w_grad * traj.grad_pair
    return float(vals.max())


@dataclass(frozen=True, eq=False)
class PicardResult:
    final: Optional[StatePair]
    distances: list
    status: str
    times: np.ndarray = field(repr=False, default=None)
    norm_u: np.ndarray = field(repr=False, default=None)

    @property
    def contractive(self) -> bool:
        return self.status != "NotContractive"

    @property
    def ratios(self) -> list:
        d = self.distances
        return [d[k + 1] / d[k] if d[k] > 0 else 0.0 for k in range(len(d) - 1)]


def _weighted_dist(du, dv, grid, cfg, t, w_u, w_grad) -> float:
    symbol = grid.symbol(cfg.sigma)
    a = lq_norm(Field(grid, coeffs=du), cfg.q)
    b = lq_norm(Field(grid, coeffs=du * symbol), cfg.q)
    c = lq_norm(Field(grid, coeffs=dv), cfg.q)
    return (1 + t) ** w_u * a + (1 + t) ** w_grad * (b + c)


def picard_solve(state0: StatePair, cfg: SolverConfig, K: int, weights=(0.0, 0.0)) -> PicardResult:
    """Fixed-point iteration u <- u_lin + N[u] on the time grid of ``cfg``.

    N[u](t_j) = int_0^t_j G2(t_j - s) |u(s)|^p ds is discretized with the
    composite trapezoid rule in s and the exact kernel in t - s. The sum is
    accumulated recursively using the semigroup property of the exact flow.
    ``distances[k]`` is the weighted sup-in-time distance between iterates
    k+1 and k. Three consecutive increases stop the run as NotContractive.
    """
    if K < 2:
        raise ValueError("K must be >= 2")
    g = state0.grid
    table = build_propagator(g, cfg.sigma, cfg.dt)
    M, h = cfg.n_steps, cfg.dt
    w_u, w_grad = (float(w) for w in weights)
    t = state0.time + h * np.arange(M + 1)

    hist_u = np.empty((M + 1,) + g.coeff_shape, dtype=complex)
    hist_v = np.empty_like(hist_u)
    hist_u[0], hist_v[0] = state0.u.coeffs, state0.v.coeffs
    for j in range(M):
        hist_u[j + 1], hist_v[j + 1] = apply_flow(table, hist_u[j], hist_v[j])

    distances, status, growth = [], "Completed", 0
    for _ in range(K):
        try:
            d = _picard_sweep(hist_u, hist_v, table, cfg, t, w_u, w_grad)
        except FloatingPointError:
            status = "NotContractive"
            break
        if not math.isfinite(d):
            status = "NotContractive"
            break
        if distances and d > distances[-1]:
            growth += 1
        else:
            growth = 0
        distances.append(d)
        if growth >= 3:
            status = "NotContractive"
            break

    final = None
    norm_u = None
    if status != "NotContractive":
        final = StatePair(Field(g, coeffs=hist_u[M].copy()), Field(g, coeffs=hist_v[M].copy()),
                          float(t[M]))
        norm_u = np.array([lq_norm(Field(g, coeffs=c), cfg.q) for c in hist_u])
    return PicardResult(final, distances, status, t, norm_u)


def _picard_sweep(hist_u, hist_v, table, cfg, t, w_u, w_grad) -> float:
    """Replace the stored iterate by the next one in place; return their distance."""
    g = table.grid
    M, h = len(t) - 1, table.dt
    lin_u, lin_v = hist_u[0].copy(), hist_v[0].copy()
    qu = np.zeros_like(lin_u)
    qv = np.zeros_like(lin_v)
    f_prev, _ = source_coeffs(hist_u[0], g, cfg.p, cfg.oversample)
    dist = 0.0
    for j in range(M):
        lin_u, lin_v = apply_flow(table, lin_u, lin_v)
        qu, qv = apply_flow(table, qu, qv)
        wj = 0.5 * h if j == 0 else h
        qu += wj * table.G2 * f_prev
        qv += wj * table.dG2 * f_prev
        f_next, _ = source_coeffs(hist_u[j + 1], g, cfg.p, cfg.oversample)
        new_u = lin_u + qu
        new_v = lin_v + qv + 0.5 * h * f_next
        dist = max(dist, _weighted_dist(new_u - hist_u[j + 1], new_v - hist_v[j + 1],
                                        g, cfg, t[j + 1], w_u, w_grad))
        hist_u[j + 1], hist_v[j + 1] = new_u, new_v
        f_prev = f_next
    return dist
