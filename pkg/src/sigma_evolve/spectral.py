"""Periodic-grid fields, Fourier multipliers, discrete norms and the exact
per-mode propagator of the linear structurally damped sigma-evolution flow.

Domain is the box [-L, L)^d with N points per axis. Coefficients use the
``rfftn`` layout (unnormalized), which stores a real field's Hermitian
spectrum without redundancy. Wavenumbers are xi_k = (pi/L) k so the
continuum symbol |xi|^sigma is used verbatim.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.fft as sfft

FFT_WORKERS = -1

# Below this value of mu*t the propagator entries are evaluated from their
# power series; the closed forms of the integral weights lose ~eps/(mu*t)^2.
SERIES_CUTOFF = 0.5
_SERIES_TERMS = 30


@dataclass(frozen=True)
class Grid:
    sizes: tuple
    half_length: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in np.atleast_1d(self.sizes))
        if not 1 <= len(sizes) <= 3:
            raise ValueError(f"dimension must be 1-3, got {len(sizes)}")
        for s in sizes:
            if s < 2 or s & (s - 1):
                raise ValueError(f"grid sizes must be powers of two, got {s}")
        hl = np.atleast_1d(np.asarray(self.half_length, dtype=float))
        if hl.size == 1:
            hl = np.repeat(hl, len(sizes))
        if hl.size != len(sizes) or np.any(hl <= 0):
            raise ValueError(f"half_length must be positive per axis, got {self.half_length}")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "half_length", tuple(float(v) for v in hl))

    @property
    def dim(self) -> int:
        return len(self.sizes)

    @property
    def spacing(self) -> tuple:
        return tuple(2 * L / n for L, n in zip(self.half_length, self.sizes))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def npoints(self) -> int:
        return int(np.prod(self.sizes))

    @property
    def coeff_shape(self) -> tuple:
        return self.sizes[:-1] + (self.sizes[-1] // 2 + 1,)

    def axis_coords(self, axis: int) -> np.ndarray:
        L, n = self.half_length[axis], self.sizes[axis]
        return -L + (2 * L / n) * np.arange(n)

    def mesh(self) -> list:
        return np.meshgrid(*(self.axis_coords(a) for a in range(self.dim)), indexing="ij")

    def radius(self) -> np.ndarray:
        return np.sqrt(sum(x * x for x in self.mesh()))

    def freqs(self, axis: int) -> np.ndarray:
        """Wavenumbers (pi/L) k, k in {-N/2, ..., N/2-1}, in FFT order."""
        L, n = self.half_length[axis], self.sizes[axis]
        return np.fft.fftfreq(n, 1.0 / n) * (math.pi / L)

    @cached_property
    def _rfreqs(self) -> list:
        ks = [self.freqs(a) for a in range(self.dim - 1)]
        L, n = self.half_length[-1], self.sizes[-1]
        ks.append(np.arange(n // 2 + 1) * (math.pi / L))
        return ks

    @cached_property
    def abs_xi(self) -> np.ndarray:
        """|xi| on the rfft coefficient layout."""
        k2 = np.zeros(self.coeff_shape)
        for a, k in enumerate(self._rfreqs):
            shape = [1] * self.dim
            shape[a] = k.size
            k2 = k2 + (k * k).reshape(shape)
        k2.flags.writeable = False
        return np.sqrt(k2)

    @cached_property
    def hermitian_weights(self) -> np.ndarray:
        """Multiplicity of each rfft coefficient in the full spectrum."""
        n = self.sizes[-1]
        w = np.full(n // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w

    def symbol(self, s: float) -> np.ndarray:
        """|xi|^s with the zero mode set to 0 for s > 0."""
        if s == 0:
            return np.ones(self.coeff_shape)
        with np.errstate(divide="ignore"):
            return self.abs_xi ** s

    def wrap_guard(self, horizon: float, radius: float, sigma: float) -> bool:
        """True when L >= 8 (1+T)^(1/sigma) * radius on every axis."""
        need = 8.0 * (1.0 + horizon) ** (1.0 / sigma) * radius
        return min(self.half_length) >= need

    def to_dict(self) -> dict:
        return {"sizes": list(self.sizes), "half_length": list(self.half_length)}


def forward(values: np.ndarray) -> np.ndarray:
    return sfft.rfftn(values, workers=FFT_WORKERS)


def inverse(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    return sfft.irfftn(coeffs, s=grid.sizes, workers=FFT_WORKERS)


class Field:
    """Real scalar field holding samples and/or rfft coefficients.

    Whichever representation was supplied is authoritative; the other is
    computed on first access and cached. Treat instances as immutable.
    """

    __slots__ = ("grid", "_values", "_coeffs")

    def __init__(self, grid: Grid, values=None, coeffs=None):
        if values is None and coeffs is None:
            raise ValueError("need values or coeffs")
        self.grid = grid
        self._values = None
        self._coeffs = None
        if values is not None:
            values = np.asarray(values, dtype=float)
            if values.shape != grid.sizes:
                raise ValueError(f"values shape {values.shape} != grid {grid.sizes}")
            self._values = values
        if coeffs is not None:
            coeffs = np.asarray(coeffs, dtype=complex)
            if coeffs.shape != grid.coeff_shape:
                raise ValueError(f"coeffs shape {coeffs.shape} != {grid.coeff_shape}")
            self._coeffs = coeffs

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, coeffs=np.zeros(grid.coeff_shape, dtype=complex))

    @classmethod
    def from_function(cls, grid: Grid, func) -> "Field":
        return cls(grid, values=func(*grid.mesh()))

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            self._values = inverse(self._coeffs, self.grid)
        return self._values

    @property
    def coeffs(self) -> np.ndarray:
        if self._coeffs is None:
            self._coeffs = forward(self._values)
        return self._coeffs

    @property
    def sync(self) -> str:
        if self._values is not None and self._coeffs is not None:
            return "both"
        return "values" if self._values is not None else "coeffs"

    def mean(self) -> float:
        return float(self.coeffs.flat[0].real / self.grid.npoints)

    def minus_mean(self) -> "Field":
        c = self.coeffs.copy()
        c.flat[0] = 0.0
        return Field(self.grid, coeffs=c)

    def scaled(self, factor: float) -> "Field":
        return Field(self.grid, coeffs=self.coeffs * factor)

    def __add__(self, other: "Field") -> "Field":
        _same_grid(self.grid, other.grid)
        return Field(self.grid, coeffs=self.coeffs + other.coeffs)

    def __sub__(self, other: "Field") -> "Field":
        _same_grid(self.grid, other.grid)
        return Field(self.grid, coeffs=self.coeffs - other.coeffs)


def _same_grid(a: Grid, b: Grid):
    if a != b:
        raise ValueError(f"grid mismatch: {a} vs {b}")


@dataclass(frozen=True)
class StatePair:
    u: Field
    v: Field
    time: float = 0.0

    def __post_init__(self):
        _same_grid(self.u.grid, self.v.grid)
        if self.time < 0:
            raise ValueError("time must be >= 0")

    @property
    def grid(self) -> Grid:
        return self.u.grid

    @classmethod
    def zeros(cls, grid: Grid) -> "StatePair":
        return cls(Field.zeros(grid), Field.zeros(grid), 0.0)


def char_roots(mu):
    """Roots of lambda^2 + mu*lambda + mu^2 = 0, i.e. mu*(-1 +/- i*sqrt(3))/2."""
    mu = np.asarray(mu, dtype=float)
    if np.any(mu < 0):
        raise ValueError("mu must be >= 0")
    w = complex(-0.5, math.sqrt(3) / 2)
    return mu * w, mu * w.conjugate()


def _series(mu: np.ndarray, t: float, coeff) -> np.ndarray:
    # Divided difference of sum_j f_j lambda^j at the two roots:
    # (l+^j - l-^j)/(l+ - l-) = mu^(j-1) * s_j, s_j = 0, 1, -1 for j mod 3 = 0, 1, 2.
    out = np.zeros_like(mu)
    power = np.ones_like(mu)
    for j in range(1, _SERIES_TERMS):
        s = (0.0, 1.0, -1.0)[j % 3]
        if s:
            out += s * coeff(j, t) * power
        power = power * mu
    return out


def _g2_c(j, t):
    return t ** j / math.factorial(j)


def _dg2_c(j, t):
    return t ** (j - 1) / math.factorial(j - 1)


def _w1_c(j, t):
    return t ** (j + 1) / math.factorial(j + 1)


def _w2_c(j, t):
    return t ** (j + 2) / (math.factorial(j) * (j + 2))


def propagator_entries(mu, t: float) -> dict:
    """Exact solution operators of  w'' + mu w' + mu^2 w = f  for one time t.

    Returns arrays (same shape as ``mu``):
      G1, G2     -- responses to data (1, 0) and (0, 1),
      dG1, dG2   -- their time derivatives,
      W1, W2     -- int_0^t G2(s) ds and int_0^t s G2(s) ds (forcing weights).
    """
    mu = np.asarray(mu, dtype=float)
    t = float(t)
    small = mu * t < SERIES_CUTOFF
    big = ~small
    out = {k: np.empty_like(mu) for k in ("G1", "G2", "dG1", "dG2", "W1", "W2")}

    ms = mu[small]
    g2 = _series(ms, t, _g2_c)
    dg2 = _series(ms, t, _dg2_c)
    out["G2"][small] = g2
    out["dG2"][small] = dg2
    out["G1"][small] = dg2 + ms * g2
    out["dG1"][small] = -ms * ms * g2
    out["W1"][small] = _series(ms, t, _w1_c)
    out["W2"][small] = _series(ms, t, _w2_c)

    mb = mu[big]
    if mb.size:
        omega = math.sqrt(3) / 2 * mb
        decay = np.exp(-0.5 * mb * t)
        sn, cs = np.sin(omega * t), np.cos(omega * t)
        g2 = decay * sn / omega
        g1 = decay * (cs + sn / math.sqrt(3))
        w1 = (1.0 - g1) / (mb * mb)
        out["G2"][big] = g2
        out["dG2"][big] = decay * (cs - sn / math.sqrt(3))
        out["G1"][big] = g1
        out["dG1"][big] = -mb * mb * g2
        out["W1"][big] = w1
        out["W2"][big] = (g2 - t * g1 + mb * w1) / (mb * mb)
    return out


@dataclass(frozen=True, eq=False)
class PropagatorTable:
    grid: Grid
    sigma: float
    dt: float
    mu: np.ndarray = field(repr=False)
    lam_plus: np.ndarray = field(repr=False)
    lam_minus: np.ndarray = field(repr=False)
    G1: np.ndarray = field(repr=False)
    G2: np.ndarray = field(repr=False)
    dG1: np.ndarray = field(repr=False)
    dG2: np.ndarray = field(repr=False)
    W1: np.ndarray = field(repr=False)
    W2: np.ndarray = field(repr=False)


def build_propagator(grid: Grid, sigma: float, dt: float) -> PropagatorTable:
    if not dt > 0:
        raise ValueError("dt must be > 0")
    mu = grid.abs_xi ** sigma
    lp, lm = char_roots(mu)
    e = propagator_entries(mu, dt)
    return PropagatorTable(grid, float(sigma), float(dt), mu, lp, lm, **e)


def apply_flow(table: PropagatorTable, uc: np.ndarray, vc: np.ndarray):
    """One exact linear step on coefficient arrays."""
    return table.G1 * uc + table.G2 * vc, table.dG1 * uc + table.dG2 * vc


def linear_propagate(state: StatePair, table: PropagatorTable) -> StatePair:
    _same_grid(state.grid, table.grid)
    uc, vc = apply_flow(table, state.u.coeffs, state.v.coeffs)
    return StatePair(Field(table.grid, coeffs=uc), Field(table.grid, coeffs=vc),
                     state.time + table.dt)


def fractional_laplacian(f: Field, s: float) -> Field:
    """Apply the Fourier multiplier |xi|^s."""
    if s < 0:
        raise ValueError(f"order must be >= 0, got {s}")
    if s == 0:
        return f
    return Field(f.grid, coeffs=f.coeffs * f.grid.symbol(s))


def lq_norm(f: Field, q: float) -> float:
    """Riemann-sum L^q norm on the native grid."""
    if not 1 <= q < math.inf:
        raise ValueError(f"q must lie in [1, inf), got {q}")
    a = np.abs(f.values)
    if q == 2:
        s = np.vdot(a, a).real
    else:
        s = np.sum(a ** q)
    return float((s * f.grid.cell_volume) ** (1.0 / q))


def l2_norm_parseval(f: Field) -> float:
    """L^2 norm evaluated on the coefficient side."""
    g = f.grid
    c2 = np.abs(f.coeffs) ** 2
    total = np.sum(c2 * g.hermitian_weights)
    return float(math.sqrt(total * g.cell_volume / g.npoints))


def sup_norm(f: Field) -> float:
    return float(np.max(np.abs(f.values)))


def sobolev_seminorm(f: Field, sigma: float, q: float) -> float:
    return lq_norm(fractional_laplacian(f, sigma), q)


_MAGIC = b"SEVF"
_HEADER = struct.Struct("<4sI3IId")


def save_snapshot(f: Field, path) -> Path:
    """Binary dump: 32-byte header (magic, dim, sizes, L) then float64 samples."""
    g = f.grid
    if len(set(g.half_length)) != 1:
        raise ValueError("binary snapshots require the same half_length on every axis")
    sizes = list(g.sizes) + [0] * (3 - g.dim)
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, g.dim, *sizes, 0, g.half_length[0]))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())
    return path


def load_snapshot(path) -> Field:
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, dim, s0, s1, s2, _, L = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    sizes = (s0, s1, s2)[:dim]
    grid = Grid(sizes, L)
    values = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(sizes)
    return Field(grid, values=values.astype(float))


def save_slice_csv(f: Field, path) -> Path:
    """Write the line through the grid centre along axis 0 as ``x,u`` rows."""
    g = f.grid
    idx = (slice(None),) + tuple(n // 2 for n in g.sizes[1:])
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "u"])
        for x, u in zip(g.axis_coords(0), f.values[idx]):
            w.writerow([repr(float(x)), repr(float(u))])
    return path
