"""Closed-form conditions, critical exponents and decay rates for

    u_tt + (-Delta)^sigma u + (-Delta)^(sigma/2) u_t = |u|^p,

with data u(0) in H^{sigma,q} ∩ L^{m1} and u_t(0) in L^q ∩ L^{m2}.

Every function is pure. Inputs given as ``int``, ``Fraction`` or decimal
strings are evaluated in exact rational arithmetic, so boundary cases such as
``n == m1*m2*sigma/(m1 - m2)`` are decided exactly. Float inputs fall back to
a relative tolerance of ``REL_TOL``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

Number = Union[int, float, Fraction]

REL_TOL = 1e-12


class ParameterError(ValueError):
    """Invalid model parameter; ``field`` names the offending input."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class NotCoveredError(ValueError):
    """Raised when a quantity is only defined inside a covered regime."""


def as_number(x) -> Number:
    """Convert to ``Fraction`` when the value is exactly rational, else float."""
    if isinstance(x, bool):
        raise TypeError("boolean is not a number")
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except ValueError:
            return float(x)
    return float(x)


def _exact(*xs) -> bool:
    return all(isinstance(x, Fraction) for x in xs)


def num_eq(a: Number, b: Number) -> bool:
    if _exact(a, b):
        return a == b
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= REL_TOL * max(1.0, abs(a), abs(b))


def num_lt(a: Number, b: Number) -> bool:
    return a < b and not num_eq(a, b)


def num_le(a: Number, b: Number) -> bool:
    return a < b or num_eq(a, b)


def fmt(x: Number) -> str:
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.6g}"


def to_json_number(x: Optional[Number]):
    """JSON form of a number: float value plus the exact rational when known."""
    if x is None:
        return None
    if isinstance(x, Fraction):
        return {"value": float(x), "exact": fmt(x)}
    if math.isinf(x):
        return {"value": "inf" if x > 0 else "-inf"}
    return {"value": float(x)}


@dataclass(frozen=True)
class ModelParams:
    n: Number
    sigma: Number
    q: Number
    m1: Number
    m2: Number
    p: Optional[Number] = None

    def __post_init__(self):
        for name in ("n", "sigma", "q", "m1", "m2", "p"):
            value = getattr(self, name)
            if value is None:
                continue
            try:
                value = as_number(value)
            except (TypeError, ValueError) as exc:
                raise ParameterError(name, f"not a number ({value!r})") from exc
            if not math.isfinite(value):
                raise ParameterError(name, "must be finite")
            object.__setattr__(self, name, value)
        if self.n < 1:
            raise ParameterError("n", f"dimension must be >= 1, got {fmt(self.n)}")
        if self.sigma < 1:
            raise ParameterError("sigma", f"must be >= 1, got {fmt(self.sigma)}")
        if not self.q > 1:
            raise ParameterError("q", f"must lie in (1, inf), got {fmt(self.q)}")
        for name in ("m1", "m2"):
            m = getattr(self, name)
            if not (1 <= m < self.q):
                raise ParameterError(name, f"must lie in [1, q) = [1, {fmt(self.q)}), got {fmt(m)}")
        if self.p is not None and not self.p > 1:
            raise ParameterError("p", f"must be > 1, got {fmt(self.p)}")

    @property
    def non_integer_n(self) -> bool:
        """Formulas are real-analytic in n; a fractional n is allowed but flagged."""
        return self.n != int(self.n)

    def with_p(self, p) -> "ModelParams":
        return ModelParams(self.n, self.sigma, self.q, self.m1, self.m2, p)

    def to_dict(self) -> dict:
        out = {}
        for name in ("n", "sigma", "q", "m1", "m2", "p"):
            v = getattr(self, name)
            if v is None:
                continue
            out[name] = fmt(v) if isinstance(v, Fraction) else float(v)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        allowed = {"n", "sigma", "q", "m1", "m2", "p"}
        unknown = set(d) - allowed
        if unknown:
            raise ParameterError(sorted(unknown)[0], "unknown key")
        missing = {"n", "sigma", "q", "m1", "m2"} - set(d)
        if missing:
            raise ParameterError(sorted(missing)[0], "missing")
        return cls(**d)


class Regime(str, enum.Enum):
    REGIME1 = "Regime1"
    REGIME2 = "Regime2"
    BOTH = "Both"
    NOT_COVERED = "NotCovered"

    @property
    def covered(self) -> bool:
        return self is not Regime.NOT_COVERED


@dataclass(frozen=True)
class RegimeClassification:
    regime: Regime
    reason: str
    boundary: bool = False


def regime1_threshold(params: ModelParams) -> Number:
    """Lower dimension bound m2*q*sigma/(q - m2)."""
    return params.m2 * params.q * params.sigma / (params.q - params.m2)


def regime2_threshold(params: ModelParams) -> Number:
    """Dimension m1*m2*sigma/(m1 - m2) separating the two regimes (needs m2 < m1)."""
    if not params.m2 < params.m1:
        raise ValueError("regime-2 threshold only defined for m2 < m1")
    return params.m1 * params.m2 * params.sigma / (params.m1 - params.m2)


def classify_regime(params: ModelParams) -> RegimeClassification:
    n = params.n
    lower = regime1_threshold(params)
    above_lower = num_lt(lower, n)
    if num_le(params.m1, params.m2):
        if above_lower:
            return RegimeClassification(
                Regime.REGIME1, f"m1 <= m2 and n > m2*q*sigma/(q-m2) = {fmt(lower)}")
        return RegimeClassification(
            Regime.NOT_COVERED,
            f"n > m2*q*sigma/(q-m2) fails: n = {fmt(n)} <= {fmt(lower)}",
            boundary=num_eq(n, lower))

    upper = regime2_threshold(params)
    r1 = above_lower and num_le(n, upper)
    r2 = num_le(upper, n)
    boundary = num_eq(n, upper) or num_eq(n, lower)
    if r1 and r2:
        return RegimeClassification(
            Regime.BOTH, f"n = m1*m2*sigma/(m1-m2) = {fmt(upper)} and n > {fmt(lower)}", True)
    if r1:
        return RegimeClassification(
            Regime.REGIME1,
            f"m2 < m1 and {fmt(lower)} < n <= m1*m2*sigma/(m1-m2) = {fmt(upper)}", boundary)
    if r2:
        return RegimeClassification(
            Regime.REGIME2, f"m2 < m1 and n >= m1*m2*sigma/(m1-m2) = {fmt(upper)}", boundary)
    return RegimeClassification(
        Regime.NOT_COVERED,
        f"n > m2*q*sigma/(q-m2) fails: n = {fmt(n)} <= {fmt(lower)}; "
        f"n >= m1*m2*sigma/(m1-m2) fails: n = {fmt(n)} < {fmt(upper)}",
        boundary)


def _resolve(params: ModelParams, regime) -> Regime:
    if regime is None:
        regime = classify_regime(params).regime
    regime = Regime(regime)
    if not regime.covered:
        raise NotCoveredError(f"parameters not covered: {classify_regime(params).reason}")
    return regime


def p1_exponent(m2: Number, n: Number, sigma: Number) -> Number:
    """Critical exponent 1 + 2*m2*sigma/(n - m2*sigma) driven by the u1 data."""
    if not num_lt(m2 * sigma, n):
        raise ValueError(f"p1 undefined: n = {fmt(n)} <= m2*sigma = {fmt(m2 * sigma)}")
    return 1 + 2 * m2 * sigma / (n - m2 * sigma)


def p2_exponent(m1: Number, m2: Number, n: Number, sigma: Number) -> Number:
    """Critical exponent m1/m2 + m1*sigma/n driven by the u0 data."""
    return m1 / m2 + m1 * sigma / n


@dataclass(frozen=True)
class CriticalExponents:
    regime: Regime
    p1: Optional[Number] = None
    p2: Optional[Number] = None

    @property
    def value(self) -> Number:
        return self.p1 if self.p1 is not None else self.p2


def critical_exponent(params: ModelParams, regime=None) -> CriticalExponents:
    regime = _resolve(params, regime)
    p1 = p2 = None
    if regime in (Regime.REGIME1, Regime.BOTH):
        p1 = p1_exponent(params.m2, params.n, params.sigma)
    if regime in (Regime.REGIME2, Regime.BOTH):
        p2 = p2_exponent(params.m1, params.m2, params.n, params.sigma)
    if regime is Regime.BOTH and not num_eq(p1, p2):
        raise ArithmeticError(f"p1 = {fmt(p1)} and p2 = {fmt(p2)} disagree on the shared boundary")
    return CriticalExponents(regime, p1, p2)


@dataclass(frozen=True)
class AdmissiblePRange:
    lower: Number
    lower_inclusive: bool
    upper: Number
    upper_inclusive: bool
    empty: bool
    reason: str = ""

    def contains(self, p: Number) -> bool:
        if self.empty:
            return False
        lo_ok = num_le(self.lower, p) if self.lower_inclusive else num_lt(self.lower, p)
        if math.isinf(self.upper):
            return lo_ok
        hi_ok = num_le(p, self.upper) if self.upper_inclusive else num_lt(p, self.upper)
        return lo_ok and hi_ok

    def __str__(self) -> str:
        if self.empty:
            return "empty"
        left = "[" if self.lower_inclusive else "("
        right = "]" if self.upper_inclusive and not math.isinf(self.upper) else ")"
        return f"{left}{fmt(self.lower)}, {fmt(self.upper)}{right}"

    def to_dict(self) -> dict:
        return {
            "lower": to_json_number(self.lower),
            "lower_inclusive": self.lower_inclusive,
            "upper": to_json_number(self.upper),
            "upper_inclusive": self.upper_inclusive,
            "empty": self.empty,
            "interval": str(self),
            "reason": self.reason,
        }


def gn_p_bounds(params: ModelParams) -> AdmissiblePRange:
    """Bounds on p needed by the Gagliardo-Nirenberg step."""
    n, q, s = params.n, params.q, params.sigma
    lower = q / params.m2
    n_max = q * q * s / (q - params.m2)
    if num_lt(q * s, n) and num_le(n, n_max):
        upper = n / (n - q * s)
        return AdmissiblePRange(lower, True, upper, True, num_lt(upper, lower),
                                f"q*sigma < n <= q^2*sigma/(q-m2) = {fmt(n_max)}")
    if num_le(n, q * s):
        return AdmissiblePRange(lower, True, math.inf, False, False, "1 <= n <= q*sigma")
    return AdmissiblePRange(lower, True, math.inf, False, True,
                            f"n = {fmt(n)} > q^2*sigma/(q-m2) = {fmt(n_max)}: no GN range")


def admissible_p_range(params: ModelParams) -> AdmissiblePRange:
    """GN bounds intersected with the open half-line above the critical exponent."""
    cls = classify_regime(params)
    if not cls.regime.covered:
        raise NotCoveredError(f"parameters not covered: {cls.reason}")
    gn = gn_p_bounds(params)
    if gn.empty:
        return gn
    pc = critical_exponent(params, cls.regime).value
    if num_le(gn.lower, pc):
        lower, lower_inc = pc, False
    else:
        lower, lower_inc = gn.lower, True
    if math.isinf(gn.upper):
        empty = False
    elif lower_inc and gn.upper_inclusive:
        empty = num_lt(gn.upper, lower)
    else:
        empty = num_le(gn.upper, lower)
    reason = f"{cls.regime.value}: p > p_c = {fmt(pc)}; GN {gn}"
    if empty:
        reason = f"p_c = {fmt(pc)} conflicts with GN upper bound {fmt(gn.upper)}"
    return AdmissiblePRange(lower, lower_inc, gn.upper, gn.upper_inclusive, empty, reason)


@dataclass(frozen=True)
class DecayRates:
    """Exponents of (1+t) bounding ||u||_q and ||((-Delta)^{sigma/2}u, u_t)||_q."""
    rate_u: Number
    rate_grad: Number


def _low_freq_gain(params: ModelParams, m: Number) -> Number:
    return params.n / params.sigma * (1 / m - 1 / params.q)


def decay_rates(params: ModelParams, regime=None) -> DecayRates:
    regime = _resolve(params, regime)
    cand = []
    if regime in (Regime.REGIME1, Regime.BOTH):
        g = _low_freq_gain(params, params.m2)
        cand.append(DecayRates(1 - g, -g))
    if regime in (Regime.REGIME2, Regime.BOTH):
        g = _low_freq_gain(params, params.m1)
        cand.append(DecayRates(-g, -g - 1))
    if len(cand) == 2:
        a, b = cand
        if not (num_eq(a.rate_u, b.rate_u) and num_eq(a.rate_grad, b.rate_grad)):
            raise ArithmeticError(f"regime rates disagree on the shared boundary: {a} vs {b}")
    return cand[0]


def linear_decay_rates(params: ModelParams, u0: bool = True, u1: bool = True) -> DecayRates:
    """Rates of the linear flow from the per-datum (L^m ∩ L^q)-L^q estimates.

    ``u0`` / ``u1`` select which Cauchy datum is nonzero; the slower term wins.
    Unlike :func:`decay_rates` this needs no regime condition.
    """
    if not (u0 or u1):
        raise ValueError("at least one datum must be active")
    rates = []
    if u0:
        g = _low_freq_gain(params, params.m1)
        rates.append((-g, -g - 1))
    if u1:
        g = _low_freq_gain(params, params.m2)
        rates.append((1 - g, -g))
    return DecayRates(max(r[0] for r in rates), max(r[1] for r in rates))


def solution_norm_weights(params: ModelParams, regime=None) -> tuple:
    """Time weights (w_u, w_grad) of the solution-space norm; the negated decay rates."""
    rates = decay_rates(params, regime)
    w_u, w_grad = -rates.rate_u, -rates.rate_grad
    assert num_eq(w_grad - w_u, 1)
    return w_u, w_grad


@dataclass(frozen=True)
class GNParams:
    s: Number
    sigma: Number
    q1: Number
    q2: Number
    n: Number
    theta: Number
    valid: bool


def gn_theta(s, sigma, q1, q2, n) -> GNParams:
    """Interpolation weight of the fractional Gagliardo-Nirenberg inequality."""
    s, sigma, q1, q2, n = (as_number(v) for v in (s, sigma, q1, q2, n))
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {fmt(sigma)}")
    if not (0 <= s < sigma):
        raise ValueError(f"s must lie in [0, sigma), got {fmt(s)}")
    for name, v in (("q1", q1), ("q2", q2)):
        if not (1 < v < math.inf):
            raise ValueError(f"{name} must lie in (1, inf), got {fmt(v)}")
    if not n > 0:
        raise ValueError(f"n must be > 0, got {fmt(n)}")
    theta = n / sigma * (1 / q2 - 1 / q1 + s / n)
    valid = num_le(s / sigma, theta) and num_le(theta, 1)
    return GNParams(s, sigma, q1, q2, n, theta, valid)


class Branch(str, enum.Enum):
    MIN_DECAY = "MinDecay"
    MIN_DECAY_LOG = "MinDecayLog"
    GROWTH = "Growth"


@dataclass(frozen=True)
class IntegralBranch:
    branch: Branch
    exponent: Number
    log_factor: bool


def integral_branch(a, b) -> IntegralBranch:
    """Growth/decay order of int_0^t (1+t-s)^-a (1+s)^-b ds for large t."""
    a, b = as_number(a), as_number(b)
    top = max(a, b)
    if num_eq(top, 1):
        return IntegralBranch(Branch.MIN_DECAY_LOG, -min(a, b), True)
    if top > 1:
        return IntegralBranch(Branch.MIN_DECAY, -min(a, b), False)
    return IntegralBranch(Branch.GROWTH, 1 - a - b, False)


# Worked example: sigma = 1, q = 2. Each bullet is a region of (m1, m2) and the
# p-interval claimed on it, written as functions of (m1, m2).
@dataclass(frozen=True)
class ExampleBullet:
    label: str
    n: int
    region: str
    regime: Regime
    range_text: str
    member: object
    claimed: object


def _b(lo, lo_inc, hi, hi_inc):
    return (lo, lo_inc, hi, hi_inc)


EXAMPLE_BULLETS = (
    ExampleBullet(
        "n=2 (a)", 2, "1 <= m1 <= m2 < 4/3", Regime.REGIME1, "(1+2m2/(2-m2), inf)",
        lambda m1, m2: 1 <= m1 <= m2 < Fraction(4, 3),
        lambda m1, m2: _b(1 + 2 * m2 / (2 - m2), False, math.inf, False)),
    ExampleBullet(
        "n=2 (b)", 2, "m1 in [1,2), 1 <= m2 < min(4/3, m1)", Regime.REGIME1,
        "(1+2m2/(2-m2), inf)",
        lambda m1, m2: 1 <= m1 < 2 and 1 <= m2 < min(Fraction(4, 3), m1),
        lambda m1, m2: _b(1 + 2 * m2 / (2 - m2), False, math.inf, False)),
    ExampleBullet(
        "n=3 (a)", 3, "1 <= m1 <= m2 < 6/5", Regime.REGIME1, "(1+2m2/(3-m2), inf)",
        lambda m1, m2: 1 <= m1 <= m2 < Fraction(6, 5),
        lambda m1, m2: _b(1 + 2 * m2 / (3 - m2), False, math.inf, False)),
    ExampleBullet(
        "n=3 (b)", 3, "m1 in [1,3/2], 1 <= m2 < min(m1, 6/5)", Regime.REGIME1,
        "(1+2m2/(3-m2), 3]",
        lambda m1, m2: 1 <= m1 <= Fraction(3, 2) and 1 <= m2 < min(m1, Fraction(6, 5)),
        lambda m1, m2: _b(1 + 2 * m2 / (3 - m2), False, Fraction(3), True)),
    ExampleBullet(
        "n=3 (c)", 3, "m1 in [3/2,2), 3m1/(3+m1) <= m2 < min(m1, 6/5)", Regime.REGIME1,
        "(1+2m2/(3-m2), 3]",
        lambda m1, m2: Fraction(3, 2) <= m1 < 2 and 3 * m1 / (3 + m1) <= m2 < min(m1, Fraction(6, 5)),
        lambda m1, m2: _b(1 + 2 * m2 / (3 - m2), False, Fraction(3), True)),
    ExampleBullet(
        "n=3 (d)", 3, "m1 in [3/2,2), 1 <= m2 <= 3m1/(3+m1)", Regime.REGIME2,
        "(m1/m2+m1/3, 3]",
        lambda m1, m2: Fraction(3, 2) <= m1 < 2 and 1 <= m2 <= 3 * m1 / (3 + m1),
        lambda m1, m2: _b(m1 / m2 + m1 / 3, False, Fraction(3), True)),
)


def example_sample_points(bullet: ExampleBullet, denominator: int = 30) -> list:
    """Exact rational (m1, m2) pairs inside a bullet's region, including the
    curved edge m2 = 3*m1/(3+m1)."""
    grid = [Fraction(k, denominator) for k in range(denominator, 2 * denominator)]
    cands = {(a, b) for a in grid for b in grid}
    cands |= {(a, 3 * a / (3 + a)) for a in grid}
    return sorted(pt for pt in cands if bullet.member(*pt))


@dataclass(frozen=True)
class ExampleCheck:
    bullet: ExampleBullet
    points: int
    agree: int
    mismatch: Optional[str]

    @property
    def ok(self) -> bool:
        return self.points > 0 and self.agree == self.points


def check_example_bullet(bullet: ExampleBullet, denominator: int = 30) -> ExampleCheck:
    """Evaluate the engine on every sample point of a bullet and compare exactly."""
    pts = example_sample_points(bullet, denominator)
    agree, mismatch = 0, None
    for m1, m2 in pts:
        params = ModelParams(bullet.n, 1, 2, m1, m2)
        cls = classify_regime(params)
        ok_regime = cls.regime in (bullet.regime, Regime.BOTH)
        if not cls.regime.covered:
            got = f"NotCovered ({cls.reason})"
            ok = False
        else:
            rng = admissible_p_range(params)
            got = f"{cls.regime.value} {rng}"
            want = bullet.claimed(m1, m2)
            ok = ok_regime and not rng.empty and \
                (rng.lower, rng.lower_inclusive, rng.upper, rng.upper_inclusive) == want
        if ok:
            agree += 1
        elif mismatch is None:
            mismatch = f"m1={fmt(m1)}, m2={fmt(m2)}: engine gives {got}"
    return ExampleCheck(bullet, len(pts), agree, mismatch)


def example_table(denominator: int = 30) -> list:
    return [check_example_bullet(b, denominator) for b in EXAMPLE_BULLETS]
