"""Levy tail functions of driftless subordinators near zero.

A driftless subordinator is determined by its Levy measure ``Pi`` on
``(0, inf)``, summarised here through the tail function

    tail(x) = Pi((x, inf)),   x > 0,

which is nonincreasing, right-continuous and finite for every ``x > 0``.
All families in this module factor as ``tail(x) = x**-alpha * L(x)`` with
tail index ``alpha in [0, 1)`` and a factor ``L`` that varies slowly at 0,
so that small jumps dominate and the process is a.s. finite.  The index
``alpha == 1`` is admitted only as a jump-law helper (reciprocal tail);
its small jumps are not summable and mean-type operations reject it.

Four families are provided:

``Constant``         ``c * x**-alpha`` (exact power law, ``c > 0``)
``StableExact``      ``x**-alpha`` (the ``c == 1`` power law)
``LogPower``         ``x**-alpha * log(1/x)**p`` on ``(0, 1)``, zero beyond
``RationalPerturb``  ``x**-alpha / (1 + x)``

``LogPower`` with ``alpha == 0`` is the only admissible zero-index family
here: its slowly varying factor is nonincreasing and blows up at 0+, which
a zero-index tail must do to keep infinitely many small jumps.

Everything is vectorised: ``x`` / ``u`` arguments may be floats or numpy
arrays, and scalar input yields scalar output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "TailFunction",
    "Constant",
    "StableExact",
    "LogPower",
    "RationalPerturb",
    "constant_tail",
    "stable_tail",
    "log_power_tail",
    "rational_tail",
    "cauchy_tail",
    "parse_tail",
    "tail_eval",
    "tail_eval_from_log",
    "tail_inverse",
    "tail_inverse_log",
    "small_jump_mean",
    "log_small_jump_mean",
]

# Bisection contract: bracket floor, iteration cap, relative tolerance.
_BRACKET_FLOOR = 2.0 ** -80
_BISECT_ITERS = 200
_BISECT_RTOL = 2.0 ** -40


@dataclass(frozen=True)
class Constant:
    """Slowly varying factor that is a positive constant ``c``."""

    c: float


@dataclass(frozen=True)
class StableExact:
    """Unit constant factor: the tail is exactly ``x**-alpha``."""


@dataclass(frozen=True)
class LogPower:
    """Factor ``log(1/x)**p`` on (0, 1), ``p > 0``; tail vanishes at 1."""

    p: float


@dataclass(frozen=True)
class RationalPerturb:
    """Factor ``1 / (1 + x)``: algebraic perturbation of a pure power."""


_FACTORS = (Constant, StableExact, LogPower, RationalPerturb)


@dataclass(frozen=True)
class TailFunction:
    """Tail of a Levy measure, ``tail(x) = x**-alpha * L(x)``.

    Parameters
    ----------
    alpha : float
        Tail index in ``[0, 1)``.  ``alpha == 1`` is allowed only for the
        ``Constant``/``StableExact`` factors, as a jump-law helper whose
        small jumps are not summable.
    factor : Constant | StableExact | LogPower | RationalPerturb
        The slowly varying factor ``L``.
    support_cap : float
        Smallest ``x`` with ``tail(x) == 0``; ``inf`` for full support.
        Forced to 1 for ``LogPower`` and ``inf`` otherwise.

    Notes
    -----
    Validation happens at construction: the index range, the zero-index
    admissibility rule (only ``LogPower`` has ``L`` nonincreasing with
    ``L(0+) = inf``), and the factor-specific parameter constraints.
    Every admitted combination has summable small jumps once ``alpha < 1``.
    """

    alpha: float
    factor: Constant | StableExact | LogPower | RationalPerturb
    support_cap: float

    def __post_init__(self):
        a = self.alpha
        if not isinstance(self.factor, _FACTORS):
            raise TypeError(f"unknown slowly varying factor: {self.factor!r}")
        if not (0.0 <= a < 1.0 or a == 1.0):
            raise ValueError(f"tail index must lie in [0, 1) (or ==1 helper), got {a}")
        if a == 1.0 and not isinstance(self.factor, (Constant, StableExact)):
            raise ValueError("index-1 helper tails must be pure power laws")
        if a == 0.0 and not isinstance(self.factor, LogPower):
            raise ValueError(
                "zero-index tails need a nonincreasing factor with L(0+) = inf; "
                "only the log-power family qualifies here"
            )
        if isinstance(self.factor, Constant) and not self.factor.c > 0.0:
            raise ValueError(f"constant factor must be positive, got {self.factor.c}")
        if isinstance(self.factor, LogPower):
            if not self.factor.p > 0.0:
                raise ValueError(f"log-power exponent must be positive, got {self.factor.p}")
            if self.support_cap != 1.0:
                raise ValueError("log-power tails vanish at 1; support_cap must be 1")
        elif self.support_cap != math.inf:
            raise ValueError("full-support tails must have support_cap == inf")
        # Small jumps are summable for every admitted combination: each
        # factor is integrable against x**-alpha near 0 once alpha < 1, so
        # no runtime probe is needed (is_summable reads the index alone).

    @property
    def is_summable(self) -> bool:
        """True when small jumps have finite mean mass (``alpha < 1``)."""
        return self.alpha < 1.0

    def __str__(self):
        f = self.factor
        if isinstance(f, StableExact):
            return "cauchy" if self.alpha == 1.0 else f"stable({self.alpha:g})"
        if isinstance(f, Constant):
            return f"const({f.c:g},{self.alpha:g})"
        if isinstance(f, LogPower):
            return "log" if (self.alpha == 0.0 and f.p == 1.0) else f"logpow({f.p:g})"
        return f"rational({self.alpha:g})"


def constant_tail(c: float, alpha: float) -> TailFunction:
    """Tail ``c * x**-alpha`` with positive constant ``c``."""
    return TailFunction(alpha=float(alpha), factor=Constant(float(c)), support_cap=math.inf)


def stable_tail(alpha: float) -> TailFunction:
    """Tail ``x**-alpha`` of the normalised stable subordinator."""
    return TailFunction(alpha=float(alpha), factor=StableExact(), support_cap=math.inf)


def log_power_tail(p: float = 1.0, alpha: float = 0.0) -> TailFunction:
    """Tail ``x**-alpha * log(1/x)**p`` on (0, 1); the zero-index workhorse."""
    return TailFunction(alpha=float(alpha), factor=LogPower(float(p)), support_cap=1.0)


def rational_tail(alpha: float) -> TailFunction:
    """Tail ``x**-alpha / (1 + x)``: slowly varying but not eventually constant."""
    return TailFunction(alpha=float(alpha), factor=RationalPerturb(), support_cap=math.inf)


def cauchy_tail() -> TailFunction:
    """Reciprocal tail ``1/x``: the index-1 jump-law helper."""
    return TailFunction(alpha=1.0, factor=StableExact(), support_cap=math.inf)


def parse_tail(text: str) -> TailFunction:
    """Parse a tail-family config string.

    Accepted forms: ``stable(A)``, ``rational(A)``, ``log``, ``logpow(P)``,
    ``cauchy``, ``const(C,A)``.  Whitespace-insensitive.

    >>> str(parse_tail("stable(0.5)"))
    'stable(0.5)'
    """
    s = "".join(text.split()).lower()
    if s == "log":
        return log_power_tail()
    if s == "cauchy":
        return cauchy_tail()
    name, sep, rest = s.partition("(")
    if not sep or not rest.endswith(")"):
        raise ValueError(f"unparseable tail spec: {text!r}")
    args = rest[:-1].split(",")
    try:
        vals = [float(a) for a in args]
    except ValueError:
        raise ValueError(f"non-numeric argument in tail spec: {text!r}") from None
    if name == "stable" and len(vals) == 1:
        return stable_tail(vals[0])
    if name == "rational" and len(vals) == 1:
        return rational_tail(vals[0])
    if name == "logpow" and len(vals) == 1:
        return log_power_tail(p=vals[0])
    if name == "const" and len(vals) == 2:
        return constant_tail(vals[0], vals[1])
    raise ValueError(f"unknown tail family or arity: {text!r}")


def _validated(x, name: str):
    arr = np.asarray(x, dtype=float)
    if arr.size and (np.any(~np.isfinite(arr) & ~np.isposinf(arr)) or np.any(arr <= 0.0)):
        raise ValueError(f"{name} must be positive and not NaN")
    return arr


def _maybe_scalar(arr, like):
    return float(arr) if np.isscalar(like) or np.ndim(like) == 0 else arr


def tail_eval(tail: TailFunction, x) -> float | np.ndarray:
    """Evaluate ``tail(x) = x**-alpha * L(x)`` elementwise.

    ``x`` must be positive (``inf`` allowed, giving 0); values at or beyond
    ``support_cap`` give 0 exactly.
    """
    arr = _validated(x, "x")
    with np.errstate(divide="ignore", over="ignore"):
        out = _eval_from_log(tail, np.log(arr))
    return _maybe_scalar(out, x)


def tail_eval_from_log(tail: TailFunction, log_x) -> float | np.ndarray:
    """Evaluate the tail at ``x = exp(log_x)`` without forming ``x``.

    The log-domain entry point: ``log_x`` may lie far below the smallest
    positive double.  For ``LogPower`` the value ``(-log_x)**p`` (times the
    power factor) is computed directly from the exponent, which keeps the
    deep small-jump regime exact.
    """
    arr = np.asarray(log_x, dtype=float)
    if arr.size and np.any(np.isnan(arr)):
        raise ValueError("log_x must not be NaN")
    with np.errstate(over="ignore"):
        out = _eval_from_log(tail, arr)
    return _maybe_scalar(out, log_x)


def _eval_from_log(tail: TailFunction, log_x: np.ndarray) -> np.ndarray:
    a, f = tail.alpha, tail.factor
    power = np.exp(-a * log_x) if a > 0.0 else np.ones_like(log_x)
    if isinstance(f, (Constant, StableExact)):
        c = f.c if isinstance(f, Constant) else 1.0
        return c * power
    if isinstance(f, LogPower):
        vals = power * np.maximum(-log_x, 0.0) ** f.p
        return np.where(log_x < 0.0, vals, 0.0)
    # RationalPerturb
    return power / (1.0 + np.exp(log_x))


def tail_inverse(tail: TailFunction, u) -> float | np.ndarray:
    """Generalised inverse ``inf{y > 0 : tail(y) <= u}`` elementwise.

    Thin wrapper over :func:`tail_inverse_log`; the composition guarantee
    ``tail_eval_from_log(tail, tail_inverse_log(tail, u)) <= u`` holds in
    the log domain by construction, and the exponentiated value here is
    within one rounding step of it.  For very large ``u`` the result may
    underflow to 0.0; use the log-domain form in that regime.
    """
    out = np.exp(tail_inverse_log(tail, u))
    return _maybe_scalar(out, u)


def tail_inverse_log(tail: TailFunction, u) -> float | np.ndarray:
    """Log of the generalised inverse: ``log inf{y : tail(y) <= u}``.

    Exact in the exponent for the closed-form families; in particular the
    unit log-power tail gives ``-u`` exactly, so arbitrarily large rate
    arguments stay representable.  All branches guarantee
    ``tail_eval_from_log(tail, result) <= u``: the bisection keeps the
    safe bracket end, the rational family's Newton iteration starts and
    stays on the safe side of the root, and closed or iterated forms are
    nudged up by an ulp when the recomposition overshoots (never triggered
    where the round trip is exact, so the unit log-power identity is
    untouched).
    """
    arr = _validated(u, "u")
    a, f = tail.alpha, tail.factor
    if isinstance(f, (Constant, StableExact)):
        c = f.c if isinstance(f, Constant) else 1.0
        out = _nudge_inverse_log(tail, (math.log(c) - np.log(arr)) / a, arr)
    elif isinstance(f, LogPower) and a == 0.0:
        out = _nudge_inverse_log(tail, -(arr ** (1.0 / f.p)), arr)
    elif isinstance(f, RationalPerturb) and a > 0.0:
        out = _nudge_inverse_log(tail, _newton_inverse_log_rational(a, arr), arr)
    else:
        out = _bisect_inverse_log(tail, arr)
    return _maybe_scalar(out, u)


def _newton_inverse_log_rational(a: float, u: np.ndarray) -> np.ndarray:
    """Newton solve of ``-a*y - log1p(exp(y)) = log(u)`` for ``y``.

    The left side is strictly decreasing and concave in ``y``, so starting
    from the pure-power anchor ``y0 = -log(u)/a`` (where the tail is already
    <= u, the perturbation only shrinking it) every Newton iterate stays on
    the safe side of the root and the iteration converges quadratically.
    Unlike bisection this needs no finite bracket, so arbitrarily deep
    queries stay exact in the exponent.
    """
    tau = np.log(np.asarray(u, dtype=float))
    y = -tau / a
    for _ in range(_BISECT_ITERS):
        resid = -a * y - np.logaddexp(0.0, y) - tau
        z = np.exp(-np.abs(y))
        sigmoid = np.where(y >= 0.0, 1.0 / (1.0 + z), z / (1.0 + z))
        step = resid / (a + sigmoid)
        y = y + step
        if np.max(np.abs(step)) < math.log1p(_BISECT_RTOL):
            return y
    raise ArithmeticError("rational inverse iteration failed to converge")


def _nudge_inverse_log(tail: TailFunction, log_x, u) -> np.ndarray:
    """Round a computed log inverse up until the tail drops to <= u.

    The offset starts at one ulp and doubles while the recomposition still
    overshoots (a fixed one-ulp step can crawl: near ``log_x = 0`` one ulp
    of the abscissa moves the tail by less than one ulp of its value).  A
    result that already satisfies the bound is returned bitwise unchanged,
    so exact closed-form identities are never disturbed.
    """
    out = np.atleast_1d(np.asarray(log_x, dtype=float))
    u = np.broadcast_to(np.atleast_1d(u), out.shape)
    delta = np.zeros_like(out)
    for _ in range(_BISECT_ITERS):
        bad = _eval_from_log(tail, out + delta) > u
        if not np.any(bad):
            return (out + delta).reshape(np.shape(log_x))
        grown = np.maximum(2.0 * delta, np.maximum(np.spacing(np.abs(out)), 2.0**-60))
        delta = np.where(bad, grown, delta)
    raise ArithmeticError("inverse rounding guard failed to converge")


def _bisect_inverse_log(tail: TailFunction, u: np.ndarray) -> np.ndarray:
    """Vectorised bisection for the generalised inverse, on log abscissa."""
    u = np.atleast_1d(u).astype(float)
    lo = np.full(u.shape, math.log(_BRACKET_FLOOR))
    if np.any(_eval_from_log(tail, lo) < u):
        raise ValueError("inverse query below the supported bracket floor 2**-80")
    if math.isfinite(tail.support_cap):
        hi = np.full(u.shape, math.log(tail.support_cap))
    else:
        # Expand upward by doubling until the tail has dropped to <= u.
        hi = np.zeros(u.shape)
        for _ in range(64):
            need = _eval_from_log(tail, hi) > u
            if not np.any(need):
                break
            hi[need] += math.log(2.0)
        else:
            raise ValueError("failed to bracket inverse from above")
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        too_high = _eval_from_log(tail, mid) > u
        lo = np.where(too_high, mid, lo)
        hi = np.where(too_high, hi, mid)
        if np.max(hi - lo) < math.log1p(_BISECT_RTOL):
            break
    return hi


def small_jump_mean(tail: TailFunction, eps) -> float:
    """Mean jump mass below ``eps``: ``integral_(0, eps] x Pi(dx)``.

    Computed through the integration-by-parts identity

        integral_0^eps tail(x) dx  -  eps * tail(eps),

    closed-form where available, otherwise by adaptive Simpson quadrature
    on a log abscissa.  Requires ``alpha < 1`` (summable small jumps).
    """
    e = float(eps)
    if not (e > 0.0) or math.isnan(e):
        raise ValueError(f"eps must be positive, got {eps}")
    if not tail.is_summable:
        raise ValueError("small jumps are not summable for tail index >= 1")
    return _closed_small_jump_mean(tail, e)


def _closed_small_jump_mean(tail: TailFunction, e: float) -> float:
    a, f = tail.alpha, tail.factor
    e = min(e, tail.support_cap)
    if isinstance(f, (Constant, StableExact)):
        c = f.c if isinstance(f, Constant) else 1.0
        if a == 0.0:
            return 0.0  # unreachable: zero-index constants are rejected
        return c * a / (1.0 - a) * e ** (1.0 - a)
    if isinstance(f, LogPower) and a == 0.0:
        # integral_0^e log(1/x)^p dx - e log(1/e)^p  ==  Gamma(p+1, log(1/e)),
        # upper incomplete, minus the boundary term.
        z = -math.log(e) if e < 1.0 else 0.0
        gam = math.gamma(f.p + 1.0)
        upper = gam * float(special.gammaincc(f.p + 1.0, z)) if z > 0.0 else gam
        boundary = e * z ** f.p if z > 0.0 else 0.0
        return upper - boundary
    if isinstance(f, RationalPerturb):
        # integral_0^e x**-a/(1+x) dx = e**(1-a)/(1-a) * 2F1(1, 1-a; 2-a; -e),
        # so the by-parts identity collapses to one hypergeometric call.
        c1 = 1.0 - a
        hyp = float(special.hyp2f1(1.0, c1, c1 + 1.0, -e))
        return e**c1 * (hyp / c1 - 1.0 / (1.0 + e))
    return _simpson_log_integral(tail, e) - e * float(tail_eval(tail, e))


def log_small_jump_mean(tail: TailFunction, log_eps: float) -> float:
    """``log small_jump_mean(tail, exp(log_eps))`` for arbitrarily deep levels.

    Used for series compensation where the level itself underflows.  Below
    ``log_eps < -40`` the slowly varying factor is frozen at its limit
    (relative error ``O(exp(log_eps))`` for the rational family, an
    incomplete-gamma tail expansion for log-powers — exact for ``p == 1``).
    """
    z = float(log_eps)
    if math.isnan(z):
        raise ValueError("log_eps must not be NaN")
    if not tail.is_summable:
        raise ValueError("small jumps are not summable for tail index >= 1")
    a, f = tail.alpha, tail.factor
    if isinstance(f, (Constant, StableExact)):
        c = f.c if isinstance(f, Constant) else 1.0
        return math.log(c * a / (1.0 - a)) + (1.0 - a) * min(z, math.log(tail.support_cap))
    if isinstance(f, LogPower) and a == 0.0:
        if z >= -50.0:
            return math.log(_closed_small_jump_mean(tail, math.exp(min(z, 0.0))))
        p, w = f.p, -z
        # Gamma(p+1, w) - e^-w w^p  ~  e^-w w^(p-1) p (1 + (p-1)/w + (p-1)(p-2)/w^2)
        series = 1.0 + (p - 1.0) / w + (p - 1.0) * (p - 2.0) / (w * w)
        return z + (p - 1.0) * math.log(w) + math.log(p * series)
    if z >= -40.0:
        return math.log(_closed_small_jump_mean(tail, math.exp(z)))
    return math.log(a / (1.0 - a)) + (1.0 - a) * z


def _simpson_log_integral(tail: TailFunction, e: float) -> float:
    """``integral_0^e tail(x) dx`` by adaptive Simpson on ``x = exp(s)``.

    The substitution gives ``integral exp(s) tail(exp(s)) ds`` with an
    integrand decaying like ``exp((1-alpha) s)`` as ``s -> -inf``, so a
    finite lower cut at relative depth ``120/(1-alpha)`` loses less than
    ``exp(-120)`` of the mass.
    """
    hi = math.log(min(e, tail.support_cap))
    lo = hi - 120.0 / (1.0 - tail.alpha)

    def g(s: float) -> float:
        return math.exp(s) * float(tail_eval_from_log(tail, s))

    def simpson(a: float, b: float, fa: float, fm: float, fb: float) -> float:
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a: float, b: float, fa: float, fm: float, fb: float, whole: float, tol: float, depth: int) -> float:
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = g(lm), g(rm)
        left = simpson(a, m, fa, flm, fm)
        right = simpson(m, b, fm, frm, fb)
        if depth <= 0 or abs(left + right - whole) <= tol:
            return left + right + (left + right - whole) / 15.0
        return recurse(a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + recurse(
            m, b, fm, frm, fb, right, tol / 2.0, depth - 1
        )

    fa, fb = g(lo), g(hi)
    fm = g(0.5 * (lo + hi))
    whole = simpson(lo, hi, fa, fm, fb)
    tol = 1e-12 * max(abs(whole), 1e-300)
    return recurse(lo, hi, fa, fm, fb, whole, tol, 48)
