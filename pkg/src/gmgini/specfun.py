"""Scalar special functions used by the Gini formulas and the EM fitter.

``ln_gamma``, ``digamma`` and ``trigamma`` delegate to :mod:`scipy.special`;
the incomplete gamma/beta functions, the Gauss hypergeometric series and the
digamma inverse are implemented here so that their regimes and stopping rules
are explicit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sc

__all__ = [
    "ConvergenceError",
    "DomainError",
    "SeriesControl",
    "DEFAULT_CONTROL",
    "ln_gamma",
    "digamma",
    "trigamma",
    "inv_digamma",
    "ln_beta",
    "reg_inc_gamma_lower",
    "reg_inc_beta",
    "hyp2f1",
    "ln_multinomial",
]

EULER_GAMMA = 0.57721566490153286061
_TINY = 1e-300


class DomainError(ValueError):
    """Argument outside the domain of a function."""


class ConvergenceError(ArithmeticError):
    """An iterative evaluation exhausted its budget."""


@dataclass(frozen=True)
class SeriesControl:
    """Tolerances and iteration budget shared by series, continued fractions
    and root finders."""

    rel_tol: float = 1e-12
    abs_tol: float = 1e-300
    max_terms: int = 20000

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise DomainError(f"rel_tol must be > 0, got {self.rel_tol}")
        if not self.abs_tol >= 0:
            raise DomainError(f"abs_tol must be >= 0, got {self.abs_tol}")
        if int(self.max_terms) != self.max_terms or self.max_terms < 1:
            raise DomainError(f"max_terms must be a positive integer, got {self.max_terms}")


DEFAULT_CONTROL = SeriesControl()


def _positive(name, x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError(f"{name} requires finite positive arguments, got {x!r}")
    return arr


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def ln_gamma(x):
    """Natural log of the gamma function for ``x > 0`` (scalar or array)."""
    return _out(sc.gammaln(_positive("ln_gamma", x)))


def digamma(x):
    """Logarithmic derivative of the gamma function for ``x > 0``."""
    return _out(sc.digamma(_positive("digamma", x)))


def trigamma(x):
    """Derivative of :func:`digamma` for ``x > 0``."""
    return _out(sc.polygamma(1, _positive("trigamma", x)))


def _inv_digamma_guess(y):
    y = np.asarray(y, dtype=float)
    with np.errstate(over="ignore", divide="ignore"):
        return np.where(y >= -2.22, np.exp(y) + 0.5, -1.0 / (y + EULER_GAMMA))


def _trigamma_fast(x):
    """Trigamma by a fixed ten-step upward recurrence plus the asymptotic series.

    Relative error below 1e-12; used for Newton steps where the Hurwitz zeta
    route in scipy is needlessly slow.
    """
    x = np.asarray(x, dtype=float)
    acc = np.zeros_like(x)
    for j in range(10):
        acc += 1.0 / ((x + j) * (x + j))
    x = x + 10.0
    t = 1.0 / (x * x)
    series = (
        1.0
        + t * (1.0 / 6.0 - t * (1.0 / 30.0 - t * (1.0 / 42.0 - t * (1.0 / 30.0 - t * 5.0 / 66.0))))
    ) / x + 0.5 * t
    return acc + series


def inv_digamma_array(y, rel_tol=1e-12, max_iter=100, x0=None):
    """Vectorized inverse of the digamma function.

    Each element runs its own Newton iteration and stops independently, so the
    value computed for one element never depends on the other elements of the
    batch. ``x0`` optionally replaces the asymptotic starting guess. Returns
    ``(x, ok)`` where ``ok`` flags converged elements.
    """
    y = np.asarray(y, dtype=float)
    shape = y.shape
    y = y.reshape(-1)
    if x0 is None:
        x = _inv_digamma_guess(y)
    else:
        x = np.array(x0, dtype=float).reshape(-1)
    scale = np.maximum(1.0, np.abs(y))
    active = np.isfinite(y) & np.isfinite(x)
    ok = np.zeros(y.shape, dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        xa = x[active]
        resid = sc.digamma(xa) - y[active]
        done = np.abs(resid) <= rel_tol * scale[active]
        step = resid / _trigamma_fast(xa)
        new = xa - step
        # Newton can overshoot below zero for tiny x; halve instead.
        new = np.where(new > 0, new, 0.5 * xa)
        new = np.where(done, xa, new)
        x[active] = new
        idx = np.flatnonzero(active)
        ok[idx[done]] = True
        active[idx[done]] = False
    return x.reshape(shape), ok.reshape(shape)


def inv_digamma(y, ctl=DEFAULT_CONTROL):
    """Solve ``digamma(x) == y`` for ``x > 0``.

    Starts from the piecewise asymptotic guess and refines with Newton steps
    using :func:`trigamma`. Raises :class:`ConvergenceError` if
    ``|digamma(x) - y| <= ctl.rel_tol * max(1, |y|)`` is not reached within
    ``ctl.max_terms`` iterations.
    """
    y = float(y)
    if not math.isfinite(y):
        raise DomainError(f"inv_digamma requires a finite argument, got {y}")
    x, ok = inv_digamma_array(np.array([y]), ctl.rel_tol, ctl.max_terms)
    if not ok[0]:
        raise ConvergenceError(f"inv_digamma({y}) did not converge in {ctl.max_terms} steps")
    return float(x[0])


def ln_beta(a, b):
    """``ln B(a, b)`` for positive ``a`` and ``b``."""
    a = _positive("ln_beta", a)
    b = _positive("ln_beta", b)
    return _out(sc.gammaln(a) + sc.gammaln(b) - sc.gammaln(a + b))


def _check_ctl(ctl):
    if not isinstance(ctl, SeriesControl):
        raise TypeError(f"expected SeriesControl, got {type(ctl).__name__}")


def reg_inc_gamma_lower(a, x, ctl=DEFAULT_CONTROL):
    """Regularized lower incomplete gamma function ``P(a, x)``.

    Power series for ``x < a + 1``, Lentz continued fraction for the upper
    tail otherwise.
    """
    _check_ctl(ctl)
    a = float(a)
    x = float(x)
    if not (math.isfinite(a) and a > 0):
        raise DomainError(f"reg_inc_gamma_lower requires a > 0, got {a}")
    if math.isnan(x) or x < 0:
        raise DomainError(f"reg_inc_gamma_lower requires x >= 0, got {x}")
    if x == 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    log_front = a * math.log(x) - x - math.lgamma(a)
    if x < a + 1:
        term = 1.0 / a
        total = term
        ap = a
        for _ in range(ctl.max_terms):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) <= ctl.rel_tol * abs(total) * 1e-2:
                return min(1.0, total * math.exp(log_front))
        raise ConvergenceError(f"series for P({a}, {x}) did not converge")
    # Modified Lentz for Q(a, x).
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, ctl.max_terms + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) <= ctl.rel_tol * 1e-2:
            q = math.exp(log_front) * h
            return max(0.0, 1.0 - q)
    raise ConvergenceError(f"continued fraction for P({a}, {x}) did not converge")


def _betacf(a, b, z, ctl):
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * z / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, ctl.max_terms + 1):
        m2 = 2 * m
        aa = m * (b - m) * z / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * z / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) <= ctl.rel_tol * 1e-2:
            return h
    raise ConvergenceError(f"continued fraction for I_{z}({a}, {b}) did not converge")


def reg_inc_beta(z, a, b, ctl=DEFAULT_CONTROL):
    """Regularized incomplete beta function ``I_z(a, b)``.

    Continued fraction, evaluated directly for ``z < (a+1)/(a+b+2)`` and via
    the reflection ``1 - I_{1-z}(b, a)`` otherwise.
    """
    _check_ctl(ctl)
    z = float(z)
    a = float(a)
    b = float(b)
    if not (math.isfinite(a) and a > 0 and math.isfinite(b) and b > 0):
        raise DomainError(f"reg_inc_beta requires a, b > 0, got a={a}, b={b}")
    if not 0.0 <= z <= 1.0:
        raise DomainError(f"reg_inc_beta requires 0 <= z <= 1, got {z}")
    if z == 0.0:
        return 0.0
    if z == 1.0:
        return 1.0
    lbeta = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    log_front = a * math.log(z) + b * math.log1p(-z) - lbeta
    if z < (a + 1.0) / (a + b + 2.0):
        val = math.exp(log_front) * _betacf(a, b, z, ctl) / a
    else:
        val = 1.0 - math.exp(log_front) * _betacf(b, a, 1.0 - z, ctl) / b
    return min(1.0, max(0.0, val))


def _nonpositive_integer(v, tol=1e-12):
    r = round(v)
    return r <= 0 and abs(v - r) <= tol


def _gamma_ratio_sign(x):
    """Return (log|Gamma(x)|, sign) with sign 0 at the poles."""
    if _nonpositive_integer(x, 0.0):
        return 0.0, 0
    if x > 0:
        return math.lgamma(x), 1
    return math.lgamma(x), 1 if math.floor(x) % 2 == 0 else -1


def _gauss_sum(a, b, c):
    # Gamma(c) Gamma(c-a-b) / (Gamma(c-a) Gamma(c-b)), c-a-b > 0, c > 0.
    num1, s1 = _gamma_ratio_sign(c)
    num2, s2 = _gamma_ratio_sign(c - a - b)
    den1, t1 = _gamma_ratio_sign(c - a)
    den2, t2 = _gamma_ratio_sign(c - b)
    if t1 == 0 or t2 == 0:
        return 0.0
    return s1 * s2 * t1 * t2 * math.exp(num1 + num2 - den1 - den2)


def _series_direct(a, b, c, z, ctl, n_stop=None, magnitude=None):
    term = 1.0
    total = 1.0
    comp = 0.0
    abs_sum = 1.0
    limit = ctl.max_terms if n_stop is None else n_stop
    for k in range(limit):
        term *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z
        # Kahan summation keeps mildly alternating prefixes accurate.
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
        abs_sum += abs(term)
        if n_stop is None and term == 0.0:
            return total
        if n_stop is None and k + 1 > max(abs(a), abs(b)) + 1:
            ratio = abs((a + k + 1) * (b + k + 1) / ((c + k + 1) * (k + 2.0)) * z)
            tail = abs(term) * ratio / (1.0 - ratio) if ratio < 1 else math.inf
            if tail <= ctl.rel_tol * 1e-2 * abs(total) + ctl.abs_tol:
                return total
    if n_stop is not None:
        if magnitude is not None:
            magnitude.append(abs_sum)
        return total
    raise ConvergenceError(f"hyp2f1({a}, {b}; {c}; {z}) series did not converge")


def _log_series_positive(a, b, c, z, ctl):
    """log of the Gauss series when every term is positive (a, b, c > 0).

    Terms are carried relative to a running scale factor so that series whose
    terms climb far above 1 before decaying cannot overflow.
    """
    log_scale = 0.0
    term = 1.0
    acc = 1.0
    for k in range(ctl.max_terms):
        term *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z
        acc += term
        if acc > 1e200:
            log_scale += math.log(acc)
            term /= acc
            acc = 1.0
        ratio = (a + k + 1) * (b + k + 1) / ((c + k + 1) * (k + 2.0)) * z
        if ratio < 1:
            tail = term * ratio / (1.0 - ratio)
            if tail <= ctl.rel_tol * 1e-2 * acc:
                return log_scale + math.log(acc)
    raise ConvergenceError(f"hyp2f1({a}, {b}; {c}; {z}) series did not converge")


def hyp2f1(a, b, c, z, ctl=DEFAULT_CONTROL):
    """Gauss hypergeometric function ``2F1(a, b; c; z)`` for ``0 <= z <= 1``.

    * ``z == 1`` uses Gauss's summation theorem (requires ``c - a - b > 0``).
    * A non-positive integer ``a`` or ``b`` gives a terminating polynomial.
    * When the direct series alternates (``a`` or ``b`` negative) but the
      Euler-transformed parameters ``c - a`` and ``c - b`` are positive, the
      transformed all-positive series is summed instead; this avoids the
      cancellation of the direct series at large shapes.
    * Otherwise the direct power series.
    """
    _check_ctl(ctl)
    a, b, c, z = float(a), float(b), float(c), float(z)
    for name, v in (("a", a), ("b", b), ("c", c), ("z", z)):
        if not math.isfinite(v):
            raise DomainError(f"hyp2f1 requires finite {name}, got {v}")
    if not c > 0:
        raise DomainError(f"hyp2f1 requires c > 0, got {c}")
    if not 0.0 <= z <= 1.0:
        raise DomainError(f"hyp2f1 requires 0 <= z <= 1, got {z}")
    if z == 0.0:
        return 1.0
    terminating = [round(v) for v in (a, b) if _nonpositive_integer(v)]
    if z == 1.0:
        if not c - a - b > 0:
            raise DomainError(
                f"hyp2f1 diverges at z=1 unless c - a - b > 0 (got {c - a - b})"
            )
        return _gauss_sum(a, b, c)
    euler_ok = (a < 0 or b < 0) and c - a > 0 and c - b > 0
    if terminating:
        magnitude = []
        val = _series_direct(a, b, c, z, ctl, n_stop=-max(terminating), magnitude=magnitude)
        # Fall back when the polynomial cancels away more than ~4 digits.
        if not euler_ok or magnitude[0] <= 1e4 * abs(val):
            return val
    if euler_ok:
        log_val = (c - a - b) * math.log1p(-z) + _log_series_positive(c - a, c - b, c, z, ctl)
        return math.exp(log_val)
    if a > 0 and b > 0:
        return math.exp(_log_series_positive(a, b, c, z, ctl))
    return _series_direct(a, b, c, z, ctl)


def ln_multinomial(k):
    """``ln[(sum k)! / prod(k_i!)]`` for a vector of non-negative integers."""
    k = np.asarray(k)
    if k.ndim != 1:
        raise DomainError("ln_multinomial expects a 1-d vector of counts")
    if k.size and (np.any(k < 0) or np.any(k != np.round(k))):
        raise DomainError(f"ln_multinomial requires non-negative integers, got {k.tolist()}")
    k = k.astype(float)
    return float(sc.gammaln(k.sum() + 1.0) - sc.gammaln(k + 1.0).sum())
