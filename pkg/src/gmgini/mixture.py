"""Gamma mixtures with a shared rate parameter.

A population ``GM(weights, shapes, rate)`` has density
``sum_i w_i * Gamma(x; shape_i, rate)``. Besides density, CDF and sampling,
this module provides the two derived laws the Gini formulas are built on:
the length-biased companion (reweighted by ``x / E[X]``) and the law of
``X / (X + X*)``, which is a mixture of beta distributions.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import special as sc

from .specfun import DEFAULT_CONTROL, DomainError, reg_inc_beta, reg_inc_gamma_lower

__all__ = [
    "MixtureParams",
    "LengthBiasedParams",
    "validate",
    "pdf",
    "logpdf",
    "cdf",
    "mean",
    "sample",
    "make_rng",
    "length_biased",
    "ratio_cdf",
    "laplace_transform",
    "load_params",
    "dump_params",
    "read_data",
    "write_data",
]

WEIGHT_TOL = 1e-9
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True, eq=False)
class MixtureParams:
    """Parameters of a gamma mixture sharing one rate.

    Construction validates and renormalizes: weights must be positive and sum
    to one within ``1e-9`` (they are then rescaled to sum exactly to one),
    shapes and rate must be positive and finite. Equal or duplicated
    components are allowed.
    """

    weights: np.ndarray
    shapes: np.ndarray
    rate: float = 1.0

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        a = np.array(self.shapes, dtype=float).reshape(-1)
        try:
            r = float(self.rate)
        except (TypeError, ValueError):
            raise DomainError(f"rate must be a number, got {self.rate!r}") from None
        if w.size == 0:
            raise DomainError("a mixture needs at least one component")
        if w.size != a.size:
            raise DomainError(f"{w.size} weights but {a.size} shapes")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise DomainError(f"weights must be finite and positive, got {w.tolist()}")
        if not np.all(np.isfinite(a)) or np.any(a <= 0):
            raise DomainError(f"shapes must be finite and positive, got {a.tolist()}")
        if not (math.isfinite(r) and r > 0):
            raise DomainError(f"rate must be finite and positive, got {r}")
        total = math.fsum(w)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise DomainError(f"weights sum to {total!r}, not 1")
        w = w / total
        w.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "shapes", a)
        object.__setattr__(self, "rate", r)

    @property
    def m(self):
        return self.weights.size

    def with_rate(self, rate):
        return MixtureParams(self.weights, self.shapes, rate)

    def with_shapes(self, shapes):
        return MixtureParams(self.weights, shapes, self.rate)

    def to_dict(self):
        return {
            "weights": self.weights.tolist(),
            "shapes": self.shapes.tolist(),
            "rate": self.rate,
        }

    def __eq__(self, other):
        if not isinstance(other, MixtureParams):
            return NotImplemented
        return (
            np.array_equal(self.weights, other.weights)
            and np.array_equal(self.shapes, other.shapes)
            and self.rate == other.rate
        )

    def __hash__(self):
        return hash((tuple(self.weights), tuple(self.shapes), self.rate))

    def __repr__(self):
        return (
            f"MixtureParams(weights={self.weights.tolist()}, "
            f"shapes={self.shapes.tolist()}, rate={self.rate!r})"
        )


# The length-biased law of a gamma mixture is again a gamma mixture.
LengthBiasedParams = MixtureParams


def validate(params=None, *, weights=None, shapes=None, rate=None):
    """Return checked, normalized :class:`MixtureParams`.

    Accepts an existing instance, a mapping with ``weights``/``shapes``/``rate``
    keys, or the three fields as keyword arguments.
    """
    if isinstance(params, MixtureParams):
        return params
    if params is not None:
        try:
            weights, shapes, rate = params["weights"], params["shapes"], params["rate"]
        except (KeyError, TypeError) as exc:
            raise DomainError(f"expected keys weights, shapes, rate: {exc}") from None
    if weights is None or shapes is None or rate is None:
        raise DomainError("weights, shapes and rate are all required")
    return MixtureParams(weights, shapes, rate)


def _component_logpdf(params, x):
    # shape (..., m)
    x = np.asarray(x, dtype=float)[..., None]
    a = params.shapes
    lam = params.rate
    return a * math.log(lam) - sc.gammaln(a) + (a - 1.0) * np.log(x) - lam * x


def logpdf(params, x):
    """Log density, evaluated with log-sum-exp over components."""
    params = validate(params)
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise DomainError("pdf is defined for finite x > 0")
    out = sc.logsumexp(_component_logpdf(params, x) + np.log(params.weights), axis=-1)
    return float(out) if out.ndim == 0 else out


def pdf(params, x):
    """Mixture density at ``x > 0`` (scalar or array)."""
    out = np.exp(logpdf(params, x))
    return float(out) if np.ndim(out) == 0 else out


def cdf(params, x, ctl=DEFAULT_CONTROL):
    """Mixture CDF ``sum_i w_i P(shape_i, rate * x)``."""
    params = validate(params)
    xs = np.asarray(x, dtype=float)
    if np.any(np.isnan(xs)) or np.any(xs < 0):
        raise DomainError("cdf is defined for x >= 0")
    flat = xs.reshape(-1)
    out = np.empty(flat.shape)
    for n, xv in enumerate(flat):
        out[n] = math.fsum(
            w * reg_inc_gamma_lower(a, params.rate * xv, ctl)
            for w, a in zip(params.weights, params.shapes)
        )
    out = np.clip(out, 0.0, 1.0).reshape(xs.shape)
    return float(out) if out.ndim == 0 else out


def mean(params):
    """``E[X] = sum_i w_i shape_i / rate``."""
    params = validate(params)
    return math.fsum(params.weights * params.shapes) / params.rate


def make_rng(seed):
    """Philox-4x64 generator keyed by a 64-bit integer seed."""
    if isinstance(seed, np.random.Generator):
        return seed
    seed = int(seed)
    if seed < 0:
        raise DomainError(f"seed must be a non-negative 64-bit integer, got {seed}")
    return np.random.Generator(np.random.Philox(seed & _MASK64))


def _marsaglia_tsang(rng, shape, size):
    """Standard gamma variates for ``shape >= 1`` by the Marsaglia-Tsang squeeze."""
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    out = np.empty(size)
    todo = np.arange(size)
    while todo.size:
        k = todo.size
        z = rng.standard_normal(k)
        u = rng.random(k)
        v = (1.0 + c * z) ** 3
        ok = v > 0
        with np.errstate(invalid="ignore", divide="ignore"):
            logv = np.log(np.where(ok, v, 1.0))
            accept = ok & (
                (u < 1.0 - 0.0331 * z**4)
                | (np.log(u) < 0.5 * z * z + d * (1.0 - v + logv))
            )
        out[todo[accept]] = d * v[accept]
        todo = todo[~accept]
    return out


def standard_gamma(rng, shape, size):
    """Unit-rate gamma variates; shapes below one use the ``U**(1/shape)`` boost."""
    if shape >= 1.0:
        return _marsaglia_tsang(rng, shape, size)
    g = _marsaglia_tsang(rng, shape + 1.0, size)
    u = rng.random(size)
    # exp(log(u)/shape) underflows to 0 for tiny shapes; keep draws positive.
    return np.maximum(g * np.exp(np.log(u) / shape), np.finfo(float).tiny)


def sample(params, n, seed, return_labels=False):
    """Draw ``n`` i.i.d. observations.

    Component labels come from inverse-CDF on the cumulative weights, then each
    component's draws are generated in one block. The stream is fully
    determined by ``seed``.
    """
    params = validate(params)
    n = int(n)
    if n < 1:
        raise DomainError(f"sample size must be >= 1, got {n}")
    rng = make_rng(seed)
    cum = np.cumsum(params.weights)
    labels = np.minimum(np.searchsorted(cum, rng.random(n), side="right"), params.m - 1)
    x = np.empty(n)
    for k in range(params.m):
        idx = np.flatnonzero(labels == k)
        if idx.size:
            x[idx] = standard_gamma(rng, params.shapes[k], idx.size)
    x /= params.rate
    if return_labels:
        return x, labels
    return x


def length_biased(params):
    """Parameters of the length-biased law: weights ``w_j a_j / sum_k w_k a_k``,
    shapes ``a_j + 1``, same rate."""
    params = validate(params)
    wa = params.weights * params.shapes
    return MixtureParams(wa / math.fsum(wa), params.shapes + 1.0, params.rate)


def ratio_cdf(params, z, ctl=DEFAULT_CONTROL):
    """CDF of ``X / (X + X*)`` with ``X*`` length-biased and independent of ``X``.

    This is the beta mixture ``sum_{i,j} w_i w*_j I_z(a_i, a_j + 1)``.
    """
    params = validate(params)
    z = float(z)
    if not 0.0 <= z <= 1.0:
        raise DomainError(f"ratio_cdf requires 0 <= z <= 1, got {z}")
    star = length_biased(params)
    val = math.fsum(
        wi * wj * reg_inc_beta(z, ai, aj, ctl)
        for wi, ai in zip(params.weights, params.shapes)
        for wj, aj in zip(star.weights, star.shapes)
    )
    return min(1.0, max(0.0, val))


def laplace_transform(params, x):
    """``E[exp(-x X)] = sum_i w_i (rate / (x + rate))**shape_i`` for ``x >= 0``."""
    params = validate(params)
    xs = np.asarray(x, dtype=float)
    if np.any(np.isnan(xs)) or np.any(xs < 0):
        raise DomainError("laplace_transform is defined for x >= 0")
    log_ratio = np.log(params.rate) - np.log(xs[..., None] + params.rate)
    out = np.exp(log_ratio * params.shapes) @ params.weights
    return float(out) if out.ndim == 0 else out


def load_params(path):
    """Read ``{"weights": [...], "shapes": [...], "rate": r}`` from a JSON file."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise DomainError(f"{path}: expected a JSON object")
    return validate(raw)


def dump_params(params, path):
    Path(path).write_text(json.dumps(validate(params).to_dict()) + "\n", encoding="utf-8")


def read_data(path):
    """Read one positive decimal per line; blank lines are skipped."""
    values = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text:
                continue
            try:
                v = float(text)
            except ValueError:
                raise DomainError(f"{path}:{lineno}: not a number: {text!r}") from None
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{path}:{lineno}: observations must be positive, got {text}")
            values.append(v)
    return np.array(values)


def write_data(x, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for v in np.asarray(x, dtype=float).tolist():
            fh.write(f"{v!r}\n")
