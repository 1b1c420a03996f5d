"""Maximum likelihood for gamma mixtures with a shared rate, by EM.

The engine runs many EM chains at once (all starts of one fit, or all starts
of many fits in a simulation) on arrays of shape ``(chains, m, n)``. Every
reduction is taken along a per-chain axis and every iterative update freezes
chains independently, so a chain's trajectory is bit-identical however many
other chains share the batch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special as sc

from .mixture import MixtureParams, logpdf, validate
from .specfun import ConvergenceError, DomainError, _trigamma_fast, inv_digamma_array

__all__ = [
    "FitConfig",
    "FitResult",
    "FitError",
    "log_likelihood",
    "em_fit",
    "em_fit_many",
]

MAX_SHAPE = 1e3


class FitError(ConvergenceError):
    """Every EM start failed (or the data cannot support a fit)."""


@dataclass(frozen=True)
class FitConfig:
    """Settings for :func:`em_fit`.

    ``tol`` is the relative change of the log-likelihood that ends a chain.
    ``floor_weight`` is the smallest mixing weight tolerated before a
    component is declared collapsed. ``floor_shape`` is the lower shape clamp
    used for small samples (``n <= 6 m``).
    """

    m: int = 2
    max_iter: int = 500
    tol: float = 1e-8
    n_starts: int = 8
    seed: int = 0
    floor_shape: float = 1e-2
    floor_weight: float = 1e-3
    inner_max_iter: int = 50
    inner_tol: float = 1e-10

    def __post_init__(self):
        if isinstance(self.m, bool) or int(self.m) != self.m or self.m < 1:
            raise DomainError(f"m must be a positive integer, got {self.m!r}")
        if self.max_iter < 1:
            raise DomainError(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.tol > 0:
            raise DomainError(f"tol must be > 0, got {self.tol}")
        if self.n_starts < 1:
            raise DomainError(f"n_starts must be >= 1, got {self.n_starts}")
        if not (self.floor_shape > 0 and self.floor_weight > 0):
            raise DomainError("floor_shape and floor_weight must be > 0")
        if int(self.seed) < 0:
            raise DomainError(f"seed must be non-negative, got {self.seed}")

    @classmethod
    def from_dict(cls, raw):
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise DomainError(f"unknown fit settings: {sorted(unknown)}")
        return cls(**raw)


@dataclass(frozen=True)
class FitResult:
    """Best EM solution over all starts; components sorted by ascending shape."""

    params: MixtureParams
    loglik: float
    n_iter: int
    converged: bool
    start_index: int
    loglik_trace: tuple = field(default=(), repr=False)
    n_reseeds: int = 0

    def to_dict(self):
        out = self.params.to_dict()
        out.update(
            loglik=self.loglik,
            n_iter=self.n_iter,
            converged=self.converged,
            start_index=self.start_index,
        )
        return out


def log_likelihood(params, data):
    """``sum_s log f(x_s)`` for positive data."""
    params = validate(params)
    x = np.asarray(data, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise DomainError("data must be a non-empty 1-d array")
    return math.fsum(np.atleast_1d(logpdf(params, x)))


def _check_data(data, m):
    x = np.asarray(data, dtype=float)
    if x.ndim != 1:
        raise DomainError("data must be 1-d")
    if np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise DomainError("data must be finite and strictly positive")
    need = max(2, 2 * m)
    if x.size < need:
        raise DomainError(f"fitting {m} components needs at least {need} observations, got {x.size}")
    return x


def _partition_labels(n, m, rng, mode, tail=2):
    """Component labels for the sorted sample under one start mode.

    ``"quantile"`` splits at the ``k/m`` quantiles and ``"jitter"`` moves those
    cuts at random. ``"window"`` hands components ``1..m-1`` random contiguous
    runs of the sorted data so that an interior cluster can own a component.
    ``"tail"`` gives the ``tail`` largest values to the last component (and
    random windows below them to any others), which catches solutions where a
    few large observations form their own component.
    """
    if mode in ("window", "tail"):
        labels = np.zeros(n, dtype=int)
        top = n
        if mode == "tail":
            t = min(max(int(tail), 1), n - (m - 1))
            labels[n - t :] = m - 1
            top = n - t
        for k in range(1, m if mode == "window" else m - 1):
            length = int(rng.integers(1, max(2, top // 2 + 1)))
            start = int(rng.integers(0, max(top - length, 0) + 1))
            labels[start : start + length] = k
        # every component needs at least one point; take them from the largest group
        for k in np.setdiff1d(np.arange(m), labels):
            big = np.bincount(labels, minlength=m).argmax()
            labels[np.flatnonzero(labels == big)[0]] = k
        return labels
    q = np.arange(1, m) / m
    if mode == "jitter":
        q = np.sort(q + rng.uniform(-0.4, 0.4, m - 1) / m)
    cuts = np.clip(np.round(q * n).astype(int), 1, n - 1)
    for k in range(1, cuts.size):
        cuts[k] = max(cuts[k], cuts[k - 1] + 1)
    cuts = np.minimum(cuts, n - (m - 1) + np.arange(m - 1))
    return np.repeat(np.arange(m), np.diff(np.concatenate([[0], cuts, [n]])))


def _initial_guess(x_sorted, m, rng, s, lo, hi):
    """Start ``s``: partition the sorted sample, then moment estimates with a pooled rate.

    Start 0 is the plain quantile split. Even starts put the ``1 + s // 2``
    largest values in one component; odd starts alternate between jittered
    quantile cuts and random windows.
    """
    n = x_sorted.size
    if s == 0 or m == 1:
        labels = _partition_labels(n, m, rng, "quantile")
    elif s % 2 == 0:
        labels = _partition_labels(n, m, rng, "tail", tail=1 + s // 2)
    else:
        labels = _partition_labels(n, m, rng, "jitter" if s % 4 == 1 else "window")
    groups = [x_sorted[labels == k] for k in range(m)]
    sizes = np.array([g.size for g in groups], dtype=float)
    means = np.array([g.mean() for g in groups])
    var_pool = sum(g.size * g.var() for g in groups)
    if not var_pool > 0:
        var_pool = n * x_sorted.var()
    lam = float(np.sum(sizes * means) / var_pool)
    shapes = np.clip(lam * means, lo, hi)
    return sizes / n, shapes, lam


def _logsumexp_m(L):
    mx = L.max(axis=1)
    return mx + np.log(np.exp(L - mx[:, None, :]).sum(axis=1))


def _m_step(N, mbar, sx, a, lam, lo, hi, cfg):
    """Exact maximization of the weighted complete-data likelihood.

    For fixed rate the shapes solve ``digamma(a_k) = log(rate) + mbar_k``; the
    rate then solves ``sum_k N_k a_k(rate) = rate * sum x``. That scalar
    equation is solved per chain by Newton in ``log(rate)`` with bisection
    safeguards, warm-started from the current rate.
    """
    B = lam.shape[0]
    u = np.log(lam)
    a = a.copy()
    u_lo = np.full(B, -np.inf)
    u_hi = np.full(B, np.inf)
    active = np.ones(B, dtype=bool)
    for _ in range(cfg.inner_max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        ui = u[idx]
        raw, _ = inv_digamma_array(ui[:, None] + mbar[idx], x0=a[idx])
        ai = np.clip(raw, lo, hi)
        a[idx] = ai
        Ni = N[idx]
        target = np.exp(ui) * sx[idx]
        h = (Ni * ai).sum(axis=1) - target
        lo_i = np.where(h > 0, ui, u_lo[idx])
        hi_i = np.where(h < 0, ui, u_hi[idx])
        free = (raw > lo) & (raw < hi)
        dh = (Ni * np.where(free, 1.0 / _trigamma_fast(ai), 0.0)).sum(axis=1) - target
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(dh < 0, -h / dh, np.nan)
        u_new = ui + step
        inside = np.isfinite(u_new) & (u_new > lo_i) & (u_new < hi_i)
        both = np.isfinite(lo_i) & np.isfinite(hi_i)
        with np.errstate(invalid="ignore"):
            fallback = np.where(both, 0.5 * (lo_i + hi_i), np.where(h > 0, ui + 1.0, ui - 1.0))
        u_new = np.where(inside, u_new, fallback)
        done = (np.abs(u_new - ui) < cfg.inner_tol) | (h == 0)
        u[idx] = u_new
        u_lo[idx] = lo_i
        u_hi[idx] = hi_i
        active[idx[done]] = False
    raw, _ = inv_digamma_array(u[:, None] + mbar, x0=a)
    return np.clip(raw, lo, hi), np.exp(u)


class _Chains:
    """State of a batch of EM chains."""

    def __init__(self, x, w, a, lam, rngs, cfg):
        self.x = x
        self.logx = np.log(x)
        self.sx = x.sum(axis=1)
        self.w = w
        self.a = a
        self.lam = lam
        self.rngs = rngs
        self.cfg = cfg
        B = x.shape[0]
        self.ll = np.full(B, -np.inf)
        self.n_iter = np.zeros(B, dtype=int)
        self.converged = np.zeros(B, dtype=bool)
        self.failed = np.zeros(B, dtype=bool)
        self.reseeds = np.zeros(B, dtype=int)
        self.traces = [[] for _ in range(B)]


def _run_chains(ch, lo, hi):
    cfg = ch.cfg
    n = ch.x.shape[1]
    m = ch.a.shape[1]
    active = np.ones(ch.x.shape[0], dtype=bool)
    prev = np.full(ch.x.shape[0], -np.inf)
    for it in range(cfg.max_iter + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        x, logx = ch.x[idx], ch.logx[idx]
        w, a, lam = ch.w[idx], ch.a[idx], ch.lam[idx]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            L = (
                (np.log(w) + a * np.log(lam)[:, None] - sc.gammaln(a))[:, :, None]
                + (a - 1.0)[:, :, None] * logx[:, None, :]
                - lam[:, None, None] * x[:, None, :]
            )
            lse = _logsumexp_m(L)
            ll = lse.sum(axis=1)
        bad = ~np.isfinite(ll)
        for pos, b in enumerate(idx):
            if not bad[pos]:
                ch.traces[b].append(float(ll[pos]))
        ch.ll[idx] = np.where(bad, ch.ll[idx], ll)
        p = prev[idx]
        done = np.isfinite(p) & (np.abs(ll - p) <= cfg.tol * np.maximum(1.0, np.abs(p)))
        ch.failed[idx[bad]] = True
        ch.converged[idx[done & ~bad]] = True
        stop = bad | done
        if it == cfg.max_iter:
            stop[:] = True
        active[idx[stop]] = False
        keep = ~stop
        if not keep.any():
            break
        idx, L, lse, ll = idx[keep], L[keep], lse[keep], ll[keep]
        x, logx, a, lam = x[keep], logx[keep], a[keep], lam[keep]
        prev[idx] = ll

        r = np.exp(L - lse[:, None, :])
        N = r.sum(axis=2)
        collapsed = (N / n < cfg.floor_weight).any(axis=1)
        if collapsed.any():
            for pos in np.flatnonzero(collapsed):
                b = idx[pos]
                if ch.reseeds[b] >= 1:
                    ch.failed[b] = True
                    active[b] = False
                    continue
                _reseed(ch, b, N[pos] / n, lo, hi)
                prev[b] = -np.inf
                ch.traces[b] = []
            ok = ~collapsed
            idx, r, N, logx, a, lam = idx[ok], r[ok], N[ok], logx[ok], a[ok], lam[ok]
            if idx.size == 0:
                continue
        mbar = (r * logx[:, None, :]).sum(axis=2) / N
        a_new, lam_new = _m_step(N, mbar, ch.sx[idx], a, lam, lo, hi, cfg)
        ch.w[idx] = N / n
        ch.a[idx] = a_new
        ch.lam[idx] = lam_new
        ch.n_iter[idx] += 1


def _reseed(ch, b, weights, lo, hi):
    """Restart a collapsed component at a random data point with weight 1/m."""
    rng = ch.rngs[b]
    m = weights.size
    w = ch.w[b].copy()
    a = ch.a[b].copy()
    for k in np.flatnonzero(weights < ch.cfg.floor_weight):
        w[k] = 1.0 / m
        a[k] = np.clip(ch.lam[b] * ch.x[b, rng.integers(ch.x.shape[1])], lo, hi)
    ch.w[b] = w / w.sum()
    ch.a[b] = a
    ch.reseeds[b] += 1


def _shape_bounds(n, cfg):
    if n <= 6 * cfg.m:
        return cfg.floor_shape, MAX_SHAPE
    return 1e-8, np.inf


def em_fit_many(datasets, cfg=FitConfig(), seeds=None):
    """Fit every row of ``datasets`` (shape ``(R, n)``) independently.

    ``seeds[r]`` replaces ``cfg.seed`` for row ``r``. Returns a list holding a
    :class:`FitResult` or the :class:`FitError` describing why that row failed.
    Each row's result is identical to ``em_fit(row, cfg with seed=seeds[r])``.
    """
    X = np.asarray(datasets, dtype=float)
    if X.ndim != 2:
        raise DomainError("datasets must be a 2-d array, one dataset per row")
    R, n = X.shape
    if seeds is None:
        seeds = [cfg.seed] * R
    if len(seeds) != R:
        raise DomainError("need one seed per dataset")
    for row in X:
        _check_data(row, cfg.m)
    lo, hi = _shape_bounds(n, cfg)
    S = cfg.n_starts
    m = cfg.m
    results = [None] * R
    members = []
    inits_w, inits_a, inits_lam, rngs = [], [], [], []
    for r in range(R):
        xs = np.sort(X[r])
        if not xs[-1] > xs[0]:
            results[r] = FitError("all observations are equal; the mixture is not identifiable")
            continue
        children = np.random.SeedSequence(int(seeds[r])).spawn(S)
        for s in range(S):
            rng = np.random.Generator(np.random.Philox(children[s]))
            w0, a0, lam0 = _initial_guess(xs, m, rng, s, lo, hi)
            members.append((r, s))
            inits_w.append(w0)
            inits_a.append(a0)
            inits_lam.append(lam0)
            rngs.append(rng)
    if members:
        rows = np.array([r for r, _ in members])
        ch = _Chains(
            X[rows].copy(),
            np.array(inits_w),
            np.array(inits_a),
            np.array(inits_lam),
            rngs,
            cfg,
        )
        _run_chains(ch, lo, hi)
        best = {}
        for b, (r, s) in enumerate(members):
            if ch.failed[b] or not np.isfinite(ch.ll[b]):
                continue
            if r not in best or ch.ll[b] > ch.ll[best[r]]:
                best[r] = b
        for r in range(R):
            if results[r] is not None:
                continue
            if r not in best:
                results[r] = FitError(f"all {S} EM starts failed")
                continue
            b = best[r]
            order = np.argsort(ch.a[b], kind="stable")
            try:
                params = MixtureParams(ch.w[b][order], ch.a[b][order], ch.lam[b])
            except DomainError as exc:
                results[r] = FitError(f"EM produced invalid parameters: {exc}")
                continue
            results[r] = FitResult(
                params=params,
                loglik=float(ch.ll[b]),
                n_iter=int(ch.n_iter[b]),
                converged=bool(ch.converged[b]),
                start_index=members[b][1],
                loglik_trace=tuple(ch.traces[b]),
                n_reseeds=int(ch.reseeds[b]),
            )
    return results


def em_fit(data, cfg=FitConfig()):
    """Fit a ``cfg.m``-component gamma mixture with a shared rate by EM.

    Runs ``cfg.n_starts`` chains from quantile-split, upper-tail and random-window starts and keeps
    the one with the highest log-likelihood. Raises :class:`FitError` when
    every start fails, e.g. on constant data or repeated component collapse.
    """
    x = _check_data(data, cfg.m)
    out = em_fit_many(x[None, :], cfg, [cfg.seed])[0]
    if isinstance(out, FitError):
        raise out
    return out
