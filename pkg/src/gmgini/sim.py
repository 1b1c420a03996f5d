"""Monte Carlo study of the sample and bias-corrected Gini estimators.

For every grid cell (a sample size, or a second-component shape) and every
replication: draw a sample from the true mixture, fit a mixture by EM,
compute the sample Gini and subtract the bias evaluated at the fitted
parameters. Cells report the replication means.

Replication ``r`` of cell ``c`` draws from seed
``master_seed XOR splitmix64((c << 32) | r)``, so results do not depend on
execution order, chunking or the number of worker processes.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .fit import FitConfig, FitError, em_fit_many
from .gini import bias, population_gini_gm, sample_gini
from .mixture import MixtureParams, sample, validate
from .specfun import DomainError

__all__ = [
    "SimConfig",
    "SimRow",
    "SimTable",
    "SimulationError",
    "splitmix64",
    "replication_seed",
    "run_cell",
    "run_simulation",
    "write_table",
    "read_table",
    "load_config",
    "bundled_config",
]

CSV_HEADER = ("cell", "mean_ghat", "mean_ghat_bc", "g_true", "n_failed_fits")
_MASK64 = (1 << 64) - 1
CHUNK = 250


class SimulationError(RuntimeError):
    pass


def splitmix64(x):
    """One output of the SplitMix64 generator seeded at ``x``."""
    z = (int(x) + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def replication_seed(master_seed, cell_index, rep_index):
    return (int(master_seed) ^ splitmix64((int(cell_index) << 32) | int(rep_index))) & _MASK64


@dataclass(frozen=True)
class SimConfig:
    """Inputs of a simulation run.

    Exactly one of ``n_grid`` and ``alpha2_grid`` is swept. When
    ``alpha2_grid`` is given, ``n_grid`` must hold a single size and the
    second shape of ``true_params`` is replaced cell by cell. With
    ``bypass_fit`` the true parameters stand in for the EM fit.
    """

    n_sim: int
    n_grid: tuple
    true_params: MixtureParams
    alpha2_grid: tuple | None = None
    master_seed: int = 0
    fit_cfg: FitConfig = field(default_factory=FitConfig)
    bypass_fit: bool = False

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "true_params", validate(self.true_params))
        if self.alpha2_grid is not None:
            object.__setattr__(self, "alpha2_grid", tuple(float(a) for a in self.alpha2_grid))
        if int(self.n_sim) < 1:
            raise DomainError(f"n_sim must be >= 1, got {self.n_sim}")
        if not self.n_grid or any(n < 2 for n in self.n_grid):
            raise DomainError(f"every sample size must be >= 2, got {list(self.n_grid)}")
        if int(self.master_seed) < 0:
            raise DomainError("master_seed must be a non-negative 64-bit integer")
        if self.alpha2_grid is not None:
            if len(self.n_grid) != 1:
                raise DomainError("an alpha2 sweep needs a single sample size in n_grid")
            if not self.alpha2_grid:
                raise DomainError("alpha2_grid is empty")
            if self.true_params.m < 2:
                raise DomainError("an alpha2 sweep needs at least two components")
            if any(not a > 0 for a in self.alpha2_grid):
                raise DomainError("alpha2 values must be positive")

    @property
    def sweep(self):
        return "n" if self.alpha2_grid is None else "alpha2"

    def cells(self):
        """List of ``(cell_value, n, true_params)``."""
        if self.alpha2_grid is None:
            return [(n, n, self.true_params) for n in self.n_grid]
        n = self.n_grid[0]
        out = []
        for a2 in self.alpha2_grid:
            shapes = self.true_params.shapes.copy()
            shapes[1] = a2
            out.append((a2, n, self.true_params.with_shapes(shapes)))
        return out

    @classmethod
    def from_dict(cls, raw):
        allowed = {"n_sim", "n_grid", "true_params", "alpha2_grid", "master_seed", "fit", "bypass_fit"}
        unknown = set(raw) - allowed
        if unknown:
            raise DomainError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(
                n_sim=int(raw["n_sim"]),
                n_grid=raw["n_grid"],
                true_params=validate(raw["true_params"]),
                alpha2_grid=raw.get("alpha2_grid"),
                master_seed=int(raw.get("master_seed", 0)),
                fit_cfg=FitConfig.from_dict(raw.get("fit", {})),
                bypass_fit=bool(raw.get("bypass_fit", False)),
            )
        except KeyError as exc:
            raise DomainError(f"missing config key {exc}") from None
        except TypeError as exc:
            raise DomainError(f"malformed config: {exc}") from None


@dataclass(frozen=True)
class SimRow:
    cell: float
    mean_ghat: float
    mean_ghat_bc: float
    g_true: float
    n_failed_fits: int
    n_ok: int = 0
    sd_ghat: float = math.nan
    sd_ghat_bc: float = math.nan
    sd_gap: float = math.nan

    def se(self, which="ghat"):
        """Standard error of a replication mean (``ghat``, ``ghat_bc`` or ``gap``)."""
        return getattr(self, f"sd_{which}") / math.sqrt(self.n_ok)


@dataclass
class SimTable:
    rows: list = field(default_factory=list)
    sweep: str = "n"

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows], dtype=float)


def _mean_sd(values):
    v = np.asarray(values, dtype=float)
    mu = math.fsum(v) / v.size
    sd = math.sqrt(math.fsum((v - mu) ** 2) / (v.size - 1)) if v.size > 1 else math.nan
    return mu, sd


def _run_chunk(true_params, n, seeds, fit_cfg, bypass_fit):
    """Replications for one block of seeds; returns (ghat, ghat_bc) with NaN on failed fits."""
    data = np.array([sample(true_params, n, s) for s in seeds])
    ghat = sample_gini(data)
    if bypass_fit:
        return ghat, ghat - bias(true_params, n).bias
    fit_seeds = [splitmix64(s) >> 1 for s in seeds]
    fits = em_fit_many(data, fit_cfg, fit_seeds)
    ghat_bc = np.full(len(seeds), np.nan)
    for r, res in enumerate(fits):
        if isinstance(res, FitError):
            continue
        try:
            ghat_bc[r] = ghat[r] - bias(res.params, n).bias
        except (ArithmeticError, ValueError):
            continue
    return ghat, ghat_bc


def run_cell(
    true_params,
    n,
    n_sim,
    seed,
    fit_cfg=FitConfig(),
    *,
    cell_index=0,
    cell=None,
    bypass_fit=False,
    n_jobs=1,
):
    """Run ``n_sim`` replications at sample size ``n`` and average them.

    Replications whose fit fails are excluded from both means and counted in
    ``n_failed_fits``. Raises :class:`SimulationError` if no replication
    succeeds.
    """
    true_params = validate(true_params)
    n = int(n)
    n_sim = int(n_sim)
    if n < 2 or n_sim < 1:
        raise DomainError("need n >= 2 and n_sim >= 1")
    seeds = [replication_seed(seed, cell_index, r) for r in range(n_sim)]
    chunks = [seeds[i : i + CHUNK] for i in range(0, n_sim, CHUNK)]
    args = [(true_params, n, c, fit_cfg, bypass_fit) for c in chunks]
    if n_jobs > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(_run_chunk, *zip(*args)))
    else:
        parts = [_run_chunk(*a) for a in args]
    ghat = np.concatenate([p[0] for p in parts])
    ghat_bc = np.concatenate([p[1] for p in parts])
    ok = np.isfinite(ghat_bc)
    if not ok.any():
        raise SimulationError(f"every replication failed at n={n}")
    mg, sg = _mean_sd(ghat[ok])
    mbc, sbc = _mean_sd(ghat_bc[ok])
    _, sgap = _mean_sd(ghat[ok] - ghat_bc[ok])
    return SimRow(
        cell=n if cell is None else cell,
        mean_ghat=mg,
        mean_ghat_bc=mbc,
        g_true=population_gini_gm(true_params),
        n_failed_fits=int((~ok).sum()),
        n_ok=int(ok.sum()),
        sd_ghat=sg,
        sd_ghat_bc=sbc,
        sd_gap=sgap,
    )


def run_simulation(cfg, n_jobs=1, progress=None):
    """One :class:`SimRow` per grid cell of ``cfg``."""
    table = SimTable(sweep=cfg.sweep)
    errors = []
    for c, (cell, n, params) in enumerate(cfg.cells()):
        try:
            row = run_cell(
                params,
                n,
                cfg.n_sim,
                cfg.master_seed,
                cfg.fit_cfg,
                cell_index=c,
                cell=cell,
                bypass_fit=cfg.bypass_fit,
                n_jobs=n_jobs,
            )
        except SimulationError as exc:
            errors.append(str(exc))
            continue
        table.rows.append(row)
        if progress is not None:
            progress(row)
    if errors:
        raise SimulationError("; ".join(errors))
    return table


def _fmt_cell(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_table(table, path):
    """Write ``cell,mean_ghat,mean_ghat_bc,g_true,n_failed_fits`` rows as CSV.

    Floats are written with ``repr`` (shortest string that round-trips).
    """
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for r in table.rows:
                w.writerow(
                    [
                        _fmt_cell(r.cell),
                        repr(float(r.mean_ghat)),
                        repr(float(r.mean_ghat_bc)),
                        repr(float(r.g_true)),
                        str(int(r.n_failed_fits)),
                    ]
                )
    except OSError as exc:
        raise OSError(f"cannot write simulation table to {path}: {exc}") from exc


def read_table(path):
    """Parse a CSV written by :func:`write_table`."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != CSV_HEADER:
            raise DomainError(f"{path}: unexpected header {header}")
        rows = []
        for rec in reader:
            cell = int(rec[0]) if rec[0].lstrip("-").isdigit() else float(rec[0])
            rows.append(SimRow(cell, float(rec[1]), float(rec[2]), float(rec[3]), int(rec[4])))
    sweep = "n" if all(isinstance(r.cell, int) for r in rows) else "alpha2"
    return SimTable(rows=rows, sweep=sweep)


def load_config(path):
    """Load a :class:`SimConfig` from a JSON file."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise DomainError(f"{path}: expected a JSON object")
    return SimConfig.from_dict(raw)


def bundled_config(name):
    """Load one of the shipped configs (``fig2`` or ``fig3``)."""
    ref = resources.files("gmgini").joinpath("data").joinpath(f"{name}.json")
    if not ref.is_file():
        raise DomainError(f"no bundled config named {name!r}")
    return SimConfig.from_dict(json.loads(ref.read_text(encoding="utf-8")))
