import math
from dataclasses import replace

import numpy as np
import pytest

from gmgini.fit import FitConfig
from gmgini.gini import bias, expected_sample_gini, population_gini_gamma, population_gini_gm
from gmgini.mixture import MixtureParams
from gmgini.sim import (
    CSV_HEADER,
    SimConfig,
    SimRow,
    SimTable,
    SimulationError,
    bundled_config,
    load_config,
    read_table,
    replication_seed,
    run_cell,
    run_simulation,
    splitmix64,
    write_table,
)
from gmgini.specfun import DomainError

SCENARIO = MixtureParams([0.6, 0.4], [0.5, 2.0], 1.0)


def test_splitmix64_reference_values():
    # first outputs of the reference SplitMix64 stream seeded with 0
    state = 0
    outs = []
    for _ in range(3):
        outs.append(splitmix64(state))
        state = (state + 0x9E3779B97F4A7C15) & ((1 << 64) - 1)
    assert outs == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_replication_seeds_distinct():
    seeds = {replication_seed(7, c, r) for c in range(5) for r in range(2000)}
    assert len(seeds) == 10000
    assert all(0 <= s < 2**64 for s in seeds)


# ---------------------------------------------------------------- config


def test_config_validation():
    with pytest.raises(DomainError):
        SimConfig(n_sim=0, n_grid=[10], true_params=SCENARIO)
    with pytest.raises(DomainError):
        SimConfig(n_sim=5, n_grid=[1], true_params=SCENARIO)
    with pytest.raises(DomainError):
        SimConfig(n_sim=5, n_grid=[10, 12], true_params=SCENARIO, alpha2_grid=[1.0])
    with pytest.raises(DomainError):
        SimConfig(n_sim=5, n_grid=[10], true_params=MixtureParams([1.0], [1.0]), alpha2_grid=[1.0])
    with pytest.raises(DomainError):
        SimConfig.from_dict({"n_sim": 5, "n_grid": [10], "true_params": SCENARIO.to_dict(), "extra": 1})
    with pytest.raises(DomainError):
        SimConfig.from_dict({"n_sim": 5, "n_grid": [10]})


def test_bundled_configs():
    fig2 = bundled_config("fig2")
    assert fig2.sweep == "n" and fig2.n_grid == tuple(range(10, 17)) and fig2.n_sim == 100
    assert fig2.true_params == SCENARIO
    fig3 = bundled_config("fig3")
    assert fig3.sweep == "alpha2" and fig3.n_grid == (15,)
    assert [c[0] for c in fig3.cells()] == [0.5, 1.0, 2.0, 3.0, 5.0]
    assert fig3.cells()[0][2].shapes.tolist() == [0.5, 0.5]
    with pytest.raises(DomainError):
        bundled_config("fig9")


def test_load_config_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(
        '{"n_sim": 3, "n_grid": [10, 11], "true_params": {"weights": [1], "shapes": [2], "rate": 1},'
        ' "master_seed": 5, "fit": {"m": 1}}'
    )
    cfg = load_config(path)
    assert cfg.fit_cfg.m == 1 and cfg.master_seed == 5 and cfg.n_grid == (10, 11)


# ---------------------------------------------------------------- cells


def test_single_gamma_truth_is_unbiased():
    p = MixtureParams([1.0], [1.5], 2.0)
    row = run_cell(p, 12, 3000, seed=11, fit_cfg=FitConfig(m=1))
    assert abs(row.mean_ghat - row.g_true) <= 3 * row.se("ghat")
    assert row.g_true == pytest.approx(population_gini_gamma(1.5))


def test_scenario_overestimates():
    row = run_cell(SCENARIO, 15, 1000, seed=12)
    assert row.mean_ghat > row.g_true
    assert row.n_failed_fits + row.n_ok == 1000


def test_bypass_matches_exact_expectation():
    n = 12
    row = run_cell(SCENARIO, n, 20000, seed=3, bypass_fit=True)
    assert abs(row.mean_ghat - expected_sample_gini(SCENARIO, n)) <= 3 * row.se("ghat")
    assert abs(row.mean_ghat_bc - population_gini_gm(SCENARIO)) <= 3 * row.se("ghat_bc")
    assert row.mean_ghat - row.mean_ghat_bc == pytest.approx(bias(SCENARIO, n).bias, abs=1e-12)


def test_bypass_equal_shapes_has_zero_gap():
    p = SCENARIO.with_shapes([0.5, 0.5])
    row = run_cell(p, 15, 500, seed=3, bypass_fit=True)
    assert abs(row.mean_ghat - row.mean_ghat_bc) <= 1e-10


def test_cell_is_deterministic_and_independent_of_workers():
    a = run_cell(SCENARIO, 10, 600, seed=99)
    b = run_cell(SCENARIO, 10, 600, seed=99)
    c = run_cell(SCENARIO, 10, 600, seed=99, n_jobs=2)
    assert a == b == c


def test_cell_values_do_not_depend_on_chunk_size(monkeypatch):
    import gmgini.sim as sim

    a = run_cell(SCENARIO, 11, 90, seed=5)
    monkeypatch.setattr(sim, "CHUNK", 7)
    b = sim.run_cell(SCENARIO, 11, 90, seed=5)
    assert a.mean_ghat == pytest.approx(b.mean_ghat, rel=1e-14)
    assert a.mean_ghat_bc == pytest.approx(b.mean_ghat_bc, rel=1e-14)


def test_failed_fits_are_counted(monkeypatch):
    import gmgini.sim as sim
    from gmgini.fit import FitError, em_fit_many

    def flaky(datasets, cfg, seeds):
        out = em_fit_many(datasets, cfg, seeds)
        return [FitError("forced") if k % 3 == 0 else r for k, r in enumerate(out)]

    monkeypatch.setattr(sim, "em_fit_many", flaky)
    row = sim.run_cell(SCENARIO, 10, 30, seed=1)
    assert row.n_failed_fits == 10 and row.n_ok == 20


def test_all_failed_raises(monkeypatch):
    import gmgini.sim as sim
    from gmgini.fit import FitError

    monkeypatch.setattr(sim, "em_fit_many", lambda d, c, s: [FitError("x")] * len(s))
    with pytest.raises(SimulationError):
        sim.run_cell(SCENARIO, 10, 5, seed=1)
    cfg = SimConfig(n_sim=5, n_grid=[10, 11], true_params=SCENARIO)
    with pytest.raises(SimulationError):
        sim.run_simulation(cfg)


# ---------------------------------------------------------------- tables


def small_config(**kw):
    base = dict(n_sim=40, n_grid=(10, 11, 12), true_params=SCENARIO, master_seed=42)
    base.update(kw)
    return SimConfig(**base)


def test_run_simulation_rows_and_progress():
    seen = []
    table = run_simulation(small_config(), progress=seen.append)
    assert [r.cell for r in table.rows] == [10, 11, 12]
    assert seen == table.rows
    sweep = run_simulation(small_config(n_grid=(15,), alpha2_grid=(0.5, 2.0)))
    assert sweep.sweep == "alpha2" and len(sweep) == 2
    assert sweep.rows[0].g_true == pytest.approx(2 / math.pi)


def test_csv_round_trip_and_format(tmp_path):
    table = run_simulation(small_config())
    path = tmp_path / "t.csv"
    write_table(table, path)
    raw = path.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 4
    back = read_table(path)
    for a, b in zip(table.rows, back.rows):
        assert (a.cell, a.mean_ghat, a.mean_ghat_bc, a.g_true, a.n_failed_fits) == (
            b.cell,
            b.mean_ghat,
            b.mean_ghat_bc,
            b.g_true,
            b.n_failed_fits,
        )
    assert back.sweep == "n"


def test_csv_at_least_12_significant_digits(tmp_path):
    row = SimRow(15, 1 / 3, 2 / 3, math.pi / 10, 0)
    path = tmp_path / "t.csv"
    write_table(SimTable([row]), path)
    fields = path.read_text().splitlines()[1].split(",")
    for f in fields[1:4]:
        digits = f.replace("0.", "", 1).lstrip("0").replace(".", "")
        assert len(digits) >= 12


def test_empty_table_is_header_only(tmp_path):
    path = tmp_path / "e.csv"
    write_table(SimTable(), path)
    assert path.read_text() == ",".join(CSV_HEADER) + "\n"


def test_same_seed_same_bytes(tmp_path):
    cfg = small_config(n_sim=25)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_table(run_simulation(cfg), p1)
    write_table(run_simulation(cfg), p2)
    assert p1.read_bytes() == p2.read_bytes()
    p3 = tmp_path / "c.csv"
    write_table(run_simulation(replace(cfg, master_seed=43)), p3)
    assert p3.read_bytes() != p1.read_bytes()


def test_write_error_has_path_context(tmp_path):
    bad = tmp_path / "missing" / "t.csv"
    with pytest.raises(OSError, match="missing"):
        write_table(SimTable(), bad)


def test_read_table_rejects_foreign_csv(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(DomainError):
        read_table(path)
