import numpy as np
import pytest

from qbfactory.factories import FactoryConfig
from qbfactory.noise import ReadoutConfusion
from qbfactory.sweeps import (
    FIG1A_COLUMNS,
    FIG3B_COLUMNS,
    SWEEP_COLUMNS,
    default_grid,
    fig1a_table,
    fig3a_table,
    fig3b_tables,
    parse_grid,
    run_sweep,
    sweep_point,
    sweep_table,
)
from qbfactory.rng import RngStream


def test_parse_grid():
    assert parse_grid("0:1:5") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert parse_grid("0.3:0.3:1") == [0.3]
    assert len(default_grid()) == 21 and default_grid()[10] == 0.5
    for bad in ("0:1", "0:2:3", "a:b:c", "0:1:0"):
        with pytest.raises(ValueError):
            parse_grid(bad)


def test_noiseless_sweep_structure():
    result = run_sweep(default_grid(), 50_000, seed=5)
    for row in result.rows:
        assert row.shots == 50_000
        assert row.counts[3] == 0
    # each row is a level-0.01 test; P(3 or more of 21 reject) is about 1e-3
    assert sum(not row.gof.passed for row in result.rows) <= 2
    half = result.rows[10]
    assert half.p == 0.5 and half.counts[1] == 0


def test_noise_fills_the_empty_cells():
    row = sweep_point(0.5, 50_000, RngStream(0), ReadoutConfusion.ballpark())
    assert row.counts[1] > 0 and row.counts[3] > 0
    assert row.gof.passed


def test_sweep_rows_track_conditional_coins():
    row = sweep_point(0.3, 20_000, RngStream(1))
    accepted = row.counts[1] + row.counts[2]
    assert row.frown.trials == row.sqdiff.trials == accepted
    assert row.frown.successes == row.counts[2]
    assert row.fair.successes == row.counts[0] + row.counts[3]


def test_parallel_sweep_is_identical():
    grid = parse_grid("0:1:6")
    assert sweep_table(run_sweep(grid, 2000, 9, jobs=1)) == sweep_table(run_sweep(grid, 2000, 9, jobs=2))


def test_sweep_table_columns():
    columns, rows = sweep_table(run_sweep([0.2, 0.4], 1000, 1))
    assert columns == SWEEP_COLUMNS
    assert all(len(r) == len(columns) for r in rows)
    assert [r[0] for r in rows] == [0.2, 0.4]
    columns, rows = fig3a_table(run_sweep([0.2], 1000, 1))
    assert rows[0][columns.index("frown_ideal")] == pytest.approx(0.64)


def test_fig1a_curves():
    columns, rows = fig1a_table([0.0, 0.2, 0.5], 20_000, seed=2)
    assert columns == FIG1A_COLUMNS
    ideal = columns.index("von_neumann_ideal")
    assert rows[0][ideal] == float("inf")
    assert rows[1][ideal] == pytest.approx(6.25)
    assert rows[2][ideal] == pytest.approx(4.0)
    for r in rows:
        assert r[columns.index("quantum_ideal")] == 2.0
        assert r[columns.index("fairbell_mean")] == 2.0
        assert r[columns.index("fair1q_mean")] == 2.0
    assert abs(rows[1][columns.index("von_neumann_mean")] / 6.25 - 1) < 0.05


def test_fig3b_tables():
    config = FactoryConfig(max_walk_steps=100_000)
    (columns, rows), (hcols, hist) = fig3b_tables([0.2, 0.5], 500, seed=3, config=config,
                                                  noise=ReadoutConfusion.ballpark())
    assert columns == FIG3B_COLUMNS
    ceiling = columns.index("noise_ceiling")
    assert rows[0][ceiling] == pytest.approx(0.92894, abs=1e-5)
    for r in rows:
        assert r[columns.index("trials")] == 500
        assert np.isfinite(r[columns.index("quoins_median")])
    assert hcols == ["p", "quoins", "count"]
    assert sum(c for p, _, c in hist if p == 0.2) == 500
