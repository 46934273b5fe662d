import numpy as np
import pytest

from offloadsim.errors import ConfigError
from offloadsim.sim_harness import (
    SimConfig,
    draw_trial,
    find_crossover,
    format_csv,
    run_buffer_sweep,
    run_bursty_sweep,
    run_oneshot_sweep,
    wilson_interval,
    write_csv,
)

SMALL = SimConfig(trials=40, seed=7)


def test_config_validation():
    with pytest.raises(ConfigError):
        SimConfig(mean_idle=0.0)
    with pytest.raises(ConfigError):
        SimConfig(trials=0)
    with pytest.raises(ConfigError):
        SimConfig(idle_start_prob=1.5)
    with pytest.raises(ConfigError):
        SimConfig(size_low=2e5, size_high=1e5)


def test_config_from_dict():
    cfg = SimConfig.from_dict({"mean_idle": "0.04", "trials": 10})
    assert cfg.mean_idle == 0.04 and cfg.trials == 10
    with pytest.raises(ConfigError) as exc:
        SimConfig.from_dict({"mean_idle_s": 0.04})
    assert "mean_idle_s" in str(exc.value)
    with pytest.raises(ConfigError) as exc:
        SimConfig.from_dict({"mean_idle": "fast"})
    assert "mean_idle" in str(exc.value)


def test_draw_trial_reproducible_and_distinct():
    a = draw_trial(7, 11, 3)
    b = draw_trial(7, 11, 3)
    assert np.array_equal(a.idle_units, b.idle_units)
    assert a.gain_unit == b.gain_unit
    c = draw_trial(7, 11, 4)
    assert not np.array_equal(a.idle_units, c.idle_units)
    d = draw_trial(8, 11, 3)
    assert a.gain_unit != d.gain_unit


def test_wilson_interval():
    lo, hi = wilson_interval(0, 50)
    assert lo == pytest.approx(0.0, abs=1e-12) and hi < 0.1
    lo, hi = wilson_interval(50, 50)
    assert hi == pytest.approx(1.0) and lo > 0.9
    lo, hi = wilson_interval(8, 10)
    assert 0.49 < lo < 0.51 and 0.94 < hi < 0.95  # textbook value for 80 percent


def test_oneshot_sweep_rows():
    res = run_oneshot_sweep(SMALL, "mean_idle", (0.01, 0.04), jobs=None)
    assert res.kind == "oneshot" and res.axis == "mean_idle"
    assert [row["value"] for row in res.rows] == [0.01, 0.04]
    for row in res.rows:
        assert 0 <= row["feasible"] <= SMALL.trials
        assert row["wilson_low"] <= row["feasible_frac"] <= row["wilson_high"]
        if row["feasible"]:
            assert row["mean_opt_energy"] <= row["mean_bench_energy"] * (1 + 1e-12)


def test_invalid_axis_rejected():
    with pytest.raises(ConfigError) as exc:
        run_oneshot_sweep(SMALL, "bandwidth", (1.0, 2.0))
    assert "bandwidth" in str(exc.value)
    with pytest.raises(ConfigError):
        run_oneshot_sweep(SMALL, "size_scale", (0.5, 1.0))  # chunked-arrival knob


def test_buffer_sweep_columns_and_crossover_comment():
    res = run_buffer_sweep(SMALL, (1e4, np.inf), jobs=None)
    for row in res.rows:
        if row["feasible"]:
            assert row["mean_opt_energy"] <= row["mean_prop_energy"] * (1 + 1e-12)
            assert row["mean_opt_energy"] <= row["mean_lazy_energy"] * (1 + 1e-12)
    text = format_csv(res)
    assert text.splitlines()[-len(res.rows) - 1].startswith("axis,value,")
    cross = find_crossover(
        list(res.values),
        [row["mean_prop_energy"] for row in res.rows],
        [row["mean_lazy_energy"] for row in res.rows],
    )
    if cross is not None:
        assert any("crossover_buffer_bits" in ln for ln in text.splitlines())


def test_bursty_sweep_rows():
    res = run_bursty_sweep(SMALL, "size_scale", (0.5, 2.0), jobs=None)
    fr = [row["feasible_frac"] for row in res.rows]
    assert fr[0] >= fr[1]
    for row in res.rows:
        if row["feasible"]:
            assert row["mean_opt_energy"] <= row["mean_bench_energy"] * (1 + 1e-12)


def test_results_identical_across_worker_counts():
    serial = format_csv(run_oneshot_sweep(SMALL, "mean_idle", (0.01, 0.04), jobs=None))
    parallel = format_csv(run_oneshot_sweep(SMALL, "mean_idle", (0.01, 0.04), jobs=3))
    assert serial == parallel
    again = format_csv(run_oneshot_sweep(SMALL, "mean_idle", (0.01, 0.04), jobs=2))
    assert serial == again


def test_write_csv_unix_newlines(tmp_path):
    res = run_oneshot_sweep(SMALL, "mean_idle", (0.02,), jobs=None)
    path = tmp_path / "out.csv"
    write_csv(res, path)
    raw = path.read_bytes()
    assert b"\r" not in raw
    assert raw.decode() == format_csv(res)


def test_find_crossover():
    assert find_crossover([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], [2.0, 3.0, 4.0]) is None
    x = find_crossover([0.0, 1.0], [0.0, 1.0], [0.5, 0.5])
    assert x == pytest.approx(0.5)
    assert find_crossover([0.0, 1.0], [0.0, np.nan], [0.5, 0.5]) is None
