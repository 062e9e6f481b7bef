import csv
import math

import numpy as np
import pytest

from paulitomo import harness
from paulitomo.errors import FormatError, GenerationError, InputError
from paulitomo.harness import (
    ExperimentConfig,
    MseRow,
    MseTable,
    emit_plot_data,
    emit_table,
    fit_slope,
    format_scaling,
    plot_series,
    read_table,
    rescaled_trend,
    run_bench,
    run_experiment,
    run_replicate,
    scaling_check,
    single_truth_config,
)
from paulitomo.norms import frobenius_error_sq, spectral_error
from paulitomo.estimator import ThresholdPolicy, estimate
from paulitomo.measurement import sample_measurements

SMALL = ExperimentConfig(
    qubit_list=(2, 3),
    shots_list=(10, 40, 160),
    replicates=6,
    grid_points=15,
    master_seed=7,
)


@pytest.fixture(scope="module")
def small_table():
    return run_experiment(SMALL)


class TestConfig:
    def test_text_roundtrip(self):
        assert ExperimentConfig.from_text(SMALL.to_text()) == SMALL
        assert ExperimentConfig.from_text(SMALL.to_text()).config_hash() == SMALL.config_hash()

    def test_comments_and_partial(self):
        cfg = ExperimentConfig.from_text("# study\nqubit_list=2\nreplicates=3\n\n")
        assert cfg.qubit_list == (2,) and cfg.replicates == 3 and cfg.shots_list == ExperimentConfig().shots_list

    @pytest.mark.parametrize(
        "text, line",
        [("replicates=x\n", 1), ("\nbogus=1\n", 2), ("replicates=2\nreplicates=3\n", 2), ("noequals\n", 1)],
    )
    def test_malformed(self, text, line):
        with pytest.raises(FormatError) as err:
            ExperimentConfig.from_text(text, "c.txt")
        assert err.value.line == line

    @pytest.mark.parametrize(
        "kwargs",
        [{"replicates": 0}, {"shots_list": ()}, {"policies": ("best",)}, {"qubit_list": (9,)}, {"hbar": 1.0}],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(InputError):
            ExperimentConfig(**kwargs)

    def test_single_truth_mode_config(self):
        cfg = single_truth_config()
        assert not cfg.fresh_state_per_replicate
        assert cfg.replicates == 200 and cfg.hbar == 1.01


class TestReplicate:
    def test_matches_public_pipeline(self):
        cfg = ExperimentConfig(qubit_list=(3,), shots_list=(50,), replicates=1, policies=("none", "universal"))
        res = run_replicate(cfg, 3, 0)
        truth, _ = harness.make_truth(cfg, 3, 0)
        rec = sample_measurements(truth, 50, None, harness.measurement_rng(cfg, 3, 50, 0))
        for rule in ("hard", "soft"):
            est = estimate(rec, ThresholdPolicy.universal(), rule).estimate
            assert res.errors[(50, "universal", rule, "frobenius")] == pytest.approx(
                frobenius_error_sq(est, truth), rel=1e-12
            )
            assert res.errors[(50, "universal", rule, "spectral")] == pytest.approx(
                spectral_error(est, truth) ** 2, rel=1e-10
            )
        raw = estimate(rec, ThresholdPolicy.fixed(0.0), "hard").estimate
        assert res.errors[(50, "none", "none", "frobenius")] == pytest.approx(frobenius_error_sq(raw, truth), rel=1e-12)

    def test_fresh_truths_differ_single_truth_shared(self):
        fresh = ExperimentConfig()
        assert harness.make_truth(fresh, 3, 0)[0].expansion != harness.make_truth(fresh, 3, 1)[0].expansion
        t1 = single_truth_config()
        assert harness.make_truth(t1, 3, 0)[0].expansion == harness.make_truth(t1, 3, 5)[0].expansion


class TestExperiment:
    def test_cells(self, small_table):
        policies = {(r.policy, r.rule) for r in small_table.rows}
        assert policies == set(harness.SUMMARY_COLUMNS)
        assert len(small_table) == 2 * 3 * 7 * 2
        assert all(r.mse >= 0 and math.isfinite(r.sem) for r in small_table.rows)

    def test_optimal_not_worse_than_fixed_grid_points(self, small_table):
        # the universal threshold is the grid midpoint, so the in-sample optimum cannot lose to it
        for d in (4, 8):
            for n in SMALL.shots_list:
                for rule in ("hard", "soft"):
                    for norm in ("spectral", "frobenius"):
                        opt = small_table.get(d, n, "optimal", rule, norm).mse
                        uni = small_table.get(d, n, "universal", rule, norm).mse
                        assert opt <= uni + 1e-15

    def test_deterministic_across_workers(self, small_table):
        assert run_experiment(SMALL, workers=3, chunk_size=2).rows == small_table.rows

    def test_single_truth_mode(self):
        cfg = single_truth_config(qubit_list=(2,), shots_list=(10, 20, 40), replicates=4, policies=("none",))
        table = run_experiment(cfg)
        assert len(table) == 6

    def test_generation_failure_gives_nan_rows(self, monkeypatch):
        def boom(*args, **kwargs):
            raise GenerationError("no PSD state after 3 attempts")

        monkeypatch.setattr(harness, "make_truth", boom)
        cfg = ExperimentConfig(qubit_list=(2,), shots_list=(10,), replicates=2, policies=("none", "universal"))
        table = run_experiment(cfg)
        assert all(math.isnan(r.mse) and "no PSD" in r.diagnostic for r in table.rows)


class TestOutput:
    def test_csv_roundtrip(self, small_table, tmp_path):
        emit_table(small_table, tmp_path / "m.csv")
        back = read_table(tmp_path / "m.csv")
        assert back.rows == small_table.rows

    def test_nan_roundtrip(self, tmp_path):
        t = MseTable([MseRow(4, 10, "none", "none", "spectral", math.nan, math.nan, 0, math.nan, "failed")])
        emit_table(t, tmp_path / "m.csv")
        row = read_table(tmp_path / "m.csv").rows[0]
        assert math.isnan(row.mse) and row.diagnostic == "failed"

    def test_empty_table(self, tmp_path):
        with pytest.raises(InputError):
            emit_table(MseTable(), tmp_path / "m.csv")

    def test_wide_layout(self, small_table, tmp_path):
        emit_table(small_table, tmp_path / "t.csv", layout="wide")
        with open(tmp_path / "t.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0][:10] == [
            "norm", "d", "n", "without", "optimal_hard", "optimal_soft",
            "universal_hard", "universal_soft", "individual_hard", "individual_soft",
        ]
        assert len(rows) == 1 + 2 * 2 * 3
        first = rows[1]
        assert first[:3] == ["spectral", "4", "10"]
        assert float(first[3]) == small_table.get(4, 10, "none", "none", "spectral").mse

    def test_plot_modes(self, small_table, tmp_path):
        for mode in harness.PLOT_MODES:
            emit_plot_data(small_table, mode, tmp_path / f"{mode}.csv")
        _, xs, raw = plot_series(small_table, "mse_vs_d")
        _, _, scaled = plot_series(small_table, "rescaled_vs_d")
        for name, ys in raw.items():
            factor = [d**2 if name.startswith("spectral") else d for d in xs]
            assert scaled[name] == [y * f for y, f in zip(ys, factor)]
        with pytest.raises(InputError):
            plot_series(small_table, "pie")

    def test_missing_cell(self, small_table):
        partial = MseTable(small_table.rows[:-1])
        with pytest.raises(InputError):
            plot_series(partial, "mse_vs_n")


class TestScaling:
    def test_exact_power_law(self):
        slope, lo, hi = fit_slope([100, 200, 400, 800], [1 / 100, 1 / 200, 1 / 400, 1 / 800])
        assert slope == pytest.approx(-1, abs=1e-12)
        assert lo == pytest.approx(-1, abs=1e-9) and hi == pytest.approx(-1, abs=1e-9)

    def test_report(self, small_table):
        fits = scaling_check(small_table)
        assert {f.expected for f in fits} == {-1.0}
        assert format_scaling(fits) == format_scaling(scaling_check(small_table))
        none = [f for f in fits if f.policy == "none" and f.norm == "frobenius"]
        assert all(abs(f.slope + 1) < 0.2 for f in none)

    def test_q_changes_reference(self, small_table):
        fits = scaling_check(small_table, q=0.5)
        assert {(f.norm, f.expected) for f in fits} == {("spectral", -0.5), ("frobenius", -0.75)}

    def test_needs_three_shots(self):
        rows = [MseRow(4, n, "none", "none", "frobenius", 1 / n, 0.0, 2, 0.0) for n in (10, 20)]
        with pytest.raises(InputError):
            scaling_check(MseTable(rows))

    def test_rescaled_trend(self):
        def row(d, mse, sem):
            return MseRow(d, 10, "none", "none", "frobenius", mse, sem, 5, 0.0)

        up = MseTable([row(4, 1.0, 0.0), row(8, 0.6, 0.0)])
        assert rescaled_trend(up) == {("none", "none", "frobenius", 10): True}
        down = MseTable([row(4, 1.0, 0.0), row(8, 0.4, 0.0)])
        assert rescaled_trend(down) == {("none", "none", "frobenius", 10): False}
        noisy = MseTable([row(4, 1.0, 0.5), row(8, 0.4, 0.0)])
        assert rescaled_trend(noisy)[("none", "none", "frobenius", 10)]


def test_bench_outputs(tmp_path):
    cfg = ExperimentConfig(qubit_list=(2,), shots_list=(10, 20, 40), replicates=3, grid_points=5)
    run_bench(cfg, tmp_path, version="9.9.9")
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == [
        "manifest.txt", "mse.csv", "plot_mse_vs_d.csv", "plot_mse_vs_n.csv",
        "plot_rescaled_vs_d.csv", "scaling.txt", "summary.csv",
    ]
    manifest = (tmp_path / "manifest.txt").read_text()
    assert "9.9.9" in manifest and cfg.config_hash() in manifest
    assert f"master_seed={cfg.master_seed}" in manifest
