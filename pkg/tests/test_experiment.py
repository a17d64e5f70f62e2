import csv
import json

import numpy as np
import pytest

from dpffd.cli import main
from dpffd.errors import ContractViolation, NumericDivergenceError
from dpffd.experiment import CENTRALIZED, DISTRIBUTED, compare_traces, detection_summary, run_experiment
from dpffd.export import csv_header, export, load_trace, read_csv, read_json, write_csv, write_json
from dpffd.scenario import FaultConfig, NodeConfig, Scenario


def tiny(steps=10, seed=3):
    s = Scenario(seed=seed, duration_steps=steps,
                 faults=[FaultConfig("leak-tank-4", 4, 2), FaultConfig("leak-tank-5", 5, 4),
                         FaultConfig("leak-tank-7", 7, 6)])
    s.filter.n_particles = 100
    return s


@pytest.fixture(scope="module")
def trace():
    return run_experiment(tiny(), DISTRIBUTED)


def test_trace_shape(trace):
    assert trace.n_steps == 10 and list(trace.k) == list(range(1, 11))
    assert trace.estimates.shape == (10, 3, 9) and trace.pfail.shape == (10, 3, 3)
    assert trace.observed_tanks == list(range(1, 10))
    assert trace.complete


def test_same_seed_same_trace(trace):
    assert run_experiment(tiny(), DISTRIBUTED) == trace
    assert run_experiment(tiny(seed=4), DISTRIBUTED) != trace


def test_compare_examples(trace):
    self_report = compare_traces(trace, trace)
    assert self_report["estimate_max_abs"] == 0.0 and self_report["pfail_max_abs"] == 0.0
    s = tiny()
    s.nodes = [NodeConfig(1, list(range(1, 10)))]
    single = compare_traces(run_experiment(s, CENTRALIZED), run_experiment(s, DISTRIBUTED))
    assert single["estimate_max_abs"] == 0.0 and single["pfail_max_abs"] == 0.0
    central = compare_traces(run_experiment(tiny(), CENTRALIZED), trace)
    assert central["pfail_max_abs"] <= 1e-6


def test_compare_rejects_duration_mismatch(trace):
    with pytest.raises(ContractViolation):
        compare_traces(trace, run_experiment(tiny(steps=11), DISTRIBUTED))


def test_detection_summary_keys(trace):
    summary = detection_summary(trace)
    assert set(summary) == {"leak-tank-4", "leak-tank-5", "leak-tank-7"}
    assert set(summary["leak-tank-4"]) == {"1", "2", "3"}


def test_csv_layout(trace, tmp_path):
    path = write_csv(trace, tmp_path / "t.csv")
    rows = list(csv.reader(open(path)))
    assert len(rows) == 11
    header = rows[0]
    assert header[:3] == ["k", "time_s", "truth_x1"]
    for col in ("node1_est_x9", "node3_p_mode3", "node2_alarm_mode1", "consensus_iterations"):
        assert col in header
    assert header == csv_header(trace)


def test_json_round_trip(trace, tmp_path):
    assert read_json(write_json(trace, tmp_path / "t.json")) == trace


def test_csv_round_trip_numbers(trace, tmp_path):
    back = read_csv(write_csv(trace, tmp_path / "t.csv"))
    assert np.array_equal(back.estimates, trace.estimates)
    assert np.array_equal(back.pfail, trace.pfail)
    assert np.array_equal(back.truth, trace.truth)


def test_plot_count(trace, tmp_path):
    files = export(trace, tmp_path, formats=("json",), plots=True)
    pngs = [f for f in files if f.suffix == ".png"]
    assert len(pngs) == 3 + 9


def test_export_rejects_empty(trace, tmp_path):
    from dataclasses import replace
    empty = replace(trace, k=trace.k[:0])
    with pytest.raises(ContractViolation):
        export(empty, tmp_path)


def test_divergence_keeps_partial_trace(monkeypatch):
    import dpffd.faults as faults

    calls = {"n": 0}
    original = faults.AugmentedModel.propagate_continuous

    def flaky(self, *a, **kw):
        calls["n"] += 1
        out = original(self, *a, **kw)
        if calls["n"] > 3 * 4:
            out[0, 0] = np.nan
            raise NumericDivergenceError("boom")
        return out

    monkeypatch.setattr(faults.AugmentedModel, "propagate_continuous", flaky)
    with pytest.raises(NumericDivergenceError) as exc:
        run_experiment(tiny(), DISTRIBUTED)
    assert exc.value.trace.n_steps == 4 and not exc.value.trace.complete


def test_cli_run_compare_validate(tmp_path, capsys):
    scen = tmp_path / "s.yaml"
    tiny().save(scen)
    assert main(["validate", str(scen)]) == 0
    out = tmp_path / "run"
    assert main(["run", "--scenario", str(scen), "--out", str(out), "--no-plots"]) == 0
    assert (out / "trace.csv").exists() and (out / "trace.json").exists() and (out / "scenario.yaml").exists()
    out2 = tmp_path / "central"
    assert main(["run", "--scenario", str(scen), "--mode", "centralized", "--out", str(out2), "--format", "json",
                 "--no-plots"]) == 0
    capsys.readouterr()
    assert main(["compare", str(out / "trace.json"), str(out2 / "trace.json")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["pfail_max_abs"] <= 1e-6


def test_cli_out_dir_from_env(tmp_path, monkeypatch):
    scen = tmp_path / "s.yaml"
    tiny().save(scen)
    monkeypatch.setenv("DPFFD_OUT_DIR", str(tmp_path / "envout"))
    assert main(["run", "--scenario", str(scen), "--format", "csv", "--no-plots", "--seed", "8"]) == 0
    assert load_trace(tmp_path / "envout" / "trace.csv").n_steps == 10


def test_cli_invalid_scenario_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("filter:\n  alpha: 2\n")
    assert main(["validate", str(bad)]) == 2
    assert "filter.alpha" in capsys.readouterr().err
    assert main(["run", "--scenario", str(tmp_path / "missing.yaml")]) == 1


def test_cli_init_scenario(tmp_path):
    path = tmp_path / "default.yaml"
    assert main(["init-scenario", str(path)]) == 0
    assert Scenario.load(path) == Scenario()


def test_cli_divergence_exit_code(tmp_path, monkeypatch):
    import dpffd.cli as cli

    def diverge(*a, **kw):
        err = NumericDivergenceError("non-finite state", step=3)
        err.trace = run_experiment(tiny(), DISTRIBUTED)
        raise err

    monkeypatch.setattr(cli, "run_experiment", diverge)
    assert main(["run", "--out", str(tmp_path), "--format", "json"]) == 3
    assert (tmp_path / "trace-partial.json").exists()
