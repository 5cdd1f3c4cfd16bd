import json

import numpy as np
import pytest

from grqi import (
    CONVERGED,
    ExperimentConfig,
    FAILURE,
    IterationRecord,
    IterationTrace,
    MissingOracleError,
    format_table,
    hamiltonian_success,
    read_traces,
    run_hamiltonian,
    run_table1,
    summarize,
    summary_json,
    write_summary,
    write_traces,
)


def records_match(a, b):
    # bitwise field comparison, treating NaN as equal to NaN
    if (a.index, a.perturbed) != (b.index, b.perturbed):
        return False
    for name in ("right_err", "left_err", "err_sum", "residual", "shift_cond"):
        x, y = getattr(a, name), getattr(b, name)
        if not (x == y or (np.isnan(x) and np.isnan(y))):
            return False
    return True


def synthetic_trace(errs, status=CONVERGED):
    records = [
        IterationRecord(
            index=k,
            right_err=e / 2.0,
            left_err=e / 2.0,
            err_sum=e,
            residual=e,
            perturbed=bool(k % 2),
            shift_cond=1.0 + k,
        )
        for k, e in enumerate(errs)
    ]
    return IterationTrace(records=records, status=status)


# ----------------------------------------------------------------- config


def test_config_defaults_are_valid():
    cfg = ExperimentConfig()
    assert cfg.experiment == "table1"
    assert (cfg.n, cfg.p, cfg.trials) == (20, 5, 1000)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"trials": 0},
        {"start_distance": 0.0},
        {"start_distance": np.pi / 2},
        {"n": 5, "p": 5},
        {"n": 4, "p": 6},
        {"experiment": "unknown"},
        {"workers": 0},
        {"max_iters": 0},
        {"seed": -1},
    ],
)
def test_config_rejects_bad_values(kwargs):
    with pytest.raises(ValueError):
        ExperimentConfig(**kwargs)


# -------------------------------------------------------------- summarize


def test_summarize_log10_means():
    s = summarize([synthetic_trace([0.1, 1e-5])], n=4, p=1)
    assert len(s.per_iterate) == 2
    assert s.per_iterate[0]["mean_log10_e"] == pytest.approx(-1.0)
    assert s.per_iterate[1]["mean_log10_e"] == pytest.approx(-5.0)
    assert s.success_count == 1
    assert s.success_rate == 1.0


def test_summarize_max_is_elementwise():
    t1 = synthetic_trace([0.1, 1e-6])
    t2 = synthetic_trace([0.01, 1e-3])
    s = summarize([t1, t2], n=4, p=1)
    assert s.per_iterate[0]["max_log10_e"] == pytest.approx(-1.0)
    assert s.per_iterate[1]["max_log10_e"] == pytest.approx(-3.0)
    assert s.per_iterate[0]["mean_log10_e"] == pytest.approx(-1.5)


def test_summarize_mean_never_exceeds_max():
    traces = [synthetic_trace([10.0 ** -k, 10.0 ** -(k + 3)]) for k in range(1, 6)]
    s = summarize(traces, n=4, p=1)
    for row in s.per_iterate:
        assert row["mean_log10_e"] <= row["max_log10_e"] + 1e-12


def test_summarize_floors_tiny_errors():
    s = summarize([synthetic_trace([0.0])], n=4, p=1)
    assert s.per_iterate[0]["mean_log10_e"] == pytest.approx(-300.0)


def test_summarize_requires_oracle_errors():
    t = IterationTrace(
        records=[IterationRecord(index=0)], status=CONVERGED
    )
    with pytest.raises(MissingOracleError):
        summarize([t], n=4, p=1)


def test_summarize_rejects_empty_batch():
    with pytest.raises(ValueError):
        summarize([], n=4, p=1)


def test_summarize_counts_failures_without_oracle_rows():
    good = synthetic_trace([0.1, 1e-8])
    bad = IterationTrace(
        records=[IterationRecord(index=0)],
        status=FAILURE,
        failure_reason="GramSingularError: test",
    )
    s = summarize([good, bad], n=4, p=1)
    assert s.trials == 2
    assert s.success_count == 1
    assert s.success_rate == pytest.approx(0.5)
    assert s.failures == 1


def test_summarize_custom_success_predicate():
    t1 = synthetic_trace([0.1, 1e-8])
    t2 = synthetic_trace([0.1, 1e-2])
    s = summarize(
        [t1, t2],
        n=4,
        p=1,
        success=lambda t: t.records[-1].err_sum < 1e-6,
    )
    assert s.success_count == 1


# ------------------------------------------------------------- run_table1


@pytest.fixture(scope="module")
def table1_small():
    cfg = ExperimentConfig(trials=25, seed=11)
    return cfg, run_table1(cfg)


def test_table1_shape_and_sanity(table1_small):
    cfg, (summary, traces) = table1_small
    assert summary.trials == 25
    assert len(traces) == 25
    assert len(summary.per_iterate) == 6  # iterates 0..5
    assert summary.per_iterate[0]["k"] == 0
    # both start angles are below 0.1, so e0 <= 0.2
    assert summary.per_iterate[0]["max_log10_e"] <= np.log10(0.2) + 1e-12
    # cubic cascade reaches working precision by iterate 3
    assert summary.per_iterate[3]["mean_log10_e"] <= -12.0
    assert summary.success_rate == 1.0


def test_table1_trace_records_are_complete(table1_small):
    _, (_, traces) = table1_small
    for trace in traces:
        assert [r.index for r in trace.records] == list(range(6))
        for r in trace.records:
            assert np.isfinite(r.err_sum)
            assert r.err_sum >= 0.0
            assert np.isclose(r.err_sum, r.right_err + r.left_err)


def test_table1_determinism(table1_small):
    cfg, (summary, traces) = table1_small
    summary2, traces2 = run_table1(cfg)
    assert summary_json(summary) == summary_json(summary2)
    for a, b in zip(traces, traces2):
        assert a.status == b.status
        for ra, rb in zip(a.records, b.records):
            assert ra == rb


def test_table1_workers_do_not_change_results(table1_small):
    cfg, (summary, _) = table1_small
    cfg2 = ExperimentConfig(trials=25, seed=11, workers=3)
    summary2, _ = run_table1(cfg2)
    assert summary_json(summary) == summary_json(summary2)


def test_table1_csv_roundtrip(tmp_path, table1_small):
    cfg, (summary, traces) = table1_small
    path = tmp_path / "traces.csv"
    write_traces(path, traces)
    back = read_traces(path)
    assert len(back) == len(traces)
    for a, b in zip(traces, back):
        assert a.status == b.status
        assert a.failure_reason == b.failure_reason
        for ra, rb in zip(a.records, b.records):
            assert records_match(ra, rb)  # repr round-trip keeps floats bitwise
    s2 = summarize(
        back,
        experiment=summary.experiment,
        n=summary.n,
        p=summary.p,
        seed=summary.seed,
    )
    assert summary_json(s2) == summary_json(summary)


# --------------------------------------------------------- run_hamiltonian


@pytest.fixture(scope="module")
def hamiltonian_small():
    cfg = ExperimentConfig(
        experiment="hamiltonian", n=12, p=2, trials=60, seed=5, max_iters=10
    )
    return cfg, run_hamiltonian(cfg)


def test_hamiltonian_success_rate(hamiltonian_small):
    _, (summary, traces) = hamiltonian_small
    assert summary.trials == 60
    assert summary.success_rate >= 0.9
    assert summary.p is None  # block size varies per trial
    assert summary.p_counts is not None
    assert set(summary.p_counts) <= {2, 4}
    assert sum(summary.p_counts.values()) + summary.failures == 60


def test_hamiltonian_success_criterion(hamiltonian_small):
    _, (summary, traces) = hamiltonian_small
    for trace in traces:
        if trace.status == FAILURE:
            assert not hamiltonian_success(trace)
            continue
        expected = trace.records[10].err_sum < 1e-12
        assert hamiltonian_success(trace) == expected
    assert summary.success_count == sum(hamiltonian_success(t) for t in traces)


def test_hamiltonian_rejects_odd_n():
    with pytest.raises(ValueError):
        run_hamiltonian(ExperimentConfig(experiment="hamiltonian", n=7, p=2, trials=1))


def test_hamiltonian_workers_determinism():
    cfg1 = ExperimentConfig(experiment="hamiltonian", n=8, p=2, trials=20, seed=3)
    cfg2 = ExperimentConfig(
        experiment="hamiltonian", n=8, p=2, trials=20, seed=3, workers=2
    )
    s1, _ = run_hamiltonian(cfg1)
    s2, _ = run_hamiltonian(cfg2)
    assert summary_json(s1) == summary_json(s2)


# ------------------------------------------------------------- serialization


def test_summary_json_keys_and_layout(table1_small):
    _, (summary, _) = table1_small
    doc = json.loads(summary_json(summary))
    assert list(doc) == [
        "experiment",
        "n",
        "p",
        "trials",
        "seed",
        "per_iterate",
        "success_rate",
    ]
    assert doc["experiment"] == "table1"
    assert list(doc["per_iterate"][0]) == ["k", "mean_log10_e", "max_log10_e"]
    # wall time must never leak into the serialized form
    assert "wall" not in summary_json(summary)


def test_summary_json_null_p(hamiltonian_small):
    _, (summary, _) = hamiltonian_small
    doc = json.loads(summary_json(summary))
    assert doc["p"] is None


def test_write_summary_file_matches_string(tmp_path, table1_small):
    _, (summary, _) = table1_small
    path = tmp_path / "summary.json"
    write_summary(path, summary)
    assert path.read_text() == summary_json(summary)


def test_format_table_layout(table1_small):
    _, (summary, _) = table1_small
    lines = format_table(summary).splitlines()
    assert len(lines) == 1 + 6
    header = lines[0].split()
    assert header[0] == "iterate"
    row0 = lines[1].split()
    assert int(row0[0]) == 0
    float(row0[1]), float(row0[2])  # numeric columns


def test_read_traces_rejects_garbage(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("not,a,trace\n1,2,3\n")
    with pytest.raises(Exception):
        read_traces(path)
