import json

import numpy as np
import pytest
from scipy import stats

from tcsr import cli
from tcsr.errors import InvalidConfigError
from tcsr.experiments import (CSV_COLUMNS, DiscreteBins, DisorderSpec, ExperimentSpec,
                              Lorentzian, ScanResult, Uniform, bins_with_std, emit,
                              run_experiment, sample_frequencies, to_csv)


def test_uniform_zero_width_and_support():
    assert np.all(sample_frequencies(DisorderSpec(Uniform(0.0)), 50) == 0)
    x = sample_frequencies(DisorderSpec(Uniform(5.0), seed=3), 10000)
    assert x.min() >= -5 and x.max() <= 5
    assert stats.kstest(x, stats.uniform(-5, 10).cdf).statistic < 0.02


def test_lorentzian_matches_arctan_cdf():
    d0 = 1.7
    x = sample_frequencies(DisorderSpec(Lorentzian(d0), seed=11), 10 ** 6)
    cdf = lambda w: 0.5 + np.arctan(w / d0) / np.pi
    assert stats.kstest(x, cdf).statistic < 0.002


def test_discrete_bins_binomial_bound():
    n = 10 ** 5
    x = sample_frequencies(DisorderSpec(DiscreteBins((-2.0, 2.0), (0.5, 0.5)), seed=5), n)
    assert set(np.unique(x)) <= {-2.0, 2.0}
    assert abs(np.sum(x > 0) - n / 2) < 3 * np.sqrt(n / 4)


def test_bins_with_std():
    for k in (1, 2, 4):
        b = bins_with_std(k, 2.0)
        mean = np.dot(b.frequencies, b.probabilities)
        var = np.dot(np.square(b.frequencies), b.probabilities) - mean ** 2
        assert mean == pytest.approx(0.0)
        assert var == pytest.approx(4.0 if k > 1 else 0.0)


def test_streams_are_independent_and_deterministic():
    spec = DisorderSpec(Uniform(5.0), seed=9)
    a = sample_frequencies(spec, 20, stream=0)
    assert np.array_equal(a, sample_frequencies(spec, 20, stream=0))
    assert not np.array_equal(a, sample_frequencies(spec, 20, stream=1))
    assert not np.array_equal(a, sample_frequencies(DisorderSpec(Uniform(5.0), seed=10), 20))


@pytest.mark.parametrize("bad", [dict(figure="fig9"), dict(figure="fig1c", n_list=[]),
                                 dict(figure="fig1c", ensembles=0),
                                 dict(figure="fig1c", params={"nope": 1})])
def test_spec_validation(bad):
    with pytest.raises(InvalidConfigError):
        ExperimentSpec(**bad)
    with pytest.raises(InvalidConfigError):
        DiscreteBins((0.0, 1.0), (0.3, 0.3))


def test_scan_is_deterministic_and_order_independent(tmp_path):
    spec = ExperimentSpec("fig1c", n_list=[5, 8], ensembles=4, seed=2)
    a = run_experiment(spec)
    b = run_experiment(ExperimentSpec("fig1c", n_list=[5, 8], ensembles=4, seed=2, workers=2))
    assert to_csv(a) == to_csv(b)
    # per-ensemble values do not depend on which other N values are scanned
    c = run_experiment(ExperimentSpec("fig1c", n_list=[8], ensembles=4, seed=2))
    assert to_csv(c).splitlines()[1:] == to_csv(a).splitlines()[4:]


def test_emit_round_trip_and_empty(tmp_path):
    res = run_experiment(ExperimentSpec("fig1b", n_list=[4], ensembles=3, seed=1))
    paths = emit(res, str(tmp_path / "out.csv"))
    assert [p.rsplit("/", 1)[1] for p in paths] == ["out.csv", "out.json"]
    text = (tmp_path / "out.csv").read_bytes()
    again = ScanResult.from_json((tmp_path / "out.json").read_text())
    assert to_csv(again).encode() == text
    spec = ExperimentSpec.from_dict(json.loads((tmp_path / "out.json").read_text())["metadata"]["spec"])
    assert to_csv(run_experiment(spec)).encode() == text
    empty = ScanResult([], {})
    assert to_csv(empty) == ",".join(CSV_COLUMNS) + "\n"
    with pytest.raises(OSError, match="cannot write"):
        emit(res, str(tmp_path / "missing" / "x.csv"))


def test_failed_cells_are_recorded():
    res = run_experiment(ExperimentSpec("fig1c", n_list=[3], ensembles=2, params={"G": -1.0}))
    assert len(res.failures) == 1
    assert "InvalidConfigError" in res.failures[0].error


def test_cli_scan_and_rerun_is_byte_identical(tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["scan", "--figure", "fig1c", "--n", "4", "6", "--ensembles", "3", "--seed", "7"]
    assert cli.main(args + ["--out", str(out1)]) == 0
    assert cli.main(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_cli_subcommands(tmp_path, capsys):
    conf = tmp_path / "sys.json"
    conf.write_text(json.dumps({"n": 3, "gamma": 0.5, "max_iters": 5}))
    for cmd in ("simulate", "optimize", "multiphoton"):
        out = tmp_path / f"{cmd}.csv"
        assert cli.main([cmd, "--config", str(conf), "--out", str(out)]) == 0
        assert out.read_text().startswith(",".join(CSV_COLUMNS))
    assert cli.main(["large-n", "--G", "1", "--delta0", "1", "--set", "max_iters=3",
                     "--format", "json", "--out", str(tmp_path / "ln.json")]) == 0
    data = json.loads((tmp_path / "ln.json").read_text())
    assert {r["metric"] for r in data["rows"]} == {"baseline", "optimized", "ratio"}


def test_cli_failures(tmp_path, capsys):
    assert cli.main(["simulate", "--set", "n=0"]) == 1
    assert "failing cells" in capsys.readouterr().err
    assert cli.main(["scan"]) == 2
    assert cli.main(["simulate", "--config", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert cli.main(["scan", "--config", str(bad)]) == 2
    with pytest.raises(SystemExit):
        cli.main(["scan", "--format", "xml"])
