from dataclasses import replace

import numpy as np
import pytest

from ppgof import harness
from ppgof.errors import ExperimentError, FitFailureError, InvalidInputError
from ppgof.harness import (
    ExperimentConfig,
    RejectionTable,
    config_to_text,
    load_config,
    parse_config,
    qq_data,
    qq_line,
    qq_to_csv,
    run_experiment,
    run_replication,
)
from ppgof.stattests import NullDistribution, kolmogorov_ppf

from conftest import EXPH

CONFIG_TEXT = """\
[experiment]
schema_version = 1
horizon = 300
replications = 3
procedures = transform, naive, rtc
tests = KS, AD
levels = 0.01, 0.05, 0.2
n_rule_c = 0.25
n_rule_floor = 1
tau = 0.9
seed = 17
n_starts = 2

[true_model]
kind = ExpHawkes
params = 0.5, 1.0, 2.0

[null]
kind = ExpHawkes
bounds = 1e-8:10, 1e-8:10, 1e-8:10
"""


@pytest.fixture(scope="module")
def config():
    return parse_config(CONFIG_TEXT)


@pytest.fixture(scope="module")
def table(config):
    return run_experiment(config, workers=1)


class TestConfig:
    def test_parse(self, config):
        assert config.true_model == EXPH
        assert config.null_kind == "ExpHawkes"
        assert config.T == 300.0 and config.replications == 3
        assert config.procedures == ("transform", "naive", "rtc")
        assert config.tests == ("KS", "AD")
        assert config.levels == (0.01, 0.05, 0.2)
        assert config.null_bounds == ((1e-8, 10.0),) * 3
        assert config.grid_size is None

    def test_roundtrip(self, config):
        assert parse_config(config_to_text(config)) == config

    def test_load(self, tmp_path, config):
        path = tmp_path / "exp.ini"
        path.write_text(CONFIG_TEXT)
        assert load_config(path) == config

    @pytest.mark.parametrize(
        "old,new",
        [
            ("n_starts = 2", "n_start = 2"),
            ("[null]", "[nul]"),
            ("kind = ExpHawkes\nparams", "kind = ExpHawkes\nparms"),
        ],
    )
    def test_misspelling_is_error(self, old, new):
        with pytest.raises(InvalidInputError):
            parse_config(CONFIG_TEXT.replace(old, new, 1))

    @pytest.mark.parametrize(
        "old,new",
        [
            ("schema_version = 1", "schema_version = 2"),
            ("replications = 3", "replications = 0"),
            ("levels = 0.01, 0.05, 0.2", "levels = 0.01, 1.5"),
            ("tests = KS, AD", "tests = KS, Shapiro"),
            ("procedures = transform, naive, rtc", "procedures = bootstrap"),
            ("horizon = 300\n", ""),
        ],
    )
    def test_invalid_values(self, old, new):
        with pytest.raises(InvalidInputError):
            parse_config(CONFIG_TEXT.replace(old, new, 1))

    def test_n_rule(self, config):
        assert config.n_for(123) == 5
        count_based = ExperimentConfig(EXPH, "ExpHawkes", 300.0, 1, n_rule=(0.25, 6), n_rule_basis="count")
        assert count_based.n_for(67) == 6
        assert count_based.n_for(1000) == 8


class TestRunExperiment:
    def test_bookkeeping(self, table):
        assert table.total == 3
        for proc in ("transform", "naive", "rtc"):
            for test in ("KS", "AD"):
                counts = table.counts(proc, test)
                assert all(0 <= c <= 3 for c in counts)
                assert list(counts) == sorted(counts)

    def test_single_replication_reconstructible(self, config):
        one = run_experiment(replace(config, replications=1), workers=1)
        p = one.p_values("transform", "AD")[0]
        for lv in one.levels:
            assert one.count("transform", "AD", lv) == int(p < lv)
        assert RejectionTable.from_pvalue_log(one.pvalue_log_csv(), one.levels).to_csv() == one.to_csv()

    def test_counts_from_log(self, table):
        rebuilt = RejectionTable.from_pvalue_log(table.pvalue_log_csv(), table.levels)
        assert rebuilt.to_csv() == table.to_csv()

    def test_byte_identical(self, config, table):
        assert run_experiment(config, workers=1).to_csv() == table.to_csv()

    def test_worker_independence(self, config, table):
        other = run_experiment(config, workers=2)
        assert other.to_csv() == table.to_csv()
        assert other.pvalue_log_csv() == table.pvalue_log_csv()

    def test_env_override(self, config, table, monkeypatch):
        monkeypatch.setenv("PPGOF_WORKERS", "2")
        assert run_experiment(config).pvalue_log_csv() == table.pvalue_log_csv()

    def test_replication_is_index_seeded(self, config, table):
        rec = run_replication(config, 2)
        assert rec.p_values == table.records[2].p_values

    def test_csv_format(self, table):
        text = table.to_csv()
        lines = text.split("\n")
        assert lines[0] == "procedure,test,level,rejections,total"
        assert len(lines) == 1 + 3 * 2 * 3 + 1 and lines[-1] == ""
        assert "\r" not in text

    def test_log_format(self, table):
        lines = table.pvalue_log_csv().splitlines()
        assert lines[0] == "replication,attempts,n_events,procedure,test,statistic,p_value"
        assert len(lines) == 1 + 3 * 3 * 2

    def test_failures_abort(self, monkeypatch, config):
        def broken(*args, **kwargs):
            raise FitFailureError("boom")

        monkeypatch.setattr(harness, "fit_mle", broken)
        with pytest.raises(ExperimentError):
            run_experiment(config, workers=1)


class TestQQ:
    def test_reference_on_diagonal(self):
        q = kolmogorov_ppf((np.arange(1, 201) - 0.5) / 200)
        pairs = qq_data(q, "Kolmogorov")
        np.testing.assert_allclose(pairs[:, 0], pairs[:, 1], atol=1e-9)
        slope, intercept = qq_line(pairs)
        assert slope == pytest.approx(1.0, abs=1e-9) and intercept == pytest.approx(0.0, abs=1e-9)

    @pytest.mark.parametrize("reference", ["StdNormal", "StdExponential"])
    def test_other_references(self, reference):
        q = NullDistribution(reference).ppf((np.arange(1, 51) - 0.5) / 50)
        pairs = qq_data(q[::-1], reference)
        np.testing.assert_allclose(pairs[:, 0], pairs[:, 1], atol=1e-9)

    def test_empty(self):
        with pytest.raises(InvalidInputError):
            qq_data([])

    def test_unknown_reference(self):
        with pytest.raises(InvalidInputError):
            qq_data([1.0], "Gumbel")

    def test_csv(self):
        text = qq_to_csv(qq_data([0.5, 1.0]))
        assert text.splitlines()[0] == "empirical,theoretical"
        assert len(text.splitlines()) == 3
