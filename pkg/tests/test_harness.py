import json

import numpy as np
import pytest

from charlierbd.harness import (ConfigError, ExperimentConfig, rel_error,
                                run_figures, run_table, write_series_csv,
                                write_table_csv)


def erlang_cfg(**kw):
    base = dict(model={"kind": "erlang_a",
                       "lambda": {"base": 6.0, "amplitude": 1.0},
                       "mu": 1.0, "beta": 0.5, "c": 4},
                T=3.0, init={"kind": "poisson", "value": 5.0},
                orders=[1, 3], X_max=60)
    base.update(kw)
    return ExperimentConfig(**base)


class TestConfig:
    def test_roundtrip_and_hash(self, tmp_path):
        cfg = erlang_cfg()
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg.to_dict()))
        again = ExperimentConfig.from_file(path)
        assert again.hash() == cfg.hash()

    def test_rejects_unknown_kind(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(model={"kind": "mm1", "lambda": {"base": 1.0}})

    def test_rejects_missing_fields(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(model={"kind": "erlang_a",
                                    "lambda": {"base": 1.0}, "mu": 1.0})

    def test_rejects_unknown_keys(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"model": {}, "horizon": 5})

    def test_rejects_bad_schema_version(self):
        with pytest.raises(ConfigError):
            erlang_cfg(schema_version=99)

    def test_tabulated_lambda(self):
        cfg = ExperimentConfig(model={
            "kind": "infinite_server",
            "lambda": {"samples": {"t": [0.0, 1.0, 2.0],
                                   "value": [3.0, 5.0, 3.0]}},
            "mu": 1.0}, T=2.0)
        lam, mu = cfg.params()
        assert lam(0.5) == pytest.approx(4.0)


class TestRelError:
    def test_identical_series(self):
        t = np.linspace(0, 2, 21)
        u = np.cos(t) + 2
        assert rel_error(u, u, t) == 0.0

    def test_constant_relative_offset(self):
        t = np.linspace(0, 5, 501)
        u_star = np.sin(t) + 3
        assert rel_error(1.01 * u_star, u_star, t) == \
            pytest.approx(0.01, abs=1e-12)

    def test_scale_invariance(self):
        t = np.linspace(0, 3, 301)
        rng = np.random.default_rng(2)
        u_star = 2 + rng.random(301)
        u = u_star + 0.1 * rng.standard_normal(301)
        assert rel_error(7.0 * u, 7.0 * u_star, t) == \
            pytest.approx(rel_error(u, u_star, t), rel=1e-12)

    def test_lower_limit_rule(self):
        # reference crosses zero before t=1, clean afterwards
        t = np.linspace(0, 4, 4001)
        u_star = np.where(t < 0.5, 0.0, 1.0)
        u = u_star + np.where(t < 0.5, 0.0, 0.2)
        # hand value: integrand 0.2 on [1, 4], averaged over 3 time units
        assert rel_error(u, u_star, t) == pytest.approx(0.2, rel=1e-6)

    def test_divergence_after_lower_limit(self):
        t = np.linspace(0, 4, 401)
        u_star = np.where(t < 2.0, 1.0, 0.0)
        with pytest.raises(ValueError):
            rel_error(u_star + 0.1, u_star, t)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            rel_error(np.ones(3), np.ones(4), np.arange(4.0))


class TestRunTable:
    def test_trend_and_provenance(self):
        cfg = erlang_cfg()
        table = run_table(cfg)
        assert [r.N for r in table.rows] == [1, 3]
        assert table.rows[1].err_mean < table.rows[0].err_mean
        assert table.provenance["config_hash"] == cfg.hash()
        assert table.provenance["T"] == cfg.T

    def test_deterministic_csv(self, tmp_path):
        cfg = erlang_cfg()
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        write_table_csv(run_table(cfg), a)
        write_table_csv(run_table(cfg), b)
        assert a.read_bytes() == b.read_bytes()
        header = a.read_text().splitlines()[1]
        assert header == "N,err_mean,err_variance,err_skewness,err_kurtosis"


class TestRunFigures:
    def test_series_bundle(self, tmp_path):
        cfg = erlang_cfg(orders=[1])
        series = run_figures(cfg)
        for key in ("t", "ref_mean", "ref_delay", "zeroth_mean",
                    "first_mean", "first_delay"):
            assert key in series
            assert len(series[key]) == len(series["t"])
        out = tmp_path / "fig.csv"
        write_series_csv(series, out)
        lines = out.read_text().splitlines()
        assert len(lines) == len(series["t"]) + 1

    def test_infinite_server_zeroth_matches_reference(self):
        cfg = ExperimentConfig(model={"kind": "infinite_server",
                                      "lambda": {"base": 5.0,
                                                 "amplitude": 1.0},
                                      "mu": 1.0},
                               T=4.0, init={"kind": "poisson", "value": 5.0},
                               X_max=60)
        series = run_figures(cfg)
        assert np.max(np.abs(series["zeroth_mean"] - series["ref_mean"])) \
            < 1e-6
