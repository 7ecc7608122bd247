import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nvsram import montecarlo as mc
from nvsram import mtj as mtjmod
from nvsram import power
from nvsram.errors import ParameterError


@pytest.fixture(scope="module")
def thermal_samples(params):
    return mc.switching_samples(params, mc.McConfig(n_runs=1000, overdrive=0.9, seed=7))


class TestConfig:
    @pytest.mark.parametrize("kw", [{"n_runs": 0}, {"temperature": -1.0}, {"horizon": 0.0},
                                    {"workers": 0}, {"pulse_widths": (-1e-9,)}])
    def test_rejects(self, kw):
        with pytest.raises(ParameterError):
            mc.McConfig(**kw)

    def test_run_rng_depends_on_seed_and_index(self):
        draw = lambda s, i: mc.run_rng(s, i).standard_normal(4)
        np.testing.assert_array_equal(draw(3, 5), draw(3, 5))
        assert not np.array_equal(draw(3, 5), draw(3, 6))
        assert not np.array_equal(draw(3, 5), draw(4, 5))


class TestSwitchingEnsemble:
    def test_zero_temperature_no_spread(self, params):
        s = mc.switching_ensemble(params, mc.McConfig(n_runs=5, temperature=0.0))
        assert s.std == 0.0
        assert s.n_failures == 0
        assert s.min == s.max

    def test_single_run_zero_variance(self, params):
        s = mc.switching_ensemble(params, mc.McConfig(n_runs=1, temperature=0.0))
        assert s.n == 1 and s.std == 0.0

    def test_thermal_spread(self, params):
        s = mc.switching_ensemble(params, mc.McConfig(n_runs=500, overdrive=1.5, seed=1))
        assert s.std > 0
        assert s.n_failures == 0

    def test_reproducible(self, params):
        cfg = mc.McConfig(n_runs=20, seed=11)
        a = mc.switching_ensemble(params, cfg)
        b = mc.switching_ensemble(params, cfg)
        assert a.summary() == b.summary()
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_seed_isolation(self, params):
        cfg = mc.McConfig(n_runs=8, seed=5)
        forward = mc.switching_samples(params, cfg)
        current = cfg.overdrive * params.ic0_target
        for i in reversed(range(cfg.n_runs)):
            t = mtjmod.switching_time(params, current, cfg.temperature, mc.run_rng(cfg.seed, i))
            assert t == forward[i]

    def test_parallel_matches_sequential(self, params):
        cfg = mc.McConfig(n_runs=8, seed=5)
        assert mc.switching_samples(params, cfg) == mc.switching_samples(params, dataclasses.replace(cfg, workers=4))

    def test_mean_decreases_with_overdrive(self, params):
        means = [mc.switching_ensemble(params, mc.McConfig(n_runs=100, overdrive=od, seed=2)).mean
                 for od in (1.2, 1.5, 2.0)]
        assert means[0] > means[1] > means[2]

    def test_failures_excluded_from_times(self, params):
        s = mc.switching_ensemble(params, mc.McConfig(n_runs=10, overdrive=0.5, horizon=1e-9, seed=3))
        assert s.n_failures == 10
        assert s.error_rate == 1.0
        assert np.isnan(s.mean) and len(s.samples) == 0


class TestErrorRate:
    def test_zero_pulse(self, thermal_samples):
        assert mc.error_rate_from_samples(thermal_samples, 0.0)[0] == 1.0

    def test_long_pulse(self, thermal_samples):
        assert mc.error_rate_from_samples(thermal_samples, 50e-9)[0] == 0.0

    def test_non_increasing(self, thermal_samples):
        rates = [mc.error_rate_from_samples(thermal_samples, pw)[0] for pw in (2e-9, 5e-9, 10e-9)]
        assert rates[0] >= rates[1] >= rates[2]
        assert rates[0] > rates[2]

    def test_interval_brackets_rate(self, thermal_samples):
        for pw in (1e-9, 2e-9, 5e-9):
            rate, (lo, hi) = mc.error_rate_from_samples(thermal_samples, pw)
            assert 0.0 <= lo <= rate <= hi <= 1.0

    def test_negative_pulse(self, thermal_samples):
        with pytest.raises(ParameterError):
            mc.error_rate_from_samples(thermal_samples, -1e-9)

    def test_wrapper(self, params):
        cfg = mc.McConfig(n_runs=20, overdrive=0.9, seed=7)
        samples = mc.switching_samples(params, cfg)
        assert mc.write_error_rate(params, cfg, 2e-9) == mc.error_rate_from_samples(samples, 2e-9)

    @given(st.lists(st.one_of(st.none(), st.floats(0, 1e-8)), min_size=1, max_size=50),
           st.floats(0, 1e-8), st.floats(0, 1e-8))
    def test_monotone_property(self, samples, a, b):
        lo, hi = sorted((a, b))
        assert mc.error_rate_from_samples(samples, hi)[0] <= mc.error_rate_from_samples(samples, lo)[0]


class TestStats:
    @given(st.lists(st.one_of(st.none(), st.floats(1e-12, 1e-8)), min_size=1, max_size=60))
    def test_invariants(self, values):
        s = mc.McStats.from_samples(values)
        assert 0.0 <= s.error_rate <= 1.0
        assert 0.0 <= s.error_ci[0] <= s.error_rate <= s.error_ci[1] <= 1.0
        assert s.n_failures == sum(v is None for v in values)
        if len(s.samples):
            assert s.min <= s.q50 <= s.q95 <= s.q99 <= s.max
            assert s.std >= 0

    def test_example(self):
        s = mc.McStats.from_samples([1.0, 2.0, 3.0, None])
        assert s.mean == 2.0
        assert s.std == pytest.approx(1.0)
        assert s.error_rate == 0.25
        assert s.q50 == 2.0

    def test_summary_serializable(self):
        d = mc.McStats.from_samples([1.0, 2.0]).summary()
        assert "samples" not in d
        assert isinstance(d["error_ci"], list)


class TestSavingsEnsemble:
    def test_zero_temperature_matches_comparison(self, cell_config):
        ens = mc.termination_savings_ensemble(cell_config, mc.McConfig(n_runs=1, temperature=0.0))
        ref = power.backup_comparison(cell_config)
        run = ens.runs[0]
        assert run.terminated == ref.mean(True)
        assert run.baseline == ref.mean(False)
        assert ens.savings.mean == ref.savings_percent()
        assert ens.savings.std == 0.0

    def test_thermal_pairs(self, cell_config):
        cfg = mc.McConfig(n_runs=2, temperature=300.0, seed=4)
        ens = mc.termination_savings_ensemble(cell_config, cfg)
        for r in ens.runs:
            assert r.terminated < r.baseline
            assert r.baseline_mtj_bits == (0, 1)
            assert all(t is not None for t in r.termination_times)
        assert ens.savings.mean > 0
        assert ens.summary()["all_paired_terminated_le_baseline"]

    def test_run_isolated(self, cell_config):
        cfg = mc.McConfig(n_runs=2, temperature=300.0, seed=4)
        alone = mc.paired_backup(cell_config, cfg, 1)
        again = mc.paired_backup(cell_config, cfg, 1)
        assert alone == again
