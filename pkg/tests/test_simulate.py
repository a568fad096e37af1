from __future__ import annotations

import io
import json

import numpy as np
import pytest

from compcap.channels import Channel, ChannelFamily, builtin_family, density_table
from compcap.errors import ParameterOutOfRange, ResourceLimit
from compcap.optimize import SearchConfig, solve_cr
from compcap.simulate import (
    SimConfig,
    SimReport,
    estimate,
    generate_codebook,
    run_trial,
    trial_seeds,
)


@pytest.fixture(scope="module")
def noiseless():
    return ChannelFamily.from_channels([Channel("id", np.eye(2))])


@pytest.fixture(scope="module")
def erasure():
    fam = builtin_family("bilingual_erasure", eps=0.5)
    return fam, solve_cr(fam, SearchConfig(starts=4, refine=4)).schedule


class TestConfig:
    def test_boundaries_and_horizon(self, erasure):
        fam, sched = erasure
        cfg = SimConfig(fam, sched, k=10, delta=0.25, trials=1)
        T = np.asarray(cfg.profile.cumulative)
        np.testing.assert_allclose(cfg.boundaries, 1.25 * T * 10)
        assert cfg.horizon == int(np.ceil(1.25 * T[-1] * 10))
        assert cfg.threshold == pytest.approx(11.25)

    def test_boundary_symbol_goes_to_later_phase(self, noiseless):
        fam = ChannelFamily.from_channels([Channel("a", np.eye(2)), Channel("b", [[0.9, 0.1], [0.1, 0.9]])])
        cfg = SimConfig(fam, [[0.5, 0.5], [0.5, 0.5]], k=4, delta=1.0, trials=1)
        b = cfg.boundaries[0]
        assert b == pytest.approx(8.0)
        assert cfg.phase_of(7) == 0 and cfg.phase_of(8) == 1

    def test_guards(self, noiseless, erasure):
        with pytest.raises(ResourceLimit):
            SimConfig(noiseless, [[0.5, 0.5]], k=17, delta=0.5, trials=1)
        fam, sched = erasure
        with pytest.raises(ResourceLimit):
            SimConfig(fam, sched, k=12, delta=0.25, trials=1, symbol_budget=1000)
        with pytest.raises(ParameterOutOfRange):
            SimConfig(noiseless, [[0.5, 0.5]], k=4, delta=0.0, trials=1)
        with pytest.raises(ParameterOutOfRange):
            SimConfig(noiseless, [[0.5, 0.5]], k=4, delta=0.5, trials=0)
        with pytest.raises(ResourceLimit):
            # Block-1 inputs never help the second channel.
            SimConfig(fam, [[0.5, 0.5, 0, 0]] * 2, k=4, delta=0.5, trials=1)


class TestCodebook:
    def test_tiny_codebook(self, noiseless):
        cfg = SimConfig(noiseless, [[0.5, 0.5]], k=1, delta=0.5, trials=1)
        cb = generate_codebook(cfg)
        assert cb.symbols.shape == (2, 2)
        assert cb.symbol(0, 5) == 0

    def test_deterministic(self, erasure):
        fam, sched = erasure
        cfg = SimConfig(fam, sched, k=6, delta=0.25, trials=1, seed=3)
        assert np.array_equal(generate_codebook(cfg).symbols, generate_codebook(cfg).symbols)

    def test_symbol_frequencies(self, erasure):
        fam, sched = erasure
        cfg = SimConfig(fam, sched, k=14, delta=0.25, trials=1, seed=1)
        cb = generate_codebook(cfg)
        n = cb.symbols.shape[0]
        for i in range(cb.horizon):
            p = np.asarray(sched[cb.phases[i]])
            counts = np.bincount(cb.symbols[:, i], minlength=len(p))
            sigma = np.sqrt(n * p * (1 - p))
            assert np.all(np.abs(counts - n * p) <= 3 * sigma + 1e-9)


class TestTrial:
    def test_noiseless_stops_at_threshold(self, noiseless):
        cfg = SimConfig(noiseless, [[0.5, 0.5]], k=4, delta=0.5, trials=1)
        for i in range(20):
            cb_seed, noise = trial_seeds(0, 0, i)
            cb = generate_codebook(cfg, cb_seed)
            res = run_trial(cfg, cb, noise)
            # One bit per symbol; the threshold is k (1 + delta/2) = 5 bits.
            assert res.stop_time == 5
            assert np.array_equal(cb.symbols[res.decoded, :5], cb.symbols[res.message, :5])
            assert res.decoded <= res.message

    def test_true_tracker_crosses(self, erasure):
        fam, sched = erasure
        cfg = SimConfig(fam, sched, k=8, delta=0.25, trials=1)
        for i in range(10):
            cb_seed, noise = trial_seeds(0, 1, i)
            res, sums = run_trial(cfg, generate_codebook(cfg, cb_seed), noise, channel=1, return_sums=True)
            assert 1 <= res.stop_time <= cfg.horizon
            if res.crossed:
                assert sums[res.decoded].max() >= cfg.threshold

    def test_tracker_additivity(self, erasure):
        fam, sched = erasure
        cfg = SimConfig(fam, sched, k=6, delta=0.25, trials=1)
        cb_seed, noise = trial_seeds(5, 0, 0)
        cb = generate_codebook(cfg, cb_seed)
        res, sums = run_trial(cfg, cb, noise, channel=0, return_sums=True)
        # Replay the channel draw and add densities from scratch.
        rng = np.random.default_rng(noise)
        msg = int(rng.integers(cb.symbols.shape[0]))
        assert msg == res.message
        W = fam.matrices[0]
        x = cb.symbols[msg]
        y = np.minimum((rng.random(cb.horizon)[:, None] > np.cumsum(W, axis=1)[x]).sum(axis=1), W.shape[1] - 1)
        for s, Ws in enumerate(fam.matrices):
            total = np.zeros(cb.symbols.shape[0])
            rejected = False
            for t in range(res.stop_time):
                d, rej = density_table(Ws, np.asarray(sched[cb.phases[t]]))
                if y[t] >= Ws.shape[1] or rej[y[t]]:
                    rejected = True
                    break
                total += d[cb.symbols[:, t], y[t]]
            if rejected:
                assert np.all(sums[:, s] == -1e18)
                continue
            ok = total > -1e17
            np.testing.assert_allclose(sums[ok, s], total[ok], atol=1e-9)
            assert np.all(sums[~ok, s] == -1e18)


class TestEstimate:
    def test_noiseless_mean(self, noiseless):
        rep = estimate(SimConfig(noiseless, [[0.5, 0.5]], k=4, delta=0.5, trials=10))
        assert rep.channels[0].mean_stop_time == 5.0

    def test_single_trial_matches_run_trial(self, erasure):
        fam, sched = erasure
        cfg = SimConfig(fam, sched, k=6, delta=0.25, trials=1, seed=9, true_channel=1)
        rep = estimate(cfg)
        cb_seed, noise = trial_seeds(9, 1, 0)
        assert rep.trials == (run_trial(cfg, generate_codebook(cfg, cb_seed), noise, channel=1),)

    def test_reproducible_and_round_trip(self, erasure):
        fam, sched = erasure
        cfg = SimConfig(fam, sched, k=6, delta=0.25, trials=5, seed=4)
        a, b = estimate(cfg), estimate(cfg)
        assert a.to_json() == b.to_json()
        back = SimReport.from_dict(json.loads(a.to_json()))
        assert back.trials == a.trials
        assert all(0 <= c.error_rate <= 1 for c in back.channels)

    def test_trial_csv(self, erasure):
        fam, sched = erasure
        rep = estimate(SimConfig(fam, sched, k=4, delta=0.25, trials=2, seed=1))
        buf = io.StringIO()
        rep.write_trials_csv(buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "trial,channel,stop_time,correct"
        assert len(lines) == 1 + 2 * fam.size

    def test_trend_in_k(self, erasure):
        fam, sched = erasure
        ks = [8, 10, 12, 14]
        reps = [estimate(SimConfig(fam, sched, k=k, delta=0.25, trials=100, seed=0)) for k in ks]
        for s in range(fam.size):
            errors = [r.channels[s].error_rate for r in reps]
            assert np.polyfit(ks, errors, 1)[0] <= 0
        last = reps[-1]
        assert last.empirical_cr <= last.theoretical_cr
        assert last.empirical_cr >= 0.85 * last.theoretical_cr
