"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as the
criteria execute.  Criterion 1 runs a 200-trial benchmark campaign
single-threaded and dominates the runtime (minutes); everything else is
seconds.
"""

import functools
import time

import numpy as np
import pytest

from cascal import cascade, lut, montecarlo, sim
from cascal.cascade import CalibrationDataset
from cascal.gp import TrainingSet, fit, log_marginal_likelihood, predict_cov, predict_mean
from cascal.kernels import Hyperparameters, PriorMean, kernel_matrix
from cascal.numerics import factor_psd

import _oracles

IDENTITY = PriorMean.identity()


def criterion(number, name, runtime_limit_s):
    """Print one pass/fail line per criterion and enforce its runtime."""

    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            start = time.perf_counter()
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"[acceptance] criterion {number} ({name}): FAIL")
                raise
            elapsed = time.perf_counter() - start
            print(
                f"[acceptance] criterion {number} ({name}): PASS"
                f" ({elapsed:.1f}s)"
            )
            assert elapsed <= runtime_limit_s, (
                f"criterion {number} took {elapsed:.1f}s,"
                f" limit {runtime_limit_s}s"
            )
        return wrapper

    return decorate


@criterion(1, "benchmark distribution ordering", 20 * 60)
def test_criterion_1_campaign_ordering():
    # 200 trials at the benchmark defaults, single-threaded
    results = montecarlo.run_campaign(200, 0, montecarlo.TrialConfig(), max_parallel=1)
    summary = montecarlo.summarize(results)
    assert summary.n_flagged == 0
    med = {m: summary.methods[m].median for m in montecarlo.METHODS}
    assert med["bayes"] < med["alt1"] < med["alt2"]
    assert summary.methods["bayes"].win_rate["alt1"] >= 0.6
    assert summary.methods["bayes"].win_rate["alt2"] >= 0.8


@criterion(2, "regression oracle equivalence", 5)
def test_criterion_2_oracle_equivalence():
    rng = np.random.default_rng(2024)
    for _ in range(50):
        n = int(rng.integers(2, 11))
        x = np.sort(rng.uniform(0.0, 1.0, n)) + 0.01 * np.arange(n)
        targets = rng.normal(size=n)
        cov = 0.1 * _oracles.random_spd(rng, n, cond=50.0)
        ts = TrainingSet(x, targets, cov)
        hp = Hyperparameters(
            length_scale=float(rng.uniform(0.3, 2.0)),
            signal_variance=float(rng.uniform(0.5, 2.0)),
            noise_variance=float(rng.uniform(1e-3, 1e-1)),
        )
        y_star = rng.uniform(-0.2, 1.2, 6)
        posterior = fit(ts, hp, IDENTITY)
        jit = posterior.gram_factor.jitter_used
        np.testing.assert_allclose(
            predict_mean(posterior, y_star),
            _oracles.predict_mean_bruteforce(ts, hp, IDENTITY, y_star, jit),
            rtol=1e-9, atol=1e-12,
        )
        np.testing.assert_allclose(
            predict_cov(posterior, y_star),
            _oracles.predict_cov_bruteforce(ts, hp, IDENTITY, y_star, jit),
            rtol=1e-9, atol=1e-12,
        )
        assert log_marginal_likelihood(ts, hp, IDENTITY) == pytest.approx(
            _oracles.lml_bruteforce(ts, hp, IDENTITY, jit), rel=1e-9
        )


@criterion(3, "prior recovery and interpolation", 1)
def test_criterion_3_prior_and_interpolation():
    hp = Hyperparameters(0.4, 1.3, 0.0)
    empty = fit(TrainingSet.exact([], []), hp, IDENTITY)
    y_star = np.array([-0.5, 0.0, 0.3, 1.2])
    np.testing.assert_array_equal(predict_mean(empty, y_star), y_star)
    np.testing.assert_array_equal(
        predict_cov(empty, y_star), kernel_matrix(y_star, y_star, hp)
    )

    x = np.linspace(0.0, 1.0, 9)
    targets = x + 0.03 * np.sin(5.0 * x)
    noiseless = fit(TrainingSet.exact(x, targets), hp, IDENTITY)
    residual = predict_mean(noiseless, x) - targets
    assert np.max(np.abs(residual)) <= 1e-6
    variance = np.diag(predict_cov(noiseless, x))
    assert np.all(variance <= 1e-8 * hp.signal_variance)


@criterion(4, "covariance propagation", 5)
def test_criterion_4_propagation():
    # moderate noise keeps the Gram matrix well conditioned, so the two
    # algebraically identical routes can actually agree to 1e-9
    hp = Hyperparameters(0.5, 1.1, 1e-2)
    stage_ts = TrainingSet.exact(
        np.r_[np.linspace(0.0, 0.35, 8), np.linspace(0.65, 1.0, 8)],
        np.r_[np.linspace(0.02, 0.37, 8), np.linspace(0.63, 0.98, 8)],
    )
    stage_one = fit(stage_ts, hp, IDENTITY)
    rng = np.random.default_rng(4)
    d1 = CalibrationDataset(np.linspace(0.0, 1.0, 30),
                            np.sort(rng.uniform(0.0, 1.0, 30)))
    propagated = cascade.propagate(d1, stage_one)
    expected = _oracles.predict_cov_bruteforce(
        stage_ts, hp, IDENTITY, d1.y, stage_one.gram_factor.jitter_used
    )
    np.testing.assert_allclose(
        propagated.target_cov, expected, rtol=1e-9, atol=1e-12
    )
    cov = propagated.target_cov
    assert np.max(np.abs(cov - cov.T)) <= 1e-9 * (1.0 + np.max(np.abs(cov)))
    factor_psd(cov, max_jitter=1e-5 * float(np.max(np.diag(cov))))

    # the two regression methods may differ only after propagation
    rng = np.random.default_rng(41)
    grid = np.linspace(0.0, 1.0, 24)
    d1s = CalibrationDataset(grid, grid + rng.normal(0.0, 1e-4, 24))
    d2s = CalibrationDataset(grid, grid + rng.normal(0.0, 1e-4, 24))
    bayes = cascade.calibrate_cascaded(d1s, d2s)
    alt1 = cascade.calibrate_alternative1(d1s, d2s)
    assert bayes.stage_one.hp == alt1.stage_one.hp
    np.testing.assert_array_equal(bayes.stage_one.weights, alt1.stage_one.weights)
    np.testing.assert_array_equal(
        bayes.stage_one.gram_factor.lower_triangular,
        alt1.stage_one.gram_factor.lower_triangular,
    )
    np.testing.assert_array_equal(
        bayes.stage_two.train.targets, alt1.stage_two.train.targets
    )
    np.testing.assert_array_equal(
        alt1.stage_two.train.target_cov,
        alt1.stage_one.hp.noise_variance * np.eye(d1s.n),
    )
    assert not np.array_equal(
        bayes.stage_two.train.target_cov, alt1.stage_two.train.target_cov
    )


@criterion(5, "cost oracle", 1)
def test_criterion_5_cost_oracle():
    identity = sim.TruthPair(
        sim.SensorTruth(np.zeros(0), np.zeros(0), np.zeros(0), 0.0),
        sim.SensorTruth(np.zeros(0), np.zeros(0), np.zeros(0), 0.0),
    )
    offset = sim.cost_j(lambda y: np.asarray(y) + 0.02, identity)
    assert offset == pytest.approx(0.02, abs=1e-6)
    sine = sim.cost_j(
        lambda y: np.asarray(y) + np.sin(2.0 * np.pi * np.asarray(y)), identity
    )
    assert sine == pytest.approx(1.0 / np.sqrt(2.0), abs=1e-4)
    pair, _ = sim.sample_truth_pair(12)
    perfect = sim.cost_j(lambda y: sim.true_f13(pair, y), pair)
    assert perfect <= 1e-8


@criterion(6, "dataset construction", 1)
def test_criterion_6_dataset_construction():
    pair, _ = sim.sample_truth_pair(0)
    d2 = sim.generate_d2(pair, rng=sim.substream(0, 2))
    assert d2.n == 64
    d1 = sim.generate_d1(pair, rng=sim.substream(0, 1))
    assert d1.n == 100

    rng = np.random.default_rng(6)
    checked = 0
    while checked < 25:
        n_grid = int(rng.integers(4, 80))
        edge = int(rng.integers(0, 12))
        center = int(rng.integers(0, 12))
        kept = n_grid - 2 * edge - center
        start = (n_grid - center) // 2
        if kept < 2 or start < edge or start + center > n_grid - edge:
            continue
        out = sim.generate_d2(pair, n_grid, edge, center, sim.substream(7, checked))
        assert out.n == kept
        checked += 1


@criterion(7, "parallel determinism", 3 * 60)
def test_criterion_7_parallel_determinism(tmp_path):
    cfg = montecarlo.TrialConfig()
    serial = montecarlo.run_campaign(16, 100, cfg, max_parallel=1)
    parallel = montecarlo.run_campaign(16, 100, cfg, max_parallel=8)
    a, b = tmp_path / "serial.csv", tmp_path / "parallel.csv"
    montecarlo.write_trials_csv(serial, a)
    montecarlo.write_trials_csv(parallel, b)
    assert a.read_bytes() == b.read_bytes()


@criterion(8, "lookup-table baseline", 1)
def test_criterion_8_lut_baseline():
    rng = np.random.default_rng(8)
    xs = np.sort(rng.uniform(0.0, 1.0, 12)) + 0.01 * np.arange(12)
    ys = rng.normal(size=12)
    t = lut.build_lut(CalibrationDataset(xs, ys))
    for x, y in zip(t.breakpoints, t.values):
        assert lut.lut_eval(t, float(x)) == y
    mids = 0.5 * (t.breakpoints[:-1] + t.breakpoints[1:])
    want = 0.5 * (t.values[:-1] + t.values[1:])
    np.testing.assert_allclose(lut.lut_eval(t, mids), want, rtol=0, atol=1e-12)

    two = lut.build_lut(
        CalibrationDataset(np.array([0.0, 1.0]), np.array([0.0, 2.0]))
    )
    assert lut.lut_eval(two, 1.5, extrapolation="slope") == pytest.approx(3.0)
    assert lut.lut_eval(two, -0.5, extrapolation="slope") == pytest.approx(-1.0)
    assert lut.lut_eval(two, 1.5, extrapolation="clamp") == 2.0
    assert lut.lut_eval(two, -0.5, extrapolation="clamp") == 0.0
