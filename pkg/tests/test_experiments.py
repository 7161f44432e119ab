import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stabprobe.experiments import (
    ExperimentConfig,
    TrialError,
    first_crossing,
    frontier,
    iso_band,
    monte_carlo,
    population_sos_matrices,
    run_hos_sweep,
    run_sos_sweep,
    run_tradeoff_hos,
    run_tradeoff_sos,
    worker_count,
)
from stabprobe.linalg import skew_basis


def brute_sos_probe(a, L):
    # diagonal lagged covariances: the commutator Jacobian has orthogonal
    # columns, so the singular values are the stacked column norms
    a = np.asarray(a)
    norms = [np.sqrt(2 * sum((a[i] ** t - a[j] ** t) ** 2 for t in range(1, L + 1)))
             for i, j in skew_basis(len(a)).pairs]
    return min(norms)


def test_monte_carlo_constant_and_single():
    mean, std, values, _ = monte_carlo(lambda s: 1.5, 7, 0)
    assert mean == 1.5 and std == 0.0 and values.shape == (7,)
    mean, std, _, _ = monte_carlo(lambda s: s.generator().standard_normal(), 1, 3)
    assert std == 0.0


def test_monte_carlo_deterministic_and_thread_independent():
    task = lambda s: s.generator().standard_normal(3)
    a = monte_carlo(task, 9, 11, (2,), workers=1)
    b = monte_carlo(task, 9, 11, (2,), workers=1)
    c = monte_carlo(task, 9, 11, (2,), workers=4)
    assert a[2].tobytes() == b[2].tobytes() == c[2].tobytes()
    assert a[0].tobytes() == c[0].tobytes()


def test_monte_carlo_stream_is_trial_index():
    seen = []
    monte_carlo(lambda s: seen.append(s.stream) or 0.0, 3, 5, (1,))
    assert seen == [(1, 0), (1, 1), (1, 2)]


def test_monte_carlo_failure_names_trial():
    def task(s):
        if s.stream[-1] == 2:
            raise FloatingPointError("boom")
        return 0.0
    with pytest.raises(TrialError, match="trial 2"):
        monte_carlo(task, 4, 0)
    with pytest.raises(ValueError):
        monte_carlo(task, 0, 0)


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("STABPROBE_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("STABPROBE_THREADS", "0")
    assert worker_count() >= 1


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(trials=0)
    with pytest.raises(ValueError):
        ExperimentConfig(eps=0)
    with pytest.raises(ValueError):
        ExperimentConfig(delta=-0.1)
    with pytest.raises(ValueError):
        ExperimentConfig(p_grid=())
    q = ExperimentConfig.quick()
    assert (q.T, q.trials, q.preset) == (20000, 20, "quick")
    d = ExperimentConfig()
    assert (d.n, d.T, d.trials, d.p_grid, d.L_grid, d.a, d.K_grid, d.eps, d.delta) == (
        3, 100000, 50, (0.8, 1.0, 1.5, 2.0, 3.0), tuple(range(1, 8)), (0.2, 0.6, 0.9),
        tuple(range(1, 7)), 0.5, 0.05)


def test_first_crossing_examples():
    assert first_crossing([0.1, 0.4, 0.6], [1, 2, 3], 0.5) == 3
    assert first_crossing([0.1, 0.2, 0.3], [1, 2, 3], 0.5) is None
    assert frontier(np.array([[0.1, 0.4, 0.6], [0.6, 0.7, 0.8], [0, 0, 0]]), [1, 2, 3], 0.5) == [3, 1, None]


@given(st.lists(st.floats(0, 2), min_size=1, max_size=8), st.floats(0.01, 2), st.floats(0.01, 2))
def test_frontier_monotone_in_eps(means, e1, e2):
    e1, e2 = sorted((e1, e2))
    grid = list(range(1, len(means) + 1))
    f1, f2 = first_crossing(means, grid, e1), first_crossing(means, grid, e2)
    if f1 is not None and f2 is not None:
        assert f1 <= f2
    if f1 is None:
        assert f2 is None


def test_iso_band_example():
    np.testing.assert_array_equal(iso_band([0.44, 0.52, 0.61], 0.5, 0.05), [False, True, False])


def test_population_sos_sweep_matches_oracle():
    cfg = ExperimentConfig(mode="population", trials=2, report_api=False)
    res = run_sos_sweep(cfg)
    oracle = [brute_sos_probe(cfg.a, L) for L in cfg.L_grid]
    np.testing.assert_allclose(res.probe_mean, oracle, atol=1e-10)
    assert res.probe_mean[0] == pytest.approx(np.sqrt(2) * 0.3, abs=1e-10)
    assert np.all(np.diff(res.probe_mean) >= 0)
    assert np.all(res.probe_std == 0)
    assert res.api_mean is None
    assert len(res.records) == 2 * len(cfg.L_grid)


def test_population_matrices():
    R = population_sos_matrices((0.5, 0.2), [0, 2])
    np.testing.assert_array_equal(R[0], np.eye(2))
    np.testing.assert_allclose(R[1], np.diag([0.25, 0.04]))


def test_population_tradeoff_sos_is_p_invariant():
    cfg = ExperimentConfig(mode="population", trials=1)
    res = run_tradeoff_sos(cfg)
    for row in res.probe_mean[1:]:
        np.testing.assert_allclose(row, res.probe_mean[0], atol=1e-12)
    assert res.frontier == [2] * len(cfg.p_grid)


def test_population_tradeoff_hos():
    cfg = ExperimentConfig(mode="population", trials=1)
    res = run_tradeoff_hos(cfg)
    i2 = cfg.p_grid.index(2.0)
    assert np.all(res.probe_mean[i2] < 1e-12)  # kurtosis(2) is zero up to rounding
    assert res.frontier[i2] is None
    assert np.all(np.diff(res.probe_mean, axis=1) >= -1e-12)
    assert res.band.shape == res.probe_mean.shape


@pytest.fixture(scope="module")
def quick_hos():
    return run_hos_sweep(ExperimentConfig.quick())


def test_quick_hos_minimum_at_gaussian(quick_hos):
    p = quick_hos.axes["p"]
    assert p[int(np.argmin(quick_hos.probe_mean))] == 2.0
    assert len(quick_hos.records) == 20 * len(p)
    assert quick_hos.api_mean[p.index(2.0)] > quick_hos.api_mean[p.index(1.0)]


def test_sample_sweeps_reproducible():
    cfg = ExperimentConfig(T=3000, trials=3, L_grid=(1, 2, 3))
    a, b = run_sos_sweep(cfg), run_sos_sweep(cfg, workers=3)
    assert a.probe_mean.tobytes() == b.probe_mean.tobytes()
    assert a.api_mean.tobytes() == b.api_mean.tobytes()
    assert all(r.probe >= 0 and np.isfinite(r.probe) for r in a.records)


def test_sample_tradeoffs_shapes():
    cfg = ExperimentConfig(T=2000, trials=2, p_grid=(1.0, 2.0), L_grid=(1, 2), K_grid=(1, 3, 6))
    sos = run_tradeoff_sos(cfg)
    assert sos.probe_mean.shape == (2, 2) and len(sos.frontier) == 2
    hos = run_tradeoff_hos(cfg)
    assert hos.probe_mean.shape == (2, 3)
    # top-K sets are nested, so per-trial probes are non-decreasing in K
    per_trial = {}
    for r in hos.records:
        per_trial.setdefault((r.coords[0], r.trial), []).append(r.probe)
    for probes in per_trial.values():
        assert np.all(np.diff(probes) >= -1e-12)
    with pytest.raises(ValueError):
        run_tradeoff_hos(cfg.with_(K_grid=(7,)))
