import math

import numpy as np
import pytest

from stabprobe.signals import (
    RngSeed,
    SourceSpec,
    generate_sources,
    gg_excess_kurtosis,
    mix,
    random_orthogonal,
    sample_ar1,
    sample_gg,
    write_signals_csv,
)


def gamma_kurtosis(p):
    # independent oracle: direct Gamma-function closed form
    return math.gamma(5 / p) * math.gamma(1 / p) / math.gamma(3 / p) ** 2 - 3


def excess_kurtosis(x):
    x = x - x.mean()
    return np.mean(x ** 4) / np.mean(x ** 2) ** 2 - 3


def autocorr(x, lag):
    x = x - x.mean()
    return np.dot(x[lag:], x[:-lag]) / np.dot(x, x)


@pytest.mark.parametrize("p", [0.5, 0.8, 1.0, 1.5, 2.0, 3.0])
def test_closed_form_kurtosis(p):
    assert gg_excess_kurtosis(p) == pytest.approx(gamma_kurtosis(p), rel=1e-12, abs=1e-12)


def test_gaussian_boundary():
    x = sample_gg(2.0, 200000, RngSeed(5))
    assert abs(excess_kurtosis(x)) < 0.05
    assert x.var() == pytest.approx(1.0, abs=0.01)


def test_laplace_kurtosis():
    assert gamma_kurtosis(1.0) == pytest.approx(3.0)
    x = sample_gg(1.0, 10 ** 6, RngSeed(7))
    assert excess_kurtosis(x) == pytest.approx(3.0, abs=0.1)


def test_p08_kurtosis_within_five_percent():
    x = sample_gg(0.8, 10 ** 6, RngSeed(8))
    assert excess_kurtosis(x) == pytest.approx(gamma_kurtosis(0.8), rel=0.05)


def test_gg_symmetric_mean():
    x = sample_gg(1.0, 10 ** 6, RngSeed(9))
    assert abs(x.mean()) < 0.005


@pytest.mark.parametrize("p", [0.0, -1.0])
def test_gg_rejects_bad_shape(p):
    with pytest.raises(ValueError):
        sample_gg(p, 10, RngSeed(0))


def test_ar1_autocorrelation():
    x = sample_ar1(0.9, 10 ** 5, RngSeed(1))
    assert x.std() == pytest.approx(1.0)
    assert autocorr(x, 1) == pytest.approx(0.9, abs=0.01)
    y = sample_ar1(0.6, 10 ** 5, RngSeed(2))
    assert autocorr(y, 2) == pytest.approx(0.36, abs=0.01)
    w = sample_ar1(0.0, 10 ** 5, RngSeed(3))
    assert abs(autocorr(w, 1)) < 0.01


@pytest.mark.parametrize("a", [1.0, -1.0, 1.5])
def test_ar1_rejects_nonstationary(a):
    with pytest.raises(ValueError):
        sample_ar1(a, 10, RngSeed(0))


def test_ar1_gg_innovations():
    x = sample_ar1(0.6, 10 ** 5, RngSeed(4), innovation="gg", p=1.0)
    assert autocorr(x, 1) == pytest.approx(0.6, abs=0.01)


def test_generate_sources_ar_independence():
    S = generate_sources(SourceSpec("ar1-gaussian", a=(0.2, 0.6, 0.9)), 3, 10 ** 5, RngSeed(11))
    C = np.corrcoef(S.T)
    assert np.all(np.abs(C[np.triu_indices(3, 1)]) < 0.02)


def test_generate_sources_unit_variance():
    S = generate_sources(SourceSpec("iid-gg", p=2.0), 3, 10 ** 5, RngSeed(12))
    np.testing.assert_allclose(S.var(axis=0), 1.0, atol=0.02)


def test_generate_sources_deterministic():
    spec = SourceSpec("ar1-gg", p=1.5, a=(0.2, 0.6, 0.9))
    a = generate_sources(spec, 3, 2000, RngSeed(13, 4))
    b = generate_sources(spec, 3, 2000, RngSeed(13, 4))
    assert a.tobytes() == b.tobytes()


def test_adding_channels_keeps_existing():
    a = generate_sources(SourceSpec("iid-gg", p=1.0), 2, 1000, RngSeed(3))
    b = generate_sources(SourceSpec("iid-gg", p=1.0), 4, 1000, RngSeed(3))
    np.testing.assert_array_equal(a, b[:, :2])


def test_generate_sources_rejects_wrong_ar_length():
    with pytest.raises(ValueError):
        generate_sources(SourceSpec("ar1-gaussian", a=(0.2, 0.6)), 3, 100, RngSeed(0))


def test_distinct_streams_uncorrelated():
    x = sample_gg(1.0, 10 ** 4, RngSeed(42, 0))
    y = sample_gg(1.0, 10 ** 4, RngSeed(42, 1))
    assert abs(np.corrcoef(x, y)[0, 1]) < 0.05


def test_rng_seed_validation():
    with pytest.raises(ValueError):
        RngSeed(-1)
    with pytest.raises(ValueError):
        RngSeed(2 ** 64)
    assert RngSeed(1, 3).stream == (3,)
    assert RngSeed(1, 3).child(2) == RngSeed(1, (3, 2))


def test_mix():
    S = np.random.default_rng(0).standard_normal((50, 3))
    np.testing.assert_array_equal(mix(np.eye(3), S), S)
    np.testing.assert_array_equal(mix(2 * np.eye(3), S), 2 * S)
    P = np.eye(3)[[1, 2, 0]]
    np.testing.assert_array_equal(mix(P, S), S[:, [1, 2, 0]])
    with pytest.raises(ValueError):
        mix(np.eye(2), S)


def test_random_orthogonal():
    Q = random_orthogonal(4, RngSeed(1))
    np.testing.assert_allclose(Q @ Q.T, np.eye(4), atol=1e-12)


def test_signal_csv(tmp_path):
    X = np.array([[0.1, 1 / 3], [2.0, -1e-20]])
    path = tmp_path / "sig.csv"
    write_signals_csv(path, X)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,ch1,ch2"
    back = np.loadtxt(path, delimiter=",", skiprows=1)[:, 1:]
    np.testing.assert_array_equal(back, X)
