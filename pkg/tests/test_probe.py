import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stabprobe.experiments import population_sos_matrices
from stabprobe.linalg import expm_skew, skew_basis
from stabprobe.probe import (
    JacobianReport,
    ObservationEvaluator,
    StabilizerProbe,
    evaluate_phi,
    jacobian_fd,
    jacobian_sos_analytic,
    kernel_intersection_check,
    probe,
    report_from_jacobian,
    rotate_signals,
)
from stabprobe.signals import RngSeed, SourceSpec, generate_sources, random_orthogonal
from stabprobe.statistics import Whitener, cumulant_tensor_from_kurtosis, sos_constraints

BASIS = skew_basis(3)
A = (0.2, 0.6, 0.9)


def brute_commutator_jacobian(R_list):
    """Independent oracle: build [R, Omega_k] entry by entry, column-major."""
    n = R_list[0].shape[0]
    cols = []
    for a, b in itertools.combinations(range(n), 2):
        Om = np.zeros((n, n))
        Om[a, b], Om[b, a] = 1.0, -1.0
        col = []
        for R in R_list:
            for j in range(n):
                for i in range(n):
                    col.append(sum(R[i, k] * Om[k, j] - Om[i, k] * R[k, j] for k in range(n)))
        cols.append(col)
    return np.array(cols).T


def brute_hos_phi(C, Q):
    """Rotate the cumulant tensor by explicit loops and contract with the symmetric basis."""
    n = C.shape[0]
    Cr = np.zeros_like(C)
    for k, l, i, j in itertools.product(range(n), repeat=4):
        Cr[k, l, i, j] = sum(
            C[a, b, c, d] * Q[a, k] * Q[b, l] * Q[c, i] * Q[d, j]
            for a, b, c, d in itertools.product(range(n), repeat=4) if C[a, b, c, d] != 0
        )
    out = []
    for i in range(n):
        for j in range(i, n):
            M = np.zeros((n, n))
            if i == j:
                M[i, i] = 1
            else:
                M[i, j] = M[j, i] = 1 / np.sqrt(2)
            out.append(np.einsum("klij,ij->kl", Cr, M).reshape(-1, order="F"))
    return np.concatenate(out)


@pytest.fixture(scope="module")
def white_ar():
    S = generate_sources(SourceSpec("ar1-gaussian", a=A), 3, 20000, RngSeed(1))
    return Whitener().fit_transform(S)


def test_rotate_signals(white_ar):
    np.testing.assert_array_equal(rotate_signals(white_ar, np.eye(3)), white_ar)
    P = np.eye(3)[:, [2, 0, 1]]
    np.testing.assert_array_equal(rotate_signals(white_ar, P), white_ar[:, [2, 0, 1]])
    Q = random_orthogonal(3, RngSeed(2))
    np.testing.assert_allclose(rotate_signals(rotate_signals(white_ar, Q), Q.T), white_ar, atol=1e-12)
    with pytest.raises(ValueError):
        rotate_signals(white_ar, 2 * np.eye(3))


def test_phi_identity_is_stacked_constraints(white_ar):
    ev = ObservationEvaluator.from_samples(white_ar, "SOS", L=3)
    cs = sos_constraints(white_ar, 3)
    expected = np.concatenate([m.reshape(-1, order="F") for m in cs.matrices])
    np.testing.assert_array_equal(evaluate_phi(ev, np.eye(3)), expected)


def test_phi_length_hos(white_ar):
    ev = ObservationEvaluator.from_samples(white_ar, "HOS", K=6)
    assert evaluate_phi(ev, np.eye(3)).shape == (54,)


def test_phi_sign_flip_invariance():
    ev = ObservationEvaluator.population_sos(population_sos_matrices(A, [1, 2]))
    for signs in itertools.product([1, -1], repeat=3):
        D = np.diag(signs).astype(float)
        np.testing.assert_array_equal(evaluate_phi(ev, D), ev.phi())


def test_zero_lag_population_jacobian_vanishes():
    ev = ObservationEvaluator.population_sos([np.eye(3)], lags=(0,))
    assert np.abs(jacobian_fd(ev, BASIS)).max() < 1e-8
    rep = probe(ev, BASIS, mode="analytic")
    assert rep.probe == 0.0
    assert rep.kernel_dim == 3


def test_single_lag_analytic_columns():
    R = [np.diag(A)]
    J = jacobian_sos_analytic(R, BASIS)
    np.testing.assert_allclose(J, brute_commutator_jacobian(R), atol=1e-15)
    np.testing.assert_allclose(J.T @ J, np.diag(2 * np.array([0.4, 0.7, 0.3]) ** 2), atol=1e-15)
    sv = np.linalg.svd(brute_commutator_jacobian(R), compute_uv=False)
    rep = report_from_jacobian(J)
    np.testing.assert_allclose(rep.singular_values, sv, atol=1e-15)
    assert rep.probe == pytest.approx(np.sqrt(2) * 0.3, abs=1e-12)
    assert rep.probe == pytest.approx(0.424264, abs=1e-6)


def test_two_lag_analytic_exceeds_one_lag():
    R = [np.diag(A), np.diag(np.square(A))]
    sv_oracle = np.linalg.svd(brute_commutator_jacobian(R), compute_uv=False)
    rep = report_from_jacobian(jacobian_sos_analytic(R, BASIS))
    np.testing.assert_allclose(rep.singular_values, sv_oracle, atol=1e-14)
    # pair (1,2): sqrt(0.4^2 + 0.32^2) is the smallest stacked column norm
    assert rep.probe == pytest.approx(np.sqrt(2) * np.hypot(0.4, 0.32), abs=1e-12)
    assert rep.probe > np.sqrt(2) * 0.3


def test_analytic_identity_is_zero():
    np.testing.assert_array_equal(jacobian_sos_analytic([np.eye(3)], BASIS), 0.0)
    with pytest.raises(ValueError):
        jacobian_sos_analytic([np.eye(3), np.eye(2)], BASIS)


@pytest.mark.parametrize("L", [1, 2, 3])
def test_fd_matches_analytic_population(L):
    R = population_sos_matrices(A, range(1, L + 1))
    ev = ObservationEvaluator.population_sos(R)
    Ja = jacobian_sos_analytic(R, BASIS)
    Jf = jacobian_fd(ev, BASIS, 1e-4)
    assert np.linalg.norm(Jf - Ja) <= 1e-6 * max(1.0, np.linalg.norm(Ja))


def test_fd_matches_analytic_on_samples(white_ar):
    ev = ObservationEvaluator.from_samples(white_ar, "SOS", L=3)
    Ja = jacobian_sos_analytic(ev.constraint_set().matrices, BASIS)
    Jf = jacobian_fd(ev, BASIS, 1e-4)
    assert np.linalg.norm(Jf - Ja) <= 1e-6 * max(1.0, np.linalg.norm(Ja))


def test_fd_analytic_raw_lagged_cov(white_ar):
    ev = ObservationEvaluator.from_samples(white_ar, "SOS", L=2, symmetrize=False)
    Ja = jacobian_sos_analytic(ev.constraint_set().matrices, BASIS)
    assert np.linalg.norm(jacobian_fd(ev, BASIS) - Ja) <= 1e-6 * max(1.0, np.linalg.norm(Ja))


def test_population_hos_gaussian_zero():
    ev = ObservationEvaluator.population_hos(np.zeros((3, 3, 3, 3)))
    np.testing.assert_array_equal(jacobian_fd(ev, BASIS), 0.0)


def test_population_hos_equal_kurtosis_positive():
    kappa = 1.5
    C = cumulant_tensor_from_kurtosis([kappa] * 3)
    ev = ObservationEvaluator.population_hos(C)
    h = 1e-4
    cols = [(brute_hos_phi(C, expm_skew(h * g)) - brute_hos_phi(C, expm_skew(-h * g))) / (2 * h)
            for g in BASIS.generators]
    J_oracle = np.column_stack(cols)
    J = jacobian_fd(ev, BASIS, h)
    np.testing.assert_allclose(J, J_oracle, atol=1e-9)
    rep = probe(ev, BASIS)
    assert rep.probe > 0.1
    assert rep.kernel_dim == 0


def test_probe_mode_family_mismatch():
    ev = ObservationEvaluator.population_hos(np.zeros((3, 3, 3, 3)))
    with pytest.raises(ValueError):
        probe(ev, mode="analytic")


def test_report_invariants_and_serialization():
    rep = probe(ObservationEvaluator.population_sos([np.diag([0.5, 0.5, 0.9])]), mode="analytic")
    assert rep.probe == rep.singular_values[-1]
    assert rep.kernel_dim + rep.rank == rep.cols == 3
    assert rep.kernel_dim == 1
    text = rep.to_text()
    assert text.splitlines()[:4] == ["rows=9", "cols=3", f"probe={rep.probe:.17g}", "kernel_dim=1"]
    back = JacobianReport.from_text(text)
    np.testing.assert_array_equal(back.singular_values, rep.singular_values)
    assert back.kernel_dim == 1


def test_kernel_directions_are_first_order_invariant():
    ev = ObservationEvaluator.population_sos([np.diag([0.5, 0.5, 0.9]), np.diag([0.25, 0.25, 0.81])])
    rep = probe(ev, BASIS, mode="analytic")
    _, s, vt = np.linalg.svd(rep.jacobian)
    eps = 1e-3
    for v, sigma in zip(vt, s):
        if sigma <= rep.threshold:
            omega = BASIS.combine(v)
            moved = np.linalg.norm(ev.phi(expm_skew(eps * omega)) - ev.phi())
            assert moved <= 10 * rep.tol * eps + 1e-12


def test_kernel_intersection_examples():
    J = jacobian_sos_analytic(population_sos_matrices(A, [1, 2]), BASIS)
    base = report_from_jacobian(J)
    _, dup = kernel_intersection_check([J, J])
    np.testing.assert_allclose(dup.singular_values, np.sqrt(2) * base.singular_values, rtol=1e-12)
    assert dup.kernel_dim == base.kernel_dim
    _, padded = kernel_intersection_check([J, np.zeros((5, 3))])
    np.testing.assert_allclose(padded.singular_values, base.singular_values, rtol=1e-12)
    J1 = jacobian_sos_analytic([np.diag([0.2, 0.6, 0.6])], BASIS)  # kernel: pair (2,3)
    J2 = jacobian_sos_analytic([np.diag([0.5, 0.5, 0.9])], BASIS)  # kernel: pair (1,2)
    assert report_from_jacobian(J1).kernel_dim == 1
    assert report_from_jacobian(J2).kernel_dim == 1
    stack, rep = kernel_intersection_check([J1, J2])
    assert stack.shape == (18, 3)
    assert rep.kernel_dim == 0
    with pytest.raises(ValueError):
        kernel_intersection_check([J1, np.zeros((2, 2))])


def test_shared_kernel_survives_stacking():
    J1 = jacobian_sos_analytic([np.diag([0.5, 0.5, 0.9])], BASIS)
    J2 = jacobian_sos_analytic([np.diag([0.1, 0.1, 0.3])], BASIS)
    _, rep = kernel_intersection_check([J1, J2])
    assert rep.kernel_dim == 1
    assert np.linalg.norm(np.vstack([J1, J2]) @ np.array([1.0, 0, 0])) == 0


rvals = st.lists(st.floats(-1, 1, allow_nan=False), min_size=3, max_size=3)


@settings(max_examples=40, deadline=None)
@given(st.lists(rvals, min_size=2, max_size=4), st.integers(0, 2 ** 32 - 1))
def test_appending_rows_never_hurts(lags, s):
    Q = random_orthogonal(3, RngSeed(s))
    R = [Q.T @ np.diag(r) @ Q for r in lags]
    J_small = jacobian_sos_analytic(R[:-1], BASIS)
    J_big = jacobian_sos_analytic(R, BASIS)
    a, b = report_from_jacobian(J_small), report_from_jacobian(J_big)
    assert b.kernel_dim <= a.kernel_dim
    ea = np.linalg.eigvalsh(J_small.T @ J_small)
    eb = np.linalg.eigvalsh(J_big.T @ J_big)
    assert np.all(eb >= ea - 1e-10)


@settings(max_examples=30, deadline=None)
@given(st.lists(rvals, min_size=1, max_size=4), st.randoms(use_true_random=False))
def test_probe_invariant_to_constraint_order(lags, rnd):
    R = [np.diag(r) for r in lags]
    perm = list(range(len(R)))
    rnd.shuffle(perm)
    a = report_from_jacobian(jacobian_sos_analytic(R, BASIS)).probe
    b = report_from_jacobian(jacobian_sos_analytic([R[i] for i in perm], BASIS)).probe
    assert b == pytest.approx(a, abs=1e-10)


def test_hos_selection_frozen_at_identity(white_ar):
    ev = ObservationEvaluator.from_samples(white_ar, "HOS", K=2)
    tags = ev.constraint_set().tags
    Q = expm_skew(0.05 * BASIS[0])
    assert ev.constraint_set(Q).tags == tags
    with pytest.raises(ValueError):
        ObservationEvaluator.from_samples(white_ar, "HOS", K=7)


def test_stabilizer_probe_estimator():
    S = generate_sources(SourceSpec("ar1-gaussian", a=A), 3, 50000, RngSeed(3))
    est = StabilizerProbe(family="sos", n_lags=1).fit(S)
    assert est.probe_ == pytest.approx(np.sqrt(2) * 0.3, abs=0.03)
    assert est.kernel_dim_ == 0
    assert est.get_params()["n_lags"] == 1
    fd = StabilizerProbe(family="sos", n_lags=2, jacobian="fd").fit(S)
    an = StabilizerProbe(family="sos", n_lags=2).fit(S)
    assert fd.probe_ == pytest.approx(an.probe_, rel=1e-6)
    with pytest.raises(ValueError):
        StabilizerProbe(family="hos", jacobian="analytic").fit(S)
