"""Population-mode oracle checks run by ``stabprobe selftest``."""

import time
from dataclasses import dataclass

import numpy as np

from .experiments import population_sos_matrices
from .linalg import commutator, expm_skew, skew_basis
from .probe import (
    ObservationEvaluator,
    jacobian_fd,
    jacobian_sos_analytic,
    kernel_intersection_check,
    probe,
    report_from_jacobian,
)
from .separation import amari_index, joint_diagonalize
from .statistics import cumulant_tensor_from_kurtosis

A_DEFAULT = (0.2, 0.6, 0.9)


@dataclass
class Check:
    name: str
    expected: str
    got: str
    tol: str
    passed: bool

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: expected {self.expected}, got {self.got}, tol {self.tol}"


def _close(name, expected, got, tol):
    return Check(name, f"{expected:.12g}", f"{got:.12g}", f"{tol:g}", abs(got - expected) <= tol)


def _rodrigues(axis_angle_matrix):
    # exp(W) for W in so(3) with angle |w|
    W = axis_angle_matrix
    w = np.array([W[2, 1], W[0, 2], W[1, 0]])
    th = np.linalg.norm(w)
    return np.eye(3) + np.sin(th) / th * W + (1 - np.cos(th)) / th ** 2 * W @ W


def run_checks():
    basis = skew_basis(3)
    checks = []

    ev = ObservationEvaluator.population_sos([np.diag(A_DEFAULT)])
    rep = probe(ev, basis, mode="analytic")
    checks.append(_close("single-lag SOS probe", np.sqrt(2) * 0.3, rep.probe, 1e-9))
    checks.append(_close("single-lag SOS kernel_dim", 0, rep.kernel_dim, 0))

    ev0 = ObservationEvaluator.population_sos([np.eye(3)], lags=(0,))
    rep0 = probe(ev0, basis, mode="analytic")
    checks.append(_close("zero-lag probe", 0.0, rep0.probe, 1e-10))
    checks.append(_close("zero-lag kernel_dim = dim so(3)", 3, rep0.kernel_dim, 0))

    for L in (1, 2, 3):
        R = population_sos_matrices(A_DEFAULT, range(1, L + 1))
        ev = ObservationEvaluator.population_sos(R)
        Ja = jacobian_sos_analytic(R, basis)
        Jf = jacobian_fd(ev, basis, 1e-4)
        rel = np.linalg.norm(Jf - Ja) / max(1.0, np.linalg.norm(Ja))
        checks.append(Check(f"fd/analytic Jacobian agreement L={L}", "0", f"{rel:.3e}", "1e-06", rel <= 1e-6))

    probes = []
    for L in range(1, 5):
        R = population_sos_matrices(A_DEFAULT, range(1, L + 1))
        probes.append(report_from_jacobian(jacobian_sos_analytic(R, basis)).probe)
    inc = all(b - a > 1e-10 for a, b in zip(probes, probes[1:]))
    checks.append(Check("population SOS probe strictly increasing L=1..4", "increasing",
                        ",".join(f"{p:.6f}" for p in probes), "1e-10", inc))

    J1 = jacobian_sos_analytic(population_sos_matrices(A_DEFAULT, [1]), basis)
    J2 = jacobian_sos_analytic(population_sos_matrices(A_DEFAULT, [1, 2]), basis)
    s1 = report_from_jacobian(J1).singular_values
    r2 = report_from_jacobian(J2)
    mono = bool(np.all(r2.singular_values >= s1 - 1e-10)) and r2.kernel_dim <= report_from_jacobian(J1).kernel_dim
    checks.append(Check("nested stacking never lowers singular values", "sv2 >= sv1",
                        f"min diff {np.min(r2.singular_values - s1):.3e}", "1e-10", mono))

    Ja = jacobian_sos_analytic([np.diag([0.2, 0.6, 0.6])], basis)
    Jb = jacobian_sos_analytic([np.diag([0.5, 0.5, 0.9])], basis)
    _, stack = kernel_intersection_check([Ja, Jb])
    checks.append(Check("stacked kernel is the intersection", "kernel dims 1,1 -> 0",
                        f"{report_from_jacobian(Ja).kernel_dim},{report_from_jacobian(Jb).kernel_dim}"
                        f" -> {stack.kernel_dim}", "1e-08",
                        report_from_jacobian(Ja).kernel_dim == 1 and report_from_jacobian(Jb).kernel_dim == 1
                        and stack.kernel_dim == 0))

    evh = ObservationEvaluator.population_hos(cumulant_tensor_from_kurtosis([1.5, 1.5, 1.5]))
    hp = probe(evh, basis, mode="fd").probe
    checks.append(Check("population HOS equal kurtosis probe > 0", "> 0", f"{hp:.6g}", "1e-08", hp > 1e-8))
    evg = ObservationEvaluator.population_hos(np.zeros((3, 3, 3, 3)))
    checks.append(_close("population Gaussian HOS probe", 0.0, probe(evg, basis).probe, 0.0))

    W = 0.3 * basis[0]
    err = np.max(np.abs(expm_skew(W) - _rodrigues(W)))
    checks.append(_close("expm_skew matches Rodrigues", 0.0, err, 1e-12))
    Q = expm_skew(np.pi / 2 * np.array([[0.0, -1.0], [1.0, 0.0]]))
    checks.append(_close("planar quarter turn", 0.0, np.max(np.abs(Q - [[0, -1], [1, 0]])), 1e-12))

    C = commutator(np.diag([0.3, 0.7]), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    checks.append(_close("2x2 commutator", 0.0, np.max(np.abs(C - (0.3 - 0.7) * np.array([[0, 1], [1, 0]]))), 1e-15))

    checks.append(_close("amari_index(all ones)", 1.0, amari_index(np.ones((3, 3))), 1e-15))
    P = np.eye(3)[[2, 0, 1]] @ np.diag([2.0, -3.0, 0.5])
    checks.append(_close("amari_index(permutation * diagonal)", 0.0, amari_index(P), 0.0))

    rng = np.random.default_rng(0)
    Qr, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    D = [np.diag(d) for d in ([1.0, 2.0, 3.0], [3.0, -1.0, 0.5], [0.2, 0.4, -2.0])]
    res = joint_diagonalize([Qr.T @ d @ Qr for d in D])
    api = amari_index(res.V.T @ Qr.T)
    checks.append(_close("joint diagonalization recovers rotation", 0.0, api, 1e-8))

    flip = np.diag([1.0, -1.0, -1.0])
    evd = ObservationEvaluator.population_sos(population_sos_matrices(A_DEFAULT, [1, 2]))
    diff = np.max(np.abs(evd.phi(flip) - evd.phi()))
    checks.append(_close("sign flips leave diagonal lagged covariances", 0.0, diff, 1e-15))
    return checks


def main(stream=None):
    t0 = time.perf_counter()
    checks = run_checks()
    for c in checks:
        print(c.line(), file=stream)
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed in "
          f"{time.perf_counter() - t0:.2f} s", file=stream)
    return 0 if not failed else 1
