"""Jacobian sensitivity probe for residual rotational ambiguity.

The observation map is evaluated at right-orthogonal reparameterizations
``H0 -> H0 Q`` of the reference ``H0 = I``. On samples this means rebuilding
the constraint family from the back-rotated signals ``Q^T z(t)``; in
population mode the exact constraint operators are transformed directly
(congruence for lagged covariances, four-fold contraction for the cumulant
tensor).
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from ._errors import ContractViolationError, InvalidDimensionError
from .linalg import as_mat, commutator, expm_skew, singular_spectrum, skew_basis, vec
from .statistics import (
    ConstraintSet,
    Whitener,
    check_whitened,
    cumulant_tensor,
    cumulant_matrices_from_tensor,
    sort_order,
    sos_constraints,
)

__all__ = [
    "ObservationEvaluator",
    "JacobianReport",
    "StabilizerProbe",
    "rotate_signals",
    "evaluate_phi",
    "jacobian_fd",
    "jacobian_sos_analytic",
    "probe",
    "report_from_jacobian",
    "kernel_intersection_check",
    "DEFAULT_STEP",
    "DEFAULT_TOL",
]

DEFAULT_STEP = 1e-4
DEFAULT_TOL = 1e-8


def _check_orthogonal(Q, atol=1e-10):
    Q = as_mat(Q, "Q")
    if Q.shape[0] != Q.shape[1] or np.linalg.norm(Q @ Q.T - np.eye(Q.shape[0])) > atol:
        raise ContractViolationError("Q must be orthogonal (||QQ^T - I||_F <= 1e-10)")
    return Q


def rotate_signals(Z, Q):
    """Return the block of ``Q^T z(t)`` for every sample row of ``Z``."""
    Q = _check_orthogonal(Q)
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[1] != Q.shape[0]:
        raise InvalidDimensionError(f"cannot rotate block {Z.shape} by {Q.shape}")
    return Z @ Q


def _rotate_tensor(C, Q):
    return np.einsum("abcd,ak,bl,ci,dj->klij", C, Q, Q, Q, Q, optimize=True)


class ObservationEvaluator:
    """Evaluate the stacked constraint vector at a rotation ``Q``.

    Use the constructors :meth:`from_samples`, :meth:`population_sos` and
    :meth:`population_hos`. For the HOS family with ``K`` given, the top
    ``K`` cumulant basis matrices by Frobenius norm are chosen once at
    ``Q = I`` and kept fixed for every rotated evaluation, so the map stays
    smooth in ``Q``. Without ``K`` the full set is used in basis order.
    """

    def __init__(self, family, n, *, Z=None, R_list=None, tensor=None,
                 lags=None, symmetrize=True, K=None):
        family = family.upper()
        if family not in ("HOS", "SOS"):
            raise ValueError(f"unknown constraint family {family!r}")
        self.family = family
        self.n = n
        self.Z = Z
        self.R_list = R_list
        self.tensor = tensor
        self.lags = lags
        self.symmetrize = symmetrize
        self.K = K
        self.selection = None
        if family == "HOS" and K is not None:
            full = self._hos_set(np.eye(n), None)
            if not 1 <= K <= len(full):
                raise ValueError(f"K must satisfy 1 <= K <= {len(full)}, got {K}")
            self.selection = tuple(int(k) for k in sort_order(full)[:K])

    @property
    def population(self):
        return self.Z is None

    @classmethod
    def from_samples(cls, Z, family, L=None, lags=None, K=None, symmetrize=True):
        Z = np.asarray(Z, dtype=float)
        family = family.upper()
        if family == "SOS":
            if lags is None:
                if L is None:
                    raise ValueError("SOS family needs L or an explicit lag list")
                lags = tuple(range(1, int(L) + 1))
            # validates the lag range once up front
            sos_constraints(Z, lags=lags, symmetrize=symmetrize)
        else:
            if Z.shape[0] < 100:
                raise InvalidDimensionError("HOS family needs at least 100 samples")
            check_whitened(Z)
        return cls(family, Z.shape[1], Z=Z, lags=None if lags is None else tuple(lags),
                   symmetrize=symmetrize, K=K)

    @classmethod
    def population_sos(cls, R_list, lags=None):
        R = np.stack([as_mat(r, "R") for r in R_list])
        if R.shape[1] != R.shape[2]:
            raise InvalidDimensionError("population SOS matrices must be square")
        if lags is None:
            lags = tuple(range(1, len(R) + 1))
        return cls("SOS", R.shape[1], R_list=R, lags=tuple(lags))

    @classmethod
    def population_hos(cls, tensor, K=None):
        C = np.asarray(tensor, dtype=float)
        n = C.shape[0]
        if C.shape != (n, n, n, n):
            raise InvalidDimensionError(f"cumulant tensor must be (n, n, n, n), got {C.shape}")
        return cls("HOS", n, tensor=C, K=K)

    def _hos_set(self, Q, index):
        if self.Z is not None:
            C = cumulant_tensor(self.Z @ Q)
        else:
            C = _rotate_tensor(self.tensor, Q)
        return cumulant_matrices_from_tensor(C, index)

    def constraint_set(self, Q=None):
        """Constraint family of the reparameterized model ``H0 Q``."""
        Q = np.eye(self.n) if Q is None else Q
        if self.family == "HOS":
            return self._hos_set(Q, self.selection)
        if self.Z is not None:
            return sos_constraints(self.Z @ Q, lags=self.lags, symmetrize=self.symmetrize)
        mats = np.einsum("ai,tab,bj->tij", Q, self.R_list, Q)
        return ConstraintSet("SOS", mats, self.lags)

    def phi(self, Q=None):
        cset = self.constraint_set(Q)
        return np.concatenate([vec(m) for m in cset.matrices])


def evaluate_phi(ev, Q):
    """Stacked ``[vec A_1; ...; vec A_|I|]`` at rotation ``Q``."""
    return ev.phi(_check_orthogonal(Q))


def jacobian_fd(ev, basis=None, h=DEFAULT_STEP):
    """Central-difference Jacobian, one column per skew generator.

    Both evaluations of a difference reuse the evaluator's data, so sampling
    noise cancels and only the rotation response remains.
    """
    if not h > 0:
        raise ValueError(f"step must be positive, got {h}")
    basis = skew_basis(ev.n) if basis is None else basis
    cols = []
    for omega in basis.generators:
        plus = ev.phi(expm_skew(h * omega))
        minus = ev.phi(expm_skew(-h * omega))
        cols.append((plus - minus) / (2.0 * h))
    return np.column_stack(cols)


def jacobian_sos_analytic(R_list, basis=None):
    """Exact derivative of ``R -> Q^T R Q`` at ``Q = I``.

    Column ``k`` stacks ``vec([R(tau), Omega_k])`` over the lags.
    """
    R = [as_mat(r, "R") for r in R_list]
    n = R[0].shape[0]
    if any(r.shape != (n, n) for r in R):
        raise InvalidDimensionError("all lagged matrices must be square of the same size")
    basis = skew_basis(n) if basis is None else basis
    if basis.n != n:
        raise InvalidDimensionError(f"basis is for n={basis.n}, matrices are {n}x{n}")
    return np.column_stack([
        np.concatenate([vec(commutator(r, omega)) for r in R]) for omega in basis.generators
    ])


@dataclass
class JacobianReport:
    """Spectrum summary of a probe Jacobian.

    ``kernel_dim`` counts singular values at or below ``tol * max(sigma_max, 1)``.
    """

    rows: int
    cols: int
    singular_values: np.ndarray
    tol: float
    jacobian: np.ndarray = field(default=None, repr=False)

    @property
    def probe(self):
        return float(self.singular_values[-1])

    @property
    def threshold(self):
        return self.tol * max(float(self.singular_values[0]), 1.0)

    @property
    def kernel_dim(self):
        # A wide Jacobian has at least cols - rows null directions.
        missing = max(self.cols - len(self.singular_values), 0)
        return int(np.sum(self.singular_values <= self.threshold)) + missing

    @property
    def rank(self):
        return self.cols - self.kernel_dim

    def to_text(self):
        sv = ",".join(format(float(s), ".17g") for s in self.singular_values)
        return (
            f"rows={self.rows}\ncols={self.cols}\nprobe={self.probe:.17g}\n"
            f"kernel_dim={self.kernel_dim}\ntol={self.tol:.17g}\nsv={sv}\n"
        )

    @classmethod
    def from_text(cls, text):
        fields = dict(line.split("=", 1) for line in text.strip().splitlines())
        sv = np.array([float(s) for s in fields["sv"].split(",")])
        return cls(int(fields["rows"]), int(fields["cols"]), sv, float(fields.get("tol", DEFAULT_TOL)))


def report_from_jacobian(J, tol=DEFAULT_TOL):
    J = as_mat(J, "J")
    return JacobianReport(J.shape[0], J.shape[1], singular_spectrum(J), tol, J)


def probe(ev, basis=None, mode="fd", h=DEFAULT_STEP, tol=DEFAULT_TOL):
    """Assemble the Jacobian (``"fd"`` or ``"analytic"``) and summarize it.

    ``"analytic"`` is available for the SOS family only.
    """
    basis = skew_basis(ev.n) if basis is None else basis
    if mode == "fd":
        J = jacobian_fd(ev, basis, h)
    elif mode in ("analytic", "analytic-sos"):
        if ev.family != "SOS":
            raise ContractViolationError("analytic Jacobian is only defined for the SOS family")
        J = jacobian_sos_analytic(ev.constraint_set().matrices, basis)
    else:
        raise ValueError(f"unknown Jacobian mode {mode!r}")
    return report_from_jacobian(J, tol)


def kernel_intersection_check(J_list, tol=DEFAULT_TOL):
    """Stack Jacobians row-wise; the stack's kernel is the intersection of kernels."""
    mats = [as_mat(j, "J") for j in J_list]
    d = mats[0].shape[1]
    if any(m.shape[1] != d for m in mats):
        raise InvalidDimensionError("all Jacobians must share the column dimension")
    stack = np.vstack(mats)
    return stack, report_from_jacobian(stack, tol)


class StabilizerProbe(BaseEstimator):
    """Whiten ``X`` and measure local identifiability at ``H0 = I``.

    Parameters
    ----------
    family : {"sos", "hos"}
    n_lags : int
        Lags ``1..n_lags`` for the SOS family.
    n_constraints : int or None
        Number of cumulant matrices kept for the HOS family (all if None).
    jacobian : {"auto", "fd", "analytic"}
        ``"auto"`` picks the analytic path for SOS and finite differences for HOS.
    step : float
        Central-difference step.
    tol : float
        Relative kernel tolerance.
    symmetrize : bool
        Symmetrize lagged covariances.

    Attributes
    ----------
    whitener_ : Whitener
    report_ : JacobianReport
    probe_ : float
    kernel_dim_ : int
    singular_values_ : ndarray
    """

    def __init__(self, family="sos", n_lags=1, n_constraints=None, jacobian="auto",
                 step=DEFAULT_STEP, tol=DEFAULT_TOL, symmetrize=True):
        self.family = family
        self.n_lags = n_lags
        self.n_constraints = n_constraints
        self.jacobian = jacobian
        self.step = step
        self.tol = tol
        self.symmetrize = symmetrize

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=2, ensure_min_features=2)
        self.whitener_ = Whitener().fit(X)
        Z = self.whitener_.transform(X)
        family = self.family.upper()
        self.evaluator_ = ObservationEvaluator.from_samples(
            Z, family, L=self.n_lags, K=self.n_constraints, symmetrize=self.symmetrize
        )
        mode = self.jacobian
        if mode == "auto":
            mode = "analytic" if family == "SOS" else "fd"
        self.report_ = probe(self.evaluator_, mode=mode, h=self.step, tol=self.tol)
        self.n_features_in_ = X.shape[1]
        return self

    @property
    def probe_(self):
        check_is_fitted(self, "report_")
        return self.report_.probe

    @property
    def kernel_dim_(self):
        check_is_fitted(self, "report_")
        return self.report_.kernel_dim

    @property
    def singular_values_(self):
        check_is_fitted(self, "report_")
        return self.report_.singular_values
