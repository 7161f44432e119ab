"""Reference separators (JADE-style, SOBI-style) and the Amari index.

These exist as sanity checks for the probe experiments; they are not tuned.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._errors import ContractViolationError, InvalidDimensionError
from .linalg import as_mat
from .statistics import Whitener, cumulant_matrices, sos_constraints

__all__ = [
    "DiagonalizerResult",
    "joint_diagonalize",
    "off_diagonal_mass",
    "amari_index",
    "JADE",
    "SOBI",
    "jade_separate",
    "sobi_separate",
]


@dataclass
class DiagonalizerResult:
    V: np.ndarray
    off_residual: float
    sweeps: int
    converged: bool
    history: tuple  # off_residual before the first sweep and after each sweep


def off_diagonal_mass(A):
    A = np.asarray(A, dtype=float)
    diag = np.einsum("kii->ki", A)
    return float(np.sum(A ** 2) - np.sum(diag ** 2))


def joint_diagonalize(A_list, angle_tol=1e-12, max_sweeps=100):
    """Orthogonal joint diagonalization by Jacobi (Givens) sweeps.

    For every pair ``(p, q)`` the angle comes in closed form from the
    principal axis of the 2x2 Gram matrix of ``[A_pp - A_qq, A_pq + A_qp]``
    accumulated over the set, which minimizes the pair's off-diagonal mass.
    A rotation is applied only when ``|sin theta| >= angle_tol``; a sweep with
    no applied rotation ends the iteration as converged. Hitting
    ``max_sweeps`` returns ``converged=False`` rather than raising.
    """
    A = np.array([as_mat(a, "A") for a in A_list])
    if A.ndim != 3 or A.shape[1] != A.shape[2]:
        raise InvalidDimensionError("joint_diagonalize needs square matrices of equal size")
    if np.max(np.abs(A - A.transpose(0, 2, 1))) > 1e-10 * max(1.0, np.max(np.abs(A))):
        raise ContractViolationError("joint_diagonalize needs symmetric matrices")
    n = A.shape[1]
    V = np.eye(n)
    history = [off_diagonal_mass(A)]
    converged = False
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                g = np.stack([A[:, p, p] - A[:, q, q], A[:, p, q] + A[:, q, p]])
                G = g @ g.T
                ton = G[0, 0] - G[1, 1]
                toff = G[0, 1] + G[1, 0]
                theta = 0.5 * np.arctan2(toff, ton + np.hypot(ton, toff))
                c, s = np.cos(theta), np.sin(theta)
                if abs(s) < angle_tol:
                    continue
                rotated = True
                R = np.array([[c, -s], [s, c]])
                idx = [p, q]
                V[:, idx] = V[:, idx] @ R
                A[:, idx, :] = np.einsum("ji,kjm->kim", R, A[:, idx, :])
                A[:, :, idx] = A[:, :, idx] @ R
        history.append(off_diagonal_mass(A))
        if not rotated:
            converged = True
            break
    return DiagonalizerResult(V, history[-1], sweeps, converged, tuple(history))


def amari_index(P):
    """Amari performance index of a global system matrix, in ``[0, 1]``.

    Zero exactly when ``P`` is a permutation times a nonsingular diagonal.
    """
    P = np.abs(as_mat(P, "P"))
    n = P.shape[0]
    if P.shape != (n, n):
        raise InvalidDimensionError("amari_index needs a square matrix")
    if n < 2:
        return 0.0
    row_max = P.max(axis=1)
    col_max = P.max(axis=0)
    if np.any(row_max == 0) or np.any(col_max == 0):
        raise ValueError("amari_index is undefined with an all-zero row or column")
    rows = np.sum(P.sum(axis=1) / row_max - 1.0)
    cols = np.sum(P.sum(axis=0) / col_max - 1.0)
    return float((rows + cols) / (2.0 * n * (n - 1)))


class _JointDiagSeparator(BaseEstimator, TransformerMixin):
    def _constraints(self, Z):
        raise NotImplementedError

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=2, ensure_min_features=2)
        self.whitener_ = Whitener().fit(X)
        Z = self.whitener_.transform(X)
        cset = self._constraints(Z)
        self.diagonalizer_ = joint_diagonalize(cset.matrices, self.angle_tol, self.max_sweeps)
        self.components_ = self.diagonalizer_.V.T @ self.whitener_.components_
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = check_array(X)
        return (X - self.whitener_.mean_) @ self.components_.T


class JADE(_JointDiagSeparator):
    """Whitening followed by joint diagonalization of the cumulant matrices.

    ``components_`` holds the total demixing matrix ``V^T W``.
    """

    def __init__(self, angle_tol=1e-12, max_sweeps=100):
        self.angle_tol = angle_tol
        self.max_sweeps = max_sweeps

    def _constraints(self, Z):
        return cumulant_matrices(Z)


class SOBI(_JointDiagSeparator):
    """Whitening followed by joint diagonalization of lagged covariances ``1..n_lags``.

    ``n_lags=1`` is AMUSE.
    """

    def __init__(self, n_lags=3, angle_tol=1e-12, max_sweeps=100):
        self.n_lags = n_lags
        self.angle_tol = angle_tol
        self.max_sweeps = max_sweeps

    def _constraints(self, Z):
        if self.n_lags < 1:
            raise ValueError(f"n_lags must be >= 1, got {self.n_lags}")
        return sos_constraints(Z, self.n_lags, symmetrize=True)


def jade_separate(X):
    return JADE().fit(X).components_


def sobi_separate(X, L):
    return SOBI(n_lags=L).fit(X).components_
