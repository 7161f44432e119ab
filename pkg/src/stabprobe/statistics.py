"""Sample statistics and constraint-family construction.

Signal blocks are ``(T, n)`` arrays (samples by channels), the same layout
scikit-learn uses for ``X``.
"""

import os
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._errors import ContractViolationError, InvalidDimensionError, SingularCovarianceError

__all__ = [
    "ConstraintSet",
    "Whitener",
    "sample_mean_cov",
    "fit_whitener",
    "lagged_cov",
    "sos_constraints",
    "symmetric_basis",
    "cumulant_tensor",
    "cumulant_tensor_from_kurtosis",
    "cumulant_matrices",
    "cumulant_matrices_from_tensor",
    "check_whitened",
    "sort_truncate",
    "dump_constraint_set",
]

RANK_THRESHOLD = 1e-10


def _block(X, min_samples=1):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise InvalidDimensionError(f"signal block must be 2-D (T, n), got shape {X.shape}")
    if X.shape[0] < min_samples:
        raise InvalidDimensionError(f"need at least {min_samples} samples, got {X.shape[0]}")
    if not np.all(np.isfinite(X)):
        raise ValueError("signal block contains NaN or Inf")
    return X


@dataclass(frozen=True)
class ConstraintSet:
    """Ordered family of ``n x n`` constraint matrices.

    Attributes
    ----------
    family : {"HOS", "SOS"}
    matrices : ndarray, shape (K, n, n)
    tags : tuple
        Lag ``tau`` per matrix for SOS, basis index ``(i, j)`` for HOS.
    """

    family: str
    matrices: np.ndarray
    tags: tuple

    @property
    def frobenius_norms(self):
        return np.linalg.norm(self.matrices, axis=(1, 2))

    @property
    def n(self):
        return self.matrices.shape[1]

    def __len__(self):
        return self.matrices.shape[0]


def sample_mean_cov(X):
    """Per-channel mean and the 1/T-normalized sample covariance."""
    X = _block(X, min_samples=2)
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / X.shape[0]
    return mean, 0.5 * (cov + cov.T)


class Whitener(BaseEstimator, TransformerMixin):
    """PCA whitening ``z = W (x - mean)`` with ``W = Lambda^{-1/2} U^T``.

    Eigenvalues are taken in descending order. Fitting fails with
    :class:`SingularCovarianceError` if the smallest eigenvalue is below
    ``rank_threshold`` times the largest.

    Attributes
    ----------
    mean_ : ndarray, shape (n,)
    components_ : ndarray, shape (n, n)
        The whitening matrix ``W``.
    covariance_ : ndarray, shape (n, n)
    """

    def __init__(self, rank_threshold=RANK_THRESHOLD):
        self.rank_threshold = rank_threshold

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=2)
        mean, cov = sample_mean_cov(X)
        evals, evecs = np.linalg.eigh(cov)
        evals, evecs = evals[::-1], evecs[:, ::-1]
        if evals[0] <= 0 or evals[-1] <= self.rank_threshold * evals[0]:
            raise SingularCovarianceError(
                f"sample covariance is rank deficient: eigenvalue {evals[-1]:.3e} "
                f"vs largest {evals[0]:.3e}",
                eigenvalue=float(evals[-1]),
            )
        self.mean_ = mean
        self.covariance_ = cov
        self.eigenvalues_ = evals
        self.components_ = evecs.T / np.sqrt(evals)[:, None]
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = check_array(X)
        return (X - self.mean_) @ self.components_.T


def fit_whitener(X):
    return Whitener().fit(X)


def lagged_cov(Z, tau, symmetrize=True):
    """``R(tau) = 1/(T - tau) * sum_t z(t) z(t - tau)^T``, optionally symmetrized."""
    Z = _block(Z)
    T = Z.shape[0]
    tau = int(tau)
    if tau < 0 or tau >= T:
        raise ValueError(f"lag must satisfy 0 <= tau < T={T}, got {tau}")
    R = Z[tau:].T @ Z[: T - tau] / (T - tau)
    if symmetrize:
        R = 0.5 * (R + R.T)
    return R


def sos_constraints(Z, L=None, symmetrize=True, lags=None):
    """Lagged covariances for lags ``1..L`` (or an explicit ``lags`` list)."""
    Z = _block(Z)
    T = Z.shape[0]
    if lags is None:
        if L is None or not 1 <= L < T:
            raise ValueError(f"lag count must satisfy 1 <= L < T={T}, got {L}")
        lags = range(1, int(L) + 1)
    lags = tuple(int(t) for t in lags)
    if not lags:
        raise ValueError("empty lag set")
    mats = np.stack([lagged_cov(Z, t, symmetrize) for t in lags])
    return ConstraintSet("SOS", mats, lags)


def symmetric_basis(n):
    """Orthonormal basis of symmetric matrices, indexed by ``(i, j)``, ``i <= j``."""
    idx = [(i, j) for i in range(n) for j in range(i, n)]
    basis = np.zeros((len(idx), n, n))
    for k, (i, j) in enumerate(idx):
        if i == j:
            basis[k, i, i] = 1.0
        else:
            basis[k, i, j] = basis[k, j, i] = 1.0 / np.sqrt(2.0)
    return tuple(idx), basis


def check_whitened(Z, rtol=0.05):
    Z = _block(Z)
    n = Z.shape[1]
    dev = np.linalg.norm(Z.T @ Z / Z.shape[0] - np.eye(n))
    if dev > rtol * n:
        raise ContractViolationError(
            f"cumulant matrices need whitened input; ||R(0) - I||_F = {dev:.3g} > {rtol * n:.3g}"
        )


def cumulant_tensor(Z):
    """Fourth-order cumulant tensor of zero-mean white data.

    ``C[k, l, i, j] = E[z_k z_l z_i z_j] - d_kl d_ij - d_ki d_lj - d_kj d_li``
    with the expectation replaced by the sample average.
    """
    Z = _block(Z)
    T, n = Z.shape
    P = (Z[:, :, None] * Z[:, None, :]).reshape(T, n * n)
    m4 = (P.T @ P / T).reshape(n, n, n, n)
    eye = np.eye(n)
    gauss = (
        np.einsum("kl,ij->klij", eye, eye)
        + np.einsum("ki,lj->klij", eye, eye)
        + np.einsum("kj,li->klij", eye, eye)
    )
    return m4 - gauss


def cumulant_tensor_from_kurtosis(kurtosis):
    """Population cumulant tensor of independent unit-variance sources."""
    kurtosis = np.asarray(kurtosis, dtype=float)
    n = kurtosis.size
    C = np.zeros((n, n, n, n))
    for i, k in enumerate(kurtosis):
        C[i, i, i, i] = k
    return C


def cumulant_matrices_from_tensor(C, index=None):
    """Contract ``C`` with the symmetric basis; ``index`` selects basis entries."""
    n = C.shape[0]
    tags, basis = symmetric_basis(n)
    if index is not None:
        index = list(index)
        tags = tuple(tags[k] for k in index)
        basis = basis[index]
    mats = np.einsum("klij,mij->mkl", C, basis)
    mats = 0.5 * (mats + mats.transpose(0, 2, 1))
    return ConstraintSet("HOS", mats, tags)


def cumulant_matrices(Z):
    """JADE-style cumulant matrices ``Q(M)`` over the symmetric basis.

    Returns ``n(n+1)/2`` matrices. ``Z`` must be whitened (checked loosely:
    ``||R(0) - I||_F <= 0.05 n``) and have at least 100 samples.
    """
    Z = _block(Z, min_samples=100)
    check_whitened(Z)
    return cumulant_matrices_from_tensor(cumulant_tensor(Z))


def sort_order(cset):
    """Indices sorting ``cset`` by Frobenius norm, descending, stable on ties."""
    return np.argsort(-cset.frobenius_norms, kind="stable")


def sort_truncate(cset, K):
    if not 1 <= K <= len(cset):
        raise ValueError(f"K must satisfy 1 <= K <= {len(cset)}, got {K}")
    keep = sort_order(cset)[: int(K)]
    return ConstraintSet(cset.family, cset.matrices[keep], tuple(cset.tags[k] for k in keep))


def _tag_str(tag):
    if isinstance(tag, tuple):
        return "-".join(str(t) for t in tag)
    return str(tag)


def dump_constraint_set(cset, out_dir):
    """Write one CSV per matrix named ``{family}_{tag}.csv``; returns the paths."""
    paths = []
    for tag, m in zip(cset.tags, cset.matrices):
        path = os.path.join(out_dir, f"{cset.family}_{_tag_str(tag)}.csv")
        with open(path, "w") as fh:
            for row in m:
                fh.write(",".join(format(v, ".17g") for v in row) + "\n")
        paths.append(path)
    return paths
