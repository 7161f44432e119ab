"""Small dense kernels on so(n) and O(n).

Matrices are plain 2-D ``numpy.ndarray`` objects; :func:`as_mat` is the
validation gate used everywhere a finite real matrix is expected.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from ._errors import ContractViolationError, InvalidDimensionError

__all__ = [
    "as_mat",
    "SkewBasis",
    "skew_basis",
    "expm_skew",
    "commutator",
    "vec",
    "unvec",
    "singular_spectrum",
]


def as_mat(a, name="matrix"):
    """Return ``a`` as a finite float64 2-D array or raise ``ValueError``."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise InvalidDimensionError(f"{name} must be a non-empty 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return m


def _square(a, name):
    m = as_mat(a, name)
    if m.shape[0] != m.shape[1]:
        raise ContractViolationError(f"{name} must be square, got shape {m.shape}")
    return m


@dataclass(frozen=True)
class SkewBasis:
    """Canonical basis of so(n).

    Attributes
    ----------
    n : int
        Matrix dimension.
    pairs : tuple of (int, int)
        Zero-based index pairs ``(a, b)`` with ``a < b`` in lexicographic order.
    generators : ndarray, shape (d, n, n)
        ``generators[k] = e_a e_b^T - e_b e_a^T`` for ``pairs[k]``.
    """

    n: int
    pairs: tuple
    generators: np.ndarray

    @property
    def d(self):
        return len(self.pairs)

    def __len__(self):
        return len(self.pairs)

    def __getitem__(self, k):
        return self.generators[k]

    def combine(self, coef):
        """Return the skew matrix ``sum_k coef[k] * generators[k]``."""
        coef = np.asarray(coef, dtype=float)
        return np.tensordot(coef, self.generators, axes=1)


def skew_basis(n):
    """Build the canonical skew-symmetric basis for dimension ``n``.

    Generators are ordered (1,2), (1,3), ..., (1,n), (2,3), ..., (n-1,n).
    Each has Frobenius norm sqrt(2) and distinct generators are orthogonal.
    """
    if int(n) != n or n < 2:
        raise InvalidDimensionError(f"skew basis needs n >= 2, got {n!r}")
    n = int(n)
    pairs = tuple(combinations(range(n), 2))
    gens = np.zeros((len(pairs), n, n))
    for k, (a, b) in enumerate(pairs):
        gens[k, a, b] = 1.0
        gens[k, b, a] = -1.0
    gens.setflags(write=False)
    return SkewBasis(n=n, pairs=pairs, generators=gens)


def expm_skew(omega):
    """Matrix exponential of a real skew-symmetric matrix.

    Scaling and squaring around a truncated Taylor series: the argument is
    halved until its 2-norm bound is at most 0.5, the series is summed until a
    term drops below 1e-16 in norm, then the result is squared back.
    """
    omega = _square(omega, "omega")
    fro = np.linalg.norm(omega)
    if np.linalg.norm(omega + omega.T) > 1e-12 * max(1.0, fro):
        raise ContractViolationError("expm_skew requires a skew-symmetric matrix")
    n = omega.shape[0]
    # Frobenius norm bounds the spectral norm.
    s = 0
    if fro > 0.5:
        s = int(np.ceil(np.log2(fro / 0.5)))
    a = omega / (2.0 ** s)
    result = np.eye(n)
    term = np.eye(n)
    for k in range(1, 60):
        term = term @ a / k
        result = result + term
        if np.linalg.norm(term) < 1e-16:
            break
    for _ in range(s):
        result = result @ result
    return result


def commutator(a, b):
    """Return ``AB - BA``."""
    a = _square(a, "A")
    b = _square(b, "B")
    if a.shape != b.shape:
        raise InvalidDimensionError(f"commutator size mismatch: {a.shape} vs {b.shape}")
    return a @ b - b @ a


def vec(m):
    """Column-wise vectorization: entry (i, j) lands at index ``j * rows + i``."""
    m = np.asarray(m, dtype=float)
    return m.reshape(-1, order="F")


def unvec(v, rows, cols=None):
    cols = rows if cols is None else cols
    return np.asarray(v, dtype=float).reshape((rows, cols), order="F")


def singular_spectrum(j):
    """Singular values of ``j`` in descending order."""
    j = as_mat(j, "J")
    return np.linalg.svd(j, compute_uv=False)
