"""Seeded source generators and linear mixing."""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter
from scipy.special import gammaln

from ._errors import InvalidDimensionError
from .linalg import as_mat

__all__ = [
    "RngSeed",
    "SourceSpec",
    "gg_scale",
    "gg_excess_kurtosis",
    "sample_gg",
    "sample_ar1",
    "generate_sources",
    "mix",
    "random_orthogonal",
    "write_signals_csv",
]

AR_BURN_IN = 1000


@dataclass(frozen=True)
class RngSeed:
    """Counter-based seed: ``(base, stream)`` fixes the whole random stream.

    ``stream`` is a tuple of non-negative integers; an int is promoted to a
    1-tuple. :meth:`child` extends the stream key, so sub-streams (channels,
    auxiliary draws) never collide with their parent or siblings.
    """

    base: int
    stream: tuple = field(default=())

    def __post_init__(self):
        if not 0 <= int(self.base) < 2 ** 64:
            raise ValueError(f"base seed must be a 64-bit unsigned integer, got {self.base}")
        stream = self.stream
        if isinstance(stream, (int, np.integer)):
            stream = (int(stream),)
        stream = tuple(int(s) for s in stream)
        if any(s < 0 for s in stream):
            raise ValueError(f"stream indices must be non-negative, got {stream}")
        object.__setattr__(self, "base", int(self.base))
        object.__setattr__(self, "stream", stream)

    def child(self, *index):
        return RngSeed(self.base, self.stream + tuple(int(i) for i in index))

    def generator(self):
        return np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(self.base, spawn_key=self.stream))
        )


def _as_seed(seed):
    if isinstance(seed, RngSeed):
        return seed
    return RngSeed(int(seed))


def gg_scale(p):
    """Scale ``alpha`` giving unit variance: ``alpha^2 = G(1/p) / G(3/p)``."""
    return float(np.exp(0.5 * (gammaln(1.0 / p) - gammaln(3.0 / p))))


def gg_excess_kurtosis(p):
    """Population excess kurtosis of the generalized Gaussian with shape ``p``."""
    return float(np.exp(gammaln(5.0 / p) + gammaln(1.0 / p) - 2.0 * gammaln(3.0 / p)) - 3.0)


def _check_shape(p):
    if not np.isfinite(p) or p <= 0:
        raise ValueError(f"generalized Gaussian shape must be > 0, got {p}")


def sample_gg(p, T, seed):
    """Draw ``T`` i.i.d. unit-variance generalized Gaussian samples.

    Uses the exact transform ``alpha * G**(1/p) * S`` with
    ``G ~ Gamma(1/p, 1)`` and ``S`` a fair sign.
    """
    _check_shape(p)
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    rng = _as_seed(seed).generator()
    g = rng.gamma(1.0 / p, 1.0, size=int(T))
    sign = np.where(rng.integers(0, 2, size=int(T)) == 1, 1.0, -1.0)
    return gg_scale(p) * g ** (1.0 / p) * sign


def sample_ar1(a, T, seed, innovation="gaussian", p=None):
    """Stationary AR(1) series ``s(t) = a s(t-1) + u(t)`` with unit sample variance.

    ``innovation`` is ``"gaussian"`` or ``"gg"`` (then ``p`` is required).
    A burn-in of 1000 samples is generated and dropped.
    """
    if not -1.0 < a < 1.0:
        raise ValueError(f"AR coefficient must satisfy |a| < 1, got {a}")
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    total = int(T) + AR_BURN_IN
    seed = _as_seed(seed)
    if innovation == "gaussian":
        u = seed.generator().standard_normal(total)
    elif innovation == "gg":
        if p is None:
            raise ValueError("gg innovations need a shape p")
        u = sample_gg(p, total, seed)
    else:
        raise ValueError(f"unknown innovation {innovation!r}")
    s = lfilter([1.0], [1.0, -a], u)[AR_BURN_IN:]
    sd = s.std()
    if sd > 0:
        s = s / sd
    return s


@dataclass(frozen=True)
class SourceSpec:
    """Source model for :func:`generate_sources`.

    kind : {"iid-gg", "ar1-gaussian", "ar1-gg"}
    p : shape for the gg kinds.
    a : per-channel AR coefficients for the ar1 kinds.
    """

    kind: str
    p: float = 2.0
    a: tuple = ()

    def __post_init__(self):
        if self.kind not in ("iid-gg", "ar1-gaussian", "ar1-gg"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        object.__setattr__(self, "a", tuple(float(x) for x in self.a))
        if self.kind in ("iid-gg", "ar1-gg"):
            _check_shape(self.p)
        for x in self.a:
            if not -1.0 < x < 1.0:
                raise ValueError(f"AR coefficient must satisfy |a| < 1, got {x}")


def generate_sources(spec, n, T, seed):
    """Return a ``(T, n)`` block of independent source channels.

    Channel ``i`` draws from ``seed.child(i)`` only, so adding channels leaves
    existing ones untouched.
    """
    seed = _as_seed(seed)
    if n < 1:
        raise InvalidDimensionError(f"need at least one channel, got {n}")
    if spec.kind != "iid-gg" and len(spec.a) != n:
        raise InvalidDimensionError(
            f"{spec.kind} needs {n} AR coefficients, got {len(spec.a)}"
        )
    out = np.empty((int(T), n))
    for i in range(n):
        sub = seed.child(i)
        if spec.kind == "iid-gg":
            out[:, i] = sample_gg(spec.p, T, sub)
        elif spec.kind == "ar1-gaussian":
            out[:, i] = sample_ar1(spec.a[i], T, sub)
        else:
            out[:, i] = sample_ar1(spec.a[i], T, sub, innovation="gg", p=spec.p)
    return out


def mix(H, S):
    """Apply ``x(t) = H s(t)`` to every row of the ``(T, n)`` block ``S``."""
    H = as_mat(H, "H")
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or H.shape[1] != S.shape[1]:
        raise InvalidDimensionError(
            f"mixing matrix has {H.shape[1]} columns but signal has shape {S.shape}"
        )
    return S @ H.T


def random_orthogonal(n, seed):
    """Haar-distributed orthogonal matrix from a QR of a Gaussian matrix."""
    g = _as_seed(seed).generator().standard_normal((n, n))
    q, r = np.linalg.qr(g)
    return q * np.sign(np.diag(r))


def write_signals_csv(path, X):
    X = np.asarray(X, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"ch{i + 1}" for i in range(X.shape[1])])
        for t, row in enumerate(X):
            w.writerow([t] + [format(v, ".17g") for v in row])
