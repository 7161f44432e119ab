"""Monte Carlo harness for the HOS, SOS and trade-off experiments.

Seeding: trial ``i`` of source cell ``c`` draws from ``RngSeed(seed, (c, i))``.
A source cell is one point of the source-model grid (one ``p``); the
observation-design axis (lag count ``L`` or cumulant count ``K``) is swept on
the same draw, so adding constraints to a trial never changes its data.
"""

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .linalg import skew_basis
from .probe import ObservationEvaluator, jacobian_fd, jacobian_sos_analytic, report_from_jacobian
from .separation import amari_index, jade_separate, sobi_separate
from .signals import RngSeed, SourceSpec, generate_sources, gg_excess_kurtosis, mix, random_orthogonal
from .statistics import Whitener, cumulant_tensor_from_kurtosis, sos_constraints

__all__ = [
    "ExperimentConfig",
    "TrialRecord",
    "GridResult",
    "TrialError",
    "monte_carlo",
    "first_crossing",
    "frontier",
    "iso_band",
    "population_sos_matrices",
    "run_hos_sweep",
    "run_sos_sweep",
    "run_tradeoff_sos",
    "run_tradeoff_hos",
    "worker_count",
]

QUICK_T = 20000
QUICK_TRIALS = 20


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 3
    T: int = 100000
    trials: int = 50
    seed: int = 20240601
    p_grid: tuple = (0.8, 1.0, 1.5, 2.0, 3.0)
    L_grid: tuple = (1, 2, 3, 4, 5, 6, 7)
    a: tuple = (0.2, 0.6, 0.9)
    K_grid: tuple = (1, 2, 3, 4, 5, 6)
    eps: float = 0.5
    delta: float = 0.05
    h: float = 1e-4
    tol: float = 1e-8
    symmetrize: bool = True
    report_api: bool = True
    mode: str = "sample"
    preset: str = "full"

    def __post_init__(self):
        for name in ("p_grid", "L_grid", "a", "K_grid"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not (self.p_grid and self.L_grid and self.K_grid):
            raise ValueError("parameter grids must be non-empty")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not self.eps > 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")
        if self.delta < 0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")
        if self.mode not in ("sample", "population"):
            raise ValueError(f"mode must be 'sample' or 'population', got {self.mode!r}")
        if self.preset not in ("full", "quick"):
            raise ValueError(f"preset must be 'full' or 'quick', got {self.preset!r}")
        if min(self.L_grid) < 1:
            raise ValueError("lag counts must be >= 1")
        if any(p <= 0 for p in self.p_grid):
            raise ValueError("shape parameters must be > 0")

    @classmethod
    def quick(cls, **overrides):
        return cls(**{"T": QUICK_T, "trials": QUICK_TRIALS, "preset": "quick", **overrides})

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class TrialRecord:
    coords: tuple
    trial: int
    probe: float
    api: float = None
    ms: float = 0.0


@dataclass
class GridResult:
    """Aggregated grid of probe means and population standard deviations.

    ``axes`` maps axis name to grid values; ``probe_mean`` has one dimension
    per axis. ``frontier`` (trade-offs only) lists the first-crossing value
    per ``p`` or None when the target is never reached. ``band`` is the
    iso-probe mask (HOS trade-off only).
    """

    kind: str
    axes: dict
    probe_mean: np.ndarray
    probe_std: np.ndarray
    trials: int
    T: int
    api_mean: np.ndarray = None
    api_std: np.ndarray = None
    records: list = field(default_factory=list, repr=False)
    frontier: list = None
    band: np.ndarray = None
    eps: float = None
    delta: float = None


class TrialError(RuntimeError):
    def __init__(self, cell, trial, cause):
        super().__init__(f"trial {trial} of cell {cell} failed: {cause!r}")
        self.cell = cell
        self.trial = trial


def worker_count(workers=None):
    """Resolve a worker count; ``STABPROBE_THREADS`` caps it (0 means auto)."""
    if workers is None:
        env = os.environ.get("STABPROBE_THREADS", "").strip()
        workers = int(env) if env else 1
    if workers <= 0:
        workers = os.cpu_count() or 1
    return workers


def monte_carlo(task, trials, base_seed, cell=(), workers=None):
    """Run ``task(seed)`` for ``trials`` streams and aggregate.

    Trial ``i`` receives ``RngSeed(base_seed, (*cell, i))``. ``task`` may
    return a scalar or an array; the mean and population std are taken over
    trials. Returns ``(mean, std, values, ms)`` where ``values`` is ordered
    by trial index regardless of the worker count.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    cell = tuple(cell)

    def run(i):
        t0 = time.perf_counter()
        try:
            out = task(RngSeed(base_seed, cell + (i,)))
        except Exception as exc:
            raise TrialError(cell, i, exc) from exc
        return np.asarray(out, dtype=float), 1e3 * (time.perf_counter() - t0)

    workers = min(worker_count(workers), trials)
    if workers == 1:
        results = [run(i) for i in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(trials)))
    values = np.stack([r[0] for r in results])
    ms = [r[1] for r in results]
    return values.mean(axis=0), values.std(axis=0), values, ms


def first_crossing(means, grid, eps):
    """Smallest grid value whose mean reaches ``eps``, or None."""
    for g, m in sorted(zip(grid, means), key=lambda t: t[0]):
        if m >= eps:
            return g
    return None


def frontier(mean_grid, grid, eps):
    """Row-wise :func:`first_crossing` over a ``(len(p), len(grid))`` mean grid."""
    return [first_crossing(row, grid, eps) for row in np.atleast_2d(mean_grid)]


def iso_band(means, eps, delta):
    return np.abs(np.asarray(means, dtype=float) - eps) <= delta


def population_sos_matrices(a, lags):
    """Exact lagged covariances of unit-variance AR(1) sources: ``diag(a**tau)``."""
    a = np.asarray(a, dtype=float)
    return [np.diag(a ** int(t)) for t in lags]


def _nan(x):
    return np.nan if x is None else x


def _whiten(X):
    return Whitener().fit_transform(X)


def _nested_hos_probes(ev_full, Ks, cfg):
    # The top-K selections are prefixes of one norm ordering, so each K's
    # Jacobian is a row prefix of the full one.
    J = jacobian_fd(ev_full, h=cfg.h)
    nn = ev_full.n ** 2
    return [report_from_jacobian(J[: K * nn], cfg.tol).probe for K in Ks]


def _hos_task(cfg, p, Ks):
    n = cfg.n
    if cfg.mode == "population":
        C = cumulant_tensor_from_kurtosis([gg_excess_kurtosis(p)] * n)

        def task(seed):
            probes = _nested_hos_probes(ObservationEvaluator.population_hos(C, K=n * (n + 1) // 2), Ks, cfg)
            return np.stack([probes, [np.nan] * len(Ks)])
        return task

    spec = SourceSpec("iid-gg", p=p)

    def task(seed):
        S = generate_sources(spec, n, cfg.T, seed.child(0))
        Z = _whiten(mix(np.eye(n), S))
        probes = _nested_hos_probes(ObservationEvaluator.from_samples(Z, "HOS", K=n * (n + 1) // 2), Ks, cfg)
        api = np.nan
        if cfg.report_api:
            H = random_orthogonal(n, seed.child(1))
            api = amari_index(jade_separate(mix(H, S)) @ H)
        return np.stack([probes, [api] * len(Ks)])
    return task


def _sos_task(cfg, spec, Ls, with_api):
    n = cfg.n
    basis = skew_basis(n)
    if cfg.mode == "population":
        J_full = jacobian_sos_analytic(population_sos_matrices(cfg.a, range(1, max(Ls) + 1)), basis)

        def task(seed):
            probes = [probe_from_rows(J_full, n, L, cfg.tol) for L in Ls]
            return np.stack([probes, [np.nan] * len(Ls)])
        return task

    def task(seed):
        S = generate_sources(spec, n, cfg.T, seed.child(0))
        Z = _whiten(mix(np.eye(n), S))
        R = sos_constraints(Z, max(Ls), symmetrize=cfg.symmetrize).matrices
        J_full = jacobian_sos_analytic(R, basis)
        probes = [probe_from_rows(J_full, n, L, cfg.tol) for L in Ls]
        apis = [np.nan] * len(Ls)
        if with_api:
            H = random_orthogonal(n, seed.child(1))
            X = mix(H, S)
            apis = [amari_index(sobi_separate(X, L) @ H) for L in Ls]
        return np.stack([probes, apis])
    return task


def probe_from_rows(J_full, n, L, tol):
    """Probe of the lag set ``1..L`` from the analytic Jacobian of lags ``1..Lmax``."""
    return report_from_jacobian(J_full[: L * n * n], tol).probe


def _records(coords_list, values, ms):
    recs = []
    for trial, (vals, t) in enumerate(zip(values, ms)):
        for j, coords in enumerate(coords_list):
            api = vals[1, j]
            recs.append(TrialRecord(coords, trial, float(vals[0, j]),
                                    None if np.isnan(api) else float(api), t))
    return recs


def _api(mean, std):
    if np.all(np.isnan(mean)):
        return None, None
    return mean, std


def run_hos_sweep(cfg, workers=None):
    """Full cumulant set at every ``p``; probe by finite differences."""
    K_full = cfg.n * (cfg.n + 1) // 2
    means, stds, amean, astd, recs = [], [], [], [], []
    for c, p in enumerate(cfg.p_grid):
        mean, std, values, ms = monte_carlo(_hos_task(cfg, p, [K_full]), cfg.trials, cfg.seed, (c,), workers)
        means.append(mean[0, 0])
        stds.append(std[0, 0])
        amean.append(mean[1, 0])
        astd.append(std[1, 0])
        recs += _records([(p,)], values, ms)
    api_mean, api_std = _api(np.array(amean), np.array(astd))
    return GridResult("hos", {"p": cfg.p_grid}, np.array(means), np.array(stds), cfg.trials, cfg.T,
                      api_mean, api_std, recs)


def run_sos_sweep(cfg, workers=None):
    """Gaussian AR(1) sources, lag sets ``1..L``; analytic Jacobian on sample matrices."""
    Ls = [int(L) for L in cfg.L_grid]
    spec = SourceSpec("ar1-gaussian", a=cfg.a)
    task = _sos_task(cfg, spec, Ls, cfg.report_api)
    mean, std, values, ms = monte_carlo(task, cfg.trials, cfg.seed, (0,), workers)
    api_mean, api_std = _api(mean[1], std[1])
    return GridResult("sos", {"L": tuple(Ls)}, mean[0], std[0], cfg.trials, cfg.T,
                      api_mean, api_std, _records([(L,) for L in Ls], values, ms))


def run_tradeoff_sos(cfg, workers=None):
    """AR(1) sources with generalized-Gaussian innovations of shape ``p``.

    The probe uses lagged covariances only; ``L_min(p)`` is the first ``L``
    whose mean probe reaches ``cfg.eps``.
    """
    Ls = [int(L) for L in cfg.L_grid]
    means, stds, recs = [], [], []
    for c, p in enumerate(cfg.p_grid):
        spec = SourceSpec("ar1-gg", p=p, a=cfg.a)
        mean, std, values, ms = monte_carlo(_sos_task(cfg, spec, Ls, False), cfg.trials, cfg.seed, (c,), workers)
        means.append(mean[0])
        stds.append(std[0])
        recs += _records([(p, L) for L in Ls], values, ms)
    means = np.array(means)
    return GridResult("tradeoff-sos", {"p": cfg.p_grid, "L": tuple(Ls)}, means, np.array(stds),
                      cfg.trials, cfg.T, records=recs, frontier=frontier(means, Ls, cfg.eps),
                      eps=cfg.eps)


def run_tradeoff_hos(cfg, workers=None):
    """i.i.d. generalized-Gaussian sources, top-``K`` cumulant matrices by norm."""
    Ks = [int(K) for K in cfg.K_grid]
    K_full = cfg.n * (cfg.n + 1) // 2
    if any(not 1 <= K <= K_full for K in Ks):
        raise ValueError(f"K grid must lie in 1..{K_full}, got {Ks}")
    cfg_no_api = cfg.with_(report_api=False)
    means, stds, recs = [], [], []
    for c, p in enumerate(cfg.p_grid):
        mean, std, values, ms = monte_carlo(_hos_task(cfg_no_api, p, Ks), cfg.trials, cfg.seed, (c,), workers)
        means.append(mean[0])
        stds.append(std[0])
        recs += _records([(p, K) for K in Ks], values, ms)
    means = np.array(means)
    return GridResult("tradeoff-hos", {"p": cfg.p_grid, "K": tuple(Ks)}, means, np.array(stds),
                      cfg.trials, cfg.T, records=recs, frontier=frontier(means, Ks, cfg.eps),
                      band=iso_band(means, cfg.eps, cfg.delta), eps=cfg.eps, delta=cfg.delta)
