"""Command-line entry point: ``stabprobe {probe,experiment,separate,selftest}``.

Configuration comes from an optional ``key = value`` file (``#`` comments)
overridden by flags. The resolved configuration is echoed to
``<out_dir>/config.resolved``, which can be fed back with ``--config``.

Exit codes: 0 success, 1 numeric or runtime failure, 2 usage or config error.
"""

import argparse
import os
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import reporting
from .experiments import (
    QUICK_T,
    QUICK_TRIALS,
    ExperimentConfig,
    population_sos_matrices,
    run_hos_sweep,
    run_sos_sweep,
    run_tradeoff_hos,
    run_tradeoff_sos,
)
from .probe import ObservationEvaluator, probe
from .separation import JADE, SOBI, amari_index
from .signals import RngSeed, SourceSpec, generate_sources, gg_excess_kurtosis, mix, random_orthogonal
from .statistics import Whitener, cumulant_tensor_from_kurtosis


class ConfigError(ValueError):
    pass


def _bool(v):
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _int(v):
    f = float(v)
    if f != int(f):
        raise ValueError(f"not an integer: {v!r}")
    return int(f)


def _floats(v):
    return tuple(float(x) for x in str(v).split(",") if x.strip())


def _ints(v):
    return tuple(_int(x) for x in str(v).split(",") if x.strip())


def _choice(*options):
    def parse(v):
        v = str(v).strip()
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {v!r}")
        return v
    return parse


_EXP_DEFAULTS = {f.name: f.default for f in fields(ExperimentConfig)}

# key -> (parser, default)
KEYS = {
    "n": (_int, _EXP_DEFAULTS["n"]),
    "T": (_int, _EXP_DEFAULTS["T"]),
    "trials": (_int, _EXP_DEFAULTS["trials"]),
    "seed": (_int, _EXP_DEFAULTS["seed"]),
    "p_grid": (_floats, _EXP_DEFAULTS["p_grid"]),
    "L_grid": (_ints, _EXP_DEFAULTS["L_grid"]),
    "a": (_floats, _EXP_DEFAULTS["a"]),
    "K_grid": (_ints, _EXP_DEFAULTS["K_grid"]),
    "eps": (float, _EXP_DEFAULTS["eps"]),
    "delta": (float, _EXP_DEFAULTS["delta"]),
    "h": (float, _EXP_DEFAULTS["h"]),
    "tol": (float, _EXP_DEFAULTS["tol"]),
    "symmetrize": (_bool, _EXP_DEFAULTS["symmetrize"]),
    "report_api": (_bool, _EXP_DEFAULTS["report_api"]),
    "mode": (_choice("sample", "population"), _EXP_DEFAULTS["mode"]),
    "preset": (_choice("full", "quick"), _EXP_DEFAULTS["preset"]),
    "out_dir": (str, None),
    "format": (_choice("csv", "csv+svg"), "csv"),
    "records": (_bool, False),
    # single-probe / separation parameters
    "family": (_choice("sos", "hos"), "sos"),
    "lags": (_int, 1),
    "p": (float, 1.0),
    "K": (_int, 0),
}


@dataclass
class CliConfig:
    values: dict

    def __getattr__(self, name):
        try:
            return self.values[name]
        except KeyError:
            raise AttributeError(name) from None

    def experiment(self):
        return ExperimentConfig(**{k: self.values[k] for k in _EXP_DEFAULTS})

    def to_text(self):
        lines = []
        for key in KEYS:
            v = self.values[key]
            if isinstance(v, tuple):
                v = ",".join(repr(x) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            elif v is None:
                v = ""
            lines.append(f"{key} = {v}")
        return "\n".join(lines) + "\n"


def read_config_file(path):
    raw = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            raw[key] = value
    return raw


def parse_config(path=None, overrides=None, require_out_dir=True):
    """Resolve defaults, then file values, then flag overrides."""
    raw = read_config_file(path) if path else {}
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    for key in raw:
        if key not in KEYS:
            raise ConfigError(f"unknown config key: {key}")
    values = {}
    for key, (parse, default) in KEYS.items():
        if key in raw and raw[key] != "":
            try:
                values[key] = parse(raw[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from None
        else:
            values[key] = default
    if values["preset"] == "quick":
        if "T" not in raw:
            values["T"] = QUICK_T
        if "trials" not in raw:
            values["trials"] = QUICK_TRIALS
    if require_out_dir and not values["out_dir"]:
        raise ConfigError("out_dir is required (set out_dir in the config file or pass --out-dir)")
    cfg = CliConfig(values)
    try:
        cfg.experiment()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def _write_resolved(cfg):
    os.makedirs(cfg.out_dir, exist_ok=True)
    with open(os.path.join(cfg.out_dir, "config.resolved"), "w") as fh:
        fh.write(cfg.to_text())


def _population_evaluator(cfg):
    n = cfg.n
    if cfg.family == "sos":
        if len(cfg.a) != n:
            raise ValueError(f"need {n} AR coefficients, got {len(cfg.a)}")
        lags = (0,) if cfg.lags == 0 else tuple(range(1, cfg.lags + 1))
        return ObservationEvaluator.population_sos(population_sos_matrices(cfg.a, lags), lags=lags)
    C = cumulant_tensor_from_kurtosis([gg_excess_kurtosis(cfg.p)] * n)
    return ObservationEvaluator.population_hos(C, K=cfg.K or None)


def _sample_evaluator(cfg):
    seed = RngSeed(cfg.seed, (0, 0))
    if cfg.family == "sos":
        S = generate_sources(SourceSpec("ar1-gaussian", a=cfg.a), cfg.n, cfg.T, seed.child(0))
    else:
        S = generate_sources(SourceSpec("iid-gg", p=cfg.p), cfg.n, cfg.T, seed.child(0))
    Z = Whitener().fit_transform(S)
    if cfg.family == "sos":
        lags = (0,) if cfg.lags == 0 else tuple(range(1, cfg.lags + 1))
        return ObservationEvaluator.from_samples(Z, "SOS", lags=lags, symmetrize=cfg.symmetrize)
    return ObservationEvaluator.from_samples(Z, "HOS", K=cfg.K or None)


def cmd_probe(cfg, out=None):
    ev = _population_evaluator(cfg) if cfg.mode == "population" else _sample_evaluator(cfg)
    mode = "analytic" if cfg.family == "sos" else "fd"
    report = probe(ev, mode=mode, h=cfg.h, tol=cfg.tol)
    reporting.write_report(os.path.join(cfg.out_dir, "probe_report.txt"), report)
    print(f"probe={report.probe:.17g} kernel_dim={report.kernel_dim}", file=out)
    return report


_RUNNERS = {
    "hos": run_hos_sweep,
    "sos": run_sos_sweep,
    "tradeoff-sos": run_tradeoff_sos,
    "tradeoff-hos": run_tradeoff_hos,
}


def cmd_experiment(cfg, which, out=None):
    result = _RUNNERS[which](cfg.experiment())
    stem = which.replace("-", "_")
    paths = []

    def path(suffix):
        p = os.path.join(cfg.out_dir, stem + suffix)
        paths.append(p)
        return p

    if which in ("hos", "sos"):
        reporting.write_sweep_csv(path("_sweep.csv"), result)
        if cfg.format == "csv+svg":
            with open(path("_sweep.svg"), "w") as fh:
                fh.write(reporting.svg_sweep(result, title=f"{which.upper()} probe sweep"))
    else:
        reporting.write_tradeoff_csv(path(".csv"), result)
        reporting.write_frontier_csv(path("_frontier.csv"), result)
        if result.band is not None:
            reporting.write_band_csv(path("_band.csv"), result)
        if cfg.format == "csv+svg":
            with open(path(".svg"), "w") as fh:
                fh.write(reporting.svg_heatmap(result, title=f"{which} (eps={cfg.eps:g})"))
    if cfg.records:
        reporting.write_records_csv(path("_records.csv"), result)
    for p in paths:
        print(p, file=out)
    return result


def _read_signal_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 1:]


def cmd_separate(cfg, which, input_path=None, out=None):
    est = JADE() if which == "jade" else SOBI(n_lags=max(cfg.lags, 1))
    H = None
    if input_path:
        X = _read_signal_csv(input_path)
    else:
        seed = RngSeed(cfg.seed, (0, 0))
        if which == "jade":
            spec = SourceSpec("iid-gg", p=cfg.p)
        else:
            spec = SourceSpec("ar1-gaussian", a=cfg.a)
        S = generate_sources(spec, cfg.n, cfg.T, seed.child(0))
        H = random_orthogonal(cfg.n, seed.child(1))
        X = mix(H, S)
    W = est.fit(X).components_
    path = os.path.join(cfg.out_dir, f"{which}_demixing.csv")
    with open(path, "w") as fh:
        for row in W:
            fh.write(",".join(reporting.fmt(v) for v in row) + "\n")
    if H is not None:
        print(f"api={amari_index(W @ H):.17g}", file=out)
    print(path, file=out)
    return W


def _common_flags(parser):
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--out-dir", dest="out_dir")
    parser.add_argument("--n", dest="n")
    parser.add_argument("--T", dest="T")
    parser.add_argument("--trials")
    parser.add_argument("--seed")
    parser.add_argument("--p-grid", dest="p_grid")
    parser.add_argument("--L-grid", dest="L_grid")
    parser.add_argument("--K-grid", dest="K_grid")
    parser.add_argument("--a", "--ar", dest="a", help="comma-separated AR coefficients")
    parser.add_argument("--eps")
    parser.add_argument("--delta")
    parser.add_argument("--h")
    parser.add_argument("--tol")
    parser.add_argument("--symmetrize")
    parser.add_argument("--report-api", dest="report_api")
    parser.add_argument("--mode")
    parser.add_argument("--population", action="store_const", const="population", dest="mode",
                        help="shorthand for --mode population")
    parser.add_argument("--preset")
    parser.add_argument("--format")
    parser.add_argument("--records", action="store_const", const="true")
    parser.add_argument("--family")
    parser.add_argument("--lags")
    parser.add_argument("--p")
    parser.add_argument("--K")


def build_parser():
    parser = argparse.ArgumentParser(prog="stabprobe", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    _common_flags(sub.add_parser("probe", help="evaluate one Jacobian probe"))
    exp = sub.add_parser("experiment", help="run a Monte Carlo experiment")
    exp.add_argument("which", choices=sorted(_RUNNERS))
    _common_flags(exp)
    sep = sub.add_parser("separate", help="run a reference separator")
    sep.add_argument("which", choices=["jade", "sobi"])
    sep.add_argument("--input", help="signal CSV (t,ch1,...,chn) to separate instead of simulating")
    _common_flags(sep)
    sub.add_parser("selftest", help="run the population oracle checks")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "selftest":
        from .selftest import main as selftest_main
        return selftest_main()
    overrides = {k: getattr(args, k, None) for k in KEYS}
    try:
        cfg = parse_config(args.config, overrides)
    except (ConfigError, OSError) as exc:
        print(f"stabprobe: config error: {exc}", file=sys.stderr)
        return 2
    try:
        _write_resolved(cfg)
        if args.command == "probe":
            cmd_probe(cfg)
        elif args.command == "experiment":
            cmd_experiment(cfg, args.which)
        else:
            cmd_separate(cfg, args.which, args.input)
    except Exception as exc:
        print(f"stabprobe: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
