"""Experiment orchestration: JSON configs, seeded trials, CSV/JSON outputs.

A config file is a JSON object such as::

    {
      "schema_version": 1,
      "experiment": "circular-law",
      "ensemble": {"d": 2, "kind": "gaussian-complex", "mode": "quaternionic"},
      "sizes": [100],
      "samples": 50,
      "seed": 7,
      "out": "runs/fig1",
      "assertions": [{"metric": "radial_gap", "max": 0.06}]
    }

Every trial draws from its own stream derive_seed(seed, n, sample_index), so
results do not depend on how trials are spread over workers.
"""
from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, rng
from .ensembles import (ATOM_KINDS, MODES, BlockEnsembleSpec, PerturbationSpec,
                        sample_c0_matrix, sample_perturbed)
from .errors import CapExceededError, ConfigError
from .limitlaw import fixed_point_residual, g_limit, stieltjes_m
from .linalg import complex_eigen, singular_values
from .spectral import (EmpiricalMeasure, circle_gap, conjugate_pairing_error, empirical_stieltjes, g_emp,
                       near_origin_fraction)

SCHEMA_VERSION = 1
EXPERIMENTS = ("circular-law", "lsv", "stieltjes-compare", "g-function", "rate-levy")
EIGEN_COLUMNS = ("sample_index", "n", "re", "im")
METRIC_COLUMNS = ("experiment", "n", "metric_name", "value", "ci_halfwidth")
WORKERS_ENV = "RMTLAB_WORKERS"
LSV_MAX_N = 200
LSV_MAX_TRIALS = 10**4


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def parse_complex(v, field_name="value") -> complex:
    """Accept 1.5, [re, im] or a Python-style string such as "0.5+1j"."""
    try:
        if isinstance(v, (list, tuple)):
            if len(v) != 2:
                raise ValueError
            return complex(float(v[0]), float(v[1]))
        if isinstance(v, str):
            return complex(v.replace(" ", "").replace("i", "j"))
        return complex(v)
    except (TypeError, ValueError):
        raise ConfigError(f"cannot read {v!r} as a complex number", field_name) from None


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def map_trials(fn, items):
    """Ordered map over trials, threaded when RMTLAB_WORKERS > 1."""
    items = list(items)
    workers = _workers()
    if workers == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -- configuration --------------------------------------------------------------

@dataclass
class EnsembleConfig:
    d: int = 2
    kind: str = "gaussian-complex"
    mode: str = "independent"
    support: tuple = ()
    probabilities: tuple = ()

    def build(self) -> BlockEnsembleSpec:
        kw = {}
        if self.kind == "discrete-custom":
            kw = dict(support=tuple(self.support), probabilities=tuple(self.probabilities))
        return BlockEnsembleSpec.uniform(self.d, self.kind, self.mode, **kw)


@dataclass
class ExperimentConfig:
    experiment: str
    ensemble: EnsembleConfig
    sizes: list
    samples: int = 1
    seed: int = 0
    out: str | None = None
    truncation: dict | None = None
    perturbation: dict | None = None
    grid: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    assertions: list = field(default_factory=list)
    schema_version: int = SCHEMA_VERSION

    def to_json(self) -> dict:
        return asdict(self)


def _require(cond, msg, path):
    if not cond:
        raise ConfigError(msg, path)


def _int(v, path, minimum=None):
    _require(isinstance(v, int) and not isinstance(v, bool), "must be an integer", path)
    if minimum is not None:
        _require(v >= minimum, f"must be >= {minimum}", path)
    return v


def config_from_dict(raw: dict) -> ExperimentConfig:
    _require(isinstance(raw, dict), "config must be a JSON object", "<root>")
    known = {f for f in ExperimentConfig.__dataclass_fields__}
    for key in raw:
        _require(key in known, "unknown field", key)
    _require(raw.get("schema_version", SCHEMA_VERSION) == SCHEMA_VERSION,
             f"unsupported schema version (expected {SCHEMA_VERSION})", "schema_version")
    exp = raw.get("experiment")
    _require(exp in EXPERIMENTS, f"must be one of {', '.join(EXPERIMENTS)}", "experiment")

    ens_raw = raw.get("ensemble", {})
    _require(isinstance(ens_raw, dict), "must be an object", "ensemble")
    for key in ens_raw:
        _require(key in EnsembleConfig.__dataclass_fields__, "unknown field", f"ensemble.{key}")
    ens = EnsembleConfig(**ens_raw)
    _int(ens.d, "ensemble.d", 2)
    _require(ens.kind in ATOM_KINDS, f"must be one of {', '.join(ATOM_KINDS)}", "ensemble.kind")
    _require(ens.mode in MODES, f"must be one of {', '.join(MODES)}", "ensemble.mode")
    try:
        ens.build()
    except ValueError as exc:
        raise ConfigError(str(exc), "ensemble") from None

    sizes = raw.get("sizes")
    _require(isinstance(sizes, list) and sizes, "must be a nonempty list", "sizes")
    for i, n in enumerate(sizes):
        _int(n, f"sizes[{i}]", 2)
    samples = _int(raw.get("samples", 1), "samples", 1)
    seed = _int(raw.get("seed", 0), "seed", 0)
    _require(seed < 2**64, "must fit in 64 bits", "seed")

    grid = raw.get("grid", {})
    _require(isinstance(grid, dict), "must be an object", "grid")
    for key, vals in grid.items():
        _require(isinstance(vals, list) and vals, "grid must be nonempty", f"grid.{key}")
        for i, v in enumerate(vals):
            parse_complex(v, f"grid.{key}[{i}]")
    if exp == "stieltjes-compare":
        for key in ("z", "w"):
            _require(key in grid, "grid must be nonempty", f"grid.{key}")
        for i, w in enumerate(grid["w"]):
            _require(parse_complex(w).imag > 0, "Im(w) must be positive", f"grid.w[{i}]")
    if exp == "g-function":
        for key in ("s", "t"):
            _require(key in grid, "grid must be nonempty", f"grid.{key}")
    if exp == "rate-levy":
        tr = raw.get("truncation")
        _require(isinstance(tr, dict) and "delta" in tr, "needs a delta", "truncation")
        _require(float(tr["delta"]) > 0, "must be positive", "truncation.delta")
    if exp == "lsv":
        _require(max(sizes) <= LSV_MAX_N, f"n is capped at {LSV_MAX_N}", "sizes")
        _require(samples <= LSV_MAX_TRIALS, f"trials are capped at {LSV_MAX_TRIALS}", "samples")
    pert = raw.get("perturbation")
    if pert is not None:
        _require(isinstance(pert, dict), "must be an object", "perturbation")
        try:
            PerturbationSpec(**pert)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), "perturbation") from None
    assertions = raw.get("assertions", [])
    _require(isinstance(assertions, list), "must be a list", "assertions")
    for i, a in enumerate(assertions):
        _require(isinstance(a, dict) and "metric" in a, "needs a metric name", f"assertions[{i}]")
        _require("max" in a or "min" in a, "needs a max or min bound", f"assertions[{i}]")
    return ExperimentConfig(
        experiment=exp, ensemble=ens, sizes=list(sizes), samples=samples, seed=seed,
        out=raw.get("out"), truncation=raw.get("truncation"), perturbation=pert,
        grid=grid, params=dict(raw.get("params", {})), assertions=assertions,
    )


def load_config(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON ({exc.msg} at line {exc.lineno})", str(path)) from None
    return config_from_dict(raw)


# -- reports ---------------------------------------------------------------------

@dataclass
class MetricRow:
    experiment: str
    n: int
    metric_name: str
    value: float
    ci_halfwidth: float | None = None
    seed: int = 0

    def cells(self):
        return [self.experiment, fmt(self.n), self.metric_name, fmt(self.value), fmt(self.ci_halfwidth)]


@dataclass
class AssertionResult:
    metric: str
    n: int
    value: float
    bound: float
    kind: str  # "max" or "min"
    passed: bool


@dataclass
class RunReport:
    config: dict
    metrics: list
    assertions: list
    seed: int
    version: str = __version__
    wall_clock: float = 0.0
    eigenvalues: list = field(default_factory=list, repr=False)  # (sample_index, n, values)
    extra_tables: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    def metric(self, name, n=None):
        for row in self.metrics:
            if row.metric_name == name and (n is None or row.n == n):
                return row.value
        raise KeyError(name)

    def summary(self) -> dict:
        return {
            "version": self.version,
            "seed": self.seed,
            "passed": self.passed,
            "wall_clock_seconds": round(self.wall_clock, 3),
            "config": self.config,
            "assertions": [asdict(a) for a in self.assertions],
            "metrics": [asdict(m) for m in self.metrics],
        }


def write_eigenvalues(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EIGEN_COLUMNS)
        for sample_index, n, values in sorted(rows, key=lambda r: (r[1], r[0])):
            for v in values:
                w.writerow([sample_index, n, fmt(v.real), fmt(v.imag)])


def write_metrics(path, metrics):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for row in metrics:
            w.writerow(row.cells())


def read_metrics(path) -> list[MetricRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != METRIC_COLUMNS:
            raise ValueError(f"unexpected metrics header {header}")
        return [MetricRow(e, int(n), name, float(v), float(ci) if ci else None)
                for e, n, name, v, ci in reader]


def read_eigenvalues(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != EIGEN_COLUMNS:
            raise ValueError(f"unexpected eigenvalue header {header}")
        return [(int(i), int(n), complex(float(re), float(im))) for i, n, re, im in reader]


def write_outputs(report: RunReport, out):
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if report.eigenvalues:
            write_eigenvalues(out / "eigenvalues.csv", report.eigenvalues)
        write_metrics(out / "metrics.csv", report.metrics)
        for name, (header, rows) in report.extra_tables.items():
            with open(out / name, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                w.writerows(rows)
        (out / "summary.json").write_text(json.dumps(report.summary(), indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot write outputs ({exc.strerror})", "out") from None


# -- experiment kernels -----------------------------------------------------------

def trial_seed(seed: int, n: int, sample_index: int) -> int:
    return rng.derive_seed(seed, n, sample_index)


def _perturbation(cfg):
    return PerturbationSpec(**cfg.perturbation) if cfg.perturbation else None


def _mean_ci(values):
    v = np.asarray(values, dtype=float)
    if len(v) < 2:
        return float(v.mean()), None
    return float(v.mean()), float(1.96 * v.std(ddof=1) / math.sqrt(len(v)))


def _circular_law(cfg: ExperimentConfig, report: RunReport):
    spec = cfg.ensemble.build()
    pert = _perturbation(cfg)
    radius = float(cfg.params.get("near_origin_radius", 0.3))
    for n in cfg.sizes:
        def one(i, n=n):
            x = sample_perturbed(spec, n, trial_seed(cfg.seed, n, i), pert)
            vals = complex_eigen(x / math.sqrt(n)).values
            return i, n, vals[np.lexsort((vals.imag, vals.real))]

        rows = map_trials(one, range(cfg.samples))
        report.eigenvalues.extend(rows)
        measures = [EmpiricalMeasure.uniform(v) for _, _, v in rows]
        add = lambda name, val, ci=None: report.metrics.append(
            MetricRow(cfg.experiment, n, name, val, ci, cfg.seed))
        add("radial_gap", circle_gap(measures))
        add("near_origin_fraction", near_origin_fraction(
            EmpiricalMeasure.uniform(np.concatenate([v for _, _, v in rows])), radius))
        add("spectral_radius_max", max(float(np.abs(v).max()) for _, _, v in rows))
        if spec.mode == "quaternionic":
            add("conjugate_pairing_error", max(conjugate_pairing_error(v) for _, _, v in rows))


def lsv_experiment(spec: BlockEnsembleSpec, n: int, A_exponent: float, trials: int, seed: int,
                   perturbation: PerturbationSpec | None = None):
    """Per-trial sigma_min of X_n + N_n and the count at or below n^(-A)."""
    if n > LSV_MAX_N or trials > LSV_MAX_TRIALS:
        raise CapExceededError(f"lsv runs are capped at n <= {LSV_MAX_N}, trials <= {LSV_MAX_TRIALS}")
    threshold = float(n) ** (-A_exponent)

    def one(i):
        return singular_values(sample_perturbed(spec, n, trial_seed(seed, n, i), perturbation)).smallest

    sig = np.array(map_trials(one, range(trials)))
    return LsvReport(n=n, threshold=threshold, sigma_min=sig, count_below=int(np.sum(sig <= threshold)))


@dataclass
class LsvReport:
    n: int
    threshold: float
    sigma_min: np.ndarray
    count_below: int


def _lsv(cfg: ExperimentConfig, report: RunReport):
    spec = cfg.ensemble.build()
    a = float(cfg.params.get("A_exponent", 10.0))
    rows = []
    for n in cfg.sizes:
        rep = lsv_experiment(spec, n, a, cfg.samples, cfg.seed, _perturbation(cfg))
        rows.extend([i, n, fmt(s)] for i, s in enumerate(rep.sigma_min))
        for name, val in (("count_below", rep.count_below), ("threshold", rep.threshold),
                          ("sigma_min_min", float(rep.sigma_min.min())),
                          ("sigma_min_median", float(np.median(rep.sigma_min)))):
            report.metrics.append(MetricRow(cfg.experiment, n, name, val, None, cfg.seed))
    report.extra_tables["sigma_min.csv"] = (("sample_index", "n", "sigma_min"), rows)


@dataclass
class StieltjesRow:
    n: int
    z: complex
    w: complex
    mean_abs_dev: float
    ci_halfwidth: float | None
    residual: float  # |m_hat + (m_hat + w)/((m_hat + w)^2 - |z|^2)| averaged over samples
    m_limit: complex


def stieltjes_compare(spec: BlockEnsembleSpec, sizes, z: complex, w: complex, samples: int,
                      seed: int) -> list[StieltjesRow]:
    """|m_hat_n(z, w) - m(z, w)| per size for the Hermitization of X/sqrt(n) - zI."""
    if not w.imag > 0:
        raise ValueError("w must lie in the upper half-plane")
    m = stieltjes_m(z, w)
    out = []
    for n in sizes:
        def one(i, n=n):
            x = sample_c0_matrix(spec, n, trial_seed(seed, n, i))
            return empirical_stieltjes(x, z, w, math.sqrt(n), block_traces=False).m_hat

        mh = np.array(map_trials(one, range(samples)))
        dev, ci = _mean_ci(np.abs(mh - m))
        res = float(np.mean([abs(fixed_point_residual(v, z, w)) for v in mh]))
        out.append(StieltjesRow(n, complex(z), complex(w), dev, ci, res, m))
    return out


def _stieltjes(cfg: ExperimentConfig, report: RunReport):
    spec = cfg.ensemble.build()
    for zi, zv in enumerate(cfg.grid["z"]):
        for wi, wv in enumerate(cfg.grid["w"]):
            tag = "" if len(cfg.grid["z"]) * len(cfg.grid["w"]) == 1 else f"[{zi},{wi}]"
            for row in stieltjes_compare(spec, cfg.sizes, parse_complex(zv), parse_complex(wv),
                                         cfg.samples, cfg.seed):
                report.metrics.append(MetricRow(cfg.experiment, row.n, "mean_abs_dev" + tag,
                                                row.mean_abs_dev, row.ci_halfwidth, cfg.seed))
                report.metrics.append(MetricRow(cfg.experiment, row.n, "cubic_residual" + tag,
                                                row.residual, None, cfg.seed))


def _g_function(cfg: ExperimentConfig, report: RunReport):
    spec = cfg.ensemble.build()
    h = float(cfg.params.get("h", 1e-3))
    for n in cfg.sizes:
        for si, s in enumerate(cfg.grid["s"]):
            for ti, t in enumerate(cfg.grid["t"]):
                s, t = float(parse_complex(s).real), float(parse_complex(t).real)

                def one(i, n=n, s=s, t=t):
                    x = sample_c0_matrix(spec, n, trial_seed(cfg.seed, n, i))
                    return g_emp(x, s, t, h, math.sqrt(n))

                err, ci = _mean_ci([abs(g - g_limit(s, t)) for g in map_trials(one, range(cfg.samples))])
                report.metrics.append(MetricRow(cfg.experiment, n, f"g_abs_error[{si},{ti}]", err, ci, cfg.seed))


def _rate_levy(cfg: ExperimentConfig, report: RunReport):
    from .truncation import truncation_levy

    spec = cfg.ensemble.build()
    delta = float(cfg.truncation["delta"])
    eta = float(cfg.truncation.get("eta", 1.0))
    zs = [parse_complex(z) for z in cfg.grid.get("z", [0.0])]
    for n in cfg.sizes:
        for zi, z in enumerate(zs):
            vals = map_trials(lambda i, n=n, z=z: truncation_levy(spec, n, trial_seed(cfg.seed, n, i),
                                                                  delta, eta, z), range(cfg.samples))
            mean, ci = _mean_ci(vals)
            report.metrics.append(MetricRow(cfg.experiment, n, f"levy_truncation[{zi}]", mean, ci, cfg.seed))


_KERNELS = {
    "circular-law": _circular_law,
    "lsv": _lsv,
    "stieltjes-compare": _stieltjes,
    "g-function": _g_function,
    "rate-levy": _rate_levy,
}


def _check_assertions(cfg: ExperimentConfig, report: RunReport):
    for a in cfg.assertions:
        rows = [r for r in report.metrics if r.metric_name == a["metric"]
                and ("n" not in a or r.n == a["n"])]
        if not rows:
            raise ConfigError(f"no metric named {a['metric']!r} was produced", "assertions")
        for r in rows:
            for kind in ("max", "min"):
                if kind in a:
                    bound = float(a[kind])
                    ok = r.value <= bound if kind == "max" else r.value >= bound
                    report.assertions.append(AssertionResult(a["metric"], r.n, r.value, bound, kind, ok))


def run_experiment(cfg: ExperimentConfig | dict, out=None) -> RunReport:
    """Run one experiment; writes files when an output directory is given."""
    if isinstance(cfg, dict):
        cfg = config_from_dict(cfg)
    start = time.perf_counter()
    report = RunReport(config=cfg.to_json(), metrics=[], assertions=[], seed=cfg.seed)
    _KERNELS[cfg.experiment](cfg, report)
    report.metrics.sort(key=lambda r: (r.n, r.metric_name))
    _check_assertions(cfg, report)
    report.wall_clock = time.perf_counter() - start
    out = out or cfg.out
    if out:
        write_outputs(report, out)
    return report
