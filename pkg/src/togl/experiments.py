"""Simulation study runner: the sinc experiments and their CSV reports.

Each ``run_*`` function takes an :class:`ExperimentConfig` and returns a
:class:`RunReport` holding CSV tables plus a manifest. Trials are independent
and reduced in (trial, cell) order, so the worker count never changes output.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import os
import platform
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .baselines import fit_lasso_fista, fit_ridge, power_iteration
from .data import SINC, SampleSet, gen_samples, rmse, trial_seed
from .dictionary import build_rbf_dictionary, packing_centers, rbf_builder
from .errors import ConfigError
from .greedy import (
    ARGMAX,
    DELTA_ARBITRARY,
    DELTA_RANDOM,
    UNIFORM_RANDOM,
    GreedyConfig,
    adaptive,
    adaptive_argmax_sweep,
    fit_greedy,
    fixed_k,
    greedy_path,
    kth_max,
    threshold_only,
    threshold_plus_k,
)
from .modelsel import cross_validate, log_grid

OGL_METHODS = {"OGL1": ARGMAX, "OGL2": kth_max(2), "OGL3": kth_max(3), "OGLR": UNIFORM_RANDOM}
TOGL_METHODS = {"TOGL1": ARGMAX, "TOGL2": kth_max(2), "TOGL3": kth_max(3), "TOGLR": DELTA_RANDOM}
DTOGL_METHODS = {
    "delta-TOGL1": ARGMAX,
    "delta-TOGL2": kth_max(2),
    "delta-TOGL3": kth_max(3),
    "delta-TOGLR": DELTA_RANDOM,
}
# only reachable through `fit`: the arbitrary-active-atom variants
EXTRA_METHODS = {"TOGL": DELTA_ARBITRARY, "delta-TOGL": DELTA_ARBITRARY}

KINDS = ("ogl-compare", "togl-compare", "delta-togl", "cost-profile",
         "phase-diagram", "method-table", "fit")
MODES = ("oracle-on-test", "cv")


# --------------------------------------------------------------------------- config


@dataclass
class ExperimentConfig:
    kind: str
    m_train: int = 1000
    m_test: int = 1000
    n_atoms: int = 300
    eta: float = 1.0
    sigmas: list = field(default_factory=lambda: [0.1, 0.5, 1.0, 2.0])
    delta_grid: dict = field(default_factory=lambda: {"lo": 1e-6, "hi": 0.5, "count": 100})
    k_max: int = 30
    trials: int = 10
    seed: int = 0
    normalize: bool = False
    mode: str = "oracle-on-test"
    cv_folds: int = 5
    methods: Optional[list] = None
    test_sigma: float = 0.0
    truncation_M: Optional[float] = None
    # phase diagram
    m_list: list = field(default_factory=lambda: [100, 200, 400, 800, 1600])
    accuracies: list = field(default_factory=lambda: [0.01, 0.015, 0.02, 0.03, 0.05, 0.08, 0.1])
    # method table
    n_list: list = field(default_factory=lambda: [300, 1000, 2000])
    ridge_grid: dict = field(default_factory=lambda: {"lo": 1e-8, "hi": 1.0, "count": 17})
    lasso_grid: dict = field(default_factory=lambda: {"lo": 1e-7, "hi": 1e-1, "count": 13})
    lasso_max_iter: int = 20000
    lasso_tol: float = 1e-8
    # single fit
    method: str = "delta-TOGL1"
    delta: Optional[float] = None
    k: Optional[int] = None
    lam: Optional[float] = None
    domain: Optional[list] = None
    workers: int = 1

    @classmethod
    def defaults(cls, kind: str) -> "ExperimentConfig":
        cfg = cls(kind)
        if kind in ("cost-profile", "phase-diagram", "method-table"):
            cfg.sigmas = [0.1]
        if kind == "phase-diagram":
            cfg.trials = 100
        return cfg

    @classmethod
    def from_dict(cls, obj: dict, kind: Optional[str] = None) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        kind = kind or obj.get("kind")
        if kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {kind!r}")
        if "kind" in obj and obj["kind"] != kind:
            raise ConfigError(f"config is for {obj['kind']!r}, not {kind!r}")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(obj) - names)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg = cls.defaults(kind)
        for key, val in obj.items():
            setattr(cfg, key, val)
        cfg.kind = kind
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path, kind=None) -> "ExperimentConfig":
        try:
            obj = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if isinstance(obj, dict) and obj.get("artifact") == "togl" and "config" in obj:
            # a run manifest: replay the config it echoes
            obj = obj["config"]
        return cls.from_dict(obj, kind)

    def validate(self):
        def positive_int(name):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")

        for name in ("m_train", "m_test", "n_atoms", "k_max", "trials", "cv_folds",
                     "lasso_max_iter", "workers"):
            positive_int(name)
        if not self.eta > 0:
            raise ConfigError("eta must be positive")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if not self.sigmas or any(s < 0 for s in self.sigmas):
            raise ConfigError("sigmas must be a nonempty list of nonnegative numbers")
        if self.test_sigma < 0:
            raise ConfigError("test_sigma must be nonnegative")
        for name in ("delta_grid", "ridge_grid", "lasso_grid"):
            g = getattr(self, name)
            if set(g) != {"lo", "hi", "count"}:
                raise ConfigError(f"{name} needs exactly the keys lo, hi, count")
            try:
                log_grid(g["lo"], g["hi"], g["count"])
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{name}: {exc}") from exc
        if not 0 < self.delta_grid["hi"] <= 1:
            raise ConfigError("delta grid must lie in (0, 1]")
        if any((not isinstance(m, int)) or m < self.cv_folds for m in self.m_list):
            raise ConfigError("m_list entries must be integers >= cv_folds")
        if any((not isinstance(n, int)) or n < 1 for n in self.n_list):
            raise ConfigError("n_list entries must be positive integers")
        if not self.accuracies or any(a <= 0 for a in self.accuracies):
            raise ConfigError("accuracies must be positive")
        if self.truncation_M is not None and not self.truncation_M > 0:
            raise ConfigError("truncation_M must be positive")
        known = {**OGL_METHODS, **TOGL_METHODS, **DTOGL_METHODS, **EXTRA_METHODS,
                 "OGL": None, "ridge": None, "lasso": None}
        for name in self.methods or []:
            if name not in known:
                raise ConfigError(f"unknown method {name!r}")
        if self.kind == "fit" and self.method not in known:
            raise ConfigError(f"unknown method {self.method!r}")
        return self

    def deltas(self) -> np.ndarray:
        g = self.delta_grid
        return np.asarray(log_grid(g["lo"], g["hi"], g["count"]).values)

    def selected(self, table: dict) -> list:
        if self.methods is None:
            return list(table)
        return [m for m in self.methods if m in table]


# --------------------------------------------------------------------------- reports


def fmt(v) -> str:
    """Locale-free, round-trippable number formatting (17 significant digits)."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _parse(cell: str):
    for conv in (int, float):
        try:
            return conv(cell)
        except ValueError:
            pass
    return cell


@dataclass
class Table:
    header: list
    rows: list

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([fmt(v) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Table":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        return cls(header, [[_parse(c) for c in row] for row in reader])

    def records(self) -> list[dict]:
        return [dict(zip(self.header, row)) for row in self.rows]


@dataclass
class RunReport:
    kind: str
    tables: dict
    manifest: dict

    @property
    def rows(self) -> list[dict]:
        """Records of the main table (the first one)."""
        return next(iter(self.tables.values())).records()

    def write(self, outdir) -> list[Path]:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, table in self.tables.items():
            p = outdir / f"{name}.csv"
            p.write_text(table.to_csv())
            paths.append(p)
        p = outdir / "manifest.json"
        p.write_text(json.dumps(self.manifest, indent=2, sort_keys=True) + "\n")
        paths.append(p)
        return paths


def _manifest(cfg: ExperimentConfig, extra=None) -> dict:
    conf = dataclasses.asdict(cfg)
    man = {
        "artifact": "togl",
        "version": __version__,
        "experiment": cfg.kind,
        "mode": cfg.mode,
        "master_seed": cfg.seed,
        "trial_seeds": [trial_seed(cfg.seed, t) for t in range(cfg.trials)],
        "seed_rule": "trial seed = master XOR trial; train data PCG64(2*ts), "
                     "test data PCG64(2*ts+1), random selection PCG64(ts)",
        "dictionary": {"kind": "gaussian-rbf", "centers": "midpoint packing grid",
                       "eta": cfg.eta, "normalized": cfg.normalize},
        "truncation_M": cfg.truncation_M if cfg.truncation_M is not None
        else "auto: max |y_i| over the training data",
        "test_targets": "noiseless" if cfg.test_sigma == 0 else f"noisy, sigma={cfg.test_sigma}",
        "timing": "wall-clock around the fit only, median over trials; kept out of the "
                  "deterministic tables except cost_profile.csv",
        "hardware": {"machine": platform.machine(), "system": platform.system(),
                     "python": platform.python_version(), "numpy": np.__version__},
        "config": conf,
    }
    if extra:
        man.update(extra)
    return man


# --------------------------------------------------------------------------- fitters


@dataclass
class OglFitter:
    """Parameter: number of atoms k."""

    selection: object
    seed: int = 0
    truncation_M: Optional[float] = None

    def __call__(self, k, train, d):
        return fit_greedy(GreedyConfig(self.selection, fixed_k(int(k)), self.truncation_M,
                                       self.seed), train, d)

    def fit_grid(self, ks, train, d):
        path = greedy_path(GreedyConfig(self.selection, fixed_k(int(max(ks))),
                                        self.truncation_M, self.seed), train, d)
        return [path[min(int(k), len(path) - 1)] for k in ks]


@dataclass
class ToglFitter:
    """Parameter: (delta, k) pairs, threshold selection capped at k atoms."""

    selection: object
    seed: int = 0
    truncation_M: Optional[float] = None

    def __call__(self, param, train, d):
        delta, k = param
        return fit_greedy(GreedyConfig(self.selection, threshold_plus_k(delta, int(k)),
                                       self.truncation_M, self.seed), train, d)

    def fit_grid(self, params, train, d):
        paths = {}
        out = []
        for delta, k in params:
            if delta not in paths:
                paths[delta] = greedy_path(GreedyConfig(self.selection, threshold_only(delta),
                                                        self.truncation_M, self.seed), train, d)
            path = paths[delta]
            out.append(path[min(int(k), len(path) - 1)])
        return out


@dataclass
class DeltaToglFitter:
    """Parameter: delta, adaptive stopping."""

    selection: object
    seed: int = 0
    truncation_M: Optional[float] = None

    def __call__(self, delta, train, d):
        return fit_greedy(GreedyConfig(self.selection, adaptive(delta), self.truncation_M,
                                       self.seed), train, d)

    def fit_grid(self, deltas, train, d):
        if self.selection == ARGMAX:
            return adaptive_argmax_sweep(train, d, deltas, self.truncation_M)
        return [self(delta, train, d) for delta in deltas]


@dataclass
class RidgeFitter:
    truncation_M: Optional[float] = None

    def __call__(self, lam, train, d):
        return fit_ridge(d, train.ys, lam, self.truncation_M)


@dataclass
class LassoFitter:
    max_iter: int = 20000
    tol: float = 1e-8
    truncation_M: Optional[float] = None

    def __call__(self, lam, train, d, a0=None, lipschitz=None):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return fit_lasso_fista(d, train.ys, lam, self.max_iter, self.tol, a0=a0,
                                   M=self.truncation_M, lipschitz=lipschitz)

    def fit_grid(self, lams, train, d):
        # warm-started path from the largest lambda down
        L = power_iteration(2.0 * (d.design.T @ d.design) / d.m)
        order = np.argsort(lams)[::-1]
        out = [None] * len(lams)
        a0 = None
        for i in order:
            model = self(lams[i], train, d, a0=a0, lipschitz=L)
            out[i] = model
            a0 = model.coefficients
        return out


# --------------------------------------------------------------------------- helpers


def _map(func, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [func(*it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, *zip(*items)))


def _trial_data(cfg: ExperimentConfig, sigma: float, trial: int, m=None, n=None):
    ts = trial_seed(cfg.seed, trial)
    train = gen_samples(SINC, m or cfg.m_train, sigma, 2 * ts)
    test = gen_samples(SINC, cfg.m_test, cfg.test_sigma, 2 * ts + 1)
    a, b = SINC.domain
    centers = packing_centers(n or cfg.n_atoms, a, b)
    d = build_rbf_dictionary(centers, cfg.eta, train.xs, cfg.normalize)
    return ts, train, test, d, rbf_builder(centers, cfg.eta, cfg.normalize)


def _test_rmse(model, d, test: SampleSet) -> float:
    return rmse(model.predict(d, test.xs), test.ys)


def _pad(errs, length):
    errs = list(errs)[:length]
    return errs + [errs[-1]] * (length - len(errs))


def _std(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(x.std(ddof=1)) if x.size > 1 else 0.0


def _cv_fit(fitter, grid, train, test, d, builder, folds, seed):
    cv = cross_validate(fitter, grid, train, builder, folds, seed)
    model = fitter(cv.best, train, d)
    return cv.best, model, _test_rmse(model, d, test)


SUMMARY_HEADER = ["method", "sigma", "best_param", "test_rmse_mean", "test_rmse_std",
                  "k_star", "sparsity"]


# --------------------------------------------------------------------------- OGL


def _ogl_trial(cfg, sigma, trial):
    ts, train, test, d, builder = _trial_data(cfg, sigma, trial)
    out = {}
    for name in cfg.selected(OGL_METHODS):
        sel = OGL_METHODS[name]
        if cfg.mode == "cv":
            k, model, err = _cv_fit(OglFitter(sel, ts, cfg.truncation_M),
                                    range(1, cfg.k_max + 1), train, test, d, builder,
                                    cfg.cv_folds, ts)
            out[name] = (k, err, model.k_final)
        else:
            path = greedy_path(GreedyConfig(sel, fixed_k(cfg.k_max), cfg.truncation_M, ts),
                               train, d)
            out[name] = _pad([_test_rmse(e, d, test) for e in path], cfg.k_max + 1)
    return out


def run_ogl_comparison(cfg: ExperimentConfig) -> RunReport:
    if cfg.kind != "ogl-compare":
        raise ConfigError("run_ogl_comparison needs kind 'ogl-compare'")
    methods = cfg.selected(OGL_METHODS)
    summary, curves = [], []
    for sigma in cfg.sigmas:
        res = _map(_ogl_trial, [(cfg, sigma, t) for t in range(cfg.trials)], cfg.workers)
        for name in methods:
            if cfg.mode == "cv":
                ks, errs, kf = (np.array([r[name][i] for r in res]) for i in range(3))
                summary.append([name, sigma, float(np.median(ks)), errs.mean(), _std(errs),
                                kf.mean(), kf.mean()])
                continue
            E = np.array([r[name] for r in res])  # trials x (k_max + 1)
            curve = E.mean(axis=0)
            for k in range(cfg.k_max + 1):
                curves.append([k, name, sigma, curve[k]])
            kb = 1 + int(np.argmin(curve[1:]))
            k_star = float(np.mean(1 + np.argmin(E[:, 1:], axis=1)))
            summary.append([name, sigma, kb, curve[kb], _std(E[:, kb]), k_star, kb])
    tables = {"ogl_summary": Table(SUMMARY_HEADER, summary)}
    if curves:
        tables["ogl_curves"] = Table(["k", "method", "sigma", "mean_test_rmse"], curves)
    return RunReport(cfg.kind, tables, _manifest(cfg))


# --------------------------------------------------------------------------- TOGL


def _togl_trial(cfg, sigma, trial):
    ts, train, test, d, builder = _trial_data(cfg, sigma, trial)
    deltas = cfg.deltas()
    out = {}
    for name in cfg.selected(TOGL_METHODS):
        sel = TOGL_METHODS[name]
        if cfg.mode == "cv":
            grid = [(dl, k) for dl in deltas for k in range(1, cfg.k_max + 1)]
            (dl, k), model, err = _cv_fit(ToglFitter(sel, ts, cfg.truncation_M), grid, train,
                                          test, d, builder, cfg.cv_folds, ts)
            k_thr = fit_greedy(GreedyConfig(sel, threshold_only(dl), cfg.truncation_M, ts),
                               train, d).k_final
            out[name] = (dl, err, model.k_final, k_thr)
            continue
        best, best_k, k_thr = [], [], []
        for dl in deltas:
            path = greedy_path(GreedyConfig(sel, threshold_only(dl), cfg.truncation_M, ts),
                               train, d)
            errs = _pad([_test_rmse(e, d, test) for e in path], cfg.k_max + 1)
            kb = 1 + int(np.argmin(errs[1:]))
            best.append(errs[kb])
            best_k.append(kb)
            k_thr.append(path[-1].k_final)
        out[name] = (np.array(best), np.array(best_k), np.array(k_thr))
    return out


def run_togl_comparison(cfg: ExperimentConfig) -> RunReport:
    if cfg.kind != "togl-compare":
        raise ConfigError("run_togl_comparison needs kind 'togl-compare'")
    methods = cfg.selected(TOGL_METHODS)
    deltas = cfg.deltas()
    header = SUMMARY_HEADER + ["k_threshold_only"]
    summary, curves = [], []
    for sigma in cfg.sigmas:
        res = _map(_togl_trial, [(cfg, sigma, t) for t in range(cfg.trials)], cfg.workers)
        for name in methods:
            if cfg.mode == "cv":
                dl, errs, kf, kt = (np.array([r[name][i] for r in res]) for i in range(4))
                summary.append([name, sigma, float(np.median(dl)), errs.mean(), _std(errs),
                                kf.mean(), kf.mean(), kt.mean()])
                continue
            B = np.array([r[name][0] for r in res])
            K = np.array([r[name][1] for r in res])
            T = np.array([r[name][2] for r in res])
            curve = B.mean(axis=0)
            for i, dl in enumerate(deltas):
                curves.append([dl, name, sigma, curve[i], T[:, i].mean()])
            i = int(np.argmin(curve))
            summary.append([name, sigma, deltas[i], curve[i], _std(B[:, i]), K[:, i].mean(),
                            K[:, i].mean(), T[:, i].mean()])
    tables = {"togl_summary": Table(header, summary)}
    if curves:
        tables["togl_curves"] = Table(["delta", "method", "sigma", "mean_test_rmse",
                                       "mean_k_threshold_only"], curves)
    return RunReport(cfg.kind, tables, _manifest(cfg))


# --------------------------------------------------------------------------- delta-TOGL


def _dtogl_trial(cfg, sigma, trial):
    ts, train, test, d, builder = _trial_data(cfg, sigma, trial)
    deltas = cfg.deltas()
    out = {}
    for name in cfg.selected(DTOGL_METHODS):
        fitter = DeltaToglFitter(DTOGL_METHODS[name], ts, cfg.truncation_M)
        if cfg.mode == "cv":
            dl, model, err = _cv_fit(fitter, deltas, train, test, d, builder, cfg.cv_folds, ts)
            out[name] = (dl, err, model.k_final)
        else:
            ests = fitter.fit_grid(deltas, train, d)
            out[name] = (np.array([_test_rmse(e, d, test) for e in ests]),
                         np.array([e.k_final for e in ests]))
    return out


def run_delta_togl(cfg: ExperimentConfig) -> RunReport:
    if cfg.kind != "delta-togl":
        raise ConfigError("run_delta_togl needs kind 'delta-togl'")
    methods = cfg.selected(DTOGL_METHODS)
    deltas = cfg.deltas()
    summary, curves = [], []
    for sigma in cfg.sigmas:
        res = _map(_dtogl_trial, [(cfg, sigma, t) for t in range(cfg.trials)], cfg.workers)
        for name in methods:
            if cfg.mode == "cv":
                dl, errs, kf = (np.array([r[name][i] for r in res]) for i in range(3))
                summary.append([name, sigma, float(np.median(dl)), errs.mean(), _std(errs),
                                kf.mean(), kf.mean()])
                continue
            E = np.array([r[name][0] for r in res])
            K = np.array([r[name][1] for r in res])
            curve = E.mean(axis=0)
            for i, dl in enumerate(deltas):
                curves.append([dl, name, sigma, curve[i], K[:, i].mean()])
            i = int(np.argmin(curve))
            summary.append([name, sigma, deltas[i], curve[i], _std(E[:, i]), K[:, i].mean(),
                            K[:, i].mean()])
    tables = {"delta_togl_summary": Table(SUMMARY_HEADER, summary)}
    if curves:
        tables["delta_togl_curves"] = Table(["delta", "method", "sigma", "mean_test_rmse",
                                             "mean_k_final"], curves)
    return RunReport(cfg.kind, tables, _manifest(cfg))


# --------------------------------------------------------------------------- cost


def _cost_trial(cfg, sigma, trial, method):
    ts, train, _, d, _ = _trial_data(cfg, sigma, trial)
    times, ks = [], []
    for dl in cfg.deltas():
        gcfg = GreedyConfig(DTOGL_METHODS[method], adaptive(dl), cfg.truncation_M, ts)
        t0 = time.perf_counter()
        e = fit_greedy(gcfg, train, d)
        times.append(time.perf_counter() - t0)
        ks.append(e.k_final)
    return np.array(times), np.array(ks)


def run_cost_profile(cfg: ExperimentConfig) -> RunReport:
    if cfg.kind != "cost-profile":
        raise ConfigError("run_cost_profile needs kind 'cost-profile'")
    method = cfg.selected(DTOGL_METHODS)[0] if cfg.methods else "delta-TOGL1"
    sigma = cfg.sigmas[0]
    res = _map(_cost_trial, [(cfg, sigma, t, method) for t in range(cfg.trials)], cfg.workers)
    T = np.array([r[0] for r in res])
    K = np.array([r[1] for r in res])
    rows = [[dl, float(np.median(T[:, i])), K[:, i].mean()] for i, dl in enumerate(cfg.deltas())]
    sparsity = [[t, dl, int(k)] for t in range(cfg.trials)
                for dl, k in zip(cfg.deltas(), K[t])]
    tables = {
        "cost_profile": Table(["delta", "fit_time_s", "sparsity"], rows),
        "cost_sparsity_by_trial": Table(["trial", "delta", "k_final"], sparsity),
    }
    return RunReport(cfg.kind, tables, _manifest(cfg, {"method": method, "sigma": sigma}))


# --------------------------------------------------------------------------- phase diagram


def _phase_trial(cfg, sigma, trial):
    out = []
    deltas = cfg.deltas()
    for m in cfg.m_list:
        ts, train, test, d, builder = _trial_data(cfg, sigma, trial, m=m)
        fitter = DeltaToglFitter(ARGMAX, ts, cfg.truncation_M)
        dl, model, err = _cv_fit(fitter, deltas, train, test, d, builder, cfg.cv_folds, ts)
        out.append((m, dl, err, model.k_final))
    return out


def run_phase_diagram(cfg: ExperimentConfig) -> RunReport:
    """Success counts of CV-tuned delta-TOGL1 over (sample size, accuracy) cells."""
    if cfg.kind != "phase-diagram":
        raise ConfigError("run_phase_diagram needs kind 'phase-diagram'")
    sigma = cfg.sigmas[0]
    res = _map(_phase_trial, [(cfg, sigma, t) for t in range(cfg.trials)], cfg.workers)
    err = np.array([[cell[2] for cell in r] for r in res])  # trials x len(m_list)
    matrix = []
    for acc in sorted(cfg.accuracies, reverse=True):
        matrix.append([acc] + [int(np.sum(err[:, j] < acc)) for j in range(len(cfg.m_list))])
    per_trial = [[t, m, dl, e, k] for t, r in enumerate(res) for (m, dl, e, k) in r]
    tables = {
        "phase_diagram": Table(["accuracy\\m"] + list(cfg.m_list), matrix),
        "phase_trials": Table(["trial", "m", "delta", "test_rmse", "k_final"], per_trial),
    }
    return RunReport(cfg.kind, tables, _manifest(cfg, {"method": "delta-TOGL1", "sigma": sigma,
                                                        "selection": "5-fold CV"
                                                        if cfg.cv_folds == 5 else
                                                        f"{cfg.cv_folds}-fold CV"}))


# --------------------------------------------------------------------------- method table


METHOD_TABLE_METHODS = ["OGL", "delta-TOGL1", "delta-TOGL2", "delta-TOGL3", "delta-TOGLR",
                  "ridge", "lasso"]


def _method_trial(cfg, sigma, trial, n):
    ts, train, test, d, builder = _trial_data(cfg, sigma, trial, n=n)
    methods = cfg.methods or METHOD_TABLE_METHODS
    out = {}
    for name in methods:
        if name == "OGL" or name in OGL_METHODS:
            sel = OGL_METHODS.get(name, ARGMAX)
            fitter, grid = OglFitter(sel, ts, cfg.truncation_M), range(1, cfg.k_max + 1)
        elif name in DTOGL_METHODS:
            fitter, grid = DeltaToglFitter(DTOGL_METHODS[name], ts, cfg.truncation_M), cfg.deltas()
        elif name == "ridge":
            g = cfg.ridge_grid
            fitter, grid = RidgeFitter(cfg.truncation_M), log_grid(g["lo"], g["hi"], g["count"])
        elif name == "lasso":
            g = cfg.lasso_grid
            fitter = LassoFitter(cfg.lasso_max_iter, cfg.lasso_tol, cfg.truncation_M)
            grid = log_grid(g["lo"], g["hi"], g["count"])
        else:
            raise ConfigError(f"method {name!r} is not part of the method table")
        param, model, err = _cv_fit(fitter, grid, train, test, d, builder, cfg.cv_folds, ts)
        out[name] = (float(param), err, model.sparsity)
    return out


def run_method_table(cfg: ExperimentConfig) -> RunReport:
    if cfg.kind != "method-table":
        raise ConfigError("run_method_table needs kind 'method-table'")
    sigma = cfg.sigmas[0]
    methods = cfg.methods or METHOD_TABLE_METHODS
    rows = []
    for n in cfg.n_list:
        res = _map(_method_trial, [(cfg, sigma, t, n) for t in range(cfg.trials)], cfg.workers)
        for name in methods:
            p, e, s = (np.array([r[name][i] for r in res], dtype=float) for i in range(3))
            rows.append([name, n, float(np.median(p)), e.mean(), _std(e), s.mean()])
    header = ["method", "n", "param", "test_rmse_mean", "test_rmse_std", "sparsity"]
    return RunReport(cfg.kind, {"method_table": Table(header, rows)},
                     _manifest(cfg, {"sigma": sigma, "selection": "cross-validation",
                                     "param_meaning": "k for OGL, delta for delta-TOGL, "
                                                      "lambda for ridge/lasso (median over "
                                                      "trials)"}))


# --------------------------------------------------------------------------- single fit


def fit_one(cfg: ExperimentConfig, z: SampleSet):
    """Fit one model on external data. Returns (model, dictionary, summary dict)."""
    if cfg.domain is not None:
        a, b = cfg.domain
    else:
        a, b = float(np.min(z.xs)), float(np.max(z.xs))
        if a == b:
            a, b = a - 1.0, b + 1.0
    centers = packing_centers(cfg.n_atoms, a, b)
    d = build_rbf_dictionary(centers, cfg.eta, z.xs, cfg.normalize)
    name = cfg.method
    M = cfg.truncation_M
    if name in ("ridge", "lasso"):
        if cfg.lam is None:
            raise ConfigError(f"{name} needs 'lam'")
        if name == "ridge":
            model = fit_ridge(d, z.ys, cfg.lam, M)
        else:
            model = fit_lasso_fista(d, z.ys, cfg.lam, cfg.lasso_max_iter, cfg.lasso_tol, M=M)
        summary = {"method": name, "nnz": model.nnz}
    else:
        sel = {**OGL_METHODS, **TOGL_METHODS, **DTOGL_METHODS, **EXTRA_METHODS,
               "OGL": ARGMAX}[name]
        if name in OGL_METHODS or name == "OGL":
            if cfg.k is None:
                raise ConfigError(f"{name} needs 'k'")
            stop = fixed_k(cfg.k)
        elif cfg.delta is None:
            raise ConfigError(f"{name} needs 'delta'")
        elif name.startswith("delta-"):
            stop = adaptive(cfg.delta)
        elif cfg.k is not None:
            stop = threshold_plus_k(cfg.delta, cfg.k)
        else:
            stop = threshold_only(cfg.delta)
        try:
            gcfg = GreedyConfig(sel, stop, M, cfg.seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        model = fit_greedy(gcfg, z, d)
        summary = {"method": name, "k_final": model.k_final,
                   "termination_reason": model.termination_reason.value}
    summary["train_rmse"] = rmse(model.predict(d, z.xs), z.ys)
    return model, d, summary


RUNNERS = {
    "ogl-compare": run_ogl_comparison,
    "togl-compare": run_togl_comparison,
    "delta-togl": run_delta_togl,
    "cost-profile": run_cost_profile,
    "phase-diagram": run_phase_diagram,
    "method-table": run_method_table,
}


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("GREEDY_DICT_WORKERS", "1")))
    except ValueError:
        return 1
