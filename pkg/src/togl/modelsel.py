"""Parameter grids and k-fold cross-validation."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .data import SampleSet, make_rng, rmse


@dataclass(frozen=True)
class Grid:
    values: tuple
    scale: str = "log"

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("empty grid")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("grid values must be strictly increasing")
        if self.scale == "log" and vals[0] <= 0:
            raise ValueError("log grid values must be positive")
        if self.scale not in ("log", "linear"):
            raise ValueError(f"unknown grid scale {self.scale!r}")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


def log_grid(lo: float, hi: float, count: int) -> Grid:
    if not 0 < lo < hi:
        raise ValueError("need 0 < lo < hi")
    if count < 2:
        raise ValueError("need at least two grid points")
    vals = np.geomspace(lo, hi, count)
    vals[0], vals[-1] = lo, hi
    return Grid(tuple(vals), "log")


def linear_grid(lo: float, hi: float, count: int) -> Grid:
    if not lo < hi or count < 2:
        raise ValueError("need lo < hi and at least two points")
    vals = np.linspace(lo, hi, count)
    vals[0], vals[-1] = lo, hi
    return Grid(tuple(vals), "linear")


def kfold_split(m: int, k: int, seed: int) -> list[np.ndarray]:
    """Random partition of range(m) into k folds whose sizes differ by at most one."""
    if k < 2:
        raise ValueError("need at least two folds")
    if k > m:
        raise ValueError(f"cannot split {m} samples into {k} folds")
    perm = make_rng(seed).permutation(m)
    return [np.sort(f) for f in np.array_split(perm, k)]


@dataclass
class CvResult:
    candidates: list
    mean_rmse: np.ndarray
    std_rmse: np.ndarray
    best_index: int
    folds: list
    fold_rmse: np.ndarray  # (n_candidates, k)

    @property
    def best(self):
        return self.candidates[self.best_index]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["candidate", "mean_rmse", "std_rmse"])
        for c, mu, sd in zip(self.candidates, self.mean_rmse, self.std_rmse):
            w.writerow([_fmt_param(c), repr(float(mu)), repr(float(sd))])
        return buf.getvalue()


def _fmt_param(c):
    if isinstance(c, tuple):
        return ";".join(_fmt_param(v) for v in c)
    if isinstance(c, (int, np.integer)):
        return str(int(c))
    return repr(float(c))


def _fit_all(fitter, candidates, train, d):
    """Fit every candidate on one fold; a failed fit is recorded as None."""
    batch = getattr(fitter, "fit_grid", None)
    if batch is not None:
        try:
            return list(batch(candidates, train, d))
        except Exception:
            pass
    models = []
    for c in candidates:
        try:
            models.append(fitter(c, train, d))
        except Exception:
            models.append(None)
    return models


def cross_validate(fitter: Callable, grid, z: SampleSet, d_builder: Callable,
                   k: int = 5, seed: int = 0) -> CvResult:
    """k-fold CV of ``fitter(param, train, dictionary) -> model`` over ``grid``.

    The dictionary is rebuilt on each training fold with ``d_builder(xs)``;
    models must expose ``predict(d, xs)``. A fitter may also offer
    ``fit_grid(params, train, d)`` to fit all candidates at once. Candidates
    whose fit raises score +inf. Ties go to the earliest (smallest) candidate.
    """
    candidates = list(grid)
    if not candidates:
        raise ValueError("empty grid")
    folds = kfold_split(z.m, k, seed)
    scores = np.full((len(candidates), k), np.inf)
    all_idx = np.arange(z.m)
    for f, test_idx in enumerate(folds):
        train_idx = np.setdiff1d(all_idx, test_idx, assume_unique=True)
        assert np.intersect1d(train_idx, test_idx).size == 0
        train = z.subset(train_idx)
        d = d_builder(train.xs)
        x_val, y_val = z.xs[test_idx], z.ys[test_idx]
        for c, model in enumerate(_fit_all(fitter, candidates, train, d)):
            if model is None:
                continue
            try:
                pred = model.predict(d, x_val)
            except Exception:
                continue
            if np.all(np.isfinite(pred)):
                scores[c, f] = rmse(pred, y_val)
    with np.errstate(invalid="ignore"):
        mean = scores.mean(axis=1)
        std = np.where(np.isfinite(mean), scores.std(axis=1), np.inf)
    best = int(np.argmin(mean))  # first minimum: smaller parameter wins ties
    return CvResult(candidates, mean, std, best, folds, scores)
