"""Synthetic regression data, CSV ingestion and evaluation metrics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import DataError

# sigma recorded for data whose noise level is not known (e.g. loaded from CSV)
SIGMA_UNKNOWN = float("nan")

_SERIES_CUTOFF = 1e-8


def sinc(x):
    """sin(x)/x with the removable singularity at 0 filled by continuity."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _SERIES_CUTOFF
    safe = np.where(small, 1.0, x)
    out = np.where(small, 1.0 - x * x / 6.0, np.sin(safe) / safe)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class TargetFunction:
    kind: str = "sinc"
    domain: tuple[float, float] = (-math.pi, math.pi)
    func: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("sinc", "custom"):
            raise ValueError(f"unknown target kind {self.kind!r}")
        if self.kind == "custom" and self.func is None:
            raise ValueError("custom target needs a callable")
        a, b = self.domain
        if not a < b:
            raise ValueError("target domain must satisfy a < b")


SINC = TargetFunction()


def eval_target(t: TargetFunction, x):
    """Evaluate the regression function at ``x`` (scalar or array)."""
    a, b = t.domain
    xa = np.asarray(x, dtype=float)
    if np.any((xa < a) | (xa > b)) or np.any(np.isnan(xa)):
        raise ValueError(f"x outside target domain [{a}, {b}]")
    if t.kind == "sinc":
        return sinc(x)
    out = np.asarray(t.func(xa), dtype=float)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class SampleSet:
    """Paired inputs/targets. Arrays are made read-only on construction."""

    xs: np.ndarray
    ys: np.ndarray
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        xs = np.array(self.xs, dtype=float)
        ys = np.array(self.ys, dtype=float)
        if ys.ndim != 1 or len(xs) != len(ys):
            raise ValueError("xs and ys must have the same length")
        if len(ys) < 1:
            raise ValueError("no samples")
        xs.flags.writeable = False
        ys.flags.writeable = False
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @property
    def m(self) -> int:
        return len(self.ys)

    def subset(self, idx) -> "SampleSet":
        idx = np.asarray(idx)
        return SampleSet(self.xs[idx], self.ys[idx], self.sigma, self.seed)


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator; the bit stream is fixed by numpy across platforms."""
    return np.random.Generator(np.random.PCG64(seed))


def trial_seed(master: int, trial: int) -> int:
    return int(master) ^ int(trial)


def gen_samples(t: TargetFunction, m: int, sigma: float, seed: int) -> SampleSet:
    """Draw ``m`` uniform inputs on the target domain and add N(0, sigma^2) noise.

    Inputs are drawn first, then the noise, from one PCG64 stream, so the
    inputs for a given seed do not depend on ``sigma``.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    rng = make_rng(seed)
    a, b = t.domain
    xs = rng.uniform(a, b, size=m)
    ys = eval_target(t, xs)
    if sigma > 0:
        ys = ys + rng.normal(0.0, sigma, size=m)
    return SampleSet(xs, ys, float(sigma), int(seed))


def load_csv(path) -> SampleSet:
    """Read a two-column ``x,y`` CSV file."""
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc.strerror}") from exc
    xs, ys = [], []
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["x", "y"]:
            raise DataError("expected header 'x,y'", line=1)
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise DataError(f"expected 2 columns, got {len(row)}", line=line)
            try:
                x, y = float(row[0]), float(row[1])
            except ValueError:
                raise DataError(f"non-numeric cell in {row!r}", line=line) from None
            if not (math.isfinite(x) and math.isfinite(y)):
                raise DataError("non-finite value", line=line)
            xs.append(x)
            ys.append(y)
    if not xs:
        raise DataError("no samples")
    return SampleSet(xs, ys, SIGMA_UNKNOWN, 0)


def rmse(pred, truth) -> float:
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape or pred.size == 0:
        raise ValueError("rmse needs two nonempty sequences of equal length")
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


def truncate(v, M: float):
    """Clamp values to [-M, M]."""
    if not M > 0:
        raise ValueError("truncation level must be positive")
    out = np.clip(v, -M, M)
    return out if np.ndim(out) else float(out)
