"""Orthogonal greedy learning with threshold-based selection and stopping.

One driver, ``fit_greedy``, covers the whole family:

* OGL   -- argmax / k-th max / uniformly random selection, stop after k atoms
* TOGL  -- pick any atom whose correlation ratio |<r, g>_m| / ||r||_m is at
  least delta; stop when none is left (optionally also after k atoms)
* delta-TOGL -- TOGL selection, stop when no atom passes the threshold or
  when ||r||_m <= delta ||y||_m.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .data import SampleSet, make_rng, truncate
from .dictionary import Dictionary, eval_atoms
from .projection import GreedyState, emp_norm


# residuals this small relative to ||y||_m are rounding noise: the data are interpolated
ZERO_RESIDUAL_RTOL = 1e-12


class Termination(str, Enum):
    NO_ACTIVE_ATOM = "NoActiveAtom"
    RELATIVE_RESIDUAL = "RelativeResidual"
    K_LIMIT = "KLimit"
    DICTIONARY_EXHAUSTED = "DictionaryExhausted"


SELECTION_KINDS = ("argmax", "kth_max", "uniform_random", "delta_arbitrary", "delta_random")
STOPPING_KINDS = ("fixed_k", "threshold_only", "threshold_plus_k", "adaptive")


@dataclass(frozen=True)
class SelectionRule:
    kind: str
    order: int = 1

    def __post_init__(self):
        if self.kind not in SELECTION_KINDS:
            raise ValueError(f"unknown selection rule {self.kind!r}")
        if self.kind == "kth_max" and self.order < 2:
            raise ValueError("k-th max selection needs order >= 2")

    @property
    def needs_delta(self) -> bool:
        return self.kind in ("delta_arbitrary", "delta_random")


ARGMAX = SelectionRule("argmax")
UNIFORM_RANDOM = SelectionRule("uniform_random")
DELTA_ARBITRARY = SelectionRule("delta_arbitrary")
DELTA_RANDOM = SelectionRule("delta_random")


def kth_max(j: int) -> SelectionRule:
    return SelectionRule("kth_max", j)


@dataclass(frozen=True)
class StoppingRule:
    kind: str
    delta: Optional[float] = None
    k_max: Optional[int] = None

    def __post_init__(self):
        if self.kind not in STOPPING_KINDS:
            raise ValueError(f"unknown stopping rule {self.kind!r}")
        if self.kind != "fixed_k":
            if self.delta is None or not 0.0 < self.delta <= 1.0:
                raise ValueError("delta must lie in (0, 1]")
            if self.delta > 0.5:
                warnings.warn(f"delta={self.delta} is above 1/2, outside the range the "
                              "generalization bounds cover", UserWarning, stacklevel=3)
        if self.kind in ("fixed_k", "threshold_plus_k"):
            if self.k_max is None or self.k_max < 0:
                raise ValueError("k_max must be nonnegative")

    @property
    def uses_threshold(self) -> bool:
        return self.kind != "fixed_k"


def fixed_k(k_max: int) -> StoppingRule:
    return StoppingRule("fixed_k", k_max=k_max)


def threshold_only(delta: float) -> StoppingRule:
    return StoppingRule("threshold_only", delta=delta)


def threshold_plus_k(delta: float, k_max: int) -> StoppingRule:
    return StoppingRule("threshold_plus_k", delta=delta, k_max=k_max)


def adaptive(delta: float) -> StoppingRule:
    return StoppingRule("adaptive", delta=delta)


@dataclass(frozen=True)
class GreedyConfig:
    selection: SelectionRule
    stopping: StoppingRule
    truncation_M: Optional[float] = None  # None: max |y_i| of the training data
    seed: int = 0

    def __post_init__(self):
        if self.selection.needs_delta and not self.stopping.uses_threshold:
            raise ValueError(f"{self.selection.kind} selection needs a threshold stopping rule")
        if self.truncation_M is not None and not self.truncation_M > 0:
            raise ValueError("truncation level must be positive")


@dataclass
class Estimator:
    atom_indices: np.ndarray
    coefficients: np.ndarray
    k_final: int
    delta: Optional[float]
    M: float
    termination_reason: Termination
    dictionary_fingerprint: str
    # ||r_k||_m for k = 0..k_final; diagnostics only, not serialized
    residual_norms: tuple = field(default=(), repr=False)

    def raw_predict(self, d: Dictionary, x) -> np.ndarray:
        if d.fingerprint != self.dictionary_fingerprint:
            raise ValueError("estimator was fitted on a different dictionary")
        if self.k_final == 0:
            return np.zeros(np.atleast_2d(eval_atoms(d, x, [0])).shape[0])
        vals = np.atleast_2d(eval_atoms(d, x, self.atom_indices))
        return vals @ self.coefficients

    def predict(self, d: Dictionary, x) -> np.ndarray:
        return truncate(self.raw_predict(d, x), self.M)

    @property
    def sparsity(self) -> int:
        return self.k_final

    def to_dict(self) -> dict:
        return {
            "atom_indices": [int(i) for i in self.atom_indices],
            "coefficients": [float(a) for a in self.coefficients],
            "k_final": self.k_final,
            "delta": self.delta,
            "M": self.M,
            "termination_reason": self.termination_reason.value,
            "dictionary_fingerprint": self.dictionary_fingerprint,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, obj: dict) -> "Estimator":
        return cls(
            np.asarray(obj["atom_indices"], dtype=int),
            np.asarray(obj["coefficients"], dtype=float),
            int(obj["k_final"]),
            obj["delta"],
            float(obj["M"]),
            Termination(obj["termination_reason"]),
            obj["dictionary_fingerprint"],
        )

    @classmethod
    def from_json(cls, text: str) -> "Estimator":
        return cls.from_dict(json.loads(text))


def predict(e: Estimator, d: Dictionary, x):
    out = e.predict(d, x)
    return float(out[0]) if np.ndim(x) == 0 else out


def correlation_ratios(r, design: np.ndarray, eligible=None) -> np.ndarray:
    """|<r, g_j>_m| / ||r||_m for each eligible atom; NaN marks ineligible ones."""
    r = np.asarray(r, dtype=float)
    r_norm = emp_norm(r)
    if r_norm == 0.0:
        raise ZeroDivisionError("zero residual: the data are interpolated exactly")
    m = r.size
    ratios = np.abs(design.T @ r) / (m * r_norm)
    if eligible is not None:
        ratios = np.where(eligible, ratios, np.nan)
    return ratios


def _ranked(ratios: np.ndarray, cands: np.ndarray) -> np.ndarray:
    # descending ratio, ties broken by lower index
    return cands[np.argsort(-ratios[cands], kind="stable")]


def select_atom(rule: SelectionRule, ratios, delta=None, rng=None, order=None):
    """Index of the next atom, or None when the rule's candidate set is empty.

    When ``delta`` is given, argmax and k-th max rank only the active atoms
    (ratio >= delta); the k-th max falls back to the weakest active atom when
    fewer than k are active. ``order`` is the per-fit scan permutation used by
    the arbitrary-active rule.
    """
    ratios = np.asarray(ratios, dtype=float)
    eligible = np.flatnonzero(~np.isnan(ratios))
    if rule.needs_delta and delta is None:
        raise ValueError(f"{rule.kind} selection needs delta")
    if rule.kind == "uniform_random":
        if eligible.size == 0:
            return None
        return int(eligible[rng.integers(eligible.size)])
    if delta is not None:
        cands = eligible[ratios[eligible] >= delta]
    else:
        cands = eligible
    if cands.size == 0:
        return None
    if rule.kind == "argmax":
        return int(_ranked(ratios, cands)[0])
    if rule.kind == "kth_max":
        ranked = _ranked(ratios, cands)
        return int(ranked[min(rule.order, ranked.size) - 1])
    if rule.kind == "delta_random":
        return int(cands[rng.integers(cands.size)])
    # delta_arbitrary: first active atom in the fixed scan order
    scan = np.asarray(order) if order is not None else np.arange(ratios.size)
    active = np.zeros(ratios.size, dtype=bool)
    active[cands] = True
    hits = scan[active[scan]]
    return int(hits[0])


def should_stop(rule: StoppingRule, state: GreedyState, y_norm_m: float,
                active_exists: bool) -> Optional[Termination]:
    """Termination reason if the fit must stop now, else None."""
    if rule.kind == "adaptive" and state.residual_norm_m <= rule.delta * y_norm_m:
        return Termination.RELATIVE_RESIDUAL
    if rule.uses_threshold and not active_exists:
        return Termination.NO_ACTIVE_ATOM
    if rule.kind in ("fixed_k", "threshold_plus_k") and state.k >= rule.k_max:
        return Termination.K_LIMIT
    return None


@dataclass
class FitTrace:
    """Per-step record of a fit, for path sweeps and diagnostics."""

    state: GreedyState
    residual_norms: list
    # ratio of the atom accepted at each step
    accepted_ratios: list
    blacklist: list


def _run(cfg: GreedyConfig, z: SampleSet, d: Dictionary):
    if d.n == 0:
        raise ValueError("empty dictionary")
    if d.m != z.m:
        raise ValueError("dictionary was not built on this sample")
    y = z.ys
    state = GreedyState(y)
    y_norm = state.residual_norm_m
    rng = make_rng(cfg.seed)
    order = rng.permutation(d.n) if cfg.selection.kind == "delta_arbitrary" else None
    stop = cfg.stopping
    delta = stop.delta
    excluded = np.array(d.dead, dtype=bool)
    trace = FitTrace(state, [y_norm], [], [])
    reason = None
    while reason is None:
        if state.residual_norm_m <= ZERO_RESIDUAL_RTOL * y_norm or (
                stop.kind == "adaptive" and state.residual_norm_m <= delta * y_norm):
            reason = Termination.RELATIVE_RESIDUAL
            break
        eligible = ~excluded
        if not eligible.any():
            reason = (Termination.NO_ACTIVE_ATOM if stop.uses_threshold
                      else Termination.DICTIONARY_EXHAUSTED)
            break
        ratios = correlation_ratios(state.residual, d.design, eligible)
        active_exists = bool(delta is not None and np.nanmax(ratios) >= delta)
        reason = should_stop(stop, state, y_norm, active_exists)
        if reason is not None:
            break
        while True:
            j = select_atom(cfg.selection, ratios, delta, rng, order)
            if j is None:
                reason = (Termination.NO_ACTIVE_ATOM if stop.uses_threshold
                          else Termination.DICTIONARY_EXHAUSTED)
                break
            excluded[j] = True
            if state.append(d.design[:, j], j):
                trace.accepted_ratios.append(float(ratios[j]))
                trace.residual_norms.append(state.residual_norm_m)
                break
            trace.blacklist.append(j)
            ratios[j] = np.nan
    return state, reason, trace


def _estimator(state: GreedyState, k: int, reason: Termination, delta, M: float,
               d: Dictionary, residual_norms) -> Estimator:
    return Estimator(
        np.array(state.selected[:k], dtype=int),
        state.prefix_coefficients(k),
        k,
        delta,
        M,
        reason,
        d.fingerprint,
        tuple(residual_norms[: k + 1]),
    )


def auto_truncation(ys) -> float:
    M = float(np.max(np.abs(ys)))
    return M if M > 0 else 1.0


def fit_greedy(cfg: GreedyConfig, z: SampleSet, d: Dictionary) -> Estimator:
    state, reason, trace = _run(cfg, z, d)
    M = cfg.truncation_M if cfg.truncation_M is not None else auto_truncation(z.ys)
    return _estimator(state, state.k, reason, cfg.stopping.delta, M, d, trace.residual_norms)


def greedy_path(cfg: GreedyConfig, z: SampleSet, d: Dictionary):
    """Fit once and return the estimators after 0, 1, ..., k_final atoms.

    For selection rules that do not depend on the stopping rule (argmax,
    k-th max and uniform random without a threshold) the j-th entry is exactly
    the estimator a fixed-k(j) fit would produce. The last entry carries the
    fit's own termination reason, the others ``KLimit``.
    """
    state, reason, trace = _run(cfg, z, d)
    M = cfg.truncation_M if cfg.truncation_M is not None else auto_truncation(z.ys)
    delta = cfg.stopping.delta
    out = [_estimator(state, j, Termination.K_LIMIT, delta, M, d, trace.residual_norms)
           for j in range(state.k)]
    out.append(_estimator(state, state.k, reason, delta, M, d, trace.residual_norms))
    return out


def adaptive_argmax_sweep(z: SampleSet, d: Dictionary, deltas: Sequence[float],
                          truncation_M=None) -> list:
    """delta-TOGL with argmax selection for every delta in one pass.

    Argmax picks the same atoms whatever delta is, so a single run at the
    smallest delta contains every other fit as a prefix: the fit for delta
    stops at the first k with ||r_k||_m <= delta ||y||_m or where the atom
    accepted next has ratio below delta.
    """
    deltas = np.asarray(deltas, dtype=float)
    if deltas.size == 0:
        return []
    cfg = GreedyConfig(ARGMAX, adaptive(float(deltas.min())), truncation_M)
    state, reason, trace = _run(cfg, z, d)
    M = truncation_M if truncation_M is not None else auto_truncation(z.ys)
    norms = np.asarray(trace.residual_norms)
    accepted = np.asarray(trace.accepted_ratios + [-np.inf])
    y_norm = norms[0]
    out = []
    for delta in deltas:
        k_stop, why = state.k, reason
        for k in range(state.k + 1):
            if norms[k] <= ZERO_RESIDUAL_RTOL * y_norm or norms[k] <= delta * y_norm:
                k_stop, why = k, Termination.RELATIVE_RESIDUAL
                break
            if accepted[k] < delta:
                k_stop, why = k, Termination.NO_ACTIVE_ATOM
                break
        out.append(_estimator(state, k_stop, why, float(delta), M, d, norms))
    return out


class NotApplicable(ValueError):
    pass


def error_certificate(e: Estimator, z: SampleSet, d: Dictionary, h_coeffs,
                      rtol: float = 1e-10) -> bool:
    """Check ||y - f||_m <= ||y - h||_m + delta * sum|h_j| for h = sum h_j g_j.

    Holds for any h in the span of the dictionary once a threshold fit has
    stopped on one of its delta conditions.
    """
    if e.termination_reason not in (Termination.NO_ACTIVE_ATOM,
                                    Termination.RELATIVE_RESIDUAL) or e.delta is None:
        raise NotApplicable(f"certificate needs a delta-terminated fit, got "
                            f"{e.termination_reason.value}")
    h_coeffs = np.asarray(h_coeffs, dtype=float)
    y = z.ys
    fit = d.design[:, e.atom_indices] @ e.coefficients if e.k_final else np.zeros_like(y)
    h = d.design @ h_coeffs
    lhs = emp_norm(y - fit)
    rhs = emp_norm(y - h) + e.delta * np.abs(h_coeffs).sum()
    return lhs <= rhs + rtol * max(emp_norm(y), 1.0)
