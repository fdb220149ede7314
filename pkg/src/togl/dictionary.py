"""Gaussian radial-basis dictionaries evaluated on a sample."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import cached_property

import numpy as np

# columns with empirical norm below this are dead and never selected
DEAD_ATOM_NORM = 1e-12


def _as_points(x) -> np.ndarray:
    """Return inputs as an (m, d) array; 1-D inputs become (m, 1)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return x.reshape(1, 1)
    if x.ndim == 1:
        return x[:, None]
    return x


def packing_centers(n: int, a: float, b: float) -> np.ndarray:
    """Midpoint grid a + (i - 1/2)(b - a)/n, i = 1..n."""
    if n < 1:
        raise ValueError("need at least one center")
    if not a < b:
        raise ValueError("need a < b")
    return a + (np.arange(n) + 0.5) * (b - a) / n


def gaussian_kernel(x, centers, eta: float) -> np.ndarray:
    """exp(-|x - t|^2 / eta^2) for every (point, center) pair."""
    xp = _as_points(x)
    cp = _as_points(centers)
    if xp.shape[1] != cp.shape[1]:
        raise ValueError("input and center dimensions differ")
    sq = ((xp[:, None, :] - cp[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-sq / (eta * eta))


@dataclass(frozen=True, eq=False)
class Dictionary:
    """n atoms sampled at m points.

    ``atom_norms`` are the empirical norms of the raw Gaussian columns; when
    ``normalized`` is set the design columns were divided by them, and the
    same divisors (``scale``) are reused for out-of-sample evaluation.
    """

    centers: np.ndarray
    eta: float
    design: np.ndarray
    atom_norms: np.ndarray
    scale: np.ndarray
    normalized: bool
    dead: np.ndarray

    @property
    def m(self) -> int:
        return self.design.shape[0]

    @property
    def n(self) -> int:
        return self.design.shape[1]

    @classmethod
    def from_design(cls, design, check_norms: bool = True) -> "Dictionary":
        """Dictionary given only by its sampled atoms (no out-of-sample evaluation)."""
        G = np.array(design, dtype=float)
        if G.ndim != 2 or G.shape[1] == 0:
            raise ValueError("design must be a nonempty 2-D array")
        norms = np.sqrt(np.mean(G * G, axis=0))
        if check_norms and np.any(norms > 1.0 + 1e-12):
            raise ValueError("atoms must have empirical norm at most 1")
        dead = norms < DEAD_ATOM_NORM
        scale = np.ones_like(norms)
        for arr in (G, norms, scale, dead):
            arr.flags.writeable = False
        return cls(None, float("nan"), G, norms, scale, False, dead)

    @cached_property
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        if self.centers is None:
            h.update(np.ascontiguousarray(self.design).tobytes())
        else:
            h.update(np.ascontiguousarray(self.centers, dtype=float).tobytes())
        h.update(np.float64(self.eta).tobytes())
        h.update(np.ascontiguousarray(self.scale, dtype=float).tobytes())
        h.update(b"normalized" if self.normalized else b"raw")
        return h.hexdigest()[:16]

    def describe(self) -> dict:
        return {
            "kind": "gaussian-rbf",
            "n": self.n,
            "eta": self.eta,
            "normalized": self.normalized,
            "centers": None if self.centers is None else np.asarray(self.centers).tolist(),
            "fingerprint": self.fingerprint,
        }


def build_rbf_dictionary(centers, eta: float, xs, normalize: bool = False) -> Dictionary:
    if not eta > 0:
        raise ValueError("eta must be positive")
    xs = np.asarray(xs, dtype=float)
    if xs.size == 0:
        raise ValueError("no sample points")
    centers = np.array(centers, dtype=float)
    G = gaussian_kernel(xs, centers, eta)
    norms = np.sqrt(np.mean(G * G, axis=0))
    dead = norms < DEAD_ATOM_NORM
    if normalize:
        scale = np.where(dead, 1.0, norms)
        G = G / scale
    else:
        scale = np.ones_like(norms)
    if not np.all(np.isfinite(G)):
        raise ValueError("non-finite design entries")
    col_norms = np.sqrt(np.mean(G * G, axis=0))
    # every atom must satisfy the unit empirical-norm bound
    assert np.all(col_norms <= 1.0 + 1e-12), col_norms.max()
    for arr in (centers, G, norms, scale, dead):
        arr.flags.writeable = False
    return Dictionary(centers, float(eta), G, norms, scale, bool(normalize), dead)


def eval_atoms(d: Dictionary, x, idx=None) -> np.ndarray:
    """Atom values at new points: shape (n,) for one point, (k, n) for k points.

    ``idx`` restricts evaluation to a subset of atoms (columns in that order).
    """
    if d.centers is None:
        raise ValueError("dictionary has no generating centers; only its design is known")
    single = np.ndim(x) == 0 or (np.ndim(x) == 1 and np.ndim(d.centers) == 2
                                 and len(x) == d.centers.shape[1])
    centers, scale = d.centers, d.scale
    if idx is not None:
        centers, scale = centers[idx], scale[idx]
    vals = gaussian_kernel(x, centers, d.eta) / scale
    return vals[0] if single else vals


def rbf_builder(centers, eta: float = 1.0, normalize: bool = False):
    """Closure that rebuilds the dictionary on a new set of inputs (used per CV fold)."""

    def build(xs) -> Dictionary:
        return build_rbf_dictionary(centers, eta, xs, normalize)

    return build
