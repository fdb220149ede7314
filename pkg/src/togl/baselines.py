"""Ridge regression and FISTA-Lasso over a dictionary design matrix.

Both objectives put 1/m on the data term so lambda means the same thing for
any sample size:

    ridge:  (1/m)||y - G a||^2 + lam ||a||_2^2
    lasso:  (1/m)||y - G a||^2 + lam ||a||_1
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .data import truncate
from .dictionary import Dictionary, eval_atoms
from .errors import RankDeficiencyError

NNZ_CUTOFF = 1e-8


@dataclass
class DenseModel:
    method: str
    coefficients: np.ndarray
    lam: float
    M: float
    dictionary_fingerprint: str
    solver_stats: dict = field(default_factory=dict)

    @property
    def nnz(self) -> int:
        return int(np.sum(np.abs(self.coefficients) > NNZ_CUTOFF))

    sparsity = nnz

    def raw_predict(self, d: Dictionary, x) -> np.ndarray:
        if d.fingerprint != self.dictionary_fingerprint:
            raise ValueError("model was fitted on a different dictionary")
        return np.atleast_2d(eval_atoms(d, x)) @ self.coefficients

    def predict(self, d: Dictionary, x) -> np.ndarray:
        return truncate(self.raw_predict(d, x), self.M)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "coefficients": [float(a) for a in self.coefficients],
            "lambda": self.lam,
            "M": self.M,
            "nnz": self.nnz,
            "dictionary_fingerprint": self.dictionary_fingerprint,
            "solver_stats": self.solver_stats,
        }


def _auto_M(y, M):
    if M is not None:
        return float(M)
    M = float(np.max(np.abs(y)))
    return M if M > 0 else 1.0


def fit_ridge(d: Dictionary, y, lam: float, M=None) -> DenseModel:
    """Solve (G^T G/m + lam I) a = G^T y/m by Cholesky."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    G = d.design
    y = np.asarray(y, dtype=float)
    m, n = G.shape
    A = G.T @ G / m + lam * np.eye(n)
    b = G.T @ y / m
    try:
        c, low = cho_factor(A, lower=True)
    except LinAlgError as exc:
        raise RankDeficiencyError("ridge system is not positive definite") from exc
    diag = np.abs(np.diag(c))
    # squared diagonal ratio of the factor lower-bounds the condition number
    if (diag.min() / diag.max()) ** 2 < n * np.finfo(float).eps:
        raise RankDeficiencyError("ridge system is numerically singular; use lambda > 0")
    a = cho_solve((c, low), b)
    return DenseModel("ridge", a, float(lam), _auto_M(y, M), d.fingerprint,
                      {"solver": "cholesky"})


def soft_threshold(v, tau: float):
    out = np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)
    return out if np.ndim(out) else float(out)


def power_iteration(A: np.ndarray, rtol: float = 1e-6, max_iter: int = 10_000) -> float:
    """Largest eigenvalue of a symmetric positive semidefinite matrix."""
    n = A.shape[0]
    v = np.ones(n) / np.sqrt(n)
    lam = 0.0
    for _ in range(max_iter):
        w = A @ v
        lam_new = float(v @ w)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        v = w / nrm
        if abs(lam_new - lam) <= rtol * abs(lam_new):
            return lam_new
        lam = lam_new
    return lam


def lasso_objective(G, y, a, lam) -> float:
    r = y - G @ a
    return float(r @ r) / len(y) + lam * float(np.abs(a).sum())


def fit_lasso_fista(d: Dictionary, y, lam: float, max_iter: int = 20_000,
                    tol: float = 1e-8, a0=None, M=None, check_every: int = 10,
                    lipschitz=None) -> DenseModel:
    """FISTA with constant step 1/L, L the top eigenvalue of 2 G^T G / m.

    Stops when ||a - prox(a - grad(a)/L)||_inf <= tol, checked on the main
    iterate every ``check_every`` steps. Warm-start from ``a0``.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    G = d.design
    y = np.asarray(y, dtype=float)
    m, n = G.shape
    gram = 2.0 * (G.T @ G) / m
    gty = 2.0 * (G.T @ y) / m
    L = lipschitz if lipschitz is not None else power_iteration(gram)
    if L <= 0:
        a = np.zeros(n)
        return DenseModel("lasso", a, float(lam), _auto_M(y, M), d.fingerprint,
                          {"iterations": 0, "fixed_point_residual": 0.0, "converged": True,
                           "lipschitz": L})
    tau = lam / L

    def grad(a):
        return gram @ a - gty

    def fp_residual(a):
        return float(np.max(np.abs(a - soft_threshold(a - grad(a) / L, tau))))

    a = np.zeros(n) if a0 is None else np.array(a0, dtype=float)
    b = a.copy()
    t = 1.0
    res = fp_residual(a)
    it = 0
    converged = res <= tol
    while not converged and it < max_iter:
        a_next = soft_threshold(b - grad(b) / L, tau)
        t_next = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
        b = a_next + ((t - 1.0) / t_next) * (a_next - a)
        a, t = a_next, t_next
        it += 1
        if it % check_every == 0 or it == max_iter:
            res = fp_residual(a)
            converged = res <= tol
    if not converged:
        warnings.warn(f"FISTA stopped at max_iter={max_iter} with fixed-point residual {res:.3g}",
                      RuntimeWarning, stacklevel=2)
    stats = {"iterations": it, "fixed_point_residual": res, "converged": bool(converged),
             "lipschitz": L}
    return DenseModel("lasso", a, float(lam), _auto_M(y, M), d.fingerprint, stats)
