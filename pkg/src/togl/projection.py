"""Empirical inner-product geometry and the incremental orthogonal projector.

Projecting under <u, v>_m = (1/m) sum u_i v_i is the same as ordinary least
squares on the sample values (the 1/m cancels), so the QR factors below are
taken with respect to the plain Euclidean inner product.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

RANK_TOL = 1e-10


def emp_inner(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.size == 0:
        raise ValueError("empirical inner product needs equal, nonzero lengths")
    return float(u @ v) / u.size


def emp_norm(u) -> float:
    u = np.asarray(u, dtype=float)
    return float(np.sqrt(u @ u / u.size))


class GreedyState:
    """Selected atoms, their thin QR factors and the current residual.

    Owned by a single fit. ``append`` mutates in place and returns False
    (leaving everything untouched) when the new column is numerically in the
    span of the columns already selected.
    """

    def __init__(self, y, rank_tol: float = RANK_TOL):
        self.y = np.asarray(y, dtype=float)
        self.m = self.y.size
        self.rank_tol = rank_tol
        self.selected: list[int] = []
        self._cap = min(self.m, 16)
        self._Q = np.zeros((self.m, self._cap))
        self._R = np.zeros((self._cap, self._cap))
        self.residual = self.y.copy()
        self.residual_norm_m = emp_norm(self.y)

    @property
    def k(self) -> int:
        return len(self.selected)

    @property
    def qfactor(self) -> np.ndarray:
        return self._Q[:, : self.k]

    @property
    def rfactor(self) -> np.ndarray:
        return self._R[: self.k, : self.k]

    def _grow(self):
        cap = min(self.m, 2 * self._cap)
        Q = np.zeros((self.m, cap))
        R = np.zeros((cap, cap))
        Q[:, : self._cap] = self._Q
        R[: self._cap, : self._cap] = self._R
        self._Q, self._R, self._cap = Q, R, cap

    def append(self, col, index: int) -> bool:
        if index in self.selected:
            raise ValueError(f"atom {index} already selected")
        col = np.asarray(col, dtype=float)
        k = self.k
        col_norm = np.linalg.norm(col)
        if k >= self.m or col_norm == 0.0:
            return False
        Q = self._Q[:, :k]
        # classical Gram-Schmidt, then one reorthogonalization pass
        h = Q.T @ col
        w = col - Q @ h
        h2 = Q.T @ w
        w -= Q @ h2
        h += h2
        w_norm = np.linalg.norm(w)
        if w_norm < self.rank_tol * col_norm:
            return False
        if k == self._cap:
            self._grow()
        self._Q[:, k] = w / w_norm
        self._R[:k, k] = h
        self._R[k, k] = w_norm
        self.selected.append(int(index))
        Qk = self._Q[:, : k + 1]
        # recomputed from scratch each step, no downdating
        self.residual = self.y - Qk @ (Qk.T @ self.y)
        self.residual_norm_m = emp_norm(self.residual)
        return True

    def coefficients(self) -> np.ndarray:
        """Coefficients of the projection in the basis of the selected atoms."""
        if self.k == 0:
            return np.zeros(0)
        qty = self.qfactor.T @ self.y
        return solve_triangular(self.rfactor, qty, lower=False)

    def prefix_coefficients(self, j: int) -> np.ndarray:
        """Coefficients of the projection onto the first ``j`` selected atoms."""
        if j == 0:
            return np.zeros(0)
        qty = self._Q[:, :j].T @ self.y
        return solve_triangular(self._R[:j, :j], qty, lower=False)


def project_append(state: GreedyState, col, index: int) -> bool:
    return state.append(col, index)
