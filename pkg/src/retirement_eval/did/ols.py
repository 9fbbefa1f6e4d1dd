"""Least-squares core shared by every regression in the package."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from ..errors import DataError, RankDeficient

SE_KINDS = ("iid", "hc_robust", "cluster_by_unit")


def _dependent_columns(X: np.ndarray, tol: float) -> list:
    """Greedy scan: columns that add nothing to the span of the columns before them."""
    kept, bad = [], []
    for j in range(X.shape[1]):
        trial = kept + [j]
        if np.linalg.matrix_rank(X[:, trial], tol=tol) == len(trial):
            kept.append(j)
        else:
            bad.append(j)
    return bad


@dataclass
class OLSResult:
    coef: np.ndarray
    resid: np.ndarray
    fitted: np.ndarray
    X: np.ndarray
    xtx_inv: np.ndarray
    names: Optional[Sequence[str]] = None

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def k(self) -> int:
        return self.X.shape[1]

    @property
    def sigma2(self) -> float:
        dof = self.n - self.k
        return float(self.resid @ self.resid / dof) if dof > 0 else float("nan")

    def cov(self, kind: str = "iid", clusters: Optional[Sequence] = None) -> np.ndarray:
        """Coefficient covariance.

        ``hc_robust`` is HC1 and ``cluster_by_unit`` is CR1, both with the
        usual small-sample factors.
        """
        n, k = self.n, self.k
        bread = self.xtx_inv
        if kind == "iid":
            return self.sigma2 * bread
        if kind == "hc_robust":
            scores = self.X * self.resid[:, None]
            meat = scores.T @ scores
            scale = n / (n - k) if n > k else float("nan")
            return scale * bread @ meat @ bread
        if kind == "cluster_by_unit":
            if clusters is None:
                raise DataError("cluster_by_unit covariance needs cluster labels")
            clusters = np.asarray(clusters)
            if len(clusters) != n:
                raise DataError("cluster labels do not match the number of observations")
            labels, inv = np.unique(clusters, return_inverse=True)
            g = len(labels)
            scores = np.zeros((g, k))
            np.add.at(scores, inv, self.X * self.resid[:, None])
            meat = scores.T @ scores
            if g < 2 or n <= k:
                scale = float("nan")
            else:
                scale = g / (g - 1) * (n - 1) / (n - k)
            return scale * bread @ meat @ bread
        raise DataError(f"unknown covariance kind {kind!r}; expected one of {SE_KINDS}")

    def se(self, kind: str = "iid", clusters: Optional[Sequence] = None) -> np.ndarray:
        # round-off can push an exactly-zero variance slightly negative
        return np.sqrt(np.clip(np.diag(self.cov(kind, clusters)), 0.0, None))


def ols(design_matrix, response, names: Optional[Sequence[str]] = None) -> OLSResult:
    """Ordinary least squares by QR.

    Raises
    ------
    RankDeficient
        If the design has fewer rows than columns or is not of full column
        rank; ``columns`` lists the offending column names (or indices).
    """
    X = np.asarray(design_matrix, dtype=float)
    y = np.asarray(response, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise DataError(f"shape mismatch: X {X.shape}, y {y.shape}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DataError("non-finite values in regression inputs")
    n, k = X.shape
    label = (lambda j: names[j]) if names is not None else (lambda j: j)
    if n < k:
        raise RankDeficient([label(j) for j in range(n, k)], f"{n} rows cannot identify {k} coefficients")
    s = np.linalg.svd(X, compute_uv=False)
    tol = s.max() * max(n, k) * np.finfo(float).eps if s.size and s.max() > 0 else 0.0
    if s.size == 0 or s.min() <= tol or np.linalg.matrix_rank(X, tol=tol) < k:
        raise RankDeficient([label(j) for j in _dependent_columns(X, tol)] or [label(j) for j in range(k)])
    Q, R = np.linalg.qr(X)
    coef = linalg.solve_triangular(R, Q.T @ y)
    r_inv = linalg.solve_triangular(R, np.eye(k))
    fitted = X @ coef
    return OLSResult(coef, y - fitted, fitted, X, r_inv @ r_inv.T, names)
