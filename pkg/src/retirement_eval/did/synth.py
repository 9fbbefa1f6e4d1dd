"""Synthetic control: simplex-weighted donor combination matching the treated pre-period path."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Dict, TextIO

import numpy as np

from ..errors import NoDonors
from .design import DesignSpec, PanelLike, as_outcome_panel, resolve_design


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto ``{w : w >= 0, sum(w) = 1}`` (sort-based)."""
    n = v.size
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, n + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


@dataclass
class SimplexLSQ:
    weights: np.ndarray
    iterations: int
    converged: bool
    grad_map_norm: float


def simplex_least_squares(X: np.ndarray, y: np.ndarray, tol: float = 1e-8, max_iter: int = 100_000) -> SimplexLSQ:
    """Minimise ``0.5 * ||X w - y||^2`` over the simplex.

    Accelerated projected gradient with function-value restarts, started at
    uniform weights. Stops when the gradient-mapping norm
    ``L * ||w - P(w - grad / L)||`` falls below ``tol``.
    """
    n = X.shape[1]
    H = X.T @ X
    c = X.T @ y
    L = float(np.linalg.eigvalsh(H).max()) if n else 0.0
    L = max(L, 1e-300)
    f = lambda w: 0.5 * float(w @ H @ w) - float(c @ w)

    w = np.full(n, 1.0 / n)
    z, t = w.copy(), 1.0
    fw = f(w)
    gm = np.inf
    for it in range(1, max_iter + 1):
        w_new = project_simplex(z - (H @ z - c) / L)
        f_new = f(w_new)
        if f_new > fw:
            # restart momentum
            z, t = w.copy(), 1.0
            w_new = project_simplex(w - (H @ w - c) / L)
            f_new = f(w_new)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = w_new + ((t - 1.0) / t_new) * (w_new - w)
        w, fw, t = w_new, f_new, t_new
        gm = L * float(np.linalg.norm(w - project_simplex(w - (H @ w - c) / L)))
        if gm < tol:
            return SimplexLSQ(w, it, True, gm)
    return SimplexLSQ(w, max_iter, False, gm)


@dataclass
class SyntheticControlResult:
    weights: Dict[str, float]
    pre_fit_rmse: float
    gap_series: Dict[int, float]
    iterations: int
    converged: bool

    def to_csv(self, stream: TextIO) -> None:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["kind", "key", "value"])
        for donor, v in self.weights.items():
            w.writerow(["weight", donor, repr(float(v))])
        for year, g in self.gap_series.items():
            w.writerow(["gap", year, repr(float(g))])
        w.writerow(["pre_fit_rmse", "", repr(float(self.pre_fit_rmse))])


def synthetic_control(data: PanelLike, spec: DesignSpec, tol: float = 1e-8,
                      max_iter: int = 100_000) -> SyntheticControlResult:
    """Fit donor weights on the pre window and report treated-minus-synthetic gaps for all years."""
    panel = as_outcome_panel(data, spec)
    if len(panel.units) < 2:
        raise NoDonors("synthetic control needs at least one donor unit")
    d = resolve_design(panel, spec)
    donors = d.controls
    X = panel.values[donors][:, d.pre].T
    y = panel.values[d.treated, d.pre]
    sol = simplex_least_squares(X, y, tol=tol, max_iter=max_iter)
    synthetic = sol.weights @ panel.values[donors]
    gap = panel.values[d.treated] - synthetic
    rmse = float(np.sqrt(np.mean(gap[d.pre] ** 2)))
    return SyntheticControlResult(
        weights={panel.units[j]: float(w) for j, w in zip(donors, sol.weights)},
        pre_fit_rmse=rmse,
        gap_series={int(yr): float(g) for yr, g in zip(panel.years, gap)},
        iterations=sol.iterations,
        converged=sol.converged,
    )
