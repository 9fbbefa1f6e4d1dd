"""Wild (cluster) bootstrap test of ``delta = 0`` for the two-way FE DiD.

Replicates are built from the null-restricted fit: fitted values from the
unit + year effects model plus restricted residuals multiplied by Rademacher
signs, one sign per unit (or per cell in observation-level mode). Each
replicate's delta is re-estimated with the same two-way FE estimator.

Replicate ``b`` draws its signs from its own stream, spawned from the seed,
so results do not depend on how replicates are split across threads.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, TextIO

import numpy as np

from ..errors import DataError
from .design import DesignSpec, PanelLike, as_outcome_panel, resolve_fit_design
from .estimators import fit_twfe_did, two_way_demean

MIN_REPLICATIONS = 99
# the all-plus and all-minus sign patterns reproduce |delta| exactly; count them as ties despite round-off
TIE_RTOL = 1e-9


@dataclass
class BootstrapResult:
    delta: float
    replications: int
    p_value: float
    replicate_deltas: np.ndarray
    seed: int
    weight_scheme: str = "rademacher"
    cluster: bool = True
    notes: List[str] = field(default_factory=list)

    def to_csv(self, stream: TextIO) -> None:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["replicate", "delta"])
        for b, d in enumerate(self.replicate_deltas):
            w.writerow([b, repr(float(d))])


def rademacher_signs(seed: int, first: int, count: int, size: int) -> np.ndarray:
    """Signs for replicates ``first .. first+count-1``; row ``b`` depends only on (seed, b)."""
    out = np.empty((count, size))
    for row in range(count):
        # identical to the (first + row)-th child of SeedSequence(seed).spawn()
        child = np.random.SeedSequence(seed, spawn_key=(first + row,))
        out[row] = np.random.default_rng(child).integers(0, 2, size=size) * 2.0 - 1.0
    return out


class _FWLDelta:
    """The two-way FE delta as a linear functional of the outcome matrix.

    By Frisch-Waugh-Lovell the dummy-regression coefficient equals
    ``<D~, Y> / <D~, D~>`` with ``D~`` the two-way demeaned treatment dummy.
    """

    def __init__(self, D: np.ndarray):
        self.dt = two_way_demean(D)
        self.norm = float((self.dt * self.dt).sum())

    def __call__(self, Y: np.ndarray) -> np.ndarray:
        # Y: (..., units, years)
        return np.tensordot(Y, self.dt, axes=([-2, -1], [0, 1])) / self.norm


def wild_cluster_bootstrap(data: PanelLike, spec: DesignSpec, replications: int = 999, seed: int = 0,
                           cluster: bool = True, n_jobs: int = 1, chunk: int = 256) -> BootstrapResult:
    """Bootstrap p-value ``(1 + #{|delta*| >= |delta|}) / (R + 1)``.

    Replicates within a relative ``TIE_RTOL`` of ``|delta|`` count as ties.

    Parameters
    ----------
    replications : int
        Number of bootstrap draws, at least 99.
    seed : int
        Root seed; replicate ``b`` uses the ``b``-th spawned child stream.
    cluster : bool
        One sign per unit (default) or one per cell.
    n_jobs : int
        Worker threads; the result is identical for any value.
    """
    if replications < MIN_REPLICATIONS:
        raise DataError(f"replications must be >= {MIN_REPLICATIONS}, got {replications}")
    if seed is None:
        raise DataError("a seed is required for bootstrap inference")
    fit = fit_twfe_did(data, spec)
    panel = as_outcome_panel(data, spec)
    design = resolve_fit_design(panel, spec)
    keep = design.sample
    Y = panel.values[:, keep]
    D = np.zeros_like(Y)
    D[design.treated, design.post[keep]] = 1.0

    restricted_resid = two_way_demean(Y)
    restricted_fit = Y - restricted_resid
    estimator = _FWLDelta(D)
    delta_hat = float(estimator(restricted_fit + restricted_resid))
    n_units, n_years = Y.shape
    size = n_units if cluster else n_units * n_years
    # delta* is linear in the signs: a constant (zero up to round-off) plus sum_k w_k c_k
    base = float(estimator(restricted_fit))
    contrib = estimator.dt * restricted_resid / estimator.norm
    c = contrib.sum(axis=1) if cluster else contrib.ravel()

    def work(start: int) -> np.ndarray:
        count = min(chunk, replications - start)
        w = rademacher_signs(seed, start, count, size)
        # row-wise sums so each replicate is computed identically whatever the batch size
        return base + (w * c[None, :]).sum(axis=1)

    starts = list(range(0, replications, chunk))
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(work, starts))
    else:
        parts = [work(s) for s in starts]
    deltas = np.concatenate(parts)
    exceed = int(np.count_nonzero(np.abs(deltas) >= abs(delta_hat) * (1.0 - TIE_RTOL)))
    p = (1 + exceed) / (replications + 1)
    notes = [f"point estimate {fit.delta!r} from the dummy-variable fit"]
    if cluster and len(design.controls) + 1 <= 30:
        notes.append(f"{n_units} clusters with a single treated cluster: few distinct sign patterns drive the "
                     "bootstrap distribution")
    return BootstrapResult(fit.delta, replications, p, deltas, seed, "rademacher", cluster, notes)
