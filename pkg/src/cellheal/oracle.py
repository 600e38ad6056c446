"""Analytic KPI stand-in for the radio simulator.

Healing-loop convergence can only be judged against known ground truth, so
the harness can swap the simulator for configurable logistic KPI curves
plus Gaussian noise. The true constrained optimum of the resulting cost is
computed by exhaustive evaluation on the same candidate grid the optimizer
uses.
"""

from dataclasses import dataclass

import numpy as np

from .healer import (
    HealingConfig,
    alpha_grid,
    coupling_weights,
    most_coupled,
    propagate_alpha,
)
from .simulator import InterferenceMatrix
from .statlearn import logistic


@dataclass(frozen=True)
class KpiCurve:
    """y(x) = lo + (hi - lo) * logistic(slope * (x - mid))."""

    lo: float
    hi: float
    mid: float
    slope: float

    def __call__(self, x):
        return self.lo + (self.hi - self.lo) * logistic(self.slope * (x - self.mid))

    @property
    def span(self):
        return self.hi - self.lo


@dataclass(frozen=True)
class OracleParams:
    """Ground-truth KPI surfaces for one faulty cell and its tier.

    The faulty cell's curves take the pivot value as input (more neighbour
    power means more interference on it); each neighbour's curves take its
    own power factor (cutting its power degrades its own users).
    """

    coupling_row: tuple = (9.0, 5.0, 4.0, 3.0, 2.0, 1.0)
    noise_pct: float = 5.0  # relative Gaussian sigma per measurement
    ftt_faulty: KpiCurve = KpiCurve(8.0, 24.0, 0.47, 16.0)
    bcr_faulty: KpiCurve = KpiCurve(1.0, 10.0, 0.80, 10.0)
    ftt_tier: KpiCurve = KpiCurve(8.0, 52.0, 0.30, -16.0)
    bcr_tier: KpiCurve = KpiCurve(0.5, 9.0, 0.08, -16.0)

    @property
    def faulty_enb(self):
        return 0

    @property
    def tier1(self):
        return tuple(range(1, len(self.coupling_row) + 1))

    def curves(self, enb):
        if enb == self.faulty_enb:
            return self.ftt_faulty, self.bcr_faulty
        return self.ftt_tier, self.bcr_tier


def interference_matrix(params):
    n = len(params.coupling_row) + 1
    values = np.zeros((n, n))
    for j, val in zip(params.tier1, params.coupling_row):
        values[0, j] = val
        values[j, 0] = val
    return InterferenceMatrix(ids=tuple(range(n)), values=values)


def healing_config(params, **overrides):
    overrides.setdefault("bcr_discount", 0.0)  # keeps the ground truth well-posed
    return HealingConfig(faulty_enb=params.faulty_enb, tier1=params.tier1, **overrides)


def make_runner(params, seed):
    """Episode runner returning noisy analytic KPIs for the healing loop.

    Noise is multiplicative: each measurement carries a Gaussian relative
    error of noise_pct percent, the usual model for measured KPIs."""
    rng = np.random.default_rng(seed)

    def runner(alphas, iteration):
        pivot_alpha = min(alphas.values())  # the pivot takes the deepest cut
        out = {}
        for enb in (params.faulty_enb,) + params.tier1:
            ftt_curve, bcr_curve = params.curves(enb)
            x = pivot_alpha if enb == params.faulty_enb else alphas[enb]
            noise = params.noise_pct / 100.0
            ftt = ftt_curve(x) * (1.0 + rng.normal(0.0, noise))
            bcr = bcr_curve(x) * (1.0 + rng.normal(0.0, noise))
            out[enb] = (max(ftt, 0.0), max(bcr, 0.0))
        return out

    return runner


def true_cost(params, config, pivot_alpha):
    """Noiseless cost at a pivot value, using the same coupling propagation
    the healer applies (plain row; the oracle defaults the BCR discount off)."""
    matrix = interference_matrix(params)
    row = matrix.row(params.faulty_enb, params.tier1)
    pivot = most_coupled(matrix, params.faulty_enb, params.tier1)
    weights = coupling_weights(row)
    alphas = propagate_alpha(pivot_alpha, row, pivot)
    total = float(params.ftt_faulty(pivot_alpha))
    for j, w in weights.items():
        total += w * float(params.ftt_tier(alphas[j]))
    return total


def true_constrained_optimum(params, config):
    """Exhaustive noiseless solution of the constrained problem on the
    optimizer's candidate grid. Returns (alpha, cost)."""
    matrix = interference_matrix(params)
    row = matrix.row(params.faulty_enb, params.tier1)
    pivot = most_coupled(matrix, params.faulty_enb, params.tier1)
    best = None
    for a in alpha_grid(config.alpha_grid_step):
        alphas = propagate_alpha(float(a), row, pivot)
        bcrs = [params.bcr_faulty(float(a))]
        bcrs += [params.bcr_tier(alphas[j]) for j in params.tier1]
        if max(bcrs) >= config.bcr_threshold_pct:
            continue
        c = true_cost(params, config, float(a))
        if best is None or c < best[1]:
            best = (float(a), c)
    if best is None:
        raise ValueError("no feasible pivot value exists for these curves")
    return best
