"""Bias sweeps and the data series behind each reproduced figure.

Every grid point ``i`` draws from ``RngStream.for_task(seed, i)``, so rows do
not depend on evaluation order or on how many worker processes are used.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from qbfactory.analysis import (
    BiasEstimate,
    GofReport,
    chi_square_gof,
    estimate_from_counts,
    f_frown,
    f_wedge,
    von_neumann_cost,
)
from qbfactory.factories.ledger import FactoryConfig
from qbfactory.factories.protocols import DEFAULT_CONFIG
from qbfactory.factories.runner import run_factory
from qbfactory.factories.sources import ACCEPT_LUT, FAIR_LUT, QUOINS_PER_SHOT
from qbfactory.noise import ReadoutConfusion, apply_confusion, doubling_ceiling
from qbfactory.quantum import BellOutcome, bell_distribution, sample_bell_codes
from qbfactory.rng import RngStream

DEFAULT_SHOTS = 50_000
DEFAULT_STEPS = 21


def parse_grid(text: str) -> list[float]:
    """``"start:end:steps"`` to an evenly spaced, inclusive list of biases."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must look like start:end:steps, got {text!r}")
    try:
        start, end, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ValueError(f"malformed grid {text!r}") from None
    if steps < 1:
        raise ValueError("grid needs at least one step")
    if not (0.0 <= start <= 1.0 and 0.0 <= end <= 1.0):
        raise ValueError("grid endpoints must lie in [0, 1]")
    if steps == 1:
        return [start]
    return [round(float(x), 12) for x in np.linspace(start, end, steps)]


def default_grid() -> list[float]:
    return parse_grid(f"0:1:{DEFAULT_STEPS}")


def ideal_distribution(p: float, noise: ReadoutConfusion | None):
    ideal = bell_distribution(p).as_array()
    return ideal if noise is None else apply_confusion(ideal, noise)


@dataclass(frozen=True)
class SweepRow:
    p: float
    counts: tuple[int, int, int, int]
    fair: BiasEstimate
    frown: BiasEstimate | None
    sqdiff: BiasEstimate | None
    frown_quoins_mean: float
    frown_quoins_median: float
    gof: GofReport

    @property
    def shots(self) -> int:
        return sum(self.counts)


@dataclass(frozen=True)
class SweepResult:
    rows: list[SweepRow]
    shots: int
    seed: int
    noise: ReadoutConfusion | None


def sweep_point(p: float, shots: int, rng: RngStream, noise: ReadoutConfusion | None = None) -> SweepRow:
    """Measure ``shots`` quoin pairs at bias ``p`` and derive the shot-level coins.

    Each shot is a fair coin. Shots in Phi- or Psi+ are also conditional
    coins; their cost is the run of shots since the previous accepted one.
    """
    codes = sample_bell_codes(p, rng, shots, noise)
    counts = tuple(int(c) for c in np.bincount(codes, minlength=4))
    fair = estimate_from_counts(int(FAIR_LUT[codes].sum()), shots)
    accepted = np.flatnonzero(ACCEPT_LUT[codes])
    if accepted.size:
        frown = estimate_from_counts(counts[BellOutcome.PSI_PLUS], accepted.size)
        sqdiff = estimate_from_counts(counts[BellOutcome.PHI_MINUS], accepted.size)
        gaps = np.diff(np.concatenate(([-1], accepted))) * QUOINS_PER_SHOT
        q_mean, q_median = float(gaps.mean()), float(np.median(gaps))
    else:
        frown = sqdiff = None
        q_mean = q_median = math.nan
    gof = chi_square_gof(counts, ideal_distribution(p, noise))
    return SweepRow(p, counts, fair, frown, sqdiff, q_mean, q_median, gof)


def _sweep_task(args):
    i, p, shots, seed, noise = args
    return sweep_point(p, shots, RngStream.for_task(seed, i), noise)


def _map(fn, tasks, jobs: int):
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def run_sweep(grid, shots: int = DEFAULT_SHOTS, seed: int = 0,
              noise: ReadoutConfusion | None = None, jobs: int = 1) -> SweepResult:
    if shots < 1:
        raise ValueError("shots must be at least 1")
    tasks = [(i, float(p), shots, seed, noise) for i, p in enumerate(grid)]
    return SweepResult(_map(_sweep_task, tasks, jobs), shots, seed, noise)


def _est(e: BiasEstimate | None) -> list:
    if e is None:
        return [0, 0, math.nan, math.nan, math.nan]
    return [e.successes, e.trials, e.p_hat, e.ci_low, e.ci_high]


SWEEP_COLUMNS = [
    "p", "n_phi_plus", "n_phi_minus", "n_psi_plus", "n_psi_minus",
    "fair_heads", "fair_trials", "fair_p_hat", "fair_ci_low", "fair_ci_high", "fair_ideal",
    "frown_heads", "frown_trials", "frown_p_hat", "frown_ci_low", "frown_ci_high", "frown_ideal",
    "sqdiff_heads", "sqdiff_trials", "sqdiff_p_hat", "sqdiff_ci_low", "sqdiff_ci_high", "sqdiff_ideal",
    "fair_quoins_mean", "frown_quoins_mean", "frown_quoins_median",
    "gof_statistic", "gof_dof", "gof_pass",
]


def sweep_table(result: SweepResult) -> tuple[list[str], list[list]]:
    rows = []
    for r in result.rows:
        rows.append([
            r.p, *r.counts,
            *_est(r.fair), 0.5,
            *_est(r.frown), f_frown(r.p),
            *_est(r.sqdiff), (1 - 2 * r.p) ** 2,
            float(QUOINS_PER_SHOT), r.frown_quoins_mean, r.frown_quoins_median,
            r.gof.statistic, r.gof.dof, int(r.gof.passed),
        ])
    return SWEEP_COLUMNS, rows


FIG1A_COLUMNS = [
    "p", "von_neumann_ideal", "von_neumann_mean", "von_neumann_outputs",
    "quantum_ideal", "fair1q_mean", "fairbell_mean",
]


def _fig1a_task(args):
    i, p, n, seed, config = args
    vn_mean, vn_n = math.nan, 0
    ideal = math.inf
    if 0.0 < p < 1.0:
        ideal = von_neumann_cost(p)
        run = run_factory("vonneumann", n, seed, p=p, config=config, on_cap="stop", task=3 * i)
        vn_n = run.n
        if run.n:
            vn_mean = float(run.inputs.mean())
    fair1q = run_factory("fair1q", n, seed, p=p, task=3 * i + 1)
    fairbell = run_factory("fairbell", n, seed, p=p, task=3 * i + 2)
    return [p, ideal, vn_mean, vn_n, 2.0, float(fair1q.quoins.mean()), float(fairbell.quoins.mean())]


def fig1a_table(grid, n: int, seed: int, config: FactoryConfig = DEFAULT_CONFIG, jobs: int = 1):
    """Coins consumed per fair coin: von Neumann versus the two quantum routes."""
    tasks = [(i, float(p), n, seed, config) for i, p in enumerate(grid)]
    return FIG1A_COLUMNS, _map(_fig1a_task, tasks, jobs)


FIG3A_COLUMNS = [
    "p", "fair_p_hat", "fair_ci_low", "fair_ci_high", "fair_ideal",
    "frown_p_hat", "frown_ci_low", "frown_ci_high", "frown_ideal",
    "fair_quoins_mean", "frown_quoins_mean",
]


def fig3a_table(result: SweepResult):
    rows = []
    for r in result.rows:
        fr = _est(r.frown)
        rows.append([r.p, *_est(r.fair)[2:], 0.5, *fr[2:], f_frown(r.p),
                     float(QUOINS_PER_SHOT), r.frown_quoins_mean])
    return FIG3A_COLUMNS, rows


FIG3B_COLUMNS = [
    "p", "heads", "trials", "p_hat", "ci_low", "ci_high", "ideal", "noise_ceiling",
    "quoins_median", "quoins_mean", "quoins_max", "truncations",
]
FIG3B_COST_COLUMNS = ["p", "quoins", "count"]


def _fig3b_task(args):
    i, p, n, seed, config, noise = args
    run = run_factory("double", n, seed, p=p, config=config, noise=noise, on_cap="skip", task=i)
    est = run.estimate()
    stats = run.cost_stats()
    ceiling = doubling_ceiling(noise) if noise is not None else 1.0
    row = [p, est.successes, est.trials, est.p_hat, est.ci_low, est.ci_high, f_wedge(p), ceiling,
           stats["median"], stats["mean"], stats["max"], len(run.truncations)]
    values, freq = np.unique(run.quoins, return_counts=True)
    hist = [[p, int(v), int(c)] for v, c in zip(values, freq)]
    return row, hist


def fig3b_tables(grid, n: int, seed: int, config: FactoryConfig = DEFAULT_CONFIG,
                 noise: ReadoutConfusion | None = None, jobs: int = 1):
    """Doubling-coin bias per bias value and the distribution of quoins per coin."""
    tasks = [(i, float(p), n, seed, config, noise) for i, p in enumerate(grid)]
    results = _map(_fig3b_task, tasks, jobs)
    rows = [r for r, _ in results]
    hist = [h for _, hs in results for h in hs]
    return (FIG3B_COLUMNS, rows), (FIG3B_COST_COLUMNS, hist)
