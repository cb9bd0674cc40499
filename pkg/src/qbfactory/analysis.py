"""Estimators, goodness-of-fit checks, target functions and series oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np
from scipy import stats

from qbfactory.noise import apply_confusion
from qbfactory.quantum import bell_distribution

CONFIDENCE = 0.95
GOF_ALPHA = 0.01
Z95 = NormalDist().inv_cdf(0.5 + CONFIDENCE / 2)

INTERVAL_METHOD = "wilson score, 95%"
TAIL_BOUND_METHOD = (
    "omitted terms <= (1-q)^(n_max+2) * P(walk length > 2*n_max+1), "
    "with P(walk length > 2m+1) = C(2m+2, m+1) / 4^(m+1) exactly"
)


@dataclass(frozen=True)
class BiasEstimate:
    successes: int
    trials: int
    p_hat: float
    ci_low: float
    ci_high: float
    method: str = INTERVAL_METHOD

    def sigma(self, reference: float) -> float:
        """Binomial standard error of the estimate if the true bias were ``reference``."""
        return math.sqrt(reference * (1.0 - reference) / self.trials)

    def within(self, reference: float, n_sigma: float = 5.0, slack: float = 0.0) -> bool:
        return abs(self.p_hat - reference) <= n_sigma * self.sigma(reference) + slack


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    """Score interval for a binomial proportion."""
    p_hat = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p_hat + z2 / (2 * trials)) / denom
    margin = (z / denom) * math.sqrt(p_hat * (1 - p_hat) / trials + z2 / (4 * trials * trials))
    return max(0.0, center - margin), min(1.0, center + margin)


def estimate_from_counts(successes: int, trials: int) -> BiasEstimate:
    successes, trials = int(successes), int(trials)
    if trials < 1:
        raise ValueError("need at least one trial")
    if not 0 <= successes <= trials:
        raise ValueError(f"successes must lie in [0, {trials}], got {successes}")
    p_hat = successes / trials
    low, high = wilson_interval(successes, trials)
    return BiasEstimate(successes, trials, p_hat, min(low, p_hat), max(high, p_hat))


def estimate_bias(bits) -> BiasEstimate:
    """Point estimate and score interval for a stream of 0/1 outcomes."""
    arr = np.asarray(bits)
    if arr.size == 0:
        raise ValueError("cannot estimate a bias from an empty sequence")
    if np.any((arr != 0) & (arr != 1)):
        raise ValueError("bits must be 0 or 1")
    return estimate_from_counts(int(arr.sum()), int(arr.size))


@dataclass(frozen=True)
class GofReport:
    statistic: float
    dof: int
    critical: float
    passed: bool
    impossible_cells: tuple[int, ...] = ()


def chi_square_gof(counts, expected, alpha: float = GOF_ALPHA) -> GofReport:
    """Pearson test of four outcome counts against expected probabilities.

    Cells with zero expected probability are left out of the statistic; any
    count landing in one fails the test outright.
    """
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(getattr(expected, "probs", expected), dtype=float)
    if counts.shape != probs.shape or counts.ndim != 1:
        raise ValueError("counts and expected must be 1-d and the same length")
    if np.any(counts < 0) or np.any(counts != np.round(counts)):
        raise ValueError("counts must be nonnegative integers")
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError("expected is not a probability vector")
    total = counts.sum()
    if total < 1:
        raise ValueError("need at least one count")

    live = probs > 0
    impossible = tuple(int(i) for i in np.flatnonzero(~live & (counts > 0)))
    exp_counts = total * probs[live]
    statistic = float(np.sum((counts[live] - exp_counts) ** 2 / exp_counts))
    dof = int(live.sum()) - 1
    if dof >= 1:
        critical = float(stats.chi2.ppf(1.0 - alpha, dof))
    else:
        critical = 0.0
    passed = not impossible and (statistic < critical if dof >= 1 else statistic == 0.0)
    return GofReport(statistic, dof, critical, passed, impossible)


def f_frown(p: float) -> float:
    return 4.0 * p * (1.0 - p)


def f_wedge(p: float) -> float:
    return 2.0 * p if p <= 0.5 else 2.0 * (1.0 - p)


def von_neumann_cost(p: float) -> float:
    """Expected input coins per von Neumann output."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"von Neumann extraction diverges at p = {p}")
    return 1.0 / (p * (1.0 - p))


def catalan(n: int) -> int:
    """Exact n-th Catalan number.

    Python integers do not overflow, so any ``n >= 0`` is exact; converting a
    large result to float raises ``OverflowError`` rather than wrapping.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    return math.comb(2 * n, n) // (n + 1)


def stopping_probabilities(n_max: int) -> np.ndarray:
    """``C_n / 2^(2n+1)`` for ``n = 0..n_max``: first strict heads excess at step 2n+1."""
    n = np.arange(n_max, dtype=float)
    ratios = (2 * n + 1) / (2 * n + 4)
    return 0.5 * np.concatenate(([1.0], np.cumprod(ratios)))


def walk_survival(steps: int) -> float:
    """P(the fair walk has no strict heads excess within ``steps`` flips).

    Equals ``P(S_steps in {0, -1})`` by reflection.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    if steps == 0:
        return 1.0
    k = steps // 2
    log_p = math.lgamma(steps + 1) - math.lgamma(k + 1) - math.lgamma(steps - k + 1) - steps * math.log(2)
    return math.exp(log_p)


@dataclass(frozen=True)
class SeriesOracle:
    bias: float
    tail_bound: float
    n_max: int
    method: str = TAIL_BOUND_METHOD


def sqrt_series_oracle(q: float, n_max: int) -> SeriesOracle:
    """Truncated Catalan series for the square-root coin.

    ``bias = 1 - sum_{n<=n_max} C_n/2^(2n+1) (1-q)^(n+1)`` overshoots
    ``sqrt(q)`` by at most ``tail_bound``.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    y = 1.0 - q
    weights = stopping_probabilities(n_max)
    powers = y ** np.arange(1, n_max + 2, dtype=float)
    bias = 1.0 - float(np.sum(weights * powers))
    tail = y ** (n_max + 2) * walk_survival(2 * n_max + 1) if y > 0 else 0.0
    return SeriesOracle(bias, tail, n_max)


def sqrt_coin_bias(q: float, fair_bias: float = 0.5) -> float:
    """Heads probability of the Catalan-walk construction with an unfair walk coin.

    With walk heads probability ``h >= 1/2`` the output is tails with
    probability ``(1 - sqrt(1 - 4h(1-h)(1-q))) / (2(1-h))``; at ``h = 1/2``
    this is ``1 - sqrt(q)``. The walk fails to stop with positive probability
    when ``h < 1/2``.
    """
    h = fair_bias
    if not 0.5 <= h <= 1.0:
        raise ValueError(f"walk coin bias must lie in [1/2, 1], got {h}")
    y = 1.0 - q
    if h == 1.0:
        tails = y
    else:
        tails = (1.0 - math.sqrt(max(0.0, 1.0 - 4.0 * h * (1.0 - h) * y))) / (2.0 * (1.0 - h))
    return 1.0 - tails


def noisy_doubling_bias(p: float, confusion) -> float:
    """Exact doubling-coin bias when every Bell sample passes through ``confusion``.

    Accounts for both the shifted conditional coin and the biased walk coin.
    """
    read = apply_confusion(bell_distribution(p).as_array(), confusion)
    fair = read[0] + read[3]
    q = read[1] / (read[1] + read[2])
    return 1.0 - sqrt_coin_bias(q, fair)
