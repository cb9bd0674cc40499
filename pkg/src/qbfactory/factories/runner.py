"""Batch driver: ``n`` coins of one protocol from one seed."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from qbfactory.analysis import BiasEstimate, estimate_from_counts
from qbfactory.factories.ledger import CapExceeded, CoinRecord, FactoryConfig, TossLedger
from qbfactory.factories.protocols import (
    DEFAULT_CONFIG,
    ROLE_CONDITIONAL,
    ROLE_FAIR,
    Batch,
    DoublingPipeline,
    bell_fair_batch,
    conditional_batch,
    single_qubit_batch,
    sqrt_coin,
    von_neumann_batch,
)
from qbfactory.factories.sources import (
    BellConditionalSource,
    BellFairSource,
    BiasedCoinSource,
    ShotTape,
)
from qbfactory.noise import ReadoutConfusion
from qbfactory.quantum import BellOutcome
from qbfactory.rng import RngStream

KINDS = ("vonneumann", "fair1q", "fairbell", "frown", "sqdiff", "sqrt", "double")
BELL_KINDS = ("fairbell", "frown", "sqdiff", "double")
CAP_POLICIES = ("stop", "skip")


@dataclass(frozen=True)
class TruncationEvent:
    """A capped attempt abandoned before output number ``index``."""

    index: int
    kind: str
    limit: int
    consumed: TossLedger
    survival: float | None


class RecordView(Sequence):
    """Lazy sequence of :class:`CoinRecord` over a run's cost arrays."""

    def __init__(self, run: FactoryRun):
        self._run = run
        self._cum = np.cumsum(np.stack([run.quoins, run.fair, run.inputs]), axis=1)

    def __len__(self) -> int:
        return len(self._run.bits)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(i)
        r = self._run
        cost = TossLedger(int(r.quoins[i]), int(r.fair[i]), int(r.inputs[i]), 1)
        q, f, x = (int(v) for v in self._cum[:, i])
        return CoinRecord(int(r.bits[i]), TossLedger(q, f, x, i + 1), cost)


@dataclass
class FactoryRun:
    kind: str
    params: dict
    bits: np.ndarray
    quoins: np.ndarray
    fair: np.ndarray
    inputs: np.ndarray
    truncations: list[TruncationEvent] = field(default_factory=list)
    error: CapExceeded | None = None

    @property
    def n(self) -> int:
        return len(self.bits)

    @property
    def records(self) -> RecordView:
        return RecordView(self)

    @property
    def ledger(self) -> TossLedger:
        """Aggregate over produced coins; abandoned attempts are in ``truncations``."""
        return TossLedger(int(self.quoins.sum()), int(self.fair.sum()), int(self.inputs.sum()), self.n)

    @property
    def truncated_ledger(self) -> TossLedger:
        total = TossLedger()
        for event in self.truncations:
            total.absorb(event.consumed)
        return total

    def estimate(self) -> BiasEstimate:
        return estimate_from_counts(int(self.bits.sum()), self.n)

    def cost_stats(self, column: str = "quoins") -> dict:
        values = getattr(self, column)
        if not len(values):
            return {"mean": float("nan"), "median": float("nan"), "max": 0}
        return {"mean": float(values.mean()), "median": float(np.median(values)), "max": int(values.max())}


def _concat(batches: list[Batch]) -> Batch:
    if not batches:
        return Batch.empty()
    return Batch(*(np.concatenate([getattr(b, name) for b in batches])
                   for name in ("bits", "quoins", "fair", "inputs")))


def _event(index: int, exc: CapExceeded) -> TruncationEvent:
    return TruncationEvent(index, exc.kind, exc.limit, exc.consumed, exc.survival)


def _run_batches(step, n: int, on_cap: str):
    batches, events, error = [], [], None
    produced = 0
    while produced < n:
        batch = step(n - produced)
        batches.append(batch)
        produced += len(batch.bits)
        if batch.failure is not None:
            events.append(_event(produced, batch.failure))
            if on_cap == "stop":
                error = batch.failure
                break
    return _concat(batches), events, error


def _run_scalar(make, n: int, on_cap: str):
    bits, costs = [], []
    events, error = [], None
    ledger = TossLedger()
    while len(bits) < n:
        try:
            record = make(ledger)
        except CapExceeded as exc:
            events.append(_event(len(bits), exc))
            if on_cap == "stop":
                error = exc
                break
            continue
        bits.append(record.bit)
        c = record.cost
        costs.append((c.quoins_consumed, c.fair_coins_consumed, c.input_coins_consumed))
    arr = np.array(costs, dtype=np.int64).reshape(-1, 3)
    batch = Batch(np.array(bits, dtype=np.uint8), arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy())
    return batch, events, error


def run_factory(kind: str, n: int, seed: int, *, p: float | None = None, q: float | None = None,
                config: FactoryConfig = DEFAULT_CONFIG, noise: ReadoutConfusion | None = None,
                shared: bool = False, on_cap: str = "stop", task: int = 0) -> FactoryRun:
    """Produce ``n`` coins of protocol ``kind``.

    Randomness comes from ``RngStream.for_task(seed, task)``. When a capped
    loop gives up, ``on_cap="stop"`` returns the coins made so far with
    ``error`` set; ``"skip"`` logs the event and keeps going until ``n`` coins
    exist. Either way the abandoned attempt is listed in ``truncations`` and
    not in the per-coin costs.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown protocol {kind!r}; choose from {', '.join(KINDS)}")
    if on_cap not in CAP_POLICIES:
        raise ValueError(f"on_cap must be one of {CAP_POLICIES}")
    if n < 1:
        raise ValueError("n must be at least 1")
    if kind == "sqrt":
        if q is None:
            raise ValueError("sqrt needs q")
    elif p is None:
        raise ValueError(f"{kind} needs p")
    if noise is not None and not noise.is_ideal and kind not in BELL_KINDS:
        raise ValueError(f"readout noise applies to Bell-measurement protocols only, not {kind}")

    rng = RngStream.for_task(seed, task)
    if kind == "vonneumann":
        source = BiasedCoinSource(p, rng)
        batch, events, error = _run_batches(lambda k: von_neumann_batch(source, k, config), n, on_cap)
    elif kind == "fair1q":
        batch, events, error = single_qubit_batch(p, rng, n), [], None
    elif kind == "fairbell":
        batch, events, error = bell_fair_batch(BellFairSource(ShotTape(p, rng, noise)), n), [], None
    elif kind in ("frown", "sqdiff"):
        heads = BellOutcome.PSI_PLUS if kind == "frown" else BellOutcome.PHI_MINUS
        source = BellConditionalSource(ShotTape(p, rng, noise), heads, config.max_rejections)
        batch, events, error = _run_batches(lambda k: conditional_batch(source, k), n, on_cap)
    elif kind == "sqrt":
        q_source = BiasedCoinSource(q, rng.substream(ROLE_CONDITIONAL))
        fair_source = BiasedCoinSource(0.5, rng.substream(ROLE_FAIR))
        batch, events, error = _run_scalar(
            lambda ledger: sqrt_coin(q_source, fair_source, config, ledger), n, on_cap)
    else:
        pipeline = DoublingPipeline(p, rng, config, noise, shared)
        batch, events, error = _run_scalar(pipeline.coin, n, on_cap)

    params = {"p": p, "q": q, "n": n, "seed": seed, "task": task, "shared": shared, "on_cap": on_cap,
              "max_walk_steps": config.max_walk_steps, "max_rejections": config.max_rejections,
              "noise": None if noise is None else list(noise.as_tuple())}
    return FactoryRun(kind, params, batch.bits, batch.quoins, batch.fair, batch.inputs, events, error)
