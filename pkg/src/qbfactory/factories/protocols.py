"""Coin-producing protocols with exact cost accounting.

Each protocol has a scalar form returning one :class:`CoinRecord` and, where
throughput matters, a batch form that consumes randomness in exactly the same
order and therefore reproduces the scalar outputs bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from qbfactory.analysis import walk_survival
from qbfactory.factories.ledger import CapExceeded, CoinRecord, FactoryConfig, SourceExhausted, TossLedger
from qbfactory.factories.sources import (
    QUOINS_PER_SHOT,
    BellConditionalSource,
    BellFairSource,
    CoinSource,
    ShotTape,
    scan_accepts,
)
from qbfactory.noise import ReadoutConfusion
from qbfactory.quantum import EXCITED, GROUND, BellOutcome, apply_ry, as_bias, measure_z, sample_bell
from qbfactory.rng import RngStream

DEFAULT_CONFIG = FactoryConfig()

FAIR_HEADS = (BellOutcome.PHI_PLUS, BellOutcome.PSI_MINUS)
CONDITION = (BellOutcome.PHI_MINUS, BellOutcome.PSI_PLUS)

# substream roles inside one doubling pipeline
ROLE_FAIR = 1
ROLE_CONDITIONAL = 2


@dataclass
class Batch:
    """Outputs of a batch call plus what each output cost."""

    bits: np.ndarray
    quoins: np.ndarray
    fair: np.ndarray
    inputs: np.ndarray
    failure: CapExceeded | None = None

    @classmethod
    def empty(cls) -> Batch:
        z = np.empty(0, dtype=np.int64)
        return cls(np.empty(0, dtype=np.uint8), z, z.copy(), z.copy())


def _emit(bit: int, cost: TossLedger, ledger: TossLedger | None) -> CoinRecord:
    cost.outputs_produced = 1
    if ledger is None:
        ledger = TossLedger()
    ledger.absorb(cost)
    return CoinRecord(int(bit), ledger.snapshot(), cost)


def _meter(*sources: CoinSource) -> int:
    tapes = {id(s.tape): s.tape for s in sources if s.tape is not None}
    return sum(t.quoins for t in tapes.values())


# -- classical extraction -------------------------------------------------

def von_neumann(source: CoinSource, config: FactoryConfig = DEFAULT_CONFIG,
                ledger: TossLedger | None = None) -> CoinRecord:
    """Toss twice; on unequal tosses output the second, otherwise retry."""
    q0, n0 = _meter(source), source.bits_drawn
    matched = 0
    while True:
        first, second = (int(b) for b in source.draw(2))
        if first != second:
            cost = TossLedger(quoins_consumed=_meter(source) - q0,
                              input_coins_consumed=source.bits_drawn - n0)
            return _emit(second, cost, ledger)
        matched += 1
        if matched >= config.max_rejections:
            raise CapExceeded("von Neumann pairing", config.max_rejections,
                              TossLedger(quoins_consumed=_meter(source) - q0,
                                         input_coins_consumed=source.bits_drawn - n0))


def von_neumann_batch(source: CoinSource, n: int, config: FactoryConfig = DEFAULT_CONFIG) -> Batch:
    """``n`` von Neumann outputs from a classical ``source``, in vectorized chunks."""
    if source.tape is not None:
        raise TypeError("batch von Neumann extraction expects a classical source")
    cap = config.max_rejections
    bits, pairs = [], []
    pending = 0
    need = n
    failure = None
    while need > 0:
        raw = source.peek(2 * max(64, 4 * need))
        width = len(raw) // 2
        if width == 0:
            raise SourceExhausted("coin source ended")
        chunk = raw[:2 * width].reshape(-1, 2)
        ends, attempts, fail_end, pending_next = scan_accepts(chunk[:, 0] != chunk[:, 1], pending, cap, need)
        if ends.size:
            bits.append(chunk[ends - 1, 1].copy())
            pairs.append(attempts)
            need -= ends.size
        if fail_end is not None:
            source.draw(2 * fail_end)
            failure = CapExceeded("von Neumann pairing", cap,
                                  TossLedger(input_coins_consumed=2 * cap))
            break
        source.draw(2 * (int(ends[-1]) if need == 0 else width))
        pending = pending_next
    pairs_arr = np.concatenate(pairs) if pairs else np.empty(0, dtype=np.int64)
    out = Batch(
        np.concatenate(bits) if bits else np.empty(0, np.uint8),
        np.zeros(len(pairs_arr), dtype=np.int64),
        np.zeros(len(pairs_arr), dtype=np.int64),
        2 * pairs_arr.astype(np.int64),
        failure,
    )
    return out


# -- single-qubit fair coin -----------------------------------------------

HALF_TURN = math.pi / 2


def single_qubit_fair_coin(p, rng: RngStream, ledger: TossLedger | None = None,
                           sign: int = +1) -> CoinRecord:
    """Measure a quoin along z, rotate by Y(sign * pi/2), measure again.

    The second result is the output. Each of the two measurements is charged
    as one quoin.
    """
    state = apply_ry(GROUND, as_bias(p).theta)
    _, collapsed = measure_z(state, rng)
    bit, _ = measure_z(apply_ry(collapsed, sign * HALF_TURN), rng)
    return _emit(bit, TossLedger(quoins_consumed=2), ledger)


def single_qubit_batch(p, rng: RngStream, n: int, sign: int = +1) -> Batch:
    first_p1 = apply_ry(GROUND, as_bias(p).theta).p1
    second_p1 = np.array([apply_ry(s, sign * HALF_TURN).p1 for s in (GROUND, EXCITED)])
    u = rng.uniforms((n, 2))
    first = (u[:, 0] < first_p1).astype(np.intp)
    bits = (u[:, 1] < second_p1[first]).astype(np.uint8)
    two = np.full(n, 2, dtype=np.int64)
    return Batch(bits, two, np.zeros(n, np.int64), np.zeros(n, np.int64))


# -- Bell-measurement coins -------------------------------------------------

def bell_fair_coin(p, rng: RngStream, noise: ReadoutConfusion | None = None,
                   ledger: TossLedger | None = None) -> CoinRecord:
    """One Bell shot; heads iff Phi+ or Psi-."""
    outcome = sample_bell(p, rng, noise)
    return _emit(int(outcome in FAIR_HEADS), TossLedger(quoins_consumed=QUOINS_PER_SHOT), ledger)


def _conditional_coin(heads: BellOutcome, p, rng, config, noise, ledger) -> CoinRecord:
    discards = 0
    while True:
        outcome = sample_bell(p, rng, noise)
        if outcome in CONDITION:
            cost = TossLedger(quoins_consumed=QUOINS_PER_SHOT * (discards + 1))
            return _emit(int(outcome == heads), cost, ledger)
        discards += 1
        if discards >= config.max_rejections:
            raise CapExceeded("rejection loop", config.max_rejections,
                              TossLedger(quoins_consumed=QUOINS_PER_SHOT * discards))


def frown_coin(p, rng: RngStream, config: FactoryConfig = DEFAULT_CONFIG,
               noise: ReadoutConfusion | None = None, ledger: TossLedger | None = None) -> CoinRecord:
    """Heads iff Psi+ among shots landing in Phi- or Psi+; bias 4p(1-p)."""
    return _conditional_coin(BellOutcome.PSI_PLUS, p, rng, config, noise, ledger)


def squared_diff_coin(p, rng: RngStream, config: FactoryConfig = DEFAULT_CONFIG,
                      noise: ReadoutConfusion | None = None, ledger: TossLedger | None = None) -> CoinRecord:
    """Heads iff Phi- among shots landing in Phi- or Psi+; bias (1-2p)^2."""
    return _conditional_coin(BellOutcome.PHI_MINUS, p, rng, config, noise, ledger)


def bell_fair_batch(source: BellFairSource, n: int) -> Batch:
    bits = source.draw(n).copy()
    quoins = np.full(n, QUOINS_PER_SHOT, dtype=np.int64)
    zeros = np.zeros(n, dtype=np.int64)
    return Batch(bits, quoins, zeros, zeros.copy())


def conditional_batch(source: BellConditionalSource, n: int) -> Batch:
    before = source.tape.quoins
    bits, shots, failed = source.take(n)
    quoins = QUOINS_PER_SHOT * shots.astype(np.int64)
    failure = None
    if failed:
        spent = source.tape.quoins - before - int(quoins.sum())
        failure = CapExceeded("rejection loop", source.max_rejections, TossLedger(quoins_consumed=spent))
    zeros = np.zeros(len(bits), dtype=np.int64)
    return Batch(bits, quoins, zeros, zeros.copy(), failure)


# -- square root of a coin ------------------------------------------------

def walk_to_excess(fair: CoinSource, max_steps: int) -> int:
    """Flip ``fair`` until heads first outnumber tails; return the flip count."""
    height = 0
    used = 0
    chunk = 16
    while used < max_steps:
        steps = fair.peek(min(chunk, max_steps - used)).astype(np.int32) * 2 - 1
        k = len(steps)
        if k == 0:
            raise SourceExhausted("fair-coin source ended mid-walk")
        path = height + np.cumsum(steps)
        hit = int(np.argmax(path > 0))
        if path[hit] > 0:
            fair.draw(hit + 1)
            return used + hit + 1
        fair.draw(k)
        used += k
        height = int(path[-1])
        chunk = min(chunk * 4, 1 << 20)
    raise CapExceeded("fair-coin walk", max_steps, survival=walk_survival(max_steps))


def sqrt_coin(q_source: CoinSource, fair_source: CoinSource,
              config: FactoryConfig = DEFAULT_CONFIG, ledger: TossLedger | None = None) -> CoinRecord:
    """Square-root coin from a q-coin and fair coins.

    Walk with fair coins until heads first exceed tails, at flip 2n+1; then
    toss the q-coin n+1 times. Tails iff every q-toss is tails, so heads
    occurs with probability sqrt(q).
    """
    q0 = _meter(q_source, fair_source)
    f0, i0 = fair_source.bits_drawn, q_source.bits_drawn

    def spent() -> TossLedger:
        return TossLedger(quoins_consumed=_meter(q_source, fair_source) - q0,
                          fair_coins_consumed=fair_source.bits_drawn - f0,
                          input_coins_consumed=q_source.bits_drawn - i0)

    try:
        steps = walk_to_excess(fair_source, config.max_walk_steps)
        tosses = q_source.draw((steps - 1) // 2 + 1)
    except CapExceeded as exc:
        exc.consumed = spent()
        raise
    return _emit(int(tosses.any()), spent(), ledger)


# -- Bernoulli doubling -----------------------------------------------------

class DoublingPipeline:
    """Doubling coin f(p) = 2 min(p, 1-p) from Bell shots alone.

    The square-root construction takes its q-coins from the (1-2p)^2
    conditional coin and its walk coins from Bell fair coins; the output is
    then inverted. By default the two draw on independent shot tapes. With
    ``shared=True`` both read the same tape from the start, so every shot can
    feed the walk and the conditional coin at once; that couples them
    statistically and the output bias is no longer exact.
    """

    def __init__(self, p, rng: RngStream, config: FactoryConfig = DEFAULT_CONFIG,
                 noise: ReadoutConfusion | None = None, shared: bool = False):
        self.p = as_bias(p).p
        self.config = config
        self.shared = shared
        fair_tape = ShotTape(self.p, rng.substream(ROLE_FAIR), noise)
        q_tape = fair_tape if shared else ShotTape(self.p, rng.substream(ROLE_CONDITIONAL), noise)
        self.fair = BellFairSource(fair_tape)
        self.conditional = BellConditionalSource(q_tape, BellOutcome.PHI_MINUS, config.max_rejections)

    def coin(self, ledger: TossLedger | None = None) -> CoinRecord:
        return sqrt_coin(self.conditional, self.fair, self.config, ledger).flipped()


def doubling_coin(p, rng: RngStream, config: FactoryConfig = DEFAULT_CONFIG,
                  noise: ReadoutConfusion | None = None, ledger: TossLedger | None = None,
                  shared: bool = False) -> CoinRecord:
    """One doubling coin on fresh tapes spawned from ``rng``."""
    return DoublingPipeline(p, rng.spawn(), config, noise, shared).coin(ledger)
