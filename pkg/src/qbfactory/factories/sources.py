"""Pull-based coin sources.

A source hands out bits through ``peek`` (look ahead, consume nothing; may
return fewer bits at the end of a recorded stream) and ``draw`` (consume
exactly the requested number). ``draw`` is authoritative: it updates ``bits_drawn`` and,
for quantum sources, the quoin meter on the underlying :class:`ShotTape`.

Randomness is generated in fixed-size blocks, so the bit sequence a source
yields depends only on its stream, never on how reads are partitioned.
"""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

from qbfactory.factories.ledger import CapExceeded, SourceExhausted, TossLedger
from qbfactory.noise import ReadoutConfusion
from qbfactory.quantum import BellOutcome, as_bias, sample_bell_codes
from qbfactory.rng import RngStream

BLOCK = 1 << 16
QUOINS_PER_SHOT = 2

# heads iff Phi+ or Psi-
FAIR_LUT = np.array([1, 0, 0, 1], dtype=np.uint8)
# the conditional coins only keep Phi- and Psi+
ACCEPT_LUT = np.array([0, 1, 1, 0], dtype=bool)


class CoinSource(ABC):
    tape: ShotTape | None = None
    bits_drawn: int = 0

    @abstractmethod
    def peek(self, k: int) -> np.ndarray:
        """Next ``k`` bits without consuming them."""

    @abstractmethod
    def draw(self, k: int) -> np.ndarray:
        """Consume and return the next ``k`` bits."""

    def pull(self) -> int:
        return int(self.draw(1)[0])


class BufferedSource(CoinSource):
    """Base for sources whose bits are materialized block by block."""

    def __init__(self):
        self._buf = np.empty(0, dtype=np.uint8)
        self._pos = 0
        self.bits_drawn = 0

    @abstractmethod
    def _next_block(self) -> np.ndarray | None:
        """Return the next block of bits, or None when the stream has ended."""

    def _fill(self, k: int) -> int:
        """Buffer up to ``k`` bits; returns how many are available."""
        while len(self._buf) - self._pos < k:
            block = self._next_block()
            if block is None:
                break
            self._buf = np.concatenate((self._buf[self._pos:], block))
            self._pos = 0
        return min(k, len(self._buf) - self._pos)

    def peek(self, k: int) -> np.ndarray:
        """Up to ``k`` upcoming bits; fewer only when a finite stream ends."""
        k = self._fill(k)
        return self._buf[self._pos:self._pos + k]

    def draw(self, k: int) -> np.ndarray:
        if self._fill(k) < k:
            raise SourceExhausted(f"needed {k} bits, {len(self._buf) - self._pos} left")
        out = self._buf[self._pos:self._pos + k]
        self._pos += k
        self.bits_drawn += k
        return out


class BiasedCoinSource(BufferedSource):
    """Classical p-coin: bit is 1 iff a uniform falls below ``p``."""

    def __init__(self, p: float, rng: RngStream, block: int = BLOCK):
        super().__init__()
        self.p = as_bias(p).p
        self.rng = rng
        self.block = block

    def _next_block(self):
        return (self.rng.uniforms(self.block) < self.p).astype(np.uint8)


class ReplaySource(BufferedSource):
    """Replays a recorded bit sequence once."""

    def __init__(self, bits):
        super().__init__()
        arr = np.asarray(list(bits) if not isinstance(bits, np.ndarray) else bits, dtype=np.uint8)
        if np.any(arr > 1):
            raise ValueError("recorded bits must be 0 or 1")
        self._pending = arr

    def _next_block(self):
        block, self._pending = self._pending, None
        return block


class ShotTape:
    """Bell outcome codes for one quoin bias, shared by any number of readers.

    ``high_water`` is the furthest shot any reader has consumed; each shot
    costs two quoins however many readers look at it.
    """

    def __init__(self, p, rng: RngStream, noise: ReadoutConfusion | None = None, block: int = BLOCK):
        self.p = as_bias(p).p
        self.rng = rng
        self.noise = None if noise is None or noise.is_ideal else noise
        self.block = block
        self._codes = np.empty(0, dtype=np.uint8)
        self._base = 0
        self.high_water = 0
        self._readers: list[TapeReader] = []

    @property
    def quoins(self) -> int:
        return QUOINS_PER_SHOT * self.high_water

    def attach(self, reader: TapeReader) -> None:
        self._readers.append(reader)

    def codes(self, start: int, stop: int) -> np.ndarray:
        """Codes for absolute shot indices ``[start, stop)``."""
        if start < self._base:
            raise IndexError("shot already discarded from the tape")
        while self._base + len(self._codes) < stop:
            self._trim()
            fresh = sample_bell_codes(self.p, self.rng, self.block, self.noise)
            self._codes = np.concatenate((self._codes, fresh))
        return self._codes[start - self._base:stop - self._base]

    def commit(self, stop: int) -> None:
        self.high_water = max(self.high_water, stop)

    def _trim(self) -> None:
        if not self._readers:
            return
        keep_from = min(r.cursor for r in self._readers)
        drop = keep_from - self._base
        if drop >= 4 * self.block:
            self._codes = self._codes[drop:]
            self._base = keep_from


class TapeReader(CoinSource):
    def __init__(self, tape: ShotTape):
        self.tape = tape
        self.cursor = 0
        self.bits_drawn = 0
        tape.attach(self)


class BellFairSource(TapeReader):
    """One fair coin per Bell shot: heads iff Phi+ or Psi-."""

    def peek(self, k: int) -> np.ndarray:
        return FAIR_LUT[self.tape.codes(self.cursor, self.cursor + k)]

    def draw(self, k: int) -> np.ndarray:
        out = self.peek(k)
        self.cursor += k
        self.bits_drawn += k
        self.tape.commit(self.cursor)
        return out


def scan_accepts(accept: np.ndarray, pending: int, cap: int, need: int):
    """Locate completed attempts in a block of accept/reject flags.

    ``pending`` rejections were already spent on the current output before
    this block. Returns ``(ends, attempts, fail_end, pending)``: the exclusive
    block-relative end of each completed output (at most ``need``), the
    attempts each took, the block-relative end of a capped failure (or None),
    and the rejections carried into the next block.
    """
    pos = np.flatnonzero(accept)[:need]
    starts = np.empty_like(pos)
    if pos.size:
        starts[0] = -pending
        starts[1:] = pos[:-1] + 1
    discards = pos - starts
    bad = np.flatnonzero(discards >= cap)
    if bad.size:
        i = int(bad[0])
        return pos[:i] + 1, discards[:i] + 1, int(starts[i]) + cap, 0
    run_start = int(pos[-1]) + 1 if pos.size else -pending
    ends, attempts = pos + 1, discards + 1
    if pos.size < need and len(accept) - run_start >= cap:
        return ends, attempts, run_start + cap, 0
    carried = 0 if pos.size == need else len(accept) - run_start
    return ends, attempts, None, carried


class BellConditionalSource(TapeReader):
    """Coins from Bell shots conditioned on Phi- or Psi+.

    Shots in Phi+ or Psi- are discarded; an accepted shot is heads iff it
    equals ``heads``. ``heads=PSI_PLUS`` gives bias 4p(1-p), ``heads=PHI_MINUS``
    gives (1-2p)^2.
    """

    def __init__(self, tape: ShotTape, heads: BellOutcome, max_rejections: int = 1_000_000):
        if heads not in (BellOutcome.PHI_MINUS, BellOutcome.PSI_PLUS):
            raise ValueError("heads must be one of the accepted outcomes PHI_MINUS or PSI_PLUS")
        super().__init__(tape)
        self.heads = int(heads)
        self.max_rejections = max_rejections

    def _window(self, need: int) -> int:
        return max(64, 4 * need)

    def peek(self, k: int) -> np.ndarray:
        found: list[np.ndarray] = []
        total, scan = 0, self.cursor
        while total < k:
            width = self._window(k - total)
            codes = self.tape.codes(scan, scan + width)
            kept = codes[ACCEPT_LUT[codes]][:k - total]
            found.append(kept)
            total += len(kept)
            scan += width
        return (np.concatenate(found) == self.heads).astype(np.uint8) if found else np.empty(0, np.uint8)

    def take(self, k: int):
        """Consume up to ``k`` coins, stopping early at a capped attempt.

        Returns ``(bits, shots_per_bit, failed)``; when ``failed`` is true the
        abandoned attempt's shots have been consumed too.
        """
        bits: list[np.ndarray] = []
        shots: list[np.ndarray] = []
        need, scan, pending = k, self.cursor, 0
        failed = False
        while need > 0:
            width = self._window(need)
            codes = self.tape.codes(scan, scan + width)
            ends, attempts, fail_end, pending = scan_accepts(
                ACCEPT_LUT[codes], pending, self.max_rejections, need)
            if ends.size:
                bits.append((codes[ends - 1] == self.heads).astype(np.uint8))
                shots.append(attempts)
                need -= ends.size
                self.cursor = scan + int(ends[-1])
            if fail_end is not None:
                self.cursor = scan + fail_end
                failed = True
                break
            scan += width
        self.tape.commit(self.cursor)
        out = np.concatenate(bits) if bits else np.empty(0, np.uint8)
        cost = np.concatenate(shots) if shots else np.empty(0, np.int64)
        self.bits_drawn += len(out)
        return out, cost, failed

    def draw(self, k: int) -> np.ndarray:
        before = self.tape.quoins
        out, _, failed = self.take(k)
        if failed:
            raise CapExceeded(
                "rejection loop", self.max_rejections,
                TossLedger(quoins_consumed=self.tape.quoins - before))
        return out
