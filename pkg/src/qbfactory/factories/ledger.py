"""Cost accounting shared by every coin protocol."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace


@dataclass
class TossLedger:
    """Running totals of what a protocol run has consumed and produced."""

    quoins_consumed: int = 0
    fair_coins_consumed: int = 0
    input_coins_consumed: int = 0
    outputs_produced: int = 0

    def charge(self, *, quoins: int = 0, fair: int = 0, inputs: int = 0, outputs: int = 0) -> None:
        if min(quoins, fair, inputs, outputs) < 0:
            raise ValueError("ledger counters only grow")
        self.quoins_consumed += int(quoins)
        self.fair_coins_consumed += int(fair)
        self.input_coins_consumed += int(inputs)
        self.outputs_produced += int(outputs)

    def absorb(self, other: TossLedger) -> None:
        self.charge(
            quoins=other.quoins_consumed,
            fair=other.fair_coins_consumed,
            inputs=other.input_coins_consumed,
            outputs=other.outputs_produced,
        )

    def snapshot(self) -> TossLedger:
        return replace(self)

    def __sub__(self, other: TossLedger) -> TossLedger:
        return TossLedger(*(getattr(self, f.name) - getattr(other, f.name) for f in fields(self)))

    def __add__(self, other: TossLedger) -> TossLedger:
        return TossLedger(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class FactoryConfig:
    """Caps on loops that halt with probability one but have no fixed bound."""

    max_walk_steps: int = 1_000_000
    max_rejections: int = 1_000_000

    def __post_init__(self):
        if self.max_walk_steps < 1 or self.max_rejections < 1:
            raise ValueError("caps must be at least 1")


@dataclass(frozen=True)
class CoinRecord:
    """One output coin.

    ``ledger`` is the running ledger right after this coin was produced and
    ``cost`` is what producing it consumed.
    """

    bit: int
    ledger: TossLedger
    cost: TossLedger

    def flipped(self) -> CoinRecord:
        return CoinRecord(1 - self.bit, self.ledger, self.cost)


class CapExceeded(RuntimeError):
    """A capped loop gave up before producing its coin.

    ``consumed`` holds what the abandoned attempt used up; for the fair-coin
    walk, ``survival`` is the probability of reaching the cap.
    """

    def __init__(self, kind: str, limit: int, consumed: TossLedger | None = None,
                 survival: float | None = None):
        self.kind = kind
        self.limit = limit
        self.consumed = consumed if consumed is not None else TossLedger()
        self.survival = survival
        msg = f"{kind} exceeded its cap of {limit}"
        if survival is not None:
            msg += f" (probability {survival:.3g} for a fair walk)"
        super().__init__(msg)


class SourceExhausted(RuntimeError):
    """A finite recorded stream ran out of bits."""
