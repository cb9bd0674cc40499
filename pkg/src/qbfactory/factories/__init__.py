"""Coin-producing protocols, their sources, and the batch driver."""

from qbfactory.factories.ledger import CapExceeded, CoinRecord, FactoryConfig, SourceExhausted, TossLedger
from qbfactory.factories.protocols import (
    Batch,
    DoublingPipeline,
    bell_fair_batch,
    bell_fair_coin,
    conditional_batch,
    doubling_coin,
    frown_coin,
    single_qubit_batch,
    single_qubit_fair_coin,
    sqrt_coin,
    squared_diff_coin,
    von_neumann,
    von_neumann_batch,
    walk_to_excess,
)
from qbfactory.factories.runner import KINDS, FactoryRun, run_factory
from qbfactory.factories.sources import (
    BellConditionalSource,
    BellFairSource,
    BiasedCoinSource,
    CoinSource,
    ReplaySource,
    ShotTape,
)

__all__ = [
    "KINDS",
    "Batch",
    "BellConditionalSource",
    "BellFairSource",
    "BiasedCoinSource",
    "CapExceeded",
    "CoinRecord",
    "CoinSource",
    "DoublingPipeline",
    "FactoryConfig",
    "FactoryRun",
    "ReplaySource",
    "ShotTape",
    "SourceExhausted",
    "TossLedger",
    "bell_fair_batch",
    "bell_fair_coin",
    "conditional_batch",
    "doubling_coin",
    "frown_coin",
    "run_factory",
    "single_qubit_batch",
    "single_qubit_fair_coin",
    "sqrt_coin",
    "squared_diff_coin",
    "von_neumann",
    "von_neumann_batch",
    "walk_to_excess",
]
