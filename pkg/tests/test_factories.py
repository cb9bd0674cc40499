import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qbfactory.analysis import walk_survival
from qbfactory.factories import (
    BellConditionalSource,
    BellFairSource,
    BiasedCoinSource,
    CapExceeded,
    CoinRecord,
    DoublingPipeline,
    FactoryConfig,
    ReplaySource,
    ShotTape,
    SourceExhausted,
    TossLedger,
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
from qbfactory.noise import ReadoutConfusion
from qbfactory.quantum import BellOutcome
from qbfactory.rng import RngStream


def within_5_sigma(bits, ref):
    n = len(bits)
    return abs(np.mean(bits) - ref) <= 5 * math.sqrt(ref * (1 - ref) / n) + 1e-12


def scalar_run(make, n):
    """Scalar coins until n are made or a cap fires; returns (bits, quoin costs, error)."""
    ledger = TossLedger()
    bits, quoins = [], []
    try:
        for _ in range(n):
            rec = make(ledger)
            bits.append(rec.bit)
            quoins.append(rec.cost.quoins_consumed)
    except CapExceeded as exc:
        return bits, quoins, exc
    return bits, quoins, None


# -- ledger -----------------------------------------------------------------

def test_ledger_arithmetic():
    a = TossLedger(1, 2, 3, 4)
    b = TossLedger(10, 20, 30, 40)
    assert (a + b) - a == b
    a.absorb(b)
    assert a.as_dict() == {"quoins_consumed": 11, "fair_coins_consumed": 22,
                           "input_coins_consumed": 33, "outputs_produced": 44}
    snap = a.snapshot()
    a.charge(quoins=1)
    assert snap.quoins_consumed == 11
    with pytest.raises(ValueError):
        a.charge(quoins=-1)


def test_config_validation():
    with pytest.raises(ValueError):
        FactoryConfig(max_walk_steps=0)
    with pytest.raises(ValueError):
        FactoryConfig(max_rejections=0)


# -- von Neumann ---------------------------------------------------------------

def test_von_neumann_examples():
    rec = von_neumann(ReplaySource([1, 0]))
    assert rec.bit == 0 and rec.cost.input_coins_consumed == 2
    rec = von_neumann(ReplaySource([1, 1, 0, 1]))
    assert rec.bit == 1 and rec.cost.input_coins_consumed == 4


def test_von_neumann_cap():
    with pytest.raises(CapExceeded) as info:
        von_neumann(ReplaySource([1] * 10), FactoryConfig(max_rejections=3))
    assert info.value.consumed.input_coins_consumed == 6


@pytest.mark.parametrize("p,cap", [(0.3, 1_000_000), (0.95, 3)])
def test_von_neumann_batch_equals_scalar(p, cap):
    config = FactoryConfig(max_rejections=cap)
    scalar_src = BiasedCoinSource(p, RngStream(14), block=97)
    bits, costs = [], []
    failure = None
    for _ in range(3000):
        try:
            rec = von_neumann(scalar_src, config)
        except CapExceeded as exc:
            failure = exc
            break
        bits.append(rec.bit)
        costs.append(rec.cost.input_coins_consumed)
    batch_src = BiasedCoinSource(p, RngStream(14), block=97)
    batch = von_neumann_batch(batch_src, 3000, config)
    assert batch.bits.tolist() == bits
    assert batch.inputs.tolist() == costs
    assert (batch.failure is None) == (failure is None)
    assert batch_src.bits_drawn == scalar_src.bits_drawn
    if failure is not None:
        assert batch.failure.consumed.input_coins_consumed == failure.consumed.input_coins_consumed


def test_von_neumann_batch_on_recorded_stream():
    batch = von_neumann_batch(ReplaySource([1, 1, 0, 1, 1, 0, 0]), 2)
    assert batch.bits.tolist() == [1, 0]
    assert batch.inputs.tolist() == [4, 2]
    with pytest.raises(SourceExhausted):
        von_neumann_batch(ReplaySource([1, 1, 0]), 1)


def test_walk_on_exhausted_source():
    with pytest.raises(SourceExhausted):
        walk_to_excess(ReplaySource([0, 0, 1]), 100)


def test_von_neumann_batch_requires_classical_source():
    with pytest.raises(TypeError):
        von_neumann_batch(BellFairSource(ShotTape(0.3, RngStream(0))), 10)


def test_von_neumann_fair_source_costs_four():
    batch = von_neumann_batch(BiasedCoinSource(0.5, RngStream(2)), 100_000)
    assert abs(batch.inputs.mean() / 4 - 1) < 0.05
    assert within_5_sigma(batch.bits, 0.5)


# -- single-qubit and Bell fair coins ------------------------------------------

@pytest.mark.parametrize("p", [0.0, 0.7, 1.0])
def test_single_qubit_coin_is_fair(p):
    batch = single_qubit_batch(p, RngStream(31), 100_000)
    assert within_5_sigma(batch.bits, 0.5)
    assert np.all(batch.quoins == 2)


@pytest.mark.parametrize("sign", [+1, -1])
def test_single_qubit_batch_equals_scalar(sign):
    rng = RngStream(40)
    scalar = [single_qubit_fair_coin(0.3, rng, sign=sign).bit for _ in range(2000)]
    assert single_qubit_batch(0.3, RngStream(40), 2000, sign).bits.tolist() == scalar
    assert single_qubit_fair_coin(0.3, RngStream(0)).cost.quoins_consumed == 2


@pytest.mark.parametrize("noise", [None, ReadoutConfusion.ballpark()])
def test_bell_fair_batch_equals_scalar(noise):
    rng = RngStream(41)
    scalar = [bell_fair_coin(0.3, rng, noise).bit for _ in range(2000)]
    batch = bell_fair_batch(BellFairSource(ShotTape(0.3, RngStream(41), noise, block=128)), 2000)
    assert batch.bits.tolist() == scalar


def test_bell_fair_coin_costs_and_bias():
    ledger = TossLedger()
    rng = RngStream(3)
    for p in (0.0, 0.3, 1.0):
        assert bell_fair_coin(p, rng, ledger=ledger).cost.quoins_consumed == 2
    assert ledger.quoins_consumed == 6 and ledger.outputs_produced == 3
    batch = bell_fair_batch(BellFairSource(ShotTape(0.3, RngStream(4))), 200_000)
    assert within_5_sigma(batch.bits, 0.5)


# -- conditional coins ---------------------------------------------------------

@pytest.mark.parametrize("coin,heads", [(frown_coin, BellOutcome.PSI_PLUS), (squared_diff_coin, BellOutcome.PHI_MINUS)])
@pytest.mark.parametrize("noise", [None, ReadoutConfusion(0.9, 0.8, 0.85, 0.95)])
def test_conditional_batch_equals_scalar(coin, heads, noise):
    rng = RngStream(50)
    records = [coin(0.2, rng, noise=noise) for _ in range(1500)]
    src = BellConditionalSource(ShotTape(0.2, RngStream(50), noise, block=256), heads)
    batch = conditional_batch(src, 1500)
    assert batch.bits.tolist() == [r.bit for r in records]
    assert batch.quoins.tolist() == [r.cost.quoins_consumed for r in records]


def test_conditional_cap_equivalence():
    config = FactoryConfig(max_rejections=4)
    rng = RngStream(51)
    bits, quoins, exc = scalar_run(lambda ledger: frown_coin(0.0, rng, config, ledger=ledger), 5000)
    assert exc is not None
    src = BellConditionalSource(ShotTape(0.0, RngStream(51), block=64), BellOutcome.PSI_PLUS, 4)
    batch = conditional_batch(src, 5000)
    assert batch.bits.tolist() == bits
    assert batch.quoins.tolist() == quoins
    assert batch.failure.consumed.quoins_consumed == exc.consumed.quoins_consumed == 8


def test_conditional_coin_examples():
    rng = RngStream(52)
    assert all(frown_coin(0.5, rng).bit == 1 for _ in range(500))
    assert all(frown_coin(0.0, rng).bit == 0 for _ in range(500))
    assert all(squared_diff_coin(0.5, rng).bit == 0 for _ in range(500))
    assert all(squared_diff_coin(0.0, rng).bit == 1 for _ in range(500))


def test_frown_bias_and_cost_at_quarter():
    src = BellConditionalSource(ShotTape(0.25, RngStream(53)), BellOutcome.PSI_PLUS)
    batch = conditional_batch(src, 100_000)
    assert within_5_sigma(batch.bits, 0.75)
    assert abs(batch.quoins.mean() / 4 - 1) < 0.05


def test_squared_diff_bias():
    src = BellConditionalSource(ShotTape(0.3, RngStream(54)), BellOutcome.PHI_MINUS)
    assert within_5_sigma(conditional_batch(src, 100_000).bits, 0.16)


# -- square root ----------------------------------------------------------------

def first_excess_loop(bits):
    height = 0
    for t, b in enumerate(bits, start=1):
        height += 1 if b else -1
        if height > 0:
            return t
    return None


@given(st.lists(st.integers(0, 1), max_size=200))
def test_walk_matches_loop(prefix):
    bits = prefix + [1] * (len(prefix) + 1)
    assert walk_to_excess(ReplaySource(bits), 10_000) == first_excess_loop(bits)


def test_walk_cap_reports_survival():
    with pytest.raises(CapExceeded) as info:
        walk_to_excess(ReplaySource([0] * 100), 10)
    assert info.value.survival == pytest.approx(walk_survival(10))


def test_sqrt_coin_replay_examples():
    rec = sqrt_coin(ReplaySource([0]), ReplaySource([1]))
    assert rec.bit == 0
    assert (rec.cost.fair_coins_consumed, rec.cost.input_coins_consumed) == (1, 1)
    rec = sqrt_coin(ReplaySource([0, 1]), ReplaySource([0, 1, 1]))
    assert rec.bit == 1
    assert (rec.cost.fair_coins_consumed, rec.cost.input_coins_consumed) == (3, 2)


def test_sqrt_coin_cap_charges_the_attempt():
    with pytest.raises(CapExceeded) as info:
        sqrt_coin(ReplaySource([1]), ReplaySource([0] * 50), FactoryConfig(max_walk_steps=20))
    assert info.value.consumed.fair_coins_consumed == 20
    assert info.value.consumed.input_coins_consumed == 0


@pytest.mark.parametrize("q,expected", [(1.0, 1), (0.0, 0)])
def test_sqrt_coin_degenerate_inputs(q, expected):
    qs, fs = BiasedCoinSource(q, RngStream(1)), BiasedCoinSource(0.5, RngStream(2))
    assert all(sqrt_coin(qs, fs).bit == expected for _ in range(300))


def test_sqrt_coin_quarter():
    qs, fs = BiasedCoinSource(0.25, RngStream(60)), BiasedCoinSource(0.5, RngStream(61))
    config = FactoryConfig(max_walk_steps=100_000)
    bits = []
    while len(bits) < 20_000:
        try:
            bits.append(sqrt_coin(qs, fs, config).bit)
        except CapExceeded:
            continue
    assert within_5_sigma(bits, 0.5)


# -- doubling ------------------------------------------------------------------

def test_doubling_endpoints():
    for p, expected in ((0.0, 0), (1.0, 0), (0.5, 1)):
        pipe = DoublingPipeline(p, RngStream(70), FactoryConfig(max_walk_steps=100_000))
        bits = []
        while len(bits) < 300:
            try:
                bits.append(pipe.coin().bit)
            except CapExceeded:
                continue
        assert set(bits) == {expected}


def test_doubling_at_point_two():
    pipe = DoublingPipeline(0.2, RngStream(71))
    ledger = TossLedger()
    bits, costs = [], []
    while len(bits) < 50_000:
        try:
            rec = pipe.coin(ledger)
        except CapExceeded:
            continue
        bits.append(rec.bit)
        costs.append(rec.cost.quoins_consumed)
    assert within_5_sigma(bits, 0.4)
    assert np.isfinite(np.median(costs))
    assert ledger.quoins_consumed == sum(costs)


def test_doubling_cost_decomposition():
    pipe = DoublingPipeline(0.3, RngStream(72), FactoryConfig(max_walk_steps=10_000))
    ledger = TossLedger()
    prev = None
    abandoned = 0
    for _ in range(300):
        try:
            rec = pipe.coin(ledger)
        except CapExceeded as exc:
            abandoned += exc.consumed.quoins_consumed
            continue
        c = rec.cost
        conditional_quoins = c.quoins_consumed - 2 * c.fair_coins_consumed
        # every conditional coin needs at least one shot
        assert conditional_quoins >= 2 * c.input_coins_consumed
        assert conditional_quoins % 2 == 0
        if prev is not None:
            assert rec.ledger.quoins_consumed == prev.quoins_consumed + c.quoins_consumed
        prev = rec.ledger
    assert ledger.quoins_consumed + abandoned == pipe.fair.tape.quoins + pipe.conditional.tape.quoins


def test_shared_mode_meters_one_tape():
    pipe = DoublingPipeline(0.3, RngStream(73), FactoryConfig(max_walk_steps=10_000), shared=True)
    assert pipe.fair.tape is pipe.conditional.tape
    ledger = TossLedger()
    abandoned = 0
    for _ in range(200):
        try:
            pipe.coin(ledger)
        except CapExceeded as exc:
            abandoned += exc.consumed.quoins_consumed
    assert ledger.quoins_consumed + abandoned == pipe.fair.tape.quoins


def test_doubling_coin_function_is_deterministic():
    config = FactoryConfig(max_walk_steps=10_000)
    a = [doubling_coin(0.3, RngStream(5, 1), config) for _ in range(1)]
    b = [doubling_coin(0.3, RngStream(5, 1), config) for _ in range(1)]
    assert [r.bit for r in a] == [r.bit for r in b]
    assert isinstance(a[0], CoinRecord)
