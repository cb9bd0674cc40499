"""State-vector simulation of quoin preparation and the Bell-measurement circuit.

Two-qubit amplitudes are indexed ``i = 2*q1 + q0`` where qubit 0 is the
control of the CNOT and receives the Hadamard. Readout strings are written
``format(i, "02b")``, most-significant character first, which is the ordering
under which the measured string maps directly onto the Bell basis::

    00 -> Phi+    01 -> Phi-    10 -> Psi+    11 -> Psi-
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache

import numpy as np

from qbfactory.noise import ReadoutConfusion, misassign_codes, sample_misassigned

TOL = 1e-12


@dataclass(frozen=True)
class QuoinBias:
    """Bias ``p`` of a p-quoin."""

    p: float

    def __post_init__(self):
        p = float(self.p)
        if not (0.0 <= p <= 1.0):
            raise ValueError(f"quoin bias must lie in [0, 1], got {self.p!r}")
        object.__setattr__(self, "p", p)

    @property
    def theta(self) -> float:
        """Ry angle ``2 asin(sqrt(p))`` that prepares the quoin from |0>.

        Evaluated as an ``atan2`` so the angle stays accurate near p = 1,
        where ``asin`` is ill-conditioned.
        """
        return 2.0 * math.atan2(math.sqrt(self.p), math.sqrt(1.0 - self.p))


def as_bias(p) -> QuoinBias:
    return p if isinstance(p, QuoinBias) else QuoinBias(p)


def _check_norm(amps: np.ndarray) -> None:
    norm = float(np.sum(np.abs(amps) ** 2))
    if abs(norm - 1.0) > TOL:
        raise ValueError(f"state is not normalized (norm^2 = {norm!r})")


@dataclass(frozen=True, eq=False)
class OneQubitState:
    amp0: complex
    amp1: complex

    def __post_init__(self):
        _check_norm(self.amps)

    @property
    def amps(self) -> np.ndarray:
        return np.array([self.amp0, self.amp1], dtype=complex)

    @property
    def p1(self) -> float:
        return abs(self.amp1) ** 2

    def allclose(self, other: OneQubitState, atol: float = TOL) -> bool:
        return bool(np.allclose(self.amps, other.amps, atol=atol, rtol=0))


GROUND = OneQubitState(1.0, 0.0)
EXCITED = OneQubitState(0.0, 1.0)


@dataclass(frozen=True, eq=False)
class TwoQubitState:
    amps: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=complex).copy()
        if amps.shape != (4,):
            raise ValueError(f"two-qubit state needs 4 amplitudes, got shape {amps.shape}")
        _check_norm(amps)
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @classmethod
    def product(cls, q0: OneQubitState, q1: OneQubitState) -> TwoQubitState:
        return cls(np.kron(q1.amps, q0.amps))

    def probabilities(self) -> np.ndarray:
        """Computational-basis probabilities over ``00, 01, 10, 11``."""
        return np.abs(self.amps) ** 2


class BellOutcome(IntEnum):
    PHI_PLUS = 0
    PHI_MINUS = 1
    PSI_PLUS = 2
    PSI_MINUS = 3

    @property
    def bits(self) -> tuple[int, int]:
        return (self.value >> 1, self.value & 1)

    @property
    def symbol(self) -> str:
        return _SYMBOLS[self.value]


_SYMBOLS = ("Φ⁺", "Φ⁻", "Ψ⁺", "Ψ⁻")


@dataclass(frozen=True)
class OutcomeDistribution:
    """Probabilities of the four Bell outcomes, in :class:`BellOutcome` order."""

    probs: tuple[float, float, float, float]

    def __post_init__(self):
        probs = tuple(float(x) for x in self.probs)
        if len(probs) != 4:
            raise ValueError("need exactly four probabilities")
        if any(x < -TOL or x > 1 + TOL for x in probs) or abs(sum(probs) - 1.0) > TOL:
            raise ValueError(f"not a probability vector: {probs}")
        object.__setattr__(self, "probs", probs)

    def __getitem__(self, outcome: BellOutcome) -> float:
        return self.probs[int(outcome)]

    def as_array(self) -> np.ndarray:
        return np.array(self.probs)

    def union(self, *outcomes: BellOutcome) -> float:
        return sum(self.probs[int(o)] for o in set(outcomes))

    def conditional(self, outcome: BellOutcome, given: tuple[BellOutcome, ...]) -> float:
        denom = self.union(*given)
        if denom == 0.0:
            raise ZeroDivisionError("conditioning event has probability zero")
        return self.probs[int(outcome)] / denom if outcome in given else 0.0


def prepare_quoin(p) -> OneQubitState:
    p = as_bias(p).p
    return OneQubitState(math.sqrt(1.0 - p), math.sqrt(p))


def ry_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    return np.array([[c, -s], [s, c]], dtype=complex)


HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2.0)


def apply_ry(state: OneQubitState, theta: float) -> OneQubitState:
    a0, a1 = ry_matrix(theta) @ state.amps
    return OneQubitState(a0, a1)


def apply_single(state: TwoQubitState, gate: np.ndarray, qubit: int) -> TwoQubitState:
    """Apply a 2x2 gate to qubit 0 or 1."""
    grid = state.amps.reshape(2, 2)  # axes: (q1, q0)
    if qubit == 0:
        out = grid @ gate.T
    elif qubit == 1:
        out = gate @ grid
    else:
        raise ValueError(f"qubit must be 0 or 1, got {qubit}")
    return TwoQubitState(out.reshape(4))


def apply_hadamard(state: TwoQubitState, qubit: int = 0) -> TwoQubitState:
    return apply_single(state, HADAMARD, qubit)


def apply_cnot(state: TwoQubitState, control: int = 0, target: int = 1) -> TwoQubitState:
    if {control, target} != {0, 1}:
        raise ValueError("control and target must be the two distinct qubits 0 and 1")
    src = [i ^ (1 << target) if (i >> control) & 1 else i for i in range(4)]
    return TwoQubitState(state.amps[src])


def measure_z(state: OneQubitState, rng) -> tuple[int, OneQubitState]:
    """Projective Z measurement; draws one uniform."""
    bit = int(rng.random() < state.p1)
    return bit, (EXCITED if bit else GROUND)


def bell_circuit(p) -> TwoQubitState:
    """Ry(theta) on both qubits of |00>, CNOT 0->1, Hadamard on qubit 0."""
    quoin = apply_ry(GROUND, as_bias(p).theta)
    state = TwoQubitState.product(quoin, quoin)
    return apply_hadamard(apply_cnot(state, control=0, target=1), qubit=0)


def bell_distribution(p) -> OutcomeDistribution:
    """Closed-form Bell-basis probabilities of a quoin pair."""
    p = as_bias(p).p
    return OutcomeDistribution((0.5, (1.0 - 2.0 * p) ** 2 / 2.0, 2.0 * p * (1.0 - p), 0.0))


def circuit_distribution(p) -> OutcomeDistribution:
    """Bell-outcome probabilities read off the simulated circuit."""
    return OutcomeDistribution(tuple(bell_circuit(p).probabilities()))


def map_bits_to_bell(b1: int, b2: int) -> BellOutcome:
    if b1 not in (0, 1) or b2 not in (0, 1):
        raise ValueError(f"bits must be 0 or 1, got ({b1!r}, {b2!r})")
    return BellOutcome(2 * b1 + b2)


@lru_cache(maxsize=256)
def _outcome_cdf(p: float) -> np.ndarray:
    cdf = np.cumsum(bell_circuit(p).probabilities())
    cdf[-1] = 1.0
    cdf.setflags(write=False)
    return cdf


def sample_bell(p, rng, noise: ReadoutConfusion | None = None) -> BellOutcome:
    """One Bell measurement of a fresh quoin pair (two quoins).

    Draws one uniform for the true outcome and, when non-ideal ``noise`` is
    given, two more for the readout of each character.
    """
    cdf = _outcome_cdf(as_bias(p).p)
    code = int(np.searchsorted(cdf, rng.random(), side="right"))
    if noise is None or noise.is_ideal:
        return BellOutcome(code)
    r1, r2 = sample_misassigned((code >> 1, code & 1), noise, rng)
    return map_bits_to_bell(r1, r2)


def sample_bell_codes(p, rng, size: int, noise: ReadoutConfusion | None = None) -> np.ndarray:
    """``size`` outcome codes; consumes uniforms exactly as repeated :func:`sample_bell`."""
    cdf = _outcome_cdf(as_bias(p).p)
    if noise is None or noise.is_ideal:
        return np.searchsorted(cdf, rng.uniforms(size), side="right").astype(np.uint8)
    u = rng.uniforms((size, 3))
    codes = np.searchsorted(cdf, u[:, 0], side="right").astype(np.uint8)
    return misassign_codes(codes, noise, u[:, 1:])
