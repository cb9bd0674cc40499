"""Readout misassignment on two-qubit measurement records.

Records are bit pairs ``(r1, r2)`` written as in the readout string ``"r1r2"``
and indexed ``2*r1 + r2`` in every 4-vector. The first character is governed
by ``a0 = P(0|0)`` and ``a1 = P(1|1)``, the second by ``b0`` and ``b1``.
Matrices follow the ``P_read = M @ P_true`` convention: row = read outcome,
column = true outcome.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TOL = 1e-12

# Reference pair quoted alongside the ballpark fidelities below. Under the
# matrix convention above those fidelities give a different P'(01); both are
# reported, neither is forced.
REFERENCE_P01 = 0.0075
REFERENCE_CEILING = 0.8775

IDEAL_STATE_AT_HALF = np.array([0.5, 0.0, 0.5, 0.0])


@dataclass(frozen=True)
class ReadoutConfusion:
    """Per-qubit correct-assignment probabilities."""

    a0: float = 1.0
    a1: float = 1.0
    b0: float = 1.0
    b1: float = 1.0

    def __post_init__(self):
        for name in ("a0", "a1", "b0", "b1"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {value!r}")

    @classmethod
    def ideal(cls) -> ReadoutConfusion:
        return cls(1.0, 1.0, 1.0, 1.0)

    @classmethod
    def ballpark(cls) -> ReadoutConfusion:
        """Fidelities matching a ~1e-2 median readout error."""
        return cls(a0=0.995, a1=0.985, b0=0.995, b1=0.985)

    @classmethod
    def parse(cls, text: str) -> ReadoutConfusion:
        """Parse ``"a0,a1,b0,b1"``; the word ``default`` selects :meth:`ballpark`."""
        if text.strip().lower() == "default":
            return cls.ballpark()
        parts = [s for s in text.split(",")]
        if len(parts) != 4:
            raise ValueError(f"expected four comma-separated values a0,a1,b0,b1, got {text!r}")
        try:
            values = [float(s) for s in parts]
        except ValueError:
            raise ValueError(f"noise values must be numbers, got {text!r}") from None
        return cls(*values)

    @property
    def is_ideal(self) -> bool:
        return self.a0 == self.a1 == self.b0 == self.b1 == 1.0

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.a0, self.a1, self.b0, self.b1)

    def matrix(self) -> np.ndarray:
        return confusion_matrix(self)

    def flip_tables(self) -> tuple[np.ndarray, np.ndarray]:
        """Flip probabilities indexed by the true bit, for each character."""
        first = np.array([1.0 - self.a0, 1.0 - self.a1])
        second = np.array([1.0 - self.b0, 1.0 - self.b1])
        return first, second


def qubit_assignment(p00: float, p11: float) -> np.ndarray:
    """Single-qubit assignment matrix ``[[P(0|0), P(0|1)], [P(1|0), P(1|1)]]``."""
    return np.array([[p00, 1.0 - p11], [1.0 - p00, p11]])


def confusion_matrix(c: ReadoutConfusion) -> np.ndarray:
    """Two-qubit assignment matrix for independent per-character misassignment.

    Entry ``[2*r1 + r2, 2*t1 + t2]`` is ``P(r1|t1) * P(r2|t2)``.
    """
    first = qubit_assignment(c.a0, c.a1)
    second = qubit_assignment(c.b0, c.b1)
    m = np.empty((4, 4))
    for r1 in (0, 1):
        for r2 in (0, 1):
            for t1 in (0, 1):
                for t2 in (0, 1):
                    m[2 * r1 + r2, 2 * t1 + t2] = first[r1, t1] * second[r2, t2]
    return m


def _check_distribution(dist) -> np.ndarray:
    p = np.asarray(dist, dtype=float)
    if p.shape != (4,):
        raise ValueError(f"distribution must have 4 entries, got shape {p.shape}")
    if np.any(p < -TOL) or np.any(p > 1 + TOL) or abs(p.sum() - 1.0) > TOL:
        raise ValueError(f"not a probability vector: {p.tolist()}")
    return p


def apply_confusion(dist, c: ReadoutConfusion) -> np.ndarray:
    """Read-out distribution ``M @ dist`` for a true distribution ``dist``."""
    return confusion_matrix(c) @ _check_distribution(dist)


def misassign_codes(codes: np.ndarray, c: ReadoutConfusion, u: np.ndarray) -> np.ndarray:
    """Apply misassignment to an array of record codes.

    ``u`` has shape ``(len(codes), 2)``: one uniform per character, first
    character first.
    """
    first, second = c.flip_tables()
    b1 = codes >> 1
    b2 = codes & 1
    r1 = b1 ^ (u[:, 0] < first[b1])
    r2 = b2 ^ (u[:, 1] < second[b2])
    return (2 * r1 + r2).astype(np.uint8)


def sample_misassigned(bits: tuple[int, int], c: ReadoutConfusion, rng) -> tuple[int, int]:
    """Read one true record through the noisy readout; draws two uniforms."""
    b1, b2 = bits
    if b1 not in (0, 1) or b2 not in (0, 1):
        raise ValueError(f"bits must be 0 or 1, got {bits!r}")
    first, second = c.flip_tables()
    r1 = b1 ^ int(rng.random() < first[b1])
    r2 = b2 ^ int(rng.random() < second[b2])
    return r1, r2


def ceiling_from_p01(p01: float) -> float:
    """Doubling ceiling when ``P'(01)`` is read as ``(1 - 2p_eff)^2 / 2``."""
    if 2.0 * p01 > 1.0 + TOL or p01 < 0.0:
        raise ValueError(f"P'(01) = {p01} cannot equal (1 - 2p)^2 / 2")
    return 1.0 - math.sqrt(max(2.0 * p01, 0.0))


@dataclass(frozen=True)
class CeilingReport:
    confusion: ReadoutConfusion
    matrix: np.ndarray
    read_distribution: np.ndarray
    p01: float
    ceiling: float
    reference_p01: float = REFERENCE_P01
    reference_ceiling: float = REFERENCE_CEILING


def ceiling_report(c: ReadoutConfusion) -> CeilingReport:
    m = confusion_matrix(c)
    read = m @ IDEAL_STATE_AT_HALF
    p01 = float(read[1])
    return CeilingReport(c, m, read, p01, ceiling_from_p01(p01))


def doubling_ceiling(c: ReadoutConfusion) -> float:
    """Largest doubling-coin bias the noisy readout allows at p = 1/2."""
    return ceiling_report(c).ceiling
