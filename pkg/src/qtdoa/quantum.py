"""Two-branch phase model of quantum ranging.

A probe whose two branches pick up a relative phase ``theta`` is measured
with the projector onto the initial state.  Only the relative phase is
modelled; the global phase factor drops out of both outcome probabilities.

``theta = kappa * D`` where ``D`` is the signed combination of path lengths
and ``kappa = 2 (E1 - E0) / (hbar c)``.  Since ``cos^2(theta / 2)`` only fixes
``theta`` up to sign and a 2*pi period, decoding is valid for
``kappa * |D|`` in ``[0, pi]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ValidationError

HBAR = 1.054571817e-34
SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class PhaseModel:
    kappa: float = 1.0  # rad / m

    def __post_init__(self):
        if not (np.isfinite(self.kappa) and self.kappa > 0):
            raise ValidationError(f"kappa must be positive and finite, got {self.kappa}")

    @classmethod
    def from_energies(cls, e0: float, e1: float, hbar: float = HBAR, c: float = SPEED_OF_LIGHT):
        """Build the model from the two level energies (joules)."""
        return cls(2.0 * (e1 - e0) / (hbar * c))


@dataclass(frozen=True)
class ShotRecord:
    shots: int
    zeros: int

    def __post_init__(self):
        if self.shots < 1:
            raise ValidationError("shot count must be positive")
        if not 0 <= self.zeros <= self.shots:
            raise ValidationError(f"zeros={self.zeros} outside [0, {self.shots}]")


def phase_from_distance(distance: float, model: PhaseModel) -> float:
    return model.kappa * distance


def outcome_probability(theta):
    """Probabilities ``(p0, p1)`` of projecting back onto / away from the probe state."""
    half = np.asarray(theta, dtype=float) / 2.0
    p0 = np.cos(half) ** 2
    p1 = np.sin(half) ** 2
    if np.ndim(p0) == 0:
        return float(p0), float(p1)
    return p0, p1


def sample_shots(theta: float, shots: int, rng: np.random.Generator) -> ShotRecord:
    if shots < 1:
        raise ValidationError("shot count must be positive")
    p0, _ = outcome_probability(theta)
    return ShotRecord(int(shots), int(rng.binomial(shots, min(max(p0, 0.0), 1.0))))


def estimate_phase(record: ShotRecord) -> float:
    """Invert ``p0 = cos^2(theta / 2)`` on the principal branch ``[0, pi]``."""
    frac = record.zeros / record.shots
    return float(2.0 * np.arccos(np.sqrt(frac)))


def decode_distance(theta_hat: float, model: PhaseModel) -> float:
    return theta_hat / model.kappa
