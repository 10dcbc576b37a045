"""Noisy TDoA measurement generators.

Quantum-assisted ranging measures the difference in one shot, so a single
relative error multiplies the whole difference.  Classical ranging measures
the two legs separately and each leg carries its own relative error.

Noise draws are keyed by ``(seed, trial)``; within a trial the standard
normal for row ``k`` and leg ``v`` is always the same number, so results do
not depend on evaluation order and both modes see common random numbers.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import AnchorSet, RangingScenario, ValidationError, as_point

_NOISE_STREAM = 1


class NoiseMode(str, enum.Enum):
    QUANTUM = "quantum"
    CLASSICAL = "classical"

    @classmethod
    def parse(cls, value) -> "NoiseMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValidationError(f"unknown noise mode {value!r}; expected 'quantum' or 'classical'") from None


@dataclass(frozen=True)
class NoiseSpec:
    eta: float
    mode: NoiseMode
    seed: int
    trial: int = 0

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValidationError(f"eta must lie in [0, 1], got {self.eta}")
        if self.seed < 0 or self.trial < 0:
            raise ValidationError("seed and trial index must be non-negative")
        object.__setattr__(self, "mode", NoiseMode.parse(self.mode))


@dataclass(frozen=True, eq=False)
class MeasurementBatch:
    values: np.ndarray
    truth: np.ndarray
    spec: NoiseSpec

    def __post_init__(self):
        if np.shape(self.values) != np.shape(self.truth):
            raise ValidationError("values and truth must have the same length")

    @property
    def m(self) -> int:
        return len(self.values)


def standard_normals(seed: int, trial: int, m: int) -> np.ndarray:
    """``(m, 2)`` array of N(0, 1) draws; entry ``[k, v]`` belongs to row k, leg v."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, _NOISE_STREAM, trial]))
    return rng.standard_normal((m, 2))


def _legs(x, anchors: AnchorSet, scenario: RangingScenario):
    if not scenario.is_tdoa:
        raise ValidationError("noise models are defined for TDoA rows only")
    if scenario.n != anchors.n:
        raise ValidationError(f"scenario addresses {scenario.n} anchors but {anchors.n} are given")
    plus, minus = scenario.pair_indices()
    dist = anchors.distances(as_point(x, anchors.dim))
    return dist[plus], dist[minus]


def measure_quantum(x, anchors: AnchorSet, scenario: RangingScenario, spec: NoiseSpec) -> MeasurementBatch:
    if spec.mode is not NoiseMode.QUANTUM:
        raise ValidationError(f"measure_quantum called with mode {spec.mode.value}")
    l1, l2 = _legs(x, anchors, scenario)
    truth = l1 - l2
    if spec.eta == 0:
        return MeasurementBatch(truth.copy(), truth, spec)
    eps = standard_normals(spec.seed, spec.trial, scenario.m)[:, 0]
    return MeasurementBatch(truth * (1.0 + spec.eta * eps), truth, spec)


def measure_classical(x, anchors: AnchorSet, scenario: RangingScenario, spec: NoiseSpec) -> MeasurementBatch:
    if spec.mode is not NoiseMode.CLASSICAL:
        raise ValidationError(f"measure_classical called with mode {spec.mode.value}")
    l1, l2 = _legs(x, anchors, scenario)
    truth = l1 - l2
    if spec.eta == 0:
        return MeasurementBatch(truth.copy(), truth, spec)
    eps = standard_normals(spec.seed, spec.trial, scenario.m)
    values = l1 * (1.0 + spec.eta * eps[:, 0]) - l2 * (1.0 + spec.eta * eps[:, 1])
    return MeasurementBatch(values, truth, spec)


def measure(x, anchors: AnchorSet, scenario: RangingScenario, spec: NoiseSpec) -> MeasurementBatch:
    """Dispatch on ``spec.mode``."""
    if spec.mode is NoiseMode.QUANTUM:
        return measure_quantum(x, anchors, scenario, spec)
    return measure_classical(x, anchors, scenario, spec)
