"""Anchor geometry, ranging scenarios and the incidence matrix.

Anchor indices are 1-based wherever a user sees them (configuration files,
``RangingRow``) and 0-based inside numpy code.  The conversion happens in
:meth:`RangingRow.zero_based` and nowhere else.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

MIN_ANCHOR_SEPARATION = 1e-9


class ValidationError(ValueError):
    """Raised when geometry or scenario data violates its invariants."""


def as_point(coords, dim: int | None = None) -> np.ndarray:
    """Return ``coords`` as a finite 1-D float array (optionally of length ``dim``)."""
    x = np.asarray(coords, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValidationError(f"point must be a vector with at least 2 coordinates, got shape {x.shape}")
    if dim is not None and x.size != dim:
        raise ValidationError(f"point has dimension {x.size}, expected {dim}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("point has non-finite coordinates")
    return x


@dataclass(frozen=True, eq=False)
class AnchorSet:
    """Ordered anchor positions, stored as an ``(n, d)`` array."""

    positions: np.ndarray

    def __post_init__(self):
        a = np.array(self.positions, dtype=float)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 2:
            raise ValidationError(f"anchors must be an (n, d) array with n >= 1, d >= 2; got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValidationError("anchor coordinates must be finite")
        if a.shape[0] > 1:
            diff = a[:, None, :] - a[None, :, :]
            dist = np.linalg.norm(diff, axis=-1)
            dist[np.diag_indices_from(dist)] = np.inf
            if dist.min() <= MIN_ANCHOR_SEPARATION:
                i, j = np.unravel_index(np.argmin(dist), dist.shape)
                raise ValidationError(f"anchors {i + 1} and {j + 1} coincide")
        a.setflags(write=False)
        object.__setattr__(self, "positions", a)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def __len__(self):
        return self.n

    def __getitem__(self, i):
        return self.positions[i]

    def distances(self, x) -> np.ndarray:
        """Euclidean distances ``||x - a_i||`` for every anchor."""
        x = as_point(x, self.dim)
        return np.linalg.norm(x - self.positions, axis=1)

    def span(self) -> float:
        """Largest pairwise anchor distance (0 for a single anchor)."""
        a = self.positions
        return float(np.max(np.linalg.norm(a[:, None, :] - a[None, :, :], axis=-1)))


@dataclass(frozen=True)
class RangingRow:
    """One ranging: 1-based anchor indices with a +1/-1 sign each."""

    indices: tuple[int, ...]
    signs: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        sg = tuple(int(s) for s in self.signs)
        if not idx:
            raise ValidationError("ranging row must reference at least one anchor")
        if len(idx) != len(sg):
            raise ValidationError("indices and signs must have the same length")
        if len(set(idx)) != len(idx):
            raise ValidationError(f"duplicate anchor index in row {idx}")
        if any(s not in (-1, 1) for s in sg):
            raise ValidationError(f"signs must be +1 or -1, got {sg}")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "signs", sg)

    @classmethod
    def pair(cls, i: int, j: int) -> "RangingRow":
        """TDoA row measuring ``||x - a_i|| - ||x - a_j||``."""
        return cls((i, j), (1, -1))

    @property
    def is_tdoa(self) -> bool:
        return len(self.indices) == 2 and sorted(self.signs) == [-1, 1]

    def validate(self, n: int) -> None:
        bad = [i for i in self.indices if not 1 <= i <= n]
        if bad:
            raise ValidationError(f"anchor index {bad[0]} out of range 1..{n}")

    def zero_based(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=int) - 1

    def tdoa_pair(self) -> tuple[int, int]:
        """0-based ``(plus, minus)`` anchor indices of a TDoA row."""
        if not self.is_tdoa:
            raise ValidationError(f"row {self.indices} with signs {self.signs} is not a TDoA pair")
        (i, j), (si, _) = self.indices, self.signs
        return (i - 1, j - 1) if si == 1 else (j - 1, i - 1)


@dataclass(frozen=True)
class RangingScenario:
    rows: tuple[RangingRow, ...]
    n: int

    def __post_init__(self):
        rows = tuple(self.rows)
        if not rows:
            raise ValidationError("scenario needs at least one ranging row")
        if self.n < 1:
            raise ValidationError("scenario must address at least one anchor")
        for row in rows:
            row.validate(self.n)
        object.__setattr__(self, "rows", rows)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[int]], n: int) -> "RangingScenario":
        return cls(tuple(RangingRow.pair(i, j) for i, j in pairs), n)

    @property
    def m(self) -> int:
        return len(self.rows)

    def __len__(self):
        return self.m

    @property
    def is_tdoa(self) -> bool:
        return all(r.is_tdoa for r in self.rows)

    def pair_indices(self) -> tuple[np.ndarray, np.ndarray]:
        """0-based arrays of the plus and minus anchor of every TDoA row."""
        pairs = np.array([r.tdoa_pair() for r in self.rows], dtype=int)
        return pairs[:, 0], pairs[:, 1]

    def pairs(self) -> list[tuple[int, int]]:
        """1-based ``(plus, minus)`` pairs, the configuration-file form."""
        return [(i + 1, j + 1) for i, j in (r.tdoa_pair() for r in self.rows)]


def build_incidence(scenario: RangingScenario) -> np.ndarray:
    """Signed ``m x n`` incidence matrix: row k holds the signs of ranging k."""
    P = np.zeros((scenario.m, scenario.n))
    for k, row in enumerate(scenario.rows):
        row.validate(scenario.n)
        P[k, row.zero_based()] = row.signs
    return P


def combined_distance(x, anchors: AnchorSet, row: RangingRow) -> float:
    row.validate(anchors.n)
    x = as_point(x, anchors.dim)
    legs = np.linalg.norm(x - anchors.positions[row.zero_based()], axis=1)
    return float(np.dot(row.signs, legs))


def truth_vector(x, anchors: AnchorSet, scenario: RangingScenario) -> np.ndarray:
    """Noise-free combined distances for all rows of ``scenario``."""
    if scenario.n != anchors.n:
        raise ValidationError(f"scenario addresses {scenario.n} anchors but {anchors.n} are given")
    return build_incidence(scenario) @ anchors.distances(x)


TESTBED_ANCHORS = (
    (1, 1, 1), (-1, 1, 1), (1, -1, 1), (-1, -1, 1),
    (1, 1, -1), (-1, 1, -1), (1, -1, -1), (-1, -1, -1),
    (0, 0, 1), (0, 0, -1), (0, 1, 0), (0, -1, 0),
    (1, 0, 0), (-1, 0, 0), (0, 0, 0.5), (0, 0, -0.5),
)
TESTBED_PAIRS = tuple((2 * k + 1, 2 * k + 2) for k in range(8))


def reference_anchors() -> AnchorSet:
    """The 16-anchor cube/axis placement used for the reference testbed."""
    return AnchorSet(np.array(TESTBED_ANCHORS, dtype=float))


def reference_scenario() -> RangingScenario:
    """Eight TDoA rows ``y1 - y2, y3 - y4, ..., y15 - y16``."""
    return RangingScenario.from_pairs(TESTBED_PAIRS, n=16)
