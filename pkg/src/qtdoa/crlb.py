"""Fisher information, the Jensen lower bound on mean error, and the mean error itself.

Each TDoA row contributes a rank-one term ``u u' / (eta d)^2`` where ``u`` is
the difference of the unit vectors pointing from the two anchors to the
sensor and ``d`` is the true range difference.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import AnchorSet, RangingScenario, ValidationError, as_point

MIN_DIFFERENCE = 1e-6  # meters; rows below this carry unbounded information
MAX_CONDITION = 1e12
COINCIDENCE_TOL = 1e-12


class SingularGeometryError(ValidationError):
    """The sensor sits on an anchor, so a unit direction is undefined."""


class DegenerateRowError(ValidationError):
    """A row's true range difference is too small for the noise model."""


class UnboundedBoundError(ValueError):
    """The Fisher information is singular or too ill-conditioned to invert."""


@dataclass(frozen=True)
class FisherInfo:
    J: np.ndarray
    eta: float
    x: np.ndarray
    excluded_rows: int = 0

    def __post_init__(self):
        J = np.array(self.J, dtype=float)
        if J.ndim != 2 or J.shape[0] != J.shape[1]:
            raise ValidationError("J must be square")
        scale = max(1.0, np.abs(J).max())
        if np.abs(J - J.T).max() > 1e-12 * scale:
            raise ValidationError("J must be symmetric")
        J.setflags(write=False)
        object.__setattr__(self, "J", J)


def row_gradients(x, anchors: AnchorSet, scenario: RangingScenario) -> tuple[np.ndarray, np.ndarray]:
    """Gradients ``u_k`` of each true range difference and the differences themselves."""
    if not scenario.is_tdoa:
        raise ValidationError("Fisher information is defined for TDoA rows only")
    x = as_point(x, anchors.dim)
    plus, minus = scenario.pair_indices()
    diff = x - anchors.positions
    dist = np.linalg.norm(diff, axis=1)
    used = np.union1d(plus, minus)
    if np.any(dist[used] <= COINCIDENCE_TOL):
        raise SingularGeometryError(f"sensor {x} coincides with an anchor")
    unit = diff / dist[:, None]
    return unit[plus] - unit[minus], dist[plus] - dist[minus]


def fisher_information(x, anchors: AnchorSet, scenario: RangingScenario, eta: float,
                       exclude_degenerate: bool = False) -> FisherInfo:
    """Sum of per-row rank-one information terms evaluated at the true position.

    Rows whose true difference is below ``MIN_DIFFERENCE`` raise
    :class:`DegenerateRowError`, or are dropped and counted when
    ``exclude_degenerate`` is set.
    """
    if not eta > 0:
        raise ValidationError(f"eta must be positive, got {eta}")
    u, d = row_gradients(x, anchors, scenario)
    bad = np.abs(d) < MIN_DIFFERENCE
    if bad.any() and not exclude_degenerate:
        rows = ", ".join(str(k + 1) for k in np.flatnonzero(bad))
        raise DegenerateRowError(f"rows {rows} have |true difference| below {MIN_DIFFERENCE} m")
    u, d = u[~bad], d[~bad]
    J = (u / (eta * d)[:, None]).T @ (u / (eta * d)[:, None])
    J = 0.5 * (J + J.T)
    return FisherInfo(J, float(eta), as_point(x), int(bad.sum()))


def jensen_bound(info: FisherInfo | np.ndarray) -> float:
    """``sqrt(trace(J^-1))``, the lower bound on the expected error of an unbiased estimator."""
    J = info.J if isinstance(info, FisherInfo) else np.asarray(info, dtype=float)
    evals = np.linalg.eigvalsh(J)
    if evals[0] <= 0 or evals[-1] / evals[0] > MAX_CONDITION:
        raise UnboundedBoundError(
            f"Fisher information is singular or ill-conditioned (eigenvalues {evals[0]:.3g}..{evals[-1]:.3g})")
    return float(np.sqrt(np.sum(1.0 / evals)))


def mean_error(truths, estimates) -> float:
    truths = np.atleast_2d(np.asarray(truths, dtype=float))
    estimates = np.atleast_2d(np.asarray(estimates, dtype=float))
    if truths.shape != estimates.shape:
        raise ValidationError(f"shape mismatch: {truths.shape} vs {estimates.shape}")
    if truths.shape[0] < 1:
        raise ValidationError("need at least one trial")
    return float(np.mean(np.linalg.norm(truths - estimates, axis=1)))


def log_likelihood(x, d, anchors: AnchorSet, scenario: RangingScenario, eta: float) -> float:
    """Gaussian log-density of observed differences ``d`` given position ``x``.

    The standard deviation of row k is ``eta * |d_k|`` using the observation,
    so it does not depend on ``x``.
    """
    x = as_point(x, anchors.dim)
    d = np.asarray(d, dtype=float)
    plus, minus = scenario.pair_indices()
    dist = anchors.distances(x)
    sigma = eta * np.abs(d)
    resid = dist[plus] - dist[minus] - d
    return float(np.sum(-np.log(np.sqrt(2 * np.pi) * sigma) - resid ** 2 / (2 * sigma ** 2)))


def finite_difference_information(x, anchors: AnchorSet, scenario: RangingScenario, eta: float,
                                  step: float = 1e-4) -> np.ndarray:
    """Negative Hessian of :func:`log_likelihood` at noiseless data, by central differences.

    With the observation set to the truth the residual term vanishes, so the
    Hessian equals its expectation and serves as an independent check of
    :func:`fisher_information`.
    """
    x = as_point(x, anchors.dim)
    plus, minus = scenario.pair_indices()
    dist = anchors.distances(x)
    d = dist[plus] - dist[minus]
    dim = x.size
    H = np.empty((dim, dim))
    E = np.eye(dim) * step
    f = lambda p: log_likelihood(p, d, anchors, scenario, eta)
    for i in range(dim):
        for j in range(i, dim):
            H[i, j] = (f(x + E[i] + E[j]) - f(x + E[i] - E[j]) - f(x - E[i] + E[j])
                       + f(x - E[i] - E[j])) / (4 * step * step)
            H[j, i] = H[i, j]
    return -H
