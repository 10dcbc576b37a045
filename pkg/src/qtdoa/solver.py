"""Convex relaxation of TDoA localization and a nonlinear least-squares oracle.

The raw problem is

    min_x  sum_k (||x - a_i(k)|| - ||x - a_j(k)|| - d_k)^2

which is non-convex.  Writing ``y_i = ||x - a_i||`` turns the objective into
``||P y - d||^2`` with ``P`` the incidence matrix, and lifting ``y y'`` to a
symmetric matrix ``Y`` gives the mixed SOC/SDP relaxation

    min   P'P . Y - 2 d'P y + delta tr(Y)
    s.t.  Y_ii  = gamma - 2 a_i'x + ||a_i||^2
          Y_ij >= |gamma - (a_i + a_j)'x + a_i'a_j|        (i < j)
          gamma >= ||x||^2,    y_i >= ||x - a_i||
          [[Y, y], [y', 1]] PSD.

Difference measurements leave ``y -> y + t 1`` unobserved; the small trace
penalty ``delta`` removes that flat direction.

Decision vector layout used by :class:`ConicProblem`::

    [ x (dim) | y (n) | lower triangle of Y, row-major (n(n+1)/2) | gamma ]
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .conic import ConeDims, SolverSettings, Status, conelp, min_eigenvalue, svec
from .core import AnchorSet, RangingScenario, ValidationError, as_point, build_incidence
from .noise import MeasurementBatch

DEFAULT_DELTA = 6e-7
WEIGHT_CLAMP = 1e-3  # fraction of the anchor span


class UnsupportedScenarioError(ValidationError):
    """The relaxation only handles two-anchor TDoA rows."""


class OracleFailure(RuntimeError):
    pass


def _measurements(d) -> np.ndarray:
    if isinstance(d, MeasurementBatch):
        return np.asarray(d.values, dtype=float)
    return np.asarray(d, dtype=float)


def mle_weights(d, anchors: AnchorSet) -> np.ndarray:
    """Inverse measured magnitudes ``1 / |d_k|``, clamped away from zero."""
    d = _measurements(d)
    floor = WEIGHT_CLAMP * max(anchors.span(), 1e-12)
    return 1.0 / np.maximum(np.abs(d), floor)


@dataclass(eq=False)
class ConicProblem:
    """The assembled relaxation in ``conelp`` standard form."""

    anchors: AnchorSet
    scenario: RangingScenario
    d: np.ndarray
    delta: float
    weights: np.ndarray | None
    c: np.ndarray
    G: np.ndarray
    h: np.ndarray
    A: np.ndarray
    b: np.ndarray
    dims: ConeDims
    P: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.anchors.n

    @property
    def m(self) -> int:
        return self.scenario.m

    @property
    def dim(self) -> int:
        return self.anchors.dim

    @property
    def num_variables(self) -> int:
        return self.c.size

    @property
    def num_abs_inequalities(self) -> int:
        """Linear inequalities from the split absolute-value constraints."""
        return self.dims.l

    @property
    def psd_size(self) -> int:
        return self.dims.s[0]

    # -- variable packing ------------------------------------------------------

    def _offsets(self):
        dim, n = self.dim, self.n
        oy = dim
        oY = dim + n
        og = oY + n * (n + 1) // 2
        return oy, oY, og

    def unpack(self, v: np.ndarray):
        """Split a decision vector into ``(x, y, Y, gamma)``."""
        oy, oY, og = self._offsets()
        n = self.n
        Y = np.zeros((n, n))
        i, j = np.tril_indices(n)
        Y[i, j] = v[oY:og]
        Y[j, i] = v[oY:og]
        return v[:oy].copy(), v[oy:oY].copy(), Y, float(v[og])

    def pack(self, x, y, Y, gamma) -> np.ndarray:
        i, j = np.tril_indices(self.n)
        return np.concatenate([np.asarray(x, float), np.asarray(y, float), np.asarray(Y)[i, j], [gamma]])

    def objective(self, v: np.ndarray) -> float:
        return float(self.c @ v)

    def lift(self, x) -> np.ndarray:
        """Exact lift of a position: ``y = distances``, ``Y = y y'``, ``gamma = ||x||^2``."""
        x = as_point(x, self.dim)
        y = self.anchors.distances(x)
        return self.pack(x, y, np.outer(y, y), float(x @ x))

    def constraint_violation(self, v: np.ndarray) -> float:
        """Largest violation of any equality or cone constraint at ``v``."""
        eq = np.max(np.abs(self.A @ v - self.b), initial=0.0)
        cone = -min_eigenvalue(self.h - self.G @ v, self.dims)
        return float(max(eq, cone, 0.0))

    def psd_block(self, v: np.ndarray) -> np.ndarray:
        _, y, Y, _ = self.unpack(v)
        n = self.n
        M = np.empty((n + 1, n + 1))
        M[:n, :n] = Y
        M[:n, n] = M[n, :n] = y
        M[n, n] = 1.0
        return M


def assemble_relaxation(anchors: AnchorSet, scenario: RangingScenario, d, delta: float = DEFAULT_DELTA,
                        weights=None) -> ConicProblem:
    """Build the penalized relaxation for measurements ``d``.

    With ``weights`` the fit term becomes ``||diag(w) (P y - d)||^2`` lifted
    the same way.
    """
    if not scenario.is_tdoa:
        raise UnsupportedScenarioError("the relaxation supports only two-anchor rows with opposite signs")
    if scenario.n != anchors.n:
        raise ValidationError(f"scenario addresses {scenario.n} anchors but {anchors.n} are given")
    if delta < 0 or not np.isfinite(delta):
        raise ValidationError("delta must be a finite non-negative number")
    d = _measurements(d)
    if d.shape != (scenario.m,) or not np.all(np.isfinite(d)):
        raise ValidationError(f"expected {scenario.m} finite measurements, got shape {d.shape}")
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (scenario.m,) or np.any(weights <= 0) or not np.all(np.isfinite(weights)):
            raise ValidationError("weights must be a positive vector with one entry per row")

    a = anchors.positions
    n, dim = a.shape
    P = build_incidence(scenario)
    w2 = np.ones(scenario.m) if weights is None else weights ** 2
    Q = P.T @ (w2[:, None] * P)

    ntri = n * (n + 1) // 2
    nvar = dim + n + ntri + 1
    ox, oy, oY, og = 0, dim, dim + n, dim + n + ntri
    tri = np.full((n, n), -1)
    ti, tj = np.tril_indices(n)
    tri[ti, tj] = oY + np.arange(ntri)
    tri[tj, ti] = tri[ti, tj]

    c = np.zeros(nvar)
    c[oy:oY] = -2.0 * P.T @ (w2 * d)
    c[tri[ti, tj]] = np.where(ti == tj, Q[ti, tj] + delta, 2.0 * Q[ti, tj])

    # diagonal equalities Y_ii - gamma + 2 a_i'x = ||a_i||^2
    A = np.zeros((n, nvar))
    A[np.arange(n), tri[np.arange(n), np.arange(n)]] = 1.0
    A[:, og] = -1.0
    A[:, ox:oy] = 2.0 * a
    b = np.einsum("ij,ij->i", a, a)

    rows_G, rows_h, qdims = [], [], []
    # Y_ij >= +-(gamma - (a_i + a_j)'x + a_i'a_j), split into two linear rows
    pi, pj = np.triu_indices(n, k=1)
    for sign in (1.0, -1.0):
        Gl = np.zeros((len(pi), nvar))
        Gl[np.arange(len(pi)), tri[pi, pj]] = -1.0
        Gl[:, og] = sign
        Gl[:, ox:oy] = -sign * (a[pi] + a[pj])
        rows_G.append(Gl)
        rows_h.append(-sign * np.einsum("ij,ij->i", a[pi], a[pj]))
    nlin = 2 * len(pi)

    # gamma >= ||x||^2 as (gamma + 1, 2x, gamma - 1) in the second-order cone
    Gq = np.zeros((dim + 2, nvar))
    Gq[0, og] = -1.0
    Gq[1:dim + 1, ox:oy] = -2.0 * np.eye(dim)
    Gq[dim + 1, og] = -1.0
    hq = np.zeros(dim + 2)
    hq[0], hq[-1] = 1.0, -1.0
    rows_G.append(Gq)
    rows_h.append(hq)
    qdims.append(dim + 2)

    # y_i >= ||x - a_i||
    for i in range(n):
        Gq = np.zeros((dim + 1, nvar))
        Gq[0, oy + i] = -1.0
        Gq[1:, ox:oy] = -np.eye(dim)
        rows_G.append(Gq)
        rows_h.append(np.concatenate([[0.0], -a[i]]))
        qdims.append(dim + 1)

    # [[Y, y], [y', 1]] PSD
    p = n + 1
    basis = np.zeros((nvar, p, p))
    basis[tri[ti, tj], ti, tj] = 1.0
    basis[tri[ti, tj], tj, ti] = 1.0
    basis[oy + np.arange(n), n, np.arange(n)] = 1.0
    basis[oy + np.arange(n), np.arange(n), n] = 1.0
    rows_G.append(-svec(basis).T)
    corner = np.zeros((p, p))
    corner[n, n] = 1.0
    rows_h.append(svec(corner))

    G = np.vstack(rows_G)
    h = np.concatenate(rows_h)
    dims = ConeDims(l=nlin, q=tuple(qdims), s=(p,))
    return ConicProblem(anchors, scenario, d, float(delta), weights, c, G, h, A, b, dims, P)


@dataclass(eq=False)
class LocalizationSolution:
    x_hat: np.ndarray
    y_hat: np.ndarray
    Y_hat: np.ndarray
    gamma_hat: float
    status: Status
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int
    solve_seconds: float
    objective: float
    fallback: bool = False

    def psd_min_eigenvalue(self) -> float:
        n = len(self.y_hat)
        M = np.empty((n + 1, n + 1))
        M[:n, :n] = self.Y_hat
        M[:n, n] = M[n, :n] = self.y_hat
        M[n, n] = 1.0
        return float(np.linalg.eigvalsh(M)[0])

    def describe(self) -> str:
        lines = [
            f"status            {self.status.value}{' (oracle fallback)' if self.fallback else ''}",
            f"x_hat             {' '.join(f'{v:.9f}' for v in self.x_hat)}",
            f"gamma_hat         {self.gamma_hat:.9f}",
            f"objective         {self.objective:.12g}",
            f"primal residual   {self.primal_residual:.3e}",
            f"dual residual     {self.dual_residual:.3e}",
            f"relative gap      {self.gap:.3e}",
            f"iterations        {self.iterations}",
            f"solve seconds     {self.solve_seconds:.4f}",
            f"psd min eig       {self.psd_min_eigenvalue():.3e}",
            f"y_hat             {' '.join(f'{v:.6f}' for v in self.y_hat)}",
        ]
        return "\n".join(lines)


def solve_conic(problem: ConicProblem, settings: SolverSettings | None = None) -> LocalizationSolution:
    settings = settings or SolverSettings()
    t0 = time.perf_counter()
    sol = conelp(problem.c, problem.G, problem.h, problem.dims, problem.A, problem.b, settings)
    elapsed = time.perf_counter() - t0
    x, y, Y, gamma = problem.unpack(sol.x)
    result = LocalizationSolution(
        x_hat=x, y_hat=y, Y_hat=Y, gamma_hat=gamma, status=sol.status,
        primal_residual=sol.primal_residual, dual_residual=sol.dual_residual, gap=sol.gap,
        iterations=sol.iterations, solve_seconds=elapsed, objective=problem.objective(sol.x),
    )
    if sol.status is Status.MAX_ITERS and np.all(np.isfinite(x)):
        _oracle_fallback(problem, result)
    return result


def _oracle_fallback(problem: ConicProblem, result: LocalizationSolution) -> None:
    """Replace ``x_hat`` by a local refinement of the raw objective if that is better."""
    args = (problem.anchors, problem.scenario, problem.d)
    try:
        x_ref = nls_oracle(*args, starts=1, rng=np.random.default_rng(0), extra_starts=[result.x_hat])
    except OracleFailure:
        return
    if raw_objective(x_ref, *args) < raw_objective(result.x_hat, *args):
        result.x_hat = x_ref
        result.fallback = True


def localize(anchors: AnchorSet, scenario: RangingScenario, d, delta: float | None = None, weights=None,
             settings: SolverSettings | None = None, weighted: bool = False) -> LocalizationSolution:
    """Assemble and solve the relaxation; ``weighted=True`` derives MLE weights from ``d``."""
    if delta is None:
        delta = DEFAULT_DELTA
    if weighted and weights is None:
        weights = mle_weights(d, anchors)
    return solve_conic(assemble_relaxation(anchors, scenario, d, delta, weights), settings)


# -- nonlinear least-squares oracle ---------------------------------------------------

def _residual_jacobian(x, a_plus, a_minus, d):
    up = x - a_plus
    um = x - a_minus
    np_ = np.linalg.norm(up, axis=1)
    nm = np.linalg.norm(um, axis=1)
    r = np_ - nm - d
    J = up / np_[:, None] - um / nm[:, None]
    return r, J


def raw_objective(x, anchors: AnchorSet, scenario: RangingScenario, d) -> float:
    """Sum of squared TDoA residuals at ``x``."""
    plus, minus = scenario.pair_indices()
    a = anchors.positions
    x = as_point(x, anchors.dim)
    r = np.linalg.norm(x - a[plus], axis=1) - np.linalg.norm(x - a[minus], axis=1) - _measurements(d)
    return float(r @ r)


def _levenberg_marquardt(x, a_plus, a_minus, d, gtol=1e-10, max_iter=500):
    lam = 1e-3
    r, J = _residual_jacobian(x, a_plus, a_minus, d)
    f = r @ r
    for _ in range(max_iter):
        g = J.T @ r
        if np.linalg.norm(g) < gtol:
            return x, f, True
        JtJ = J.T @ J
        improved = False
        while lam < 1e16:
            step = np.linalg.solve(JtJ + lam * np.diag(np.diag(JtJ) + 1e-12), -g)
            xn = x + step
            rn, Jn = _residual_jacobian(xn, a_plus, a_minus, d)
            fn = rn @ rn
            if np.isfinite(fn) and fn <= f:
                x, r, J, f = xn, rn, Jn, fn
                lam = max(lam / 3.0, 1e-12)
                improved = True
                break
            lam *= 4.0
        if not improved or np.linalg.norm(step) <= 1e-15 * (1.0 + np.linalg.norm(x)):
            break
    g = J.T @ r
    return x, f, bool(np.linalg.norm(g) < gtol)


def nls_oracle(anchors: AnchorSet, scenario: RangingScenario, d, starts: int = 50,
               rng: np.random.Generator | None = None, box: float = 2.0, extra_starts=()) -> np.ndarray:
    """Best Levenberg-Marquardt minimizer of the raw objective over random starts.

    Starts are uniform in ``[-box, box]^dim`` plus any ``extra_starts``.  Only
    runs reaching gradient norm below 1e-10 count as converged; if none does,
    :class:`OracleFailure` is raised.
    """
    if starts < 1:
        raise ValidationError("starts must be at least 1")
    if not scenario.is_tdoa:
        raise UnsupportedScenarioError("the oracle supports only TDoA rows")
    rng = rng if rng is not None else np.random.default_rng(0)
    plus, minus = scenario.pair_indices()
    a = anchors.positions
    d = _measurements(d)
    inits = [as_point(x0, anchors.dim) for x0 in extra_starts]
    inits += list(rng.uniform(-box, box, size=(starts, anchors.dim)))
    best, best_f = None, np.inf
    for x0 in inits:
        with np.errstate(invalid="ignore", divide="ignore"):
            x, f, ok = _levenberg_marquardt(np.array(x0, dtype=float), a[plus], a[minus], d)
        if ok and f < best_f:
            best, best_f = x, f
    if best is None:
        raise OracleFailure("no start converged to a stationary point")
    return best
