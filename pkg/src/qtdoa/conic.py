"""Dense primal-dual interior-point solver for small conic programs.

Solves

    minimize    c'x
    subject to  G x + s = h,   A x = b,   s in K

where ``K`` is a product of a nonnegative orthant, second-order cones and
PSD cones.  The dual is

    maximize    -h'z - b'y
    subject to  G'z + A'y + c = 0,   z in K.

Vectors in ``K`` are laid out as ``[orthant | soc_1 | ... | svec(psd_1) | ...]``.
PSD blocks use the lower-triangular ``svec`` with off-diagonals scaled by
sqrt(2), so that ``svec(U) . svec(V) = tr(U V)``.

The method is an infeasible-start path-following scheme with
Nesterov-Todd scaling and Mehrotra's predictor-corrector.  The PSD scaling
is kept as a factor ``r`` with ``r^-1 s r^-T = r' z r = diag(lambda)`` and
updated in scaled coordinates every iteration, which keeps it accurate close
to the boundary of the cone.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

SQRT2 = np.sqrt(2.0)


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    MAX_ITERS = "max_iters"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class SolverSettings:
    tol_gap: float = 1e-8
    tol_feas: float = 1e-8
    max_iters: int = 200
    step_fraction: float = 0.99

    def __post_init__(self):
        if self.tol_gap <= 0 or self.tol_feas <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not 0 < self.step_fraction < 1:
            raise ValueError("step_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class ConeDims:
    l: int = 0
    q: tuple[int, ...] = ()
    s: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "q", tuple(int(k) for k in self.q))
        object.__setattr__(self, "s", tuple(int(k) for k in self.s))
        if self.l < 0 or any(k < 2 for k in self.q) or any(k < 1 for k in self.s):
            raise ValueError(f"invalid cone dimensions {self}")

    @property
    def size(self) -> int:
        return self.l + sum(self.q) + sum(p * (p + 1) // 2 for p in self.s)

    @property
    def degree(self) -> int:
        return self.l + len(self.q) + sum(self.s)

    def blocks(self):
        """Yield ``(kind, slice, size)`` for every cone block in layout order."""
        off = 0
        if self.l:
            yield "l", slice(0, self.l), self.l
            off = self.l
        for k in self.q:
            yield "q", slice(off, off + k), k
            off += k
        for p in self.s:
            k = p * (p + 1) // 2
            yield "s", slice(off, off + k), p
            off += k


@dataclass
class ConeSolution:
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    z: np.ndarray
    status: Status
    iterations: int
    primal_residual: float
    dual_residual: float
    gap: float
    primal_objective: float
    dual_objective: float
    history: list = field(default_factory=list, repr=False)


# -- symmetric-matrix vectorization -----------------------------------------

@lru_cache(maxsize=None)
def _tril(p: int):
    i, j = np.tril_indices(p)
    scale = np.where(i == j, 1.0, SQRT2)
    return i, j, scale


def svec(M: np.ndarray) -> np.ndarray:
    """Pack symmetric ``M`` (or a stack of them) into scaled lower-triangular form."""
    p = M.shape[-1]
    i, j, scale = _tril(p)
    return M[..., i, j] * scale


def smat(v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`svec`; accepts a stack of vectors along leading axes."""
    v = np.asarray(v, dtype=float)
    k = v.shape[-1]
    p = int(round((np.sqrt(8 * k + 1) - 1) / 2))
    i, j, scale = _tril(p)
    M = np.zeros(v.shape[:-1] + (p, p))
    vals = v / scale
    M[..., i, j] = vals
    M[..., j, i] = vals
    return M


# -- cone layout ----------------------------------------------------------------------

class _Layout:
    """Index arrays for vectorized work on a cone vector.

    Second-order blocks of equal size are stacked so that a whole group is
    processed with one batched numpy call.
    """

    def __init__(self, dims: ConeDims):
        self.dims = dims
        self.lp = slice(0, dims.l)
        groups: dict[int, list[int]] = {}
        self.psd = []
        for kind, sl, k in dims.blocks():
            if kind == "q":
                groups.setdefault(k, []).append(sl.start)
            elif kind == "s":
                self.psd.append((sl, k))
        self.soc = [np.asarray(starts)[:, None] + np.arange(k) for k, starts in groups.items()]


@lru_cache(maxsize=32)
def _layout(dims: ConeDims) -> _Layout:
    return _Layout(dims)


def _jnorm(U):
    """Lorentz norm sqrt(u0^2 - |u1|^2) of each row of ``U``."""
    t = np.linalg.norm(U[:, 1:], axis=1)
    return np.sqrt((U[:, 0] - t) * (U[:, 0] + t))


# -- cone arithmetic -------------------------------------------------------------

def identity(dims: ConeDims) -> np.ndarray:
    lay = _layout(dims)
    e = np.zeros(dims.size)
    e[lay.lp] = 1.0
    for idx in lay.soc:
        e[idx[:, 0]] = 1.0
    for sl, p in lay.psd:
        e[sl] = svec(np.eye(p))
    return e


def min_eigenvalue(u: np.ndarray, dims: ConeDims) -> float:
    """Smallest 'eigenvalue' of ``u`` over all blocks; positive iff interior."""
    lay = _layout(dims)
    vals = [np.inf]
    if dims.l:
        vals.append(u[lay.lp].min())
    for idx in lay.soc:
        U = u[idx]
        vals.append(np.min(U[:, 0] - np.linalg.norm(U[:, 1:], axis=1)))
    for sl, _ in lay.psd:
        vals.append(np.linalg.eigvalsh(smat(u[sl]))[0])
    return float(min(vals))


def jordan_product(u: np.ndarray, v: np.ndarray, dims: ConeDims) -> np.ndarray:
    lay = _layout(dims)
    out = np.empty_like(u)
    out[lay.lp] = u[lay.lp] * v[lay.lp]
    for idx in lay.soc:
        U, V = u[idx], v[idx]
        out[idx[:, 0]] = np.einsum("ij,ij->i", U, V)
        out[idx[:, 1:]] = U[:, :1] * V[:, 1:] + V[:, :1] * U[:, 1:]
    for sl, _ in lay.psd:
        U, V = smat(u[sl]), smat(v[sl])
        UV = U @ V
        out[sl] = svec(0.5 * (UV + UV.T))
    return out


def _soc_step(U: np.ndarray, dU: np.ndarray) -> float:
    """Largest t >= 0 keeping every row of ``U + t dU`` in the second-order cone."""
    a = dU[:, 0] ** 2 - np.einsum("ij,ij->i", dU[:, 1:], dU[:, 1:])
    b = U[:, 0] * dU[:, 0] - np.einsum("ij,ij->i", U[:, 1:], dU[:, 1:])
    t1 = np.linalg.norm(U[:, 1:], axis=1)
    c = (U[:, 0] - t1) * (U[:, 0] + t1)
    disc = b * b - a * c
    with np.errstate(divide="ignore", invalid="ignore"):
        root = c / (-b + np.sqrt(np.maximum(disc, 0.0)))
        linear = np.where(b < 0, -c / (2 * b), np.inf)
    t = np.where(a < 0, root,
                 np.where(a == 0, linear, np.where((b < 0) & (disc >= 0), root, np.inf)))
    return float(t.min()) if t.size else np.inf


# -- Nesterov-Todd scaling ----------------------------------------------------------

def _soc_nt_matrix(S, Z):
    """Symmetric NT scalings ``beta (2 v v' - J)`` for stacked cone pairs."""
    ns, nz = _jnorm(S), _jnorm(Z)
    sb, zb = S / ns[:, None], Z / nz[:, None]
    gamma = np.sqrt(0.5 * (1.0 + np.einsum("ij,ij->i", sb, zb)))
    wb = sb.copy()
    wb[:, 0] += zb[:, 0]
    wb[:, 1:] -= zb[:, 1:]
    wb /= 2.0 * gamma[:, None]
    v = wb.copy()
    v[:, 0] += 1.0
    v /= np.sqrt(2.0 * (wb[:, 0] + 1.0))[:, None]
    W = 2.0 * v[:, :, None] * v[:, None, :]
    k = S.shape[1]
    W[:, 0, 0] -= 1.0
    W[:, 1:, 1:] += np.eye(k - 1)
    return np.sqrt(ns / nz)[:, None, None] * W


def _psd_nt_factor(S, Z):
    """Factor ``r`` with ``r^-1 S r^-T = r' Z r = diag(lam)``."""
    Ls = np.linalg.cholesky(S)
    Lz = np.linalg.cholesky(Z)
    _, lam, Vt = np.linalg.svd(Lz.T @ Ls)
    return Ls @ Vt.T / np.sqrt(lam), lam


class Scaling:
    """NT scaling ``W`` with ``W z = W^-T s = lambda`` on every block.

    Orthant blocks keep a diagonal ``w``, second-order blocks a dense matrix
    and PSD blocks a factor ``r`` (``W(u) = r' u r``).  After the first
    iteration every block is updated by composing the old scaling with the
    NT scaling of the scaled iterates, which are well conditioned.
    """

    def __init__(self, s: np.ndarray, z: np.ndarray, dims: ConeDims):
        self.dims = dims
        self.layout = lay = _layout(dims)
        self.lam = np.empty_like(s)
        self.lp = np.sqrt(s[lay.lp] / z[lay.lp])
        self.lam[lay.lp] = np.sqrt(s[lay.lp] * z[lay.lp])
        self.soc = []
        for idx in lay.soc:
            Wq = _soc_nt_matrix(s[idx], z[idx])
            self.soc.append(self._soc_maps(Wq))
            self.lam[idx] = np.einsum("bij,bj->bi", Wq, z[idx])
        self.psd = []
        self.lam_psd = []
        for sl, _ in lay.psd:
            r, lam = _psd_nt_factor(smat(s[sl]), smat(z[sl]))
            self.psd.append(self._psd_maps(r))
            self.lam[sl] = svec(np.diag(lam))
            self.lam_psd.append(lam)

    @staticmethod
    def _soc_maps(Wq):
        Wi = np.linalg.inv(Wq)
        return {"W": Wq, "WT": Wq.transpose(0, 2, 1), "Winv": Wi, "WinvT": Wi.transpose(0, 2, 1)}

    @staticmethod
    def _psd_maps(r):
        # W(U) = M' U M for the matrix M stored under each mode
        ri = np.linalg.inv(r)
        return {"W": r, "WT": r.T, "Winv": ri, "WinvT": ri.T}

    # Each map accepts a vector or a (size, ncols) matrix.
    def _apply(self, u, mode):
        lay = self.layout
        out = np.empty_like(u)
        w = self.lp if u.ndim == 1 else self.lp[:, None]
        out[lay.lp] = u[lay.lp] * w if mode in ("W", "WT") else u[lay.lp] / w
        for idx, maps in zip(lay.soc, self.soc):
            out[idx] = np.matmul(maps[mode], u[idx]) if u.ndim == 2 else \
                np.einsum("bij,bj->bi", maps[mode], u[idx])
        for (sl, _), maps in zip(lay.psd, self.psd):
            M = maps[mode]
            U = smat(u[sl].T if u.ndim == 2 else u[sl])
            res = svec(M.T @ U @ M)
            out[sl] = res.T if u.ndim == 2 else res
        return out

    def W(self, u):
        return self._apply(u, "W")

    def WT(self, u):
        return self._apply(u, "WT")

    def Winv(self, u):
        return self._apply(u, "Winv")

    def WinvT(self, u):
        return self._apply(u, "WinvT")

    def lam_div(self, r: np.ndarray) -> np.ndarray:
        """Solve ``lambda o x = r`` for x."""
        lay = self.layout
        out = np.empty_like(r)
        out[lay.lp] = r[lay.lp] / self.lam[lay.lp]
        for idx in lay.soc:
            L, R = self.lam[idx], r[idx]
            t1 = np.linalg.norm(L[:, 1:], axis=1)
            det = (L[:, 0] - t1) * (L[:, 0] + t1)
            x0 = (L[:, 0] * R[:, 0] - np.einsum("ij,ij->i", L[:, 1:], R[:, 1:])) / det
            out[idx[:, 0]] = x0
            out[idx[:, 1:]] = (R[:, 1:] - L[:, 1:] * x0[:, None]) / L[:, :1]
        for (sl, _), lam in zip(lay.psd, self.lam_psd):
            out[sl] = svec(2.0 * smat(r[sl]) / (lam[:, None] + lam[None, :]))
        return out

    def max_step(self, ds: np.ndarray, dz: np.ndarray) -> float:
        """Largest step keeping ``lambda + t ds`` and ``lambda + t dz`` in the cone."""
        lay = self.layout
        t = np.inf
        lam_lp = self.lam[lay.lp]
        for d in (ds, dz):
            dl = d[lay.lp]
            neg = dl < 0
            if neg.any():
                t = min(t, np.min(-lam_lp[neg] / dl[neg]))
            for idx in lay.soc:
                t = min(t, _soc_step(self.lam[idx], d[idx]))
            for (sl, _), lam in zip(lay.psd, self.lam_psd):
                isq = 1.0 / np.sqrt(lam)
                ev = np.linalg.eigvalsh(isq[:, None] * smat(d[sl]) * isq[None, :])[0]
                if ev < 0:
                    t = min(t, -1.0 / ev)
        return t

    def update(self, ds: np.ndarray, dz: np.ndarray, alpha: float):
        """Rescale at the scaled iterates ``lambda + alpha ds`` and ``lambda + alpha dz``."""
        lay = self.layout
        st = self.lam + alpha * ds
        zt = self.lam + alpha * dz
        self.lp = self.lp * np.sqrt(st[lay.lp] / zt[lay.lp])
        self.lam[lay.lp] = np.sqrt(st[lay.lp] * zt[lay.lp])
        for g, idx in enumerate(lay.soc):
            Wt = _soc_nt_matrix(st[idx], zt[idx])
            self.soc[g] = self._soc_maps(Wt @ self.soc[g]["W"])
            self.lam[idx] = np.einsum("bij,bj->bi", Wt, zt[idx])
        for g, (sl, _) in enumerate(lay.psd):
            r2, lam = _psd_nt_factor(smat(st[sl]), smat(zt[sl]))
            self.psd[g] = self._psd_maps(self.psd[g]["W"] @ r2)
            self.lam[sl] = svec(np.diag(lam))
            self.lam_psd[g] = lam


# -- KKT system ----------------------------------------------------------------------

class _KKT:
    """Solver for the scaled Newton system

        Ghat' dz + A' dy = b1
        A dx             = b2
        Ghat dx - dz     = b3

    Rows of ``Ghat`` belonging to orthant and second-order blocks are
    eliminated into ``Ghat_e' Ghat_e``; PSD rows stay in the factored matrix,
    which keeps it far better conditioned than full normal equations.  Two
    steps of iterative refinement run against the unreduced system.
    """

    def __init__(self, Ghat: np.ndarray, A: np.ndarray, keep: np.ndarray, refinement: int = 2,
                 G=None, scaling=None):
        self.Ghat = Ghat
        self.A = A
        self.refinement = refinement
        self.keep = keep
        self.elim = ~keep
        nx, ny, nk = Ghat.shape[1], A.shape[0], int(keep.sum())
        Ge, Gk = Ghat[self.elim], Ghat[keep]
        K = np.zeros((nx + ny + nk, nx + ny + nk))
        K[:nx, :nx] = Ge.T @ Ge
        K[:nx, nx:nx + ny] = A.T
        K[nx:nx + ny, :nx] = A
        K[:nx, nx + ny:] = Gk.T
        K[nx + ny:, :nx] = Gk
        K[nx + ny:, nx + ny:] = -np.eye(nk)
        self.K = K
        with warnings.catch_warnings():
            warnings.simplefilter("error", sla.LinAlgWarning)
            try:
                self.lu = sla.lu_factor(K, check_finite=True)
            except sla.LinAlgWarning:
                raise np.linalg.LinAlgError("KKT matrix is numerically singular") from None
        if not np.all(np.isfinite(self.lu[0])) or np.min(np.abs(np.diag(self.lu[0]))) == 0.0:
            raise np.linalg.LinAlgError("KKT matrix is singular")
        # residuals of the refinement use the unscaled operators when available
        if G is not None and scaling is not None:
            self.GhatT = lambda u: G.T @ scaling.Winv(u)
            self.Ghat_ = lambda v: scaling.WinvT(G @ v)
        else:
            self.GhatT = lambda u: Ghat.T @ u
            self.Ghat_ = lambda v: Ghat @ v

    def _solve_once(self, b1, b2, b3):
        nx, ny = self.Ghat.shape[1], self.A.shape[0]
        Ge = self.Ghat[self.elim]
        rhs = np.concatenate([b1 + Ge.T @ b3[self.elim], b2, b3[self.keep]])
        sol = sla.lu_solve(self.lu, rhs)
        dx, dy = sol[:nx], sol[nx:nx + ny]
        dz = np.empty_like(b3)
        dz[self.keep] = sol[nx + ny:]
        dz[self.elim] = Ge @ dx - b3[self.elim]
        return dx, dy, dz

    def solve(self, b1, b2, b3):
        dx, dy, dz = self._solve_once(b1, b2, b3)
        for _ in range(self.refinement):
            e1 = b1 - self.GhatT(dz) - self.A.T @ dy
            e2 = b2 - self.A @ dx
            e3 = b3 - self.Ghat_(dx) + dz
            cx, cy, cz = self._solve_once(e1, e2, e3)
            dx, dy, dz = dx + cx, dy + cy, dz + cz
        return dx, dy, dz


def _psd_rows(dims: ConeDims) -> np.ndarray:
    mask = np.zeros(dims.size, dtype=bool)
    for kind, sl, _ in dims.blocks():
        if kind == "s":
            mask[sl] = True
    return mask


def _initial_point(c, G, h, A, b, dims):
    """Least-squares start with the identity scaling, shifted into the cone interior."""
    kkt = _KKT(G, A, _psd_rows(dims))
    x, _, r = kkt.solve(np.zeros(G.shape[1]), b, h)
    s = -r
    _, y, z = kkt.solve(-c, np.zeros(A.shape[0]), np.zeros(G.shape[0]))
    e = identity(dims)
    for vec in (s, z):
        nrm = np.linalg.norm(vec)
        t = -min_eigenvalue(vec, dims)
        if t >= -1e-8 * max(nrm, 1.0):
            vec += (1.0 + t) * e
    return x, y, s, z


def conelp(c, G, h, dims: ConeDims, A=None, b=None, settings: SolverSettings | None = None) -> ConeSolution:
    """Solve the cone program described in the module docstring."""
    settings = settings or SolverSettings()
    c = np.asarray(c, dtype=float)
    G = np.asarray(G, dtype=float)
    h = np.asarray(h, dtype=float)
    nvar = c.size
    if A is None:
        A = np.zeros((0, nvar))
        b = np.zeros(0)
    A = np.asarray(A, dtype=float).reshape(-1, nvar)
    b = np.asarray(b, dtype=float)
    if G.shape != (dims.size, nvar) or h.size != dims.size or b.size != A.shape[0]:
        raise ValueError("inconsistent problem dimensions")

    resx0 = max(1.0, np.linalg.norm(c))
    resy0 = max(1.0, np.linalg.norm(b))
    resz0 = max(1.0, np.linalg.norm(h))
    e = identity(dims)
    deg = dims.degree

    def failed(x, y, s, z, it, info):
        return ConeSolution(x, y, s, z, Status.NUMERICAL_FAILURE, it, *info, history=history)

    history = []
    try:
        x, y, s, z = _initial_point(c, G, h, A, b, dims)
    except (np.linalg.LinAlgError, ValueError):
        zero = np.zeros(dims.size)
        return failed(np.zeros(nvar), np.zeros(A.shape[0]), zero, zero, 0,
                      (np.inf, np.inf, np.inf, np.nan, np.nan))

    scaling = None
    keep = _psd_rows(dims)
    info = (np.inf, np.inf, np.inf, np.nan, np.nan)
    for it in range(settings.max_iters + 1):
        rx = c + A.T @ y + G.T @ z
        ry = A @ x - b
        rz = G @ x + s - h
        pcost = c @ x
        dcost = -(h @ z) - (b @ y)
        gap = s @ z
        pres = max(np.linalg.norm(ry) / resy0, np.linalg.norm(rz) / resz0)
        dres = np.linalg.norm(rx) / resx0
        relgap = gap / max(1.0, abs(pcost))
        info = (pres, dres, relgap, pcost, dcost)
        history.append(info)
        if not np.all(np.isfinite([pres, dres, relgap])):
            return failed(x, y, s, z, it, info)
        if pres <= settings.tol_feas and dres <= settings.tol_feas and relgap <= settings.tol_gap:
            return ConeSolution(x, y, s, z, Status.OPTIMAL, it, *info, history=history)
        if it == settings.max_iters:
            break

        try:
            if scaling is None:
                scaling = Scaling(s, z, dims)
            lam = scaling.lam
            mu = gap / deg
            Ghat = scaling.WinvT(G)
            kkt = _KKT(Ghat, A, keep, G=G, scaling=scaling)
            wrz = scaling.WinvT(rz)

            def direction(t):
                dx, dy, dzt = kkt.solve(-rx, -ry, -(wrz + t))
                # ds from the linearized primal equation, so rz shrinks exactly by (1 - alpha)
                ds = -rz - G @ dx
                return dx, dy, ds, scaling.WinvT(ds), dzt

            # predictor
            dx, dy, ds, dst, dzt = direction(-lam)
            alpha = min(1.0, scaling.max_step(dst, dzt))
            rho = (lam + alpha * dst) @ (lam + alpha * dzt)
            sigma = min(1.0, max(0.0, rho / gap)) ** 3
            # corrector
            rs = -jordan_product(lam, lam, dims) - jordan_product(dst, dzt, dims) + sigma * mu * e
            dx, dy, ds, dst, dzt = direction(scaling.lam_div(rs))
            alpha = min(1.0, settings.step_fraction * scaling.max_step(dst, dzt))
            if not np.isfinite(alpha) or alpha <= 0:
                return failed(x, y, s, z, it, info)
            x = x + alpha * dx
            y = y + alpha * dy
            s = s + alpha * ds
            z = z + alpha * scaling.Winv(dzt)
            scaling.update(dst, dzt, alpha)
        except (np.linalg.LinAlgError, ValueError, FloatingPointError):
            return failed(x, y, s, z, it, info)

    return ConeSolution(x, y, s, z, Status.MAX_ITERS, settings.max_iters, *info, history=history)
