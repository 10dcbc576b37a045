import numpy as np
import pytest
import scipy.sparse as sp

from qtdoa.conic import (ConeDims, Scaling, SolverSettings, Status, conelp, identity, jordan_product,
                         min_eigenvalue, smat, svec)

clarabel = pytest.importorskip("clarabel")


def interior_point(dims, rng):
    u = rng.standard_normal(dims.size)
    return u + (abs(min_eigenvalue(u, dims)) + 0.5) * identity(dims)


def random_problem(dims, nvar, neq, rng):
    """Problem with a known strictly feasible primal and dual pair."""
    G = rng.standard_normal((dims.size, nvar))
    x0 = rng.standard_normal(nvar)
    h = G @ x0 + interior_point(dims, rng)
    A = rng.standard_normal((neq, nvar))
    b = A @ x0
    c = -G.T @ interior_point(dims, rng) - A.T @ rng.standard_normal(neq)
    return c, G, h, A, b


def clarabel_solve(c, G, h, dims, A, b):
    cones = [clarabel.ZeroConeT(A.shape[0])]
    if dims.l:
        cones.append(clarabel.NonnegativeConeT(dims.l))
    cones += [clarabel.SecondOrderConeT(k) for k in dims.q]
    cones += [clarabel.PSDTriangleConeT(p) for p in dims.s]
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    solver = clarabel.DefaultSolver(sp.csc_matrix((c.size, c.size)), c, sp.csc_matrix(np.vstack([A, G])),
                                    np.concatenate([b, h]), cones, settings)
    sol = solver.solve()
    return np.array(sol.x), sol.obj_val


def test_svec_round_trip(rng):
    M = rng.standard_normal((5, 5))
    M = M + M.T
    N = rng.standard_normal((5, 5))
    N = N + N.T
    np.testing.assert_allclose(smat(svec(M)), M)
    assert svec(M) @ svec(N) == pytest.approx(np.trace(M @ N))
    stack = np.stack([M, N])
    np.testing.assert_allclose(smat(svec(stack)), stack)


def test_identity_is_jordan_unit(rng):
    dims = ConeDims(l=2, q=(3, 4, 3), s=(3,))
    u = rng.standard_normal(dims.size)
    np.testing.assert_allclose(jordan_product(identity(dims), u, dims), u, atol=1e-14)
    assert ConeDims(l=2, q=(3,), s=(3,)).degree == 2 + 1 + 3


def test_nt_scaling_identities(rng):
    dims = ConeDims(l=3, q=(4, 3, 4), s=(3, 2))
    s, z = interior_point(dims, rng), interior_point(dims, rng)
    W = Scaling(s, z, dims)
    np.testing.assert_allclose(W.W(z), W.lam, atol=1e-12)
    np.testing.assert_allclose(W.WinvT(s), W.lam, atol=1e-12)
    u = rng.standard_normal(dims.size)
    np.testing.assert_allclose(W.Winv(W.W(u)), u, atol=1e-12)
    np.testing.assert_allclose(W.WinvT(W.WT(u)), u, atol=1e-12)
    # composed update reproduces the NT scaling of the new iterates
    ds, dz = 0.3 * rng.standard_normal(dims.size), 0.3 * rng.standard_normal(dims.size)
    alpha = 0.5 * min(1.0, W.max_step(ds, dz))
    s_new = s + alpha * W.WT(ds)
    z_new = z + alpha * W.Winv(dz)
    W.update(ds, dz, alpha)
    np.testing.assert_allclose(W.W(z_new), W.lam, atol=1e-10)
    np.testing.assert_allclose(W.WinvT(s_new), W.lam, atol=1e-10)


def test_lam_div_inverts_jordan_product(rng):
    dims = ConeDims(l=2, q=(3, 5), s=(4,))
    W = Scaling(interior_point(dims, rng), interior_point(dims, rng), dims)
    x = rng.standard_normal(dims.size)
    # only symmetric-part solves are well defined on PSD blocks, which svec already enforces
    np.testing.assert_allclose(W.lam_div(jordan_product(W.lam, x, dims)), x, atol=1e-10)


def test_small_lp():
    # minimize -x1 - x2 subject to x1 + 2 x2 <= 4, 3 x1 + x2 <= 6, x >= 0
    c = np.array([-1.0, -1.0])
    G = np.array([[1.0, 2], [3, 1], [-1, 0], [0, -1]])
    h = np.array([4.0, 6, 0, 0])
    sol = conelp(c, G, h, ConeDims(l=4))
    assert sol.status is Status.OPTIMAL
    np.testing.assert_allclose(sol.x, [1.6, 1.2], atol=1e-7)


def test_socp_projection():
    # distance from (3, 4) to the origin as minimize t subject to ||(3,4) - u|| <= t, u = 0
    c = np.array([1.0, 0, 0])
    G = -np.eye(3)
    h = np.zeros(3)
    A = np.array([[0.0, 1, 0], [0, 0, 1]])
    b = np.array([3.0, 4.0])
    sol = conelp(c, G, h, ConeDims(q=(3,)), A, b)
    assert sol.status is Status.OPTIMAL
    assert sol.primal_objective == pytest.approx(5.0, abs=1e-7)


def test_sdp_min_eigenvalue(rng):
    # max t subject to M - t I psd gives the smallest eigenvalue of M
    M = rng.standard_normal((4, 4))
    M = M + M.T
    c = np.array([-1.0])
    G = svec(np.eye(4))[:, None]
    sol = conelp(c, G, svec(M), ConeDims(s=(4,)))
    assert sol.status is Status.OPTIMAL
    assert sol.x[0] == pytest.approx(np.linalg.eigvalsh(M)[0], abs=1e-7)


@pytest.mark.parametrize("seed", range(8))
def test_random_mixed_problems_match_reference(seed):
    rng = np.random.default_rng(seed)
    dims = ConeDims(l=5, q=(3, 4, 4), s=(3, 4))
    c, G, h, A, b = random_problem(dims, 7, 2, rng)
    sol = conelp(c, G, h, dims, A, b)
    assert sol.status is Status.OPTIMAL
    assert max(sol.primal_residual, sol.dual_residual, sol.gap) <= 1e-8
    assert min_eigenvalue(sol.s, dims) >= -1e-10
    assert min_eigenvalue(sol.z, dims) >= -1e-10
    _, ref = clarabel_solve(c, G, h, dims, A, b)
    assert sol.primal_objective == pytest.approx(ref, rel=1e-6, abs=1e-7)
    assert sol.dual_objective == pytest.approx(ref, rel=1e-6, abs=1e-7)


def test_contradictory_equalities_are_flagged():
    c = np.array([1.0, 1.0])
    G = -np.eye(2)
    h = np.zeros(2)
    A = np.array([[1.0, 0.0], [1.0, 0.0]])
    b = np.array([0.0, 1.0])
    sol = conelp(c, G, h, ConeDims(l=2), A, b, SolverSettings(max_iters=50))
    assert sol.status in (Status.NUMERICAL_FAILURE, Status.MAX_ITERS)


def test_settings_validation():
    with pytest.raises(ValueError):
        SolverSettings(tol_gap=0)
    with pytest.raises(ValueError):
        SolverSettings(max_iters=0)
    with pytest.raises(ValueError):
        SolverSettings(step_fraction=1.0)
    with pytest.raises(ValueError):
        ConeDims(q=(1,))


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        conelp(np.ones(2), np.ones((3, 2)), np.ones(2), ConeDims(l=3))
