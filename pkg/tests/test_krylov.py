import numpy as np
import pytest

from regulus.direct import tikhonov_solve
from regulus.errors import ParameterError, ShapeError
from regulus.krylov import arnoldi_tikhonov, cgls, gk_tikhonov, gmres, hybrid_gmres, hybrid_lsqr, lsqr
from regulus.regparam import ProjectedProblem, RegSelector, dp_bisection_tikhonov
from regulus.results import IterConfig


def _ill(seed, m=30, n=20, decay=-3):
    rng = np.random.default_rng(seed)
    U, _ = np.linalg.qr(rng.standard_normal((m, n)))
    V, _ = np.linalg.qr(rng.standard_normal((n, n)))
    A = U @ np.diag(np.logspace(0, decay, n)) @ V.T
    x = rng.standard_normal(n)
    return A, x, A @ x


def _noisy(A, x, level, seed=1):
    b0 = A @ x
    e = np.random.default_rng(seed).standard_normal(b0.size)
    e *= level * np.linalg.norm(b0) / np.linalg.norm(e)
    return b0 + e, np.linalg.norm(e)


# --- plain methods ------------------------------------------------------------

def test_gmres_identity():
    b = np.array([1.0, 2.0, 3.0])
    r = gmres(np.eye(3), b)
    np.testing.assert_allclose(r.x, b)
    assert r.iterations == 1 and r.stop_reason == "breakdown"


def test_gmres_diag_exact():
    r = gmres(np.diag([1.0, 2.0, 3.0]), np.ones(3), max_iters=3)
    np.testing.assert_allclose(r.x, [1, 0.5, 1 / 3], atol=1e-12)


def test_gmres_projected_residual_identity():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((40, 40)) + 5 * np.eye(40)
    b = rng.standard_normal(40)
    r = gmres(A, b, max_iters=25, keep_iterates=True)
    for rec, x in zip(r.history, r.iterates):
        assert abs(rec.residual_norm - np.linalg.norm(A @ x - b)) <= 1e-10 * np.linalg.norm(b)
    res = r.residual_norms
    assert np.all(np.diff(res) <= 1e-12 * np.linalg.norm(b))


def test_gmres_rejects_rectangular():
    with pytest.raises(ShapeError):
        gmres(np.ones((3, 2)), np.ones(3))


def test_lsqr_identity_and_ls():
    b = np.arange(1.0, 5.0)
    np.testing.assert_allclose(lsqr(np.eye(4), b).x, b)
    rng = np.random.default_rng(1)
    A, b = rng.standard_normal((30, 20)), rng.standard_normal(30)
    ref = np.linalg.solve(A.T @ A, A.T @ b)
    r = lsqr(A, b, max_iters=20, reorth=True)
    np.testing.assert_allclose(r.x, ref, atol=1e-8 * np.linalg.norm(ref))


def test_cgls_matches_lsqr_per_iterate():
    # d stays well below n so neither short recurrence has lost orthogonality
    A, x, _ = _ill(2, 200, 150, decay=-2)
    b, _ = _noisy(A, x, 0.01)
    r1 = lsqr(A, b, max_iters=15, keep_iterates=True)
    r2 = cgls(A, b, max_iters=15, keep_iterates=True)
    for x1, x2 in zip(r1.iterates, r2.iterates):
        assert np.linalg.norm(x1 - x2) <= 1e-8 * np.linalg.norm(x1)
    np.testing.assert_allclose(r1.residual_norms, r2.residual_norms, rtol=1e-8)


def test_cgls_examples():
    b = np.array([1.0, -1.0, 2.0])
    r = cgls(np.eye(3), b)
    np.testing.assert_allclose(r.x, b)
    r = cgls(np.eye(3), b, damp=1.0)
    np.testing.assert_allclose(r.x, b / 2)
    with pytest.raises(ParameterError):
        cgls(np.eye(2), np.zeros(2))
    with pytest.raises(ParameterError):
        cgls(np.eye(2), np.ones(2), damp=-1.0)


def test_cgls_damped_is_tikhonov():
    A, x, _ = _ill(3)
    b, _ = _noisy(A, x, 0.01)
    r = cgls(A, b, damp=0.01, max_iters=20)
    ref = tikhonov_solve(A, b, None, RegSelector.fixed(0.01)).x
    np.testing.assert_allclose(r.x, ref, atol=1e-6 * np.linalg.norm(ref))


def test_lsqr_dp_stops_at_crossing():
    A, x, _ = _ill(4, decay=-4)
    b, delta = _noisy(A, x, 0.01)
    r = lsqr(A, b, selector=RegSelector.dp(delta))
    res = r.residual_norms
    assert r.stop_reason == "dp_satisfied"
    assert res[-1] <= 1.01 * delta and np.all(res[:-1] > 1.01 * delta)


def test_plain_selector_rules():
    A, x, b = _ill(5)
    assert lsqr(A, b, selector=RegSelector.fixed(4)).iterations == 4
    with pytest.raises(ParameterError):
        lsqr(A, b, selector=RegSelector.gcv())
    with pytest.raises(ParameterError):
        lsqr(A, b, selector=RegSelector.fixed(2.5))
    with pytest.raises(ParameterError):
        lsqr(A, b, selector=RegSelector.dp())
    with pytest.raises(TypeError):
        lsqr(A, b, bogus=1)


@pytest.mark.parametrize("solver", [lsqr, hybrid_lsqr, gk_tikhonov])
def test_residual_monotone(solver):
    A, x, _ = _ill(6, 60, 40, -3)
    b, delta = _noisy(A, x, 0.01)
    r = lsqr(A, b, max_iters=30, keep_iterates=True)
    assert np.all(np.diff(r.residual_norms) <= 1e-12 * np.linalg.norm(b))
    for rec, xd in zip(r.history, r.iterates):
        assert abs(rec.residual_norm - np.linalg.norm(A @ xd - b)) <= 1e-6 * np.linalg.norm(b)
    out = solver(A, b, max_iters=10, selector=RegSelector.fixed(0.0) if solver is not lsqr else None)
    assert out.iterations == 10


# --- hybrids -----------------------------------------------------------------

def test_hybrid_zero_alpha_reduces():
    A, x, _ = _ill(7, 25, 25)
    b, _ = _noisy(A, x, 0.01)
    cfg = IterConfig(max_iters=12, selector=RegSelector.fixed(0.0), keep_iterates=True)
    for hyb, plain in ((hybrid_gmres, gmres), (hybrid_lsqr, lsqr)):
        r1 = hyb(A, b, cfg)
        r2 = plain(A, b, max_iters=12, keep_iterates=True)
        for x1, x2 in zip(r1.iterates, r2.iterates):
            assert np.linalg.norm(x1 - x2) <= 1e-10 * np.linalg.norm(x2)


def test_hybrid_gmres_identity_fixed_alpha():
    b = np.array([1.0, 2.0])
    for solver in (hybrid_gmres, arnoldi_tikhonov):
        r = solver(np.eye(2), b, selector=RegSelector.fixed(0.5))
        np.testing.assert_allclose(r.x, b / 1.5)


def test_hybrid_lsqr_fixed_alpha_matches_tikhonov():
    rng = np.random.default_rng(8)
    A, b = rng.standard_normal((20, 15)), rng.standard_normal(20)
    ref = tikhonov_solve(A, b, None, RegSelector.fixed(0.3)).x
    for solver in (hybrid_lsqr, gk_tikhonov):
        r = solver(A, b, selector=RegSelector.fixed(0.3), max_iters=15, reorth=True)
        np.testing.assert_allclose(r.x, ref, atol=1e-6 * np.linalg.norm(ref))


def test_hybrid_gcv_alpha_decreases_on_consistent_system():
    A = np.diag([1.0, 0.1, 0.01])
    b = A @ np.ones(3)
    r = hybrid_gmres(A, b, selector=RegSelector.gcv())
    alphas = r.regparams
    assert np.all(np.diff(alphas) <= 0)


def test_hybrid_lsqr_dp_alpha_hits_target():
    A, x, _ = _ill(9, 60, 40, -4)
    b, delta = _noisy(A, x, 0.02)
    r = hybrid_lsqr(A, b, selector=RegSelector.dp(delta), max_iters=25)
    last = r.history[-1]
    assert last.note == ""
    assert abs(last.residual_norm - 1.01 * delta) <= 1e-6 * 1.01 * delta
    assert r.stop_reason == "max_iters"


def test_dp_newton_in_hybrid_matches_bisection():
    A, x, _ = _ill(10, 60, 40, -4)
    b, delta = _noisy(A, x, 0.02)
    from regulus.factorizations import GolubKahanState
    st = GolubKahanState(A, b)
    for _ in range(20):
        st.step()
    f = np.zeros(21)
    f[0] = np.linalg.norm(b)
    P = ProjectedProblem.from_matrix(st.B, f, 60)
    r = hybrid_lsqr(A, b, selector=RegSelector.dp(delta), max_iters=20)
    assert r.regparams[-1] == pytest.approx(dp_bisection_tikhonov(P, delta), rel=1e-8)


def test_hybrid_dp_fallback_recorded():
    A, x, _ = _ill(11, 40, 30, -6)
    b, delta = _noisy(A, x, 0.01)
    r = hybrid_lsqr(A, b, selector=RegSelector.dp(delta), max_iters=15)
    assert "infeasible" in r.history[0].note


def test_final_variants_match_hybrid_at_matched_alpha():
    A, x, _ = _ill(12, 30, 30)
    b, _ = _noisy(A, x, 0.01)
    for fin, hyb in ((arnoldi_tikhonov, hybrid_gmres), (gk_tikhonov, hybrid_lsqr)):
        r1 = fin(A, b, selector=RegSelector.gcv(), max_iters=10)
        r2 = hyb(A, b, selector=RegSelector.fixed(r1.info["alpha"]), max_iters=10)
        assert np.linalg.norm(r1.x - r2.x) <= 1e-8 * np.linalg.norm(r2.x)
        assert r1.iterations == 10


def test_truth_history_and_callback():
    A, x, _ = _ill(13)
    b, _ = _noisy(A, x, 0.01)
    seen = []
    r = lsqr(A, b, max_iters=5, x_true=x, callback=lambda rec, xd: seen.append(rec.iteration))
    assert seen == [1, 2, 3, 4, 5]
    errs = r.relative_errors
    assert np.all(np.isfinite(errs))
    assert errs[-1] == pytest.approx(np.linalg.norm(r.x - x) / np.linalg.norm(x))
