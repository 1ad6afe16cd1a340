import numpy as np
import pytest

from dpa_clt.covariance import A_term, B_term, b_terms, final_covariance
from dpa_clt.errors import BoxTooSmall
from dpa_clt.limits import p_grid
from dpa_clt.martingale import b_table, xi_table
from dpa_clt.params import IndexWindow, P_STAR, validate
from dpa_clt.sim import grow
from oracles import lyapunov_covariance

PARAMS = [P_STAR, validate(0.3, None, 0.4, 2.5), validate(0.8, None, 3.0, 0.2)]


@pytest.mark.parametrize("params", PARAMS)
@pytest.mark.parametrize("window", [(1, 1), (2, 2), (3, 2)])
def test_matches_lyapunov_oracle(params, window):
    model = final_covariance(params, window)
    ref = lyapunov_covariance(params, IndexWindow(*window))
    assert np.max(np.abs(model.final - ref)) < 1e-7


def test_pstar_01_variance():
    m = final_covariance(P_STAR, (1, 1))
    assert m.final[0, 0] == pytest.approx(24 / 49 / 2.5, abs=1e-14)
    # the two literal readings of the jump sum, frozen for regression
    assert m.final_by_variant["verbatim"][0, 0] == pytest.approx(0.824, abs=1e-3)
    assert m.final_by_variant["swapped"][0, 0] == pytest.approx(0.653, abs=1e-3)


@pytest.mark.parametrize("params", PARAMS)
def test_drift_identity(params):
    m = final_covariance(params, (2, 2))
    for dw in m.drift:
        assert abs(dw.mean_zero_residual) < 1e-12
        for dv in m.drift:
            assert abs(A_term(dw, dv) + dw.P * dv.P) <= 1e-6


@pytest.mark.parametrize("params", PARAMS)
@pytest.mark.parametrize("window", [(1, 1), (2, 2), (3, 3)])
def test_symmetric_positive_definite(params, window):
    m = final_covariance(params, window)
    d = m.diagnostics()
    assert d["xi_det"] == 1.0
    assert d["symmetry_error"] < 1e-12
    assert d["min_eigenvalue"] > 0


def test_truncated_box():
    pg = p_grid(P_STAR, 3000, 3000)
    tables = [xi_table(P_STAR, 1, 1), xi_table(P_STAR, 2, 0)]
    with pytest.raises(BoxTooSmall):
        b_terms(P_STAR, pg, tables, tail="truncate")
    closed = b_terms(P_STAR, pg, tables)
    wide = b_terms(P_STAR, pg, tables, tail="truncate", box=(3000, 3000), remainder_tol=1e-2)
    assert np.max(np.abs(wide.value - closed.value)) <= np.max(np.abs(wide.remainder)) + 1e-12
    assert np.max(np.abs(wide.remainder)) < 1e-2


def test_scale_constants_cancel():
    # rescale every martingale by its actual lead coefficient at n = 1e6
    prm = validate(0.3, None, 0.4, 2.5)
    w = IndexWindow(2, 2)
    m = final_covariance(prm, w)
    n = 10**6
    lead = np.array([b_table(prm, i, j, n, keep=[n]).at(n)[i, j] for i, j in w.coords])
    assert lead.max() / lead.min() > 1e3
    D = np.diag(lead)
    K = D @ m.xi.matrix
    sigma = D @ m.Ctilde @ D
    back = np.linalg.solve(K, np.linalg.solve(K, sigma).T).T
    assert np.allclose(back, m.final, rtol=1e-9, atol=1e-12)


@pytest.mark.slow
@pytest.mark.parametrize("targets", [((0, 1), (0, 1)), ((1, 1), (1, 1)), ((0, 1), (1, 1))])
def test_jump_second_moment_along_a_path(targets):
    n = 10**5
    res = grow(P_STAR, n, 2024, trace_from=n // 2)
    pg = p_grid(P_STAR, 8, 8)
    xw, xv = (xi_table(P_STAR, *t) for t in targets)
    y = res.trace.jump(xw.values) * res.trace.jump(xv.values)
    batches = y[: len(y) // 50 * 50].reshape(50, -1).mean(axis=1)
    se = batches.std(ddof=1) / np.sqrt(50)
    assert abs(y.mean() - B_term(P_STAR, pg, xw, xv)) <= 3 * se
