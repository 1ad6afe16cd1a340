import numpy as np
import pytest

from dpa_clt.errors import GridTooSmall, StateSpaceExplosion
from dpa_clt.exact import enumerate_exact, exact_means, nu_recursion, state_array, transitions
from dpa_clt.martingale import b_table
from dpa_clt.params import P_STAR, validate

PARAMS = [P_STAR, validate(0.3, None, 0.4, 2.5), validate(0.8, None, 3.0, 0.2)]


def test_n2_has_two_equiprobable_states():
    dist = enumerate_exact(P_STAR, 2)[-1]
    assert dist == {((0, 1, 1), (2, 1, 1)): 0.5, ((1, 0, 1), (1, 2, 1)): 0.5}


@pytest.mark.parametrize("params", PARAMS)
def test_laws_are_normalised(params):
    for n, dist in enumerate(enumerate_exact(params, 6), start=1):
        assert sum(dist.values()) == pytest.approx(1.0, abs=1e-13)
        for state in dist:
            assert sum(c for _, _, c in state) == n


@pytest.mark.parametrize("params", PARAMS)
def test_transition_weights_sum_to_one(params):
    for n, dist in enumerate(enumerate_exact(params, 5), start=1):
        for state in dist:
            assert sum(w for w, _ in transitions(params, state, n)) == pytest.approx(1.0, abs=1e-13)


@pytest.mark.parametrize("params", PARAMS)
def test_nu_matches_enumeration(params):
    nu = nu_recursion(params, 6)
    for n, dist in enumerate(enumerate_exact(params, 6), start=1):
        assert np.max(np.abs(exact_means(dist, 6, 6) - nu[n])) <= 1e-12


def test_nu_totals():
    nu = nu_recursion(validate(0.35, None, 1.7, 0.6), 200)
    n = np.arange(201)
    assert np.allclose(nu.sum(axis=(1, 2)), n)
    i = np.arange(201)[:, None]
    assert np.allclose((nu * i).sum(axis=(1, 2)), n)


def test_truncated_window_is_exact():
    full = nu_recursion(P_STAR, 50)
    part = nu_recursion(P_STAR, 50, 3, 2)
    assert np.array_equal(part, full[:, :4, :3])
    with pytest.raises(GridTooSmall):
        nu_recursion(P_STAR, 50, 3, 2, require_full_support=True)


def test_enumeration_cap():
    with pytest.raises(StateSpaceExplosion):
        enumerate_exact(P_STAR, 7)


@pytest.mark.parametrize("params", PARAMS)
@pytest.mark.parametrize("target", [(0, 1), (1, 0), (1, 1), (2, 1)])
def test_martingale_has_zero_drift(params, target):
    i, j = target
    bt = b_table(params, i, j, 40)
    n0 = bt.n0
    nu = nu_recursion(params, 40, i, j)
    dists = enumerate_exact(params, 5)
    for n in range(max(n0, 1), 5):
        b_now, b_next = bt.at(n), bt.at(n + 1)
        for state in dists[n - 1]:
            m_now = np.sum(b_now * (state_array(state, 8, 8)[: i + 1, : j + 1] - nu[n]))
            m_next = sum(
                w * np.sum(b_next * (state_array(s2, 8, 8)[: i + 1, : j + 1] - nu[n + 1]))
                for w, s2 in transitions(params, state, n)
            )
            assert m_next == pytest.approx(m_now, abs=1e-10)
