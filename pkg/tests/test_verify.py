import json

import numpy as np
import pytest

from dpa_clt.errors import ZeroPredictedVariance
from dpa_clt.params import P_STAR
from dpa_clt.sim import rng_for
from dpa_clt.verify import (
    adjudicate,
    concentration_check,
    jackknife_covariance,
    ks_normality,
    mahalanobis_squares,
    run_ensemble,
    variance_floor_check,
)


def test_single_run_flags_insufficient_replications():
    rep = run_ensemble(P_STAR, 2000, 1, 3, (1, 1))
    assert rep.insufficient_replications
    d = rep.to_dict()
    assert d["checkpoints"][0]["cov"] is None
    assert d["checkpoints"][0]["var_z"] == [None, None, None]


def test_ks_calibration():
    rng = rng_for(5)
    pvals = [ks_normality(rng.normal(0, 1.5, 400), 2.25)[1] for _ in range(200)]
    frac = np.mean(np.array(pvals) < 0.05)
    assert 0.02 <= frac <= 0.10


def test_ks_degenerate_inputs():
    stat, p = ks_normality(np.full(200, 50.0), 1.0)
    assert stat == pytest.approx(1.0) and p < 1e-10
    stat, _ = ks_normality(np.zeros(200), 1.0)
    assert stat == pytest.approx(0.5)
    with pytest.raises(ZeroPredictedVariance):
        ks_normality(np.zeros(200), 0.0)
    with pytest.raises(ValueError):
        ks_normality(np.zeros(99), 1.0)


def test_jackknife_matches_brute_force():
    z = rng_for(9).normal(size=(40, 3))
    cov, se = jackknife_covariance(z)
    assert np.allclose(cov, np.cov(z, rowvar=False))
    reps = np.array([np.cov(np.delete(z, k, axis=0), rowvar=False) for k in range(40)])
    brute = np.sqrt(39 / 40 * ((reps - reps.mean(axis=0)) ** 2).sum(axis=0))
    assert np.allclose(se, brute)


def test_mahalanobis_whitening():
    cov = np.array([[2.0, 0.5], [0.5, 1.0]])
    z = rng_for(1).multivariate_normal([0, 0], cov, size=20000)
    d2 = mahalanobis_squares(z, cov)
    assert d2.mean() == pytest.approx(2.0, abs=0.05)
    assert mahalanobis_squares(np.array([[1.0, 0.0]]), np.eye(2))[0] == 1.0


def test_concentration_rate_monotone_in_C():
    counts = rng_for(2).poisson(1000, size=(300, 4))
    p = np.full(4, 0.1)
    n = 10000
    rates = [concentration_check(counts, n, p, C) for C in (0.0, 0.05, 0.1, 0.2, 1.0)]
    assert rates[0] == 1.0
    assert all(a >= b for a, b in zip(rates, rates[1:]))
    assert concentration_check(counts, n, p, float("inf")) == 0.0


def test_variance_floor():
    counts = rng_for(3).poisson(500, size=(200, 2))
    assert variance_floor_check(counts, 1000) == pytest.approx([0.5, 0.5], rel=0.3)
    with pytest.raises(ValueError):
        variance_floor_check(counts[:50], 1000)


def test_adjudication_rules():
    assert adjudicate({"corrected": 1.0, "verbatim": 9.0}) == {"status": "decided", "matching_variant": "corrected"}
    assert adjudicate({"corrected": 1.0, "verbatim": 2.0})["status"] == "inconclusive"
    assert adjudicate({"corrected": 7.0, "verbatim": 9.0})["status"] == "none"


def test_worker_count_does_not_change_report():
    a = run_ensemble(P_STAR, 3000, 120, 17, (1, 1), workers=1, checkpoints=[1500])
    b = run_ensemble(P_STAR, 3000, 120, 17, (1, 1), workers=3, checkpoints=[1500])
    assert json.dumps(a.to_dict(), sort_keys=True) == json.dumps(b.to_dict(), sort_keys=True)
    assert np.array_equal(a.counts, b.counts)


def test_qq_rows_are_sorted():
    rep = run_ensemble(P_STAR, 2000, 100, 4, (1, 1))
    rows = rep.qq_rows()
    assert len(rows) == 3 * 100
    first = [r[4] for r in rows if (r[0], r[1]) == (0, 1)]
    assert first == sorted(first)
