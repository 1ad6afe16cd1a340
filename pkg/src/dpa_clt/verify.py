"""Simulation ensembles and the statistics that compare them with the limit theory.

Run ``k`` of an ensemble with base seed ``s`` uses generator stream ``k`` of
``s``, so a report depends only on its inputs and never on how runs are
spread over worker processes.  Per-run window counts are gathered in run
order before any reduction.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .covariance import VARIANTS, CovarianceModel, final_covariance
from .errors import ZeroPredictedVariance
from .exact import nu_recursion
from .limits import concentration_envelope, p_grid
from .params import IndexWindow, ModelParams
from .sim import grow, rng_for

SE_LIMIT = 5.0
KS_CRIT_COEF = 1.63  # 1% two-sided asymptotic critical value times sqrt(R)
MAHALANOBIS_QUANTILES = (0.5, 0.9, 0.99)
BOOTSTRAP_REPS = 1000
BOOTSTRAP_STREAM = 2**32  # above every run index
CONCENTRATION_C = 5.0
MIN_RUNS_KS = 100


def _run_chunk(args) -> np.ndarray:
    params, n, seed, window, checkpoints, first, last = args
    out = np.empty((last - first, len(checkpoints), len(window)), np.int64)
    for t, k in enumerate(range(first, last)):
        res = grow(
            params, n, seed, stream=k, window=window, checkpoints=checkpoints, full_counts=False
        )
        out[t] = res.window_counts()
    return out


def simulate_counts(
    params: ModelParams,
    n: int,
    runs: int,
    seed: int,
    window: IndexWindow,
    checkpoints: Sequence[int],
    workers: int = 1,
) -> np.ndarray:
    """Window counts of every run at every checkpoint, shape (runs, checkpoints, coords)."""
    cps = tuple(sorted({int(c) for c in checkpoints}))
    workers = max(1, int(workers))
    if workers == 1 or runs < 2:
        return _run_chunk((params, n, seed, window, cps, 0, runs))
    edges = np.linspace(0, runs, min(workers * 4, runs) + 1).astype(int)
    jobs = [(params, n, seed, window, cps, int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_chunk, jobs))
    return np.concatenate(parts, axis=0)


def ks_normality(z: np.ndarray, variance: float) -> tuple[float, float]:
    """Two-sided KS statistic and asymptotic p-value against N(0, variance)."""
    z = np.asarray(z, dtype=float)
    if not variance > 0 or not math.isfinite(variance):
        raise ZeroPredictedVariance(f"predicted variance {variance!r} is not positive")
    if len(z) < MIN_RUNS_KS:
        raise ValueError(f"KS test needs at least {MIN_RUNS_KS} samples, got {len(z)}")
    res = stats.kstest(z, "norm", args=(0.0, math.sqrt(variance)), method="asymp")
    return float(res.statistic), float(res.pvalue)


def concentration_check(
    counts: np.ndarray, n: int, p: np.ndarray, C: float = CONCENTRATION_C
) -> float:
    """Fraction of runs whose max window deviation ``|N/n - p|`` reaches ``C sqrt(log n / n)``.

    ``counts`` is (runs, coords) and ``p`` the limit over the same coords.
    """
    if math.isinf(C):
        return 0.0
    dev = np.max(np.abs(np.asarray(counts) / n - np.asarray(p)), axis=1)
    return float(np.mean(dev >= concentration_envelope(n, C)))


def variance_floor_check(counts: np.ndarray, n: int) -> np.ndarray:
    """Per-coordinate ``Var(N_n) / n`` from (runs, coords) raw counts."""
    counts = np.asarray(counts, dtype=float)
    if counts.shape[0] < MIN_RUNS_KS:
        raise ValueError(f"variance floor needs at least {MIN_RUNS_KS} runs")
    return counts.var(axis=0, ddof=1) / n


def jackknife_covariance(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sample covariance of the rows of ``z`` and its leave-one-out jackknife SE.

    Uses the rank-one downdate of the scatter matrix, so all ``R`` replicates
    cost one pass.
    """
    R = z.shape[0]
    if R < 3:
        raise ValueError("jackknife needs at least 3 runs")
    d = z - z.mean(axis=0)
    T = d.T @ d
    cov = T / (R - 1)
    reps = (T[None] - (R / (R - 1)) * np.einsum("ka,kb->kab", d, d)) / (R - 2)
    mean_rep = reps.mean(axis=0)
    se = np.sqrt((R - 1) / R * np.sum((reps - mean_rep) ** 2, axis=0))
    return cov, se


def mahalanobis_squares(z: np.ndarray, cov: np.ndarray) -> np.ndarray:
    L = np.linalg.cholesky(cov)
    w = np.linalg.solve(L, z.T)
    return np.sum(w * w, axis=0)


def _mismatch(emp: np.ndarray, pred: np.ndarray, se: np.ndarray) -> float:
    diff = np.abs(emp - pred)
    with np.errstate(divide="ignore", invalid="ignore"):
        units = np.where(se > 0, diff / se, np.where(diff > 0, np.inf, 0.0))
    return float(np.max(units))


def adjudicate(mismatch: dict[str, float], limit: float = SE_LIMIT) -> dict:
    """Which of corrected / verbatim matches within ``limit`` SE."""
    ok = [v for v in ("corrected", "verbatim") if mismatch[v] <= limit]
    if len(ok) == 1:
        return {"status": "decided", "matching_variant": ok[0]}
    return {"status": "inconclusive" if ok else "none", "matching_variant": None}


@dataclass
class CheckpointStats:
    n: int
    mean_z: np.ndarray
    var_z: np.ndarray
    mean_z_tolerance: np.ndarray  # 4 sd / sqrt(R)
    var_over_n: np.ndarray
    bias: np.ndarray  # |nu - n p| / sqrt(n)
    concentration_rate: float
    concentration_envelope: float
    cov: np.ndarray | None = None
    cov_se: np.ndarray | None = None
    mismatch_se: dict[str, float] = field(default_factory=dict)
    adjudication: dict | None = None
    ks: list[dict] | None = None
    mahalanobis: dict | None = None


@dataclass
class EnsembleReport:
    params: ModelParams
    window: IndexWindow
    n: int
    runs: int
    seed: int
    variant: str
    p: np.ndarray
    predicted: dict[str, np.ndarray]
    checkpoints: list[CheckpointStats]
    insufficient_replications: bool
    counts: np.ndarray = field(repr=False)

    @property
    def final(self) -> CheckpointStats:
        return self.checkpoints[-1]

    def at(self, n: int) -> CheckpointStats:
        for c in self.checkpoints:
            if c.n == n:
                return c
        raise KeyError(n)

    def z(self, n: int | None = None) -> np.ndarray:
        n = self.n if n is None else n
        k = [c.n for c in self.checkpoints].index(n)
        return math.sqrt(n) * (self.counts[:, k, :] / n - self.p)

    def to_dict(self) -> dict:
        return _clean(
            {
                "params": self.params.as_dict(),
                "window": [self.window.imax, self.window.jmax],
                "coords": [list(c) for c in self.window.coords],
                "n": self.n,
                "runs": self.runs,
                "seed": self.seed,
                "variant": self.variant,
                "insufficient_replications": self.insufficient_replications,
                "p": self.p,
                "predicted_cov": self.predicted,
                "thresholds": {
                    "se_limit": SE_LIMIT,
                    "ks_critical": KS_CRIT_COEF / math.sqrt(self.runs),
                    "concentration_C": CONCENTRATION_C,
                },
                "checkpoints": [c.__dict__ for c in self.checkpoints],
            }
        )

    def qq_rows(self) -> list[tuple[int, int, int, float, float]]:
        """Per coordinate: sorted standardized Z against normal quantiles."""
        z = self.z()
        pred = self.predicted[self.variant]
        R = z.shape[0]
        q = stats.norm.ppf((np.arange(1, R + 1) - 0.5) / R)
        rows = []
        for a, (i, j) in enumerate(self.window.coords):
            s = np.sort(z[:, a]) / math.sqrt(pred[a, a])
            rows.extend((i, j, k + 1, float(q[k]), float(s[k])) for k in range(R))
        return rows


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def _checkpoint_stats(
    counts: np.ndarray,
    n: int,
    p: np.ndarray,
    nu: np.ndarray,
    predicted: dict[str, np.ndarray],
    variant: str,
    seed: int,
) -> CheckpointStats:
    R = counts.shape[0]
    z = math.sqrt(n) * (counts / n - p)
    var_z = z.var(axis=0, ddof=1) if R >= 2 else np.full(len(p), np.nan)
    cs = CheckpointStats(
        n=n,
        mean_z=z.mean(axis=0),
        var_z=var_z,
        mean_z_tolerance=4.0 * np.sqrt(var_z / R),
        var_over_n=counts.var(axis=0, ddof=1) / n if R >= 2 else np.full(len(p), np.nan),
        bias=np.abs(nu - n * p) / math.sqrt(n),
        concentration_rate=concentration_check(counts, n, p) if n >= 2 else float("nan"),
        concentration_envelope=concentration_envelope(n, CONCENTRATION_C) if n >= 2 else float("nan"),
    )
    if R < 3:
        return cs
    cov, se = jackknife_covariance(z)
    cs.cov, cs.cov_se = cov, se
    cs.mismatch_se = {v: _mismatch(cov, predicted[v], se) for v in VARIANTS}
    cs.adjudication = adjudicate(cs.mismatch_se)
    pred = predicted[variant]
    if R >= MIN_RUNS_KS:
        crit = KS_CRIT_COEF / math.sqrt(R)
        cs.ks = []
        for a in range(len(p)):
            stat, pv = ks_normality(z[:, a], pred[a, a])
            cs.ks.append({"statistic": stat, "pvalue": pv, "critical_1pct": crit, "pass": stat < crit})
        d2 = mahalanobis_squares(z, pred)
        rng = rng_for(seed, BOOTSTRAP_STREAM)
        boot = np.quantile(
            d2[rng.integers(0, R, size=(BOOTSTRAP_REPS, R))], MAHALANOBIS_QUANTILES, axis=1
        )
        emp = np.quantile(d2, MAHALANOBIS_QUANTILES)
        ref = stats.chi2.ppf(MAHALANOBIS_QUANTILES, df=len(p))
        bse = boot.std(axis=1, ddof=1)
        cs.mahalanobis = {
            "dof": len(p),
            "quantiles": [
                {
                    "level": lv,
                    "empirical": emp[t],
                    "reference": ref[t],
                    "bootstrap_se": bse[t],
                    "within_3se": bool(abs(emp[t] - ref[t]) <= 3 * bse[t]),
                }
                for t, lv in enumerate(MAHALANOBIS_QUANTILES)
            ],
        }
    return cs


def run_ensemble(
    params: ModelParams,
    n: int,
    runs: int,
    seed: int,
    window: IndexWindow | tuple[int, int],
    *,
    workers: int = 1,
    checkpoints: Sequence[int] | None = None,
    variant: str = "corrected",
    model: CovarianceModel | None = None,
) -> EnsembleReport:
    """Grow ``runs`` graphs to ``n`` nodes and summarize them against the limit theory.

    Statistics are computed at every checkpoint (``n`` is always included);
    Z is centred at ``n p``.  With fewer than 3 runs only means are reported
    and ``insufficient_replications`` is set.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if runs < 1:
        raise ValueError("runs must be >= 1")
    if not isinstance(window, IndexWindow):
        window = IndexWindow(*window)
    cps = sorted({int(c) for c in (checkpoints or ())} | {int(n)})
    if model is None:
        model = final_covariance(params, window, variant=variant)
    pg = model.pgrid if model.pgrid is not None else p_grid(params, window.imax + 2, window.jmax + 2)
    p = np.asarray(window.flat(pg.p), dtype=float)
    nu_all = nu_recursion(params, n, window.imax, window.jmax)
    counts = simulate_counts(params, n, runs, seed, window, cps, workers)
    per = [
        _checkpoint_stats(
            counts[:, k, :], c, p, np.asarray(window.flat(nu_all[c])), model.final_by_variant, variant, seed
        )
        for k, c in enumerate(cps)
    ]
    return EnsembleReport(
        params=params,
        window=window,
        n=int(n),
        runs=int(runs),
        seed=int(seed),
        variant=variant,
        p=p,
        predicted=dict(model.final_by_variant),
        checkpoints=per,
        insufficient_replications=runs < 3,
        counts=counts,
    )
