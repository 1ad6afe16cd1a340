"""Asymptotic covariance of ``sqrt(n) (N_n / n - p)`` over an index window.

Pipeline per pair of targets ``w = (i, j)``, ``v = (s, t)``:

* drift sums ``P``, ``a``, ``S`` and the product term ``A``;
* the jump second moment ``B = lim E[(xi^w . Delta)(xi^v . Delta) | F_n]``;
* ``C = A + B`` and ``Ctilde = C / (1 + delta_w + delta_v)``;
* ``FinalCov = Xi^{-1} Ctilde Xi^{-T}``.

The per-target scale constants of the martingales cancel between the two
sides of the last formula, so no Gamma function is ever evaluated.

B variants
----------
Every step is one attachment event.  An in-event hits a node of degree
``(r, q)`` with rate ``c1 (r + lam) p_rq`` and moves it to ``(r+1, q)`` while a
``(0, 1)`` node is born; an out-event hits ``(r, q)`` with rate
``c2 (q + mu) p_rq``, moves it to ``(r, q+1)`` and a ``(1, 0)`` node is born.

``corrected``
    Each event counted once (families III and IV below), with the birth
    coefficient ``xi_10`` on out-events.
``verbatim``
    Two birth compensation terms plus four event
    families indexed both by the old degree (III, IV) and by the new degree
    (I, II), with ``xi_01`` as birth coefficient in all four.
``swapped``
    As ``verbatim`` but with ``xi_10`` in the out-event families II and IV.

Tail handling
-------------
Outside the support of ``xi`` the factors are constant, so an event family
beyond a finite box contributes ``(birth coeff)^2 * (total rate - box rate)``
with total rate ``alpha`` (in-events) or ``gamma`` (out-events).  ``tail =
"closed"`` adds that remainder exactly; ``tail = "truncate"`` drops it and
raises :class:`BoxTooSmall` when it exceeds ``remainder_tol``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BoxTooSmall
from .limits import PGrid, p_grid
from .martingale import XiMatrix, XiTable, xi_matrix
from .params import IndexWindow, ModelParams

VARIANTS = ("corrected", "verbatim", "swapped")
TAILS = ("closed", "truncate")
DEFAULT_REMAINDER_TOL = 1e-6


@dataclass(frozen=True)
class DriftTerms:
    """``P = sum xi p``, ``a = alpha xi_01 + gamma xi_10`` and the compensator sum ``S``."""

    P: float
    a: float
    S: float

    @property
    def mean_zero_residual(self) -> float:
        return self.S - self.a + self.P


def drift_terms(params: ModelParams, pgrid: PGrid, xi: XiTable) -> DriftTerms:
    i, j = xi.target
    c1, c2, lam, mu = params.c1, params.c2, params.lam, params.mu
    P = S = 0.0
    for k in range(i + 1):
        for l in range(j + 1):
            pkl = pgrid[k, l]
            P += xi[k, l] * pkl
            S += pkl * (
                params.delta(k, l) * xi[k, l]
                - c1 * (k + lam) * xi[k + 1, l]
                - c2 * (l + mu) * xi[k, l + 1]
            )
    a = params.alpha * xi[0, 1] + params.gamma * xi[1, 0]
    return DriftTerms(P, a, S)


def A_term(dw: DriftTerms, dv: DriftTerms) -> float:
    ew = dw.S - dw.a
    ev = dv.S - dv.a
    return ew * ev + ew * dv.P + ev * dw.P


@dataclass(frozen=True)
class BTerms:
    """B over a set of targets: ``value[w, v]`` plus tail bookkeeping."""

    variant: str
    tail: str
    box: tuple[int, int]
    value: np.ndarray
    remainder: np.ndarray  # tail contribution added (closed) or dropped (truncate)
    rate_deficit: dict[str, float]  # total rate minus in-box rate, per event family


def _family_inputs(params: ModelParams, p: np.ndarray, X: np.ndarray, variant: str):
    """Per-family (weight[r, q], factors[target, r, q], birth[target], total rate)."""
    c1, c2, lam, mu = params.c1, params.c2, params.lam, params.mu
    R, Q = p.shape
    r = np.arange(R)[:, None]
    q = np.arange(Q)[None, :]
    here = X[:, :R, :Q]
    right = X[:, 1 : R + 1, :Q]
    up = X[:, :R, 1 : Q + 1]
    left = np.zeros_like(here)
    left[:, 1:, :] = X[:, : R - 1, :Q]
    down = np.zeros_like(here)
    down[:, :, 1:] = X[:, :R, : Q - 1]
    x01 = X[:, 0, 1]
    x10 = X[:, 1, 0]
    out_birth = x01 if variant == "verbatim" else x10
    p_left = np.zeros_like(p)
    p_left[1:, :] = p[:-1, :]
    p_down = np.zeros_like(p)
    p_down[:, 1:] = p[:, :-1]
    fam = {
        "III": (c1 * (r + lam) * p, right + x01[:, None, None] - here, x01, params.alpha),
        "IV": (c2 * (q + mu) * p, up + out_birth[:, None, None] - here, out_birth, params.gamma),
    }
    if variant != "corrected":
        fam["I"] = (
            c1 * (r - 1 + lam) * p_left, here + x01[:, None, None] - left, x01, params.alpha,
        )
        fam["II"] = (
            c2 * (q - 1 + mu) * p_down, here + out_birth[:, None, None] - down, out_birth, params.gamma,
        )
    return fam


def b_terms(
    params: ModelParams,
    pgrid: PGrid,
    tables: "list[XiTable] | tuple[XiTable, ...]",
    variant: str = "corrected",
    *,
    tail: str = "closed",
    box: tuple[int, int] | None = None,
    remainder_tol: float = DEFAULT_REMAINDER_TOL,
) -> BTerms:
    """B for every pair of the given targets (matrix form of :func:`B_term`)."""
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if tail not in TAILS:
        raise ValueError(f"tail must be one of {TAILS}")
    imax = max(t.target[0] for t in tables)
    jmax = max(t.target[1] for t in tables)
    if box is None:
        box = (imax + 2, jmax + 2) if tail == "closed" else (imax + 10, jmax + 10)
    R, Q = box
    if R < imax + 1 or Q < jmax + 1:
        raise ValueError(f"box {box} must reach ({imax + 1}, {jmax + 1})")
    if R > pgrid.rmax or Q > pgrid.qmax:
        raise ValueError(f"p grid {pgrid.rmax}x{pgrid.qmax} does not cover box {box}")
    p = pgrid.p[: R + 1, : Q + 1]
    X = np.stack([t.padded(R + 2, Q + 2) for t in tables])
    value = np.zeros((len(tables), len(tables)))
    remainder = np.zeros_like(value)
    deficit = {}
    for name, (w, f, birth, total) in _family_inputs(params, p, X, variant).items():
        value += np.einsum("arq,brq,rq->ab", f, f, w)
        missing = total - float(w.sum())
        deficit[name] = missing
        remainder += np.outer(birth, birth) * missing
    if variant != "corrected":
        x01 = X[:, 0, 1]
        x10 = X[:, 1, 0]
        value += (params.alpha + params.c1 * params.lam * pgrid[0, 1]) * np.outer(x01, x01)
        value += (params.gamma + params.c2 * params.mu * pgrid[1, 0]) * np.outer(x10, x10)
    if tail == "closed":
        value = value + remainder
    elif np.max(np.abs(remainder)) > remainder_tol:
        raise BoxTooSmall(
            f"box {box} leaves tail remainder {np.max(np.abs(remainder)):.3g} > {remainder_tol:g}"
        )
    return BTerms(variant, tail, (R, Q), value, remainder, deficit)


def B_term(
    params: ModelParams,
    pgrid: PGrid,
    xi_w: XiTable,
    xi_v: XiTable,
    variant: str = "corrected",
    **kw,
) -> float:
    """Jump second moment ``B(w, v)`` for one pair of targets."""
    return float(b_terms(params, pgrid, [xi_w, xi_v], variant, **kw).value[0, 1])


@dataclass
class CovarianceModel:
    params: ModelParams
    window: IndexWindow
    variant: str
    xi: XiMatrix
    drift: tuple[DriftTerms, ...]
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Ctilde: np.ndarray
    final: np.ndarray
    b_terms: BTerms
    B_by_variant: dict[str, np.ndarray] = field(default_factory=dict)
    final_by_variant: dict[str, np.ndarray] = field(default_factory=dict)
    pgrid: PGrid | None = None

    @property
    def coords(self):
        return self.window.coords

    def diagnostics(self) -> dict:
        ev = np.linalg.eigvalsh((self.final + self.final.T) / 2)
        return {
            "symmetry_error": float(np.max(np.abs(self.final - self.final.T))),
            "min_eigenvalue": float(ev[0]),
            "xi_det": self.xi.det(),
            "max_mean_zero_residual": max(abs(d.mean_zero_residual) for d in self.drift),
            "box": list(self.b_terms.box),
            "tail": self.b_terms.tail,
            "tail_rate_deficit": dict(sorted(self.b_terms.rate_deficit.items())),
            "max_tail_remainder": float(np.max(np.abs(self.b_terms.remainder))),
            "pgrid": self.pgrid.diagnostics() if self.pgrid is not None else None,
            "scale_cancellation": (
                "FinalCov = Xi^-1 Ctilde Xi^-T; per-target martingale scale "
                "constants cancel and are not evaluated"
            ),
        }


def _sandwich(xi: XiMatrix, ct: np.ndarray) -> np.ndarray:
    y = xi.solve(ct)
    return xi.solve(y.T).T


def final_covariance(
    params: ModelParams,
    window: IndexWindow | tuple[int, int],
    pgrid: PGrid | None = None,
    variant: str = "corrected",
    *,
    tail: str = "closed",
    box: tuple[int, int] | None = None,
    remainder_tol: float = DEFAULT_REMAINDER_TOL,
) -> CovarianceModel:
    """Assemble A, B, C, Ctilde and FinalCov for every pair of window coordinates.

    All three B variants are evaluated; ``variant`` selects the one that
    feeds ``C`` and ``final``.  The other two are kept in ``B_by_variant`` and
    ``final_by_variant`` for comparison.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if not isinstance(window, IndexWindow):
        window = IndexWindow(*window)
    if box is None:
        box = (window.imax + 2, window.jmax + 2) if tail == "closed" else (window.imax + 10, window.jmax + 10)
    if pgrid is None or pgrid.rmax < box[0] or pgrid.qmax < box[1]:
        pgrid = p_grid(params, max(box[0], 1), max(box[1], 1))
    xm = xi_matrix(params, window)
    drift = tuple(drift_terms(params, pgrid, t) for t in xm.tables)
    K = len(drift)
    A = np.array([[A_term(drift[a], drift[b]) for b in range(K)] for a in range(K)])
    dl = np.array([params.delta(i, j) for i, j in window.coords])
    denom = 1.0 + dl[:, None] + dl[None, :]
    B_by, final_by, chosen = {}, {}, None
    for name in VARIANTS:
        bt = b_terms(params, pgrid, xm.tables, name, tail=tail, box=box, remainder_tol=remainder_tol)
        B_by[name] = bt.value
        final_by[name] = _sandwich(xm, (A + bt.value) / denom)
        if name == variant:
            chosen = bt
    B = chosen.value
    C = A + B
    Ct = C / denom
    return CovarianceModel(
        params=params,
        window=window,
        variant=variant,
        xi=xm,
        drift=drift,
        A=A,
        B=B,
        C=C,
        Ctilde=Ct,
        final=final_by[variant],
        b_terms=chosen,
        B_by_variant=B_by,
        final_by_variant=final_by,
        pgrid=pgrid,
    )
