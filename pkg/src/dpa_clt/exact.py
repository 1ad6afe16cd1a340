"""Exact finite-n oracles: the expected-count recursion and full enumeration.

The count process ``N_n`` is itself a Markov chain: the law of the next step
depends on the graph only through how many nodes carry each degree pair.  So
exact distributions can be enumerated over count grids instead of labelled
graphs, which keeps the state space tiny for ``n <= 6``.
"""

from __future__ import annotations

from collections import defaultdict

import numpy as np
from numba import njit

from .errors import GridTooSmall, StateSpaceExplosion
from .params import ModelParams

ENUM_CAP = 6

State = tuple[tuple[int, int, int], ...]


@njit(cache=True)
def _nu_kernel(n_max, alpha, gamma, c1, c2, lam, mu, rows, cols):
    nu = np.zeros((n_max + 1, rows, cols))
    if rows > 1 and cols > 1:
        nu[1, 1, 1] = 1.0
    for n in range(1, n_max):
        cur = nu[n]
        nxt = nu[n + 1]
        for i in range(rows):
            for j in range(cols):
                d = c1 * (i + lam) + c2 * (j + mu)
                v = (1.0 - d / n) * cur[i, j]
                if i > 0:
                    v += c1 * (i - 1 + lam) / n * cur[i - 1, j]
                if j > 0:
                    v += c2 * (j - 1 + mu) / n * cur[i, j - 1]
                if i == 0 and j == 1:
                    v += alpha
                elif i == 1 and j == 0:
                    v += gamma
                nxt[i, j] = v
    return nu


def nu_recursion(
    params: ModelParams,
    n_max: int,
    imax: int | None = None,
    jmax: int | None = None,
    *,
    require_full_support: bool = False,
) -> np.ndarray:
    """Expected counts ``nu[n, i, j] = E N_n(i, j)`` for ``1 <= n <= n_max``.

    Row ``n = 0`` is all zeros.  Bounds default to ``n_max`` (full support:
    no degree can exceed ``n``).  Smaller bounds are still exact because a
    cell only feeds cells with larger indices; pass
    ``require_full_support=True`` to insist on the whole support.
    """
    n_max = int(n_max)
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    imax = n_max if imax is None else int(imax)
    jmax = n_max if jmax is None else int(jmax)
    if imax < 0 or jmax < 0:
        raise GridTooSmall("grid bounds must be nonnegative")
    if require_full_support and (imax < n_max or jmax < n_max):
        raise GridTooSmall(f"bounds ({imax}, {jmax}) do not cover support up to {n_max}")
    p = params
    return _nu_kernel(n_max, p.alpha, p.gamma, p.c1, p.c2, p.lam, p.mu, imax + 1, jmax + 1)


def encode(cells: dict[tuple[int, int], int]) -> State:
    """Canonical key of a count grid: sorted nonzero ``(i, j, count)`` triples."""
    return tuple(sorted((i, j, c) for (i, j), c in cells.items() if c))


def transitions(params: ModelParams, state: State, n: int) -> list[tuple[float, State]]:
    """One-step successors of a count-grid ``state`` with ``n`` nodes."""
    cells = {(i, j): c for i, j, c in state}
    out = []
    for (r, q), c in cells.items():
        w_in = params.c1 * (r + params.lam) * c / n
        w_out = params.c2 * (q + params.mu) * c / n
        for w, moved, born in (
            (w_in, (r + 1, q), (0, 1)),
            (w_out, (r, q + 1), (1, 0)),
        ):
            nxt = dict(cells)
            nxt[(r, q)] -= 1
            nxt[moved] = nxt.get(moved, 0) + 1
            nxt[born] = nxt.get(born, 0) + 1
            out.append((w, encode(nxt)))
    return out


def enumerate_exact(params: ModelParams, n_max: int) -> list[dict[State, float]]:
    """Exact law of the count grid at ``n = 1 .. n_max`` (list index ``n - 1``)."""
    if n_max > ENUM_CAP:
        raise StateSpaceExplosion(f"exact enumeration is capped at n = {ENUM_CAP}")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    dist: dict[State, float] = {((1, 1, 1),): 1.0}
    out = [dist]
    for n in range(1, n_max):
        nxt: dict[State, float] = defaultdict(float)
        for state, pr in dist.items():
            for w, s2 in transitions(params, state, n):
                nxt[s2] += pr * w
        dist = dict(nxt)
        out.append(dist)
    return out


def exact_means(dist: dict[State, float], imax: int, jmax: int) -> np.ndarray:
    """``E N(i, j)`` under ``dist`` on a dense ``(imax+1, jmax+1)`` grid."""
    m = np.zeros((imax + 1, jmax + 1))
    for state, pr in dist.items():
        for i, j, c in state:
            if i <= imax and j <= jmax:
                m[i, j] += pr * c
    return m


def state_array(state: State, imax: int, jmax: int) -> np.ndarray:
    a = np.zeros((imax + 1, jmax + 1))
    for i, j, c in state:
        a[i, j] = c
    return a
