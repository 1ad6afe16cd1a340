"""Martingale coefficients ``b`` and their limiting ratios ``xi``.

For a target pair ``(i, j)`` the weights ``b_{k,l,n}`` (``k <= i``, ``l <= j``)
make ``M_n = sum_kl b_{k,l,n} (N_n(k,l) - nu_n(k,l))`` a martingale.  The
ratios ``b_{k,l,n} / b_{i,j,n}`` converge to ``xi_kl``, and ``xi`` over all
targets of a window forms a unit lower-triangular matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.linalg import solve_triangular

from .errors import SingularStep
from .params import IndexWindow, ModelParams


def xi_boundary_row(params: ModelParams, i: int, j: int, k: int) -> float:
    """``xi_kj = (-1)^(i-k) prod_{d=k}^{i-1} (lam + d) / (i - d)``."""
    if not 0 <= k <= i:
        raise ValueError("need 0 <= k <= i")
    out = 1.0
    for d in range(k, i):
        out *= -(params.lam + d) / (i - d)
    return out


def xi_boundary_col(params: ModelParams, i: int, j: int, l: int) -> float:
    """``xi_il = (-1)^(j-l) prod_{r=l}^{j-1} (mu + r) / (j - r)``."""
    if not 0 <= l <= j:
        raise ValueError("need 0 <= l <= j")
    out = 1.0
    for r in range(l, j):
        out *= -(params.mu + r) / (j - r)
    return out


@dataclass(frozen=True)
class XiTable:
    """``xi[k, l]`` for one target; zero outside ``k <= i, l <= j``.

    ``xi[0, 0]`` is forced to 0 (``N(0, 0)`` is identically zero); the value
    the interior recursion would give there is kept in ``raw00``.
    """

    target: tuple[int, int]
    values: np.ndarray
    raw00: float

    def __getitem__(self, kl: tuple[int, int]) -> float:
        k, l = kl
        if 0 <= k < self.values.shape[0] and 0 <= l < self.values.shape[1]:
            return float(self.values[k, l])
        return 0.0

    def padded(self, rows: int, cols: int) -> np.ndarray:
        out = np.zeros((rows, cols))
        r, c = min(rows, self.values.shape[0]), min(cols, self.values.shape[1])
        out[:r, :c] = self.values[:r, :c]
        return out


def xi_interior(params: ModelParams, i: int, j: int, k: int, l: int, right: float, up: float) -> float:
    """One interior step: ``-(c1 (k+lam) xi_{k+1,l} + c2 (l+mu) xi_{k,l+1}) / (delta_ij - delta_kl)``."""
    gap = params.c1 * (i - k) + params.c2 * (j - l)
    return -(params.c1 * (k + params.lam) * right + params.c2 * (l + params.mu) * up) / gap


def xi_table(params: ModelParams, i: int, j: int) -> XiTable:
    if i < 0 or j < 0 or (i, j) == (0, 0):
        raise ValueError("target must be a nonnegative pair other than (0, 0)")
    xi = np.zeros((i + 1, j + 1))
    for k in range(i + 1):
        xi[k, j] = xi_boundary_row(params, i, j, k)
    for l in range(j + 1):
        xi[i, l] = xi_boundary_col(params, i, j, l)
    for k in range(i - 1, -1, -1):
        for l in range(j - 1, -1, -1):
            xi[k, l] = xi_interior(params, i, j, k, l, xi[k + 1, l], xi[k, l + 1])
    raw00 = float(xi[0, 0])
    xi[0, 0] = 0.0
    return XiTable((i, j), xi, raw00)


@njit(cache=True)
def _b_kernel(i, j, n0, n_max, c1, c2, lam, mu, start, keep):
    b = start.copy()
    nxt = np.empty_like(b)
    out = np.zeros((keep.shape[0], i + 1, j + 1))
    kk = 0
    while kk < keep.shape[0] and keep[kk] == n0:
        out[kk] = b
        kk += 1
    for n in range(n0, n_max):
        for k in range(i, -1, -1):
            for l in range(j, -1, -1):
                f = 1.0 - (c1 * (k + lam) + c2 * (l + mu)) / n
                if f == 0.0:
                    return out, n
                v = b[k, l]
                if k < i:
                    v -= c1 * (k + lam) / n * nxt[k + 1, l]
                if l < j:
                    v -= c2 * (l + mu) / n * nxt[k, l + 1]
                nxt[k, l] = v / f
        b, nxt = nxt, b
        while kk < keep.shape[0] and keep[kk] == n + 1:
            out[kk] = b
            kk += 1
    return out, -1


@dataclass(frozen=True)
class BCoefficientTable:
    """``b_{k,l,n}`` for one target, retained at the requested steps."""

    target: tuple[int, int]
    n0: int
    steps: tuple[int, ...]
    values: np.ndarray  # (len(steps), i+1, j+1)
    _pos: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_pos", {n: t for t, n in enumerate(self.steps)})

    def at(self, n: int) -> np.ndarray:
        return self.values[self._pos[n]]

    def ratios(self, n: int) -> np.ndarray:
        b = self.at(n)
        i, j = self.target
        return b / b[i, j]


def start_index(params: ModelParams, i: int, j: int) -> int:
    """First step ``n0 = floor(delta_ij) + 1`` past every vanishing factor."""
    return int(math.floor(params.delta(i, j))) + 1


def b_table(
    params: ModelParams,
    i: int,
    j: int,
    n_max: int,
    *,
    keep=None,
    start: np.ndarray | None = None,
) -> BCoefficientTable:
    """Run the coefficient recursions forward from ``n0`` to ``n_max``.

    ``b_{k,l,n0} = 1`` unless ``start`` is given.  Each step solves for the
    ``n+1`` values in decreasing ``(k, l)`` order, since ``b_{k,l,n+1}`` needs
    ``b_{k+1,l,n+1}`` and ``b_{k,l+1,n+1}``.  ``keep`` lists the steps to retain
    (default: every step).
    """
    n0 = start_index(params, i, j)
    if n_max < n0:
        raise ValueError(f"n_max={n_max} is below the start index {n0}")
    steps = range(n0, n_max + 1) if keep is None else sorted({int(s) for s in keep})
    steps = [s for s in steps if n0 <= s <= n_max]
    b0 = np.ones((i + 1, j + 1)) if start is None else np.asarray(start, dtype=float).copy()
    if b0.shape != (i + 1, j + 1):
        raise ValueError("start has the wrong shape")
    vals, bad = _b_kernel(
        i, j, n0, int(n_max), params.c1, params.c2, params.lam, params.mu,
        b0, np.array(steps, np.int64),
    )
    if bad >= 0:
        raise SingularStep(f"factor 1 - delta/n vanished at n={bad}")
    return BCoefficientTable((i, j), n0, tuple(steps), vals)


@dataclass(frozen=True)
class XiMatrix:
    """Rows: targets ``(i, j)``; columns: cells ``(k, l)``; both over window coords."""

    window: IndexWindow
    matrix: np.ndarray
    tables: tuple[XiTable, ...]

    @property
    def coords(self):
        return self.window.coords

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """``Xi^{-1} rhs`` by forward substitution."""
        return solve_triangular(self.matrix, rhs, lower=True, unit_diagonal=True)

    def inverse(self) -> np.ndarray:
        return self.solve(np.eye(len(self.coords)))

    def det(self) -> float:
        return float(np.prod(np.diag(self.matrix)))


def xi_matrix(params: ModelParams, window: IndexWindow | tuple[int, int]) -> XiMatrix:
    if not isinstance(window, IndexWindow):
        window = IndexWindow(*window)
    coords = window.coords
    tables = tuple(xi_table(params, i, j) for i, j in coords)
    mat = np.array([[t[k, l] for k, l in coords] for t in tables])
    if np.any(np.diag(mat) != 1.0) or np.any(np.triu(mat, 1) != 0):
        raise AssertionError("xi matrix is not unit lower-triangular")
    return XiMatrix(window, mat, tables)
