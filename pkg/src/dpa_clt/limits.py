"""Limiting joint degree distribution and the concentration envelope."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import ModelParams


@dataclass(frozen=True)
class PGrid:
    """Dense table ``p[i, j]`` on ``[0, rmax] x [0, qmax]`` plus tail diagnostics."""

    params: ModelParams
    p: np.ndarray
    mass: float
    mean_in: float
    mean_out: float

    @property
    def rmax(self) -> int:
        return self.p.shape[0] - 1

    @property
    def qmax(self) -> int:
        return self.p.shape[1] - 1

    def __getitem__(self, ij: tuple[int, int]) -> float:
        i, j = ij
        if i < 0 or j < 0:
            return 0.0
        if i > self.rmax or j > self.qmax:
            raise IndexError(f"({i}, {j}) outside the {self.rmax}x{self.qmax} grid")
        return float(self.p[i, j])

    def diagnostics(self) -> dict[str, float]:
        return {
            "rmax": self.rmax,
            "qmax": self.qmax,
            "mass": self.mass,
            "mean_in": self.mean_in,
            "mean_out": self.mean_out,
            "tail_mass": 1.0 - self.mass,
        }


def p_grid(params: ModelParams, rmax: int, qmax: int) -> PGrid:
    """Fill ``p_ij`` by the explicit form of the balance recursion.

    ``p_ij (1 + delta_ij) = alpha 1{(0,1)} + gamma 1{(1,0)}
    + c1 (i-1+lam) p_{i-1,j} + c2 (j-1+mu) p_{i,j-1}``, swept one
    anti-diagonal ``i + j = s`` at a time so both inputs are already known.
    """
    if rmax < 1 or qmax < 1:
        raise ValueError("grid bounds must be >= 1")
    c1, c2, lam, mu = params.c1, params.c2, params.lam, params.mu
    p = np.zeros((rmax + 1, qmax + 1))
    p[0, 1] = params.alpha / (1.0 + params.delta(0, 1))
    p[1, 0] = params.gamma / (1.0 + params.delta(1, 0))
    for s in range(2, rmax + qmax + 1):
        i = np.arange(max(0, s - qmax), min(s, rmax) + 1)
        j = s - i
        acc = np.zeros(len(i))
        has_left = i > 0
        acc[has_left] += c1 * (i[has_left] - 1 + lam) * p[i[has_left] - 1, j[has_left]]
        has_down = j > 0
        acc[has_down] += c2 * (j[has_down] - 1 + mu) * p[i[has_down], j[has_down] - 1]
        p[i, j] = acc / (1.0 + c1 * (i + lam) + c2 * (j + mu))
    ii, jj = np.indices(p.shape)
    return PGrid(
        params=params,
        p=p,
        mass=math.fsum(p.ravel()),
        mean_in=math.fsum((ii * p).ravel()),
        mean_out=math.fsum((jj * p).ravel()),
    )


def concentration_envelope(n: float, C: float) -> float:
    """``C * sqrt(log n / n)``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if C < 0:
        raise ValueError("C must be >= 0")
    return C * math.sqrt(math.log(n) / n)
