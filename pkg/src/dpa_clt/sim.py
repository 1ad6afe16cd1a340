"""Growth of a directed preferential attachment graph with degree-count tracking.

Attachment by ``(D_in(v) + lam) / ((1 + lam) n)`` is sampled as a two-part
mixture: with probability ``1 / (1 + lam)`` a uniform entry of the flat
in-endpoint array (node ``v`` appears ``D_in(v)`` times, total length ``n``),
otherwise a uniform node.  Out-attachment is symmetric.  Every step is O(1).

Nodes are labelled ``0 .. n-1`` internally; node 0 is the initial node with a
self-loop, which contributes one entry to each endpoint array.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numba import njit

from .errors import CapacityExceeded
from .params import IndexWindow, ModelParams

IN_EVENT = 0
OUT_EVENT = 1

# in_targets, out_sources, d_in, d_out: four int32 arrays per node
BYTES_PER_NODE = 16
MEMORY_BUDGET_BYTES = 4 * 2**30


def rng_for(seed: int, stream: int | None = None) -> np.random.Generator:
    """PCG64 generator for ``seed``; ``stream`` selects an independent child stream."""
    if not 0 <= int(seed) < 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    if stream is None:
        ss = np.random.SeedSequence(int(seed))
    else:
        ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.PCG64(ss))


@njit(cache=True)
def _attach(rng, m, alpha, p_in, p_out, tin, sout, din, dout):
    # Node m is born into a graph of m nodes. Returns (kind, r, q): the event
    # type and the chosen node's degree before the step.
    if rng.random() < alpha:
        if rng.random() < p_in:
            v = tin[int(rng.random() * m)]
        else:
            v = int(rng.random() * m)
        r = din[v]
        q = dout[v]
        din[v] = r + 1
        din[m] = 0
        dout[m] = 1
        tin[m] = v
        sout[m] = m
        return 0, r, q
    if rng.random() < p_out:
        v = sout[int(rng.random() * m)]
    else:
        v = int(rng.random() * m)
    r = din[v]
    q = dout[v]
    dout[v] = q + 1
    din[m] = 1
    dout[m] = 0
    sout[m] = v
    tin[m] = m
    return 1, r, q


@njit(cache=True)
def _bump(cnt, i, j, by):
    if i < cnt.shape[0] and j < cnt.shape[1]:
        cnt[i, j] += by


@njit(cache=True)
def _apply_delta(cnt, kind, r, q):
    _bump(cnt, r, q, -1)
    if kind == 0:
        _bump(cnt, r + 1, q, 1)
        _bump(cnt, 0, 1, 1)
    else:
        _bump(cnt, r, q + 1, 1)
        _bump(cnt, 1, 0, 1)


@njit(cache=True)
def _grow_kernel(rng, n, alpha, p_in, p_out, rows, cols, checkpoints, trace_from):
    tin = np.empty(n, np.int32)
    sout = np.empty(n, np.int32)
    din = np.empty(n, np.int32)
    dout = np.empty(n, np.int32)
    tin[0] = 0
    sout[0] = 0
    din[0] = 1
    dout[0] = 1
    cnt = np.zeros((rows, cols), np.int64)
    _bump(cnt, 1, 1, 1)
    snaps = np.zeros((checkpoints.shape[0], rows, cols), np.int64)
    ntrace = max(n - trace_from, 0)
    tkind = np.empty(ntrace, np.int8)
    tr = np.empty(ntrace, np.int32)
    tq = np.empty(ntrace, np.int32)
    c = 0
    while c < checkpoints.shape[0] and checkpoints[c] == 1:
        snaps[c] = cnt
        c += 1
    for m in range(1, n):
        kind, r, q = _attach(rng, m, alpha, p_in, p_out, tin, sout, din, dout)
        _apply_delta(cnt, kind, r, q)
        if m >= trace_from:
            t = m - trace_from
            tkind[t] = kind
            tr[t] = r
            tq[t] = q
        while c < checkpoints.shape[0] and checkpoints[c] == m + 1:
            snaps[c] = cnt
            c += 1
    return din, dout, snaps, tkind, tr, tq


@njit(cache=True)
def _small_batch_kernel(rng, n, runs, alpha, p_in, p_out):
    tin = np.empty(n, np.int32)
    sout = np.empty(n, np.int32)
    din = np.empty(n, np.int32)
    dout = np.empty(n, np.int32)
    out = np.zeros((runs, n + 1, n + 1), np.int16)
    for k in range(runs):
        tin[0] = 0
        sout[0] = 0
        din[0] = 1
        dout[0] = 1
        for m in range(1, n):
            _attach(rng, m, alpha, p_in, p_out, tin, sout, din, dout)
        for v in range(n):
            out[k, din[v], dout[v]] += 1
    return out


class DegreeCountGrid(Counter):
    """Sparse map ``(i, j) -> N(i, j)``; missing cells read as 0."""

    @classmethod
    def from_degrees(cls, din: np.ndarray, dout: np.ndarray) -> "DegreeCountGrid":
        if len(din) == 0:
            return cls()
        width = int(dout.max()) + 1
        keys, counts = np.unique(din.astype(np.int64) * width + dout, return_counts=True)
        return cls({(int(k // width), int(k % width)): int(c) for k, c in zip(keys, counts)})

    def dense(self, imax: int, jmax: int) -> np.ndarray:
        out = np.zeros((imax + 1, jmax + 1), np.int64)
        for (i, j), c in self.items():
            if i <= imax and j <= jmax:
                out[i, j] = c
        return out

    def rows(self) -> list[tuple[int, int, int]]:
        return sorted((i, j, c) for (i, j), c in self.items() if c)


@dataclass
class GraphState:
    """Explicit graph state for step-by-step use and small-n checks.

    Arrays are over-allocated; only the first ``n`` entries are meaningful.
    """

    n: int
    in_targets: np.ndarray
    out_sources: np.ndarray
    d_in: np.ndarray
    d_out: np.ndarray
    counts: DegreeCountGrid

    def degrees(self) -> list[tuple[int, int]]:
        return [(int(a), int(b)) for a, b in zip(self.d_in[: self.n], self.d_out[: self.n])]


def init(capacity: int = 16) -> GraphState:
    """Single node with a self-loop: degree (1, 1)."""
    capacity = max(int(capacity), 1)
    z = lambda: np.zeros(capacity, np.int32)  # noqa: E731
    st = GraphState(1, z(), z(), z(), z(), DegreeCountGrid({(1, 1): 1}))
    st.d_in[0] = st.d_out[0] = 1
    return st


def step(params: ModelParams, state: GraphState, rng: np.random.Generator) -> tuple[int, int, int]:
    """Advance ``state`` by one node in place; returns ``(kind, r, q)``."""
    m = state.n
    if m >= len(state.d_in):
        for name in ("in_targets", "out_sources", "d_in", "d_out"):
            arr = getattr(state, name)
            setattr(state, name, np.concatenate([arr, np.zeros_like(arr)]))
    kind, r, q = _attach(
        rng, m, params.alpha, 1.0 / (1.0 + params.lam), 1.0 / (1.0 + params.mu),
        state.in_targets, state.out_sources, state.d_in, state.d_out,
    )
    cnt = state.counts
    cnt[(r, q)] -= 1
    if cnt[(r, q)] == 0:
        del cnt[(r, q)]
    if kind == IN_EVENT:
        cnt[(r + 1, q)] += 1
        cnt[(0, 1)] += 1
    else:
        cnt[(r, q + 1)] += 1
        cnt[(1, 0)] += 1
    state.n = m + 1
    return int(kind), int(r), int(q)


@dataclass
class Trace:
    """Per-step attachment record for steps ``start+1 .. n``.

    ``kind[t]`` is 0 for a new node pointing to an existing one (in-event),
    1 for an existing node pointing to the new one; ``(r[t], q[t])`` is the
    existing node's degree before the step that grows the graph from
    ``start + t`` to ``start + t + 1`` nodes.
    """

    start: int
    kind: np.ndarray
    r: np.ndarray
    q: np.ndarray

    def jump(self, coeff) -> np.ndarray:
        """Per-step value of ``sum_kl coeff[k, l] * Delta(k, l)`` for a 2-D ``coeff``."""
        coeff = np.asarray(coeff, dtype=float)
        padded = np.zeros((coeff.shape[0] + 1, coeff.shape[1] + 1))
        padded[: coeff.shape[0], : coeff.shape[1]] = coeff
        ii = np.minimum(self.r, coeff.shape[0])
        jj = np.minimum(self.q, coeff.shape[1])
        inn = self.kind == IN_EVENT
        new_i = np.where(inn, np.minimum(self.r + 1, coeff.shape[0]), ii)
        new_j = np.where(inn, jj, np.minimum(self.q + 1, coeff.shape[1]))
        birth = np.where(inn, padded[0, 1], padded[1, 0])
        return birth + padded[new_i, new_j] - padded[ii, jj]


@dataclass
class GrowResult:
    n: int
    seed: int
    stream: int | None
    counts: DegreeCountGrid
    window: IndexWindow | None
    checkpoints: tuple[int, ...]
    snapshots: np.ndarray  # (len(checkpoints), imax + 1, jmax + 1)
    trace: Trace | None = None

    def window_counts(self) -> np.ndarray:
        """Snapshot counts flattened over window coordinates, shape (checkpoints, coords)."""
        if self.window is None:
            raise ValueError("run has no window")
        idx = np.array(self.window.coords)
        return self.snapshots[:, idx[:, 0], idx[:, 1]]


def _normalize_checkpoints(n: int, checkpoints: Iterable[int] | None) -> np.ndarray:
    if checkpoints is None:
        return np.array([n], np.int64)
    cps = sorted({int(c) for c in checkpoints})
    if cps and (cps[0] < 1 or cps[-1] > n):
        raise ValueError(f"checkpoints must lie in [1, {n}]")
    return np.array(cps, np.int64)


def grow(
    params: ModelParams,
    n: int,
    seed: int,
    *,
    stream: int | None = None,
    window: IndexWindow | tuple[int, int] | None = None,
    checkpoints: Sequence[int] | None = None,
    trace_from: int | None = None,
    full_counts: bool = True,
    memory_budget: int = MEMORY_BUDGET_BYTES,
) -> GrowResult:
    """Grow one graph to ``n`` nodes.

    Deterministic in ``(params, n, seed, stream)``.  With a ``window`` the
    windowed count grid is snapshotted at each checkpoint (default: ``n``
    only).  ``trace_from=m`` records the attachment events of the steps that
    take the graph from ``m`` to ``n`` nodes.  ``full_counts=False`` skips
    building the sparse grid of all degree pairs (ensembles only need the
    window snapshots).
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    if n * BYTES_PER_NODE > memory_budget:
        raise CapacityExceeded(
            f"n={n} needs {n * BYTES_PER_NODE} bytes, budget is {memory_budget}"
        )
    if window is not None and not isinstance(window, IndexWindow):
        window = IndexWindow(*window)
    rows, cols = (window.imax + 1, window.jmax + 1) if window else (0, 0)
    cps = _normalize_checkpoints(n, checkpoints) if window else np.zeros(0, np.int64)
    tf = n if trace_from is None else max(1, int(trace_from))
    din, dout, snaps, tk, tr, tq = _grow_kernel(
        rng_for(seed, stream), n, params.alpha,
        1.0 / (1.0 + params.lam), 1.0 / (1.0 + params.mu),
        rows, cols, cps, tf,
    )
    trace = Trace(tf, tk, tr, tq) if trace_from is not None else None
    return GrowResult(
        n=n,
        seed=int(seed),
        stream=stream,
        counts=DegreeCountGrid.from_degrees(din, dout) if full_counts else DegreeCountGrid(),
        window=window,
        checkpoints=tuple(int(c) for c in cps),
        snapshots=snaps,
        trace=trace,
    )


def sample_count_states(params: ModelParams, n: int, runs: int, seed: int) -> np.ndarray:
    """Final dense count grids of ``runs`` independent tiny graphs, shape (runs, n+1, n+1).

    Meant for small ``n`` (checked against exact enumeration); one generator
    stream drives the whole batch.
    """
    if n < 1 or n > 64:
        raise ValueError("sample_count_states is for 1 <= n <= 64")
    return _small_batch_kernel(
        rng_for(seed), int(n), int(runs), params.alpha,
        1.0 / (1.0 + params.lam), 1.0 / (1.0 + params.mu),
    )
