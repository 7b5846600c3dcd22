"""Parallel Stroked Multi Line (PSML) patch fitting.

A PSML model assigns every unit-width line of a patch partition to one of two
gray classes through a bit stream ``G`` (bit 0 -> ``c1``, bit 1 -> ``c2``).
The two grays are always the class means, so a fit only searches over the
orientation and ``G``.

Two search paths are provided:

* :func:`fit_patch_exhaustive` scans all ``2**p`` bit streams per orientation
  and serves as the oracle.
* :func:`fit_patch_fast` seeds each orientation with :func:`initial_state`
  and runs :func:`hill_climb`, evaluating each single-bit neighbor in
  constant time from the class sums and counts.

:func:`fit_patches` is the batched equivalent of :func:`fit_patch_fast` used by
the codec. It follows the same arithmetic operation for operation, so its
results are identical to the scalar path and not merely close.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import LinePartition, MIN_MODEL_SIZE, line_ids, orientations, partition
from .pixel_grid import as_array


def _gain(s, n) -> float:
    return float(s) * float(s) / n if n else 0.0


def class_sse(sc0: int, nc0: int, sc1: int, nc1: int, second_moment: int) -> float:
    """SSE of the two-class mean model, from integer class sums and counts."""
    return float(second_moment) - (_gain(sc0, nc0) + _gain(sc1, nc1))


def _gain_array(s: np.ndarray, n: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    out = np.zeros(np.broadcast(s, n).shape, dtype=np.float64)
    np.divide(s * s, n, out=out, where=n > 0)
    return out


def _class_sse_array(sc0, nc0, sc1, nc1, second_moment) -> np.ndarray:
    return np.asarray(second_moment, dtype=np.float64) - (_gain_array(sc0, nc0) + _gain_array(sc1, nc1))


@dataclass(frozen=True, eq=False)
class PsmlModel:
    orientation: int
    bits: np.ndarray
    c1: float
    c2: float

    @property
    def p(self) -> int:
        return len(self.bits)


@dataclass(eq=False)
class FitState:
    """Bit stream plus exact integer class statistics for one orientation."""

    bits: np.ndarray
    sc0: int
    nc0: int
    sc1: int
    nc1: int
    second_moment: int

    @property
    def sse(self) -> float:
        return class_sse(self.sc0, self.nc0, self.sc1, self.nc1, self.second_moment)

    def copy(self) -> FitState:
        return FitState(self.bits.copy(), self.sc0, self.nc0, self.sc1, self.nc1, self.second_moment)

    def key(self) -> tuple:
        return (tuple(int(b) for b in self.bits), self.sc0, self.nc0, self.sc1, self.nc1)


@dataclass(frozen=True, eq=False)
class FitResult:
    model: PsmlModel
    sse: float
    evaluations: int = 0
    iterations: int = 0


def state_from_bits(part: LinePartition, bits) -> FitState:
    """Build a FitState by full summation over the lines."""
    g = np.asarray(bits, dtype=np.uint8).copy()
    if g.shape != (part.p,):
        raise ValueError(f"bit stream length {g.size} does not match p={part.p}")
    on = g.astype(bool)
    sc1 = int(part.sums[on].sum())
    nc1 = int(part.counts[on].sum())
    return FitState(g, part.total - sc1, int(part.counts.sum()) - nc1, sc1, nc1, part.second_moment)


def optimal_grays(state: FitState) -> tuple[float, float, float]:
    """Class-mean grays (c1, c2) and the resulting SSE.

    An empty class takes the other class's gray.
    """
    c1 = state.sc0 / state.nc0 if state.nc0 else None
    c2 = state.sc1 / state.nc1 if state.nc1 else None
    if c1 is None:
        c1 = c2
    if c2 is None:
        c2 = c1
    return c1, c2, state.sse


def flip_line(state: FitState, k: int, part: LinePartition) -> FitState:
    """Toggle bit ``k`` in place, updating the class statistics in O(1)."""
    s = int(part.sums[k])
    n = int(part.counts[k])
    if state.bits[k]:
        state.sc1 -= s
        state.nc1 -= n
        state.sc0 += s
        state.nc0 += n
    else:
        state.sc0 -= s
        state.nc0 -= n
        state.sc1 += s
        state.nc1 += n
    state.bits[k] ^= 1
    return state


def neighbor_sse(state: FitState, part: LinePartition) -> np.ndarray:
    """SSE of every single-bit neighbor, using the same update rule as
    :func:`flip_line` applied to all ``k`` at once."""
    sign = np.where(state.bits.astype(bool), -1, 1)
    ds = sign * part.sums
    dn = sign * part.counts
    return _class_sse_array(state.sc0 - ds, state.nc0 - dn, state.sc1 + ds, state.nc1 + dn,
                            state.second_moment)


def initial_state(part: LinePartition) -> FitState:
    """Lines darker than the patch mean start in class 1, the rest in class 0.

    ``S_i / N_i < T / (m n)`` is evaluated as ``S_i * m n < T * N_i`` in
    integers.
    """
    pixels = int(part.counts.sum())
    bits = (part.sums * pixels < part.total * part.counts).astype(np.uint8)
    return state_from_bits(part, bits)


def model_from_state(part: LinePartition, state: FitState) -> PsmlModel:
    c1, c2, _ = optimal_grays(state)
    bits = state.bits.copy()
    bits.setflags(write=False)
    return PsmlModel(part.orientation, bits, c1, c2)


def hill_climb(part: LinePartition, start: FitState) -> FitResult:
    """Best-neighbor descent from ``start`` until no flip strictly lowers SSE.

    Ties between equally good neighbors go to the smallest line index.
    """
    state = start.copy()
    current = state.sse
    evaluations = 0
    iterations = 0
    while True:
        iterations += 1
        costs = neighbor_sse(state, part)
        evaluations += part.p
        k = int(np.argmin(costs))
        if not costs[k] < current:
            break
        flip_line(state, k, part)
        current = state.sse
    return FitResult(model_from_state(part, state), current, evaluations, iterations)


def _check_model_size(m: int, n: int) -> None:
    if m < MIN_MODEL_SIZE or n < MIN_MODEL_SIZE:
        raise ValueError(f"patch too small for a PSML model: {m}x{n}")


def fit_patch_fast(patch) -> FitResult:
    """Initial state plus hill climbing for every orientation; the lowest SSE
    wins, ties to the smallest orientation index."""
    x = as_array(patch)
    m, n = x.shape
    _check_model_size(m, n)
    best = None
    evaluations = iterations = 0
    for o in range(len(orientations(m, n))):
        part = partition(x, o)
        res = hill_climb(part, initial_state(part))
        evaluations += res.evaluations
        iterations += res.iterations
        if best is None or res.sse < best.sse:
            best = res
    return FitResult(best.model, best.sse, evaluations, iterations)


def _all_bit_streams(p: int) -> np.ndarray:
    # row i is i written MSB-first, so row order is lexicographic order of G
    codes = np.arange(1 << p, dtype=np.int64)[:, None]
    return ((codes >> np.arange(p - 1, -1, -1)) & 1).astype(np.int64)


def fit_patch_exhaustive(patch, max_p: int = 16) -> FitResult:
    """Global optimum over all orientations and all bit streams."""
    x = as_array(patch)
    m, n = x.shape
    _check_model_size(m, n)
    count = len(orientations(m, n))
    p_max = max(line_ids(m, n, o)[1] for o in range(count))
    if p_max > max_p:
        raise ValueError(f"patch exceeds oracle budget: p={p_max} > {max_p}")
    best = None
    evaluations = 0
    for o in range(count):
        part = partition(x, o)
        g = _all_bit_streams(part.p)
        sc1 = g @ part.sums
        nc1 = g @ part.counts
        costs = _class_sse_array(part.total - sc1, int(part.counts.sum()) - nc1, sc1, nc1,
                                 part.second_moment)
        i = int(np.argmin(costs))
        evaluations += len(costs)
        if best is None or costs[i] < best[0]:
            best = (float(costs[i]), part, g[i])
    sse_val, part, bits = best
    state = state_from_bits(part, bits)
    return FitResult(model_from_state(part, state), sse_val, evaluations, 0)


def render(part: LinePartition, model: PsmlModel, rounding: bool = False) -> np.ndarray:
    if len(model.bits) != part.p:
        raise ValueError(f"G has {len(model.bits)} bits, partition has p={part.p}")
    values = np.where(np.asarray(model.bits, dtype=bool)[part.line_index], model.c2, model.c1)
    if rounding:
        return np.floor(values + 0.5).astype(np.int64)
    return values


# ---------------------------------------------------------------- batched engine

@dataclass(eq=False)
class BatchFit:
    """Per-patch results of :func:`fit_patches` (arrays of length B)."""

    orientation: np.ndarray
    bits: list
    sse: np.ndarray
    n0: np.ndarray
    s0: np.ndarray
    q0: np.ndarray
    n1: np.ndarray
    s1: np.ndarray
    q1: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    evaluations: np.ndarray
    iterations: np.ndarray = field(default=None)
    climb_iterations: np.ndarray = field(default=None)


def fit_patches(batch: np.ndarray) -> BatchFit:
    """Vectorized :func:`fit_patch_fast` over a stack of equally sized patches.

    ``iterations`` counts selection sweeps summed over orientations;
    ``climb_iterations`` has shape (B, orientations) with the per-orientation
    sweep counts.
    """
    batch = np.asarray(batch)
    if batch.ndim != 3:
        raise ValueError("expected a (B, m, n) stack of patches")
    B, m, n = batch.shape
    _check_model_size(m, n)
    mn = m * n
    X = batch.reshape(B, mn).astype(np.int64)
    total = X.sum(axis=1)
    second = (X * X).sum(axis=1)
    count = len(orientations(m, n))
    plist = np.array([line_ids(m, n, o)[1] for o in range(count)])
    pmax = int(plist.max())

    S = np.zeros((B, count, pmax), dtype=np.int64)
    N = np.zeros((count, pmax), dtype=np.int64)
    base = (np.arange(B, dtype=np.int64) * pmax)[:, None]
    wflat = X.ravel().astype(np.float64)
    for o in range(count):
        ids, p = line_ids(m, n, o)
        N[o, :p] = np.bincount(ids, minlength=p)
        idx = (base + ids[None, :]).ravel()
        S[:, o, :] = np.bincount(idx, weights=wflat, minlength=B * pmax).reshape(B, pmax).astype(np.int64)

    valid = np.arange(pmax)[None, :] < plist[:, None]
    bits = (S * mn < total[:, None, None] * N[None]) & valid[None]

    P = B * count
    bits = bits.reshape(P, pmax)
    S = S.reshape(P, pmax)
    prob_orient = np.tile(np.arange(count), B)
    prob_patch = np.repeat(np.arange(B), count)
    T = total[prob_patch]
    Q = second[prob_patch]
    sc1 = (S * bits).sum(axis=1)
    nc1 = (N[prob_orient] * bits).sum(axis=1)
    sc0 = T - sc1
    nc0 = mn - nc1
    current = _class_sse_array(sc0, nc0, sc1, nc1, Q)
    sweeps = np.zeros(P, dtype=np.int64)

    active = np.arange(P)
    while active.size:
        g = bits[active]
        s = S[active]
        nn = N[prob_orient[active]]
        sign = np.where(g, -1, 1)
        ds = sign * s
        dn = sign * nn
        costs = _class_sse_array(sc0[active, None] - ds, nc0[active, None] - dn,
                                 sc1[active, None] + ds, nc1[active, None] + dn, Q[active, None])
        costs[~valid[prob_orient[active]]] = np.inf
        k = np.argmin(costs, axis=1)
        rows = np.arange(active.size)
        best = costs[rows, k]
        sweeps[active] += 1
        better = best < current[active]
        act = active[better]
        kb = k[better]
        dsb = ds[rows[better], kb]
        dnb = dn[rows[better], kb]
        sc0[act] -= dsb
        nc0[act] -= dnb
        sc1[act] += dsb
        nc1[act] += dnb
        bits[act, kb] ^= True
        current[act] = best[better]
        active = act

    cur = current.reshape(B, count)
    win = np.argmin(cur, axis=1)
    pick = np.arange(B) * count + win
    out_bits = [bits[i, :plist[o]].astype(np.uint8) for i, o in zip(pick, win)]

    q1 = np.zeros(B, dtype=np.int64)
    sq = X * X
    for o in np.unique(win):
        sel = np.nonzero(win == o)[0]
        ids, _ = line_ids(m, n, int(o))
        on = bits[pick[sel]][:, ids]
        q1[sel] = (sq[sel] * on).sum(axis=1)

    n0, s0, n1, s1 = nc0[pick], sc0[pick], nc1[pick], sc1[pick]
    with np.errstate(invalid="ignore", divide="ignore"):
        c1 = np.where(n0 > 0, s0 / np.maximum(n0, 1), np.nan)
        c2 = np.where(n1 > 0, s1 / np.maximum(n1, 1), np.nan)
    c1 = np.where(np.isnan(c1), c2, c1)
    c2 = np.where(np.isnan(c2), c1, c2)
    evals = (sweeps.reshape(B, count) * plist[None, :])
    return BatchFit(
        orientation=win, bits=out_bits, sse=cur[np.arange(B), win],
        n0=n0, s0=s0, q0=second - q1, n1=n1, s1=s1, q1=q1, c1=c1, c2=c2,
        evaluations=evals.sum(axis=1), iterations=sweeps.reshape(B, count).sum(axis=1),
        climb_iterations=sweeps.reshape(B, count),
    )
