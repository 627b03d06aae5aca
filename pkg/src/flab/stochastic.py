"""Exact jump-process simulation of the window chain.

Each path alternates an exponential holding time with rate alpha_i + beta_i
and a categorical move (right with probability alpha/(alpha+beta)); reflecting
edges fall out of the zeroed boundary rates.  Per-path randomness comes from a
counter-based Philox stream keyed by (seed, path index), so ensembles are
bitwise reproducible for any worker count: paths are processed in fixed-size
chunks whose tallies are merged in chunk order.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .lattice import Lattice, RateField, StationaryMeasure

_CHUNK = 4096  # fixed accumulation granularity; must not depend on n_workers
_BLOCK_CAP = 1 << 14
_MASK64 = (1 << 64) - 1

_kernel = None


def _get_kernel():
    """JIT-compile the per-path jump loop on first use (numba import is slow)."""
    global _kernel
    if _kernel is None:
        import numba

        @numba.njit(nogil=True, cache=False)
        def run_segment(state, t, horizon, alpha, beta, exps, unis, hold_sum, hold_cnt, right, left):
            n_draw = exps.shape[0]
            used = 0
            while True:
                a = alpha[state]
                tot = a + beta[state]
                if tot <= 0.0:
                    return state, horizon, used, True
                if used >= n_draw:
                    return state, t, used, False
                dt = exps[used] / tot
                u = unis[used]
                used += 1
                # tally the full drawn sojourn even when it overshoots the
                # horizon: truncating it would length-bias the mean downward
                hold_sum[state] += dt
                hold_cnt[state] += 1
                t_next = t + dt
                if t_next >= horizon:
                    return state, horizon, used, True
                t = t_next
                if u * tot < a:
                    right[state] += 1
                    state += 1
                else:
                    left[state] += 1
                    state -= 1

        _kernel = run_segment
    return _kernel


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Summary tallies of an ensemble of independent paths.

    final_states are lattice indices in [-N, N].  Holding-time tallies record
    every drawn sojourn at the node where it was drawn, including each path's
    final draw that overshoots the horizon (an unbiased exponential sample);
    jump tallies count only moves completed before the horizon, so per node
    hold_count = jump_right + jump_left + (paths whose last draw happened here).
    """

    n_paths: int
    seed: int
    horizon: float
    final_states: np.ndarray
    hold_sum: np.ndarray
    hold_count: np.ndarray
    jump_right: np.ndarray
    jump_left: np.ndarray

    def mean_holding(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.hold_count > 0, self.hold_sum / self.hold_count, np.nan)


def _simulate_chunk(kernel, alpha, beta, start_idx, horizon, seed_u, lo, hi, block):
    n_state = alpha.shape[0]
    hold_sum = np.zeros(n_state)
    hold_cnt = np.zeros(n_state, dtype=np.int64)
    right = np.zeros(n_state, dtype=np.int64)
    left = np.zeros(n_state, dtype=np.int64)
    finals = np.empty(hi - lo, dtype=np.int32)
    for j, p in enumerate(range(lo, hi)):
        rng = np.random.Generator(np.random.Philox(key=(seed_u << 64) | p))
        state = start_idx
        t = 0.0
        done = False
        while not done:
            exps = rng.standard_exponential(block)
            unis = rng.random(block)
            state, t, _, done = kernel(
                state, t, horizon, alpha, beta, exps, unis, hold_sum, hold_cnt, right, left
            )
        finals[j] = state
    return finals, hold_sum, hold_cnt, right, left


def simulate(
    r: RateField,
    lat: Lattice,
    start: int,
    horizon: float,
    n_paths: int,
    seed: int,
    n_workers: int = 1,
) -> TrajectoryEnsemble:
    """Run n_paths independent exact-jump paths from lattice index ``start``.

    Deterministic given (seed, configuration) regardless of n_workers: path p
    draws from Philox keyed by seed and p, in fixed blocks, and per-chunk
    tallies are merged in chunk order.  A node with zero total rate (single-node
    window) simply never moves.
    """
    if abs(start) > lat.n_half:
        raise ValueError(f"start index {start} outside window [-{lat.n_half}, {lat.n_half}]")
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    kernel = _get_kernel()
    alpha = np.ascontiguousarray(r.alpha)
    beta = np.ascontiguousarray(r.beta)
    start_idx = start + lat.n_half
    seed_u = int(seed) & _MASK64
    rate0 = float(alpha[start_idx] + beta[start_idx])
    block = int(min(_BLOCK_CAP, max(64, horizon * rate0 * 1.25 + 32)))

    chunks = [(lo, min(lo + _CHUNK, n_paths)) for lo in range(0, n_paths, _CHUNK)]
    args = [(kernel, alpha, beta, start_idx, horizon, seed_u, lo, hi, block) for lo, hi in chunks]
    if n_workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(lambda a: _simulate_chunk(*a), args))
    else:
        results = [_simulate_chunk(*a) for a in args]

    n_state = alpha.shape[0]
    finals = np.empty(n_paths, dtype=np.int32)
    hold_sum = np.zeros(n_state)
    hold_cnt = np.zeros(n_state, dtype=np.int64)
    right = np.zeros(n_state, dtype=np.int64)
    left = np.zeros(n_state, dtype=np.int64)
    for (lo, hi), (f, hs, hc, rc, lc) in zip(chunks, results):
        finals[lo:hi] = f
        hold_sum += hs
        hold_cnt += hc
        right += rc
        left += lc
    return TrajectoryEnsemble(
        n_paths=n_paths,
        seed=int(seed),
        horizon=float(horizon),
        final_states=finals - lat.n_half,
        hold_sum=hold_sum,
        hold_count=hold_cnt,
        jump_right=right,
        jump_left=left,
    )


def empirical_law(e: TrajectoryEnsemble, lat: Lattice) -> np.ndarray:
    """Normalized histogram of final states over the window nodes."""
    if e.n_paths < 1:
        raise ValueError("empty ensemble")
    counts = np.bincount(e.final_states + lat.n_half, minlength=lat.n_nodes)
    return counts.astype(float) / e.n_paths


def tv_distance(p: np.ndarray, q: np.ndarray) -> float:
    """Total variation distance between two probability vectors on the window."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("probability vectors have different shapes")
    for name, v in (("p", p), ("q", q)):
        if abs(float(v.sum()) - 1.0) > 1e-9:
            raise ValueError(f"{name} does not sum to 1 within 1e-9")
    return 0.5 * float(np.sum(np.abs(p - q)))


def ensemble_summary(
    e: TrajectoryEnsemble,
    lat: Lattice,
    r: RateField,
    m: StationaryMeasure,
    min_visits: int = 500,
) -> dict:
    """JSON-ready summary: TV distance to stationarity plus per-node holding
    statistics for nodes with at least ``min_visits`` completed sojourns."""
    tv = tv_distance(empirical_law(e, lat), m.weights)
    total_rate = r.alpha + r.beta
    mean_hold = e.mean_holding()
    per_node = []
    for w_idx in range(lat.n_nodes):
        visits = int(e.hold_count[w_idx])
        if visits < min_visits:
            continue
        per_node.append(
            {
                "i": int(w_idx - lat.n_half),
                "visits": visits,
                "mean_holding": float(mean_hold[w_idx]),
                "expected_holding": float(1.0 / total_rate[w_idx]),
            }
        )
    return {
        "n_paths": e.n_paths,
        "seed": e.seed,
        "horizon": e.horizon,
        "tv_to_stationary": tv,
        "per_node": per_node,
    }
