"""Search kernels for lookup-table inversion.

Both kernels return, per observation, the ``n`` table entries with the
smallest squared-error accumulators, ordered by (accumulator, entry index).
The accumulator for entry ``m`` is ``sum_b (obs[b] - table[m, b])**2``
summed sequentially in band order in float64 — a fixed association order,
so the optimized and reference kernels produce bit-identical values and
invert the same pixel identically at any thread count.

The optimized kernel keeps a sorted top-n insertion buffer per pixel and
abandons an entry as soon as its partial accumulator strictly exceeds the
buffer's current worst kept value.  Partial sums only grow, so abandonment
never discards an entry the full sum would have kept, and a final sum equal
to the worst kept value loses the tie by index (it was scanned later) —
exactness is preserved.
"""

from __future__ import annotations

import os
import warnings

# Allow oversubscribed logical threads so worker counts above the physical
# core count still execute (scheduling-determinism contract); must be set
# before numba first initializes its threading layer.
os.environ.setdefault("NUMBA_NUM_THREADS", str(max(8, os.cpu_count() or 1)))

# An outdated TBB makes numba fall back to its OpenMP threading layer when
# the pool first launches; the fallback is functionally equivalent here, so
# the advisory (emitted at first parallel execution) is pure noise.
warnings.filterwarnings(
    "ignore",
    message="The TBB threading layer requires TBB version",
    module=r"numba\.np\.ufunc\.parallel",
)

import numba
import numpy as np
from numba import njit, prange
from numpy.typing import NDArray

from .errors import ConfigError, ShapeError

__all__ = ["topk_search", "topk_search_reference", "accumulator_to_cost", "max_threads"]


def max_threads() -> int:
    """Largest worker count the compiled kernels can be asked for."""
    return int(numba.config.NUMBA_NUM_THREADS)


@njit(parallel=True, cache=True)
def _topk_kernel(table, obs, n, out_idx, out_acc):  # pragma: no cover - compiled
    n_pixels = obs.shape[0]
    n_entries = table.shape[0]
    n_bands = table.shape[1]
    for p in prange(n_pixels):
        kept_acc = np.full(n, np.inf)
        kept_idx = np.full(n, -1, dtype=np.int64)
        filled = 0
        worst = np.inf
        for m in range(n_entries):
            acc = 0.0
            keep = True
            for b in range(n_bands):
                diff = obs[p, b] - table[m, b]
                acc += diff * diff
                if acc > worst:
                    keep = False
                    break
            if not keep:
                continue
            if filled < n:
                pos = filled
                while pos > 0 and kept_acc[pos - 1] > acc:
                    kept_acc[pos] = kept_acc[pos - 1]
                    kept_idx[pos] = kept_idx[pos - 1]
                    pos -= 1
                kept_acc[pos] = acc
                kept_idx[pos] = m
                filled += 1
                if filled == n:
                    worst = kept_acc[n - 1]
            elif acc < worst:
                pos = n - 1
                while pos > 0 and kept_acc[pos - 1] > acc:
                    kept_acc[pos] = kept_acc[pos - 1]
                    kept_idx[pos] = kept_idx[pos - 1]
                    pos -= 1
                kept_acc[pos] = acc
                kept_idx[pos] = m
                worst = kept_acc[n - 1]
        for j in range(n):
            out_idx[p, j] = kept_idx[j]
            out_acc[p, j] = kept_acc[j]


def _check_inputs(table: NDArray[np.float64], obs: NDArray[np.float64], n: int) -> None:
    if table.ndim != 2 or obs.ndim != 2:
        raise ShapeError(
            f"table and observations must be 2-D, got {table.shape} and {obs.shape}"
        )
    if table.shape[1] != obs.shape[1]:
        raise ShapeError(
            f"band counts differ: table has {table.shape[1]}, observations {obs.shape[1]}"
        )
    if not 1 <= n <= table.shape[0]:
        raise ConfigError(f"n must lie in 1..{table.shape[0]}, got {n}")


def topk_search(
    table: NDArray[np.float64],
    obs: NDArray[np.float64],
    n: int,
    workers: int = 1,
) -> tuple[NDArray[np.int64], NDArray[np.float64]]:
    """n smallest squared-error accumulators per observation (optimized).

    ``table`` is (M, bands) float64, ``obs`` is (pixels, bands) float64.
    Returns ``(indices, accumulators)``, each (pixels, n), rows sorted by
    (accumulator, index).  Results are bit-identical for any ``workers``
    because pixels are independent and each pixel's scan is sequential.
    """
    table = np.ascontiguousarray(table, dtype=np.float64)
    obs = np.ascontiguousarray(obs, dtype=np.float64)
    _check_inputs(table, obs, n)
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")
    out_idx = np.empty((obs.shape[0], n), dtype=np.int64)
    out_acc = np.empty((obs.shape[0], n), dtype=np.float64)
    previous = numba.get_num_threads()
    numba.set_num_threads(min(workers, max_threads()))
    try:
        _topk_kernel(table, obs, n, out_idx, out_acc)
    finally:
        numba.set_num_threads(previous)
    return out_idx, out_acc


def topk_search_reference(
    table: NDArray[np.float64],
    obs: NDArray[np.float64],
    n: int,
) -> tuple[NDArray[np.int64], NDArray[np.float64]]:
    """Naive full-scan oracle: accumulate every entry, sort, take n.

    Same accumulation order as the optimized kernel (bands in sequence,
    float64), with ordering made explicit by a stable lexicographic sort on
    (accumulator, entry index).
    """
    table = np.ascontiguousarray(table, dtype=np.float64)
    obs = np.ascontiguousarray(obs, dtype=np.float64)
    _check_inputs(table, obs, n)
    n_pixels = obs.shape[0]
    n_entries = table.shape[0]
    out_idx = np.empty((n_pixels, n), dtype=np.int64)
    out_acc = np.empty((n_pixels, n), dtype=np.float64)
    entry_ids = np.arange(n_entries)
    for p in range(n_pixels):
        acc = np.zeros(n_entries, dtype=np.float64)
        for b in range(table.shape[1]):
            diff = obs[p, b] - table[:, b]
            acc += diff * diff
        order = np.lexsort((entry_ids, acc))[:n]
        out_idx[p] = order
        out_acc[p] = acc[order]
    return out_idx, out_acc


def accumulator_to_cost(acc: NDArray[np.float64], n_bands: int) -> NDArray[np.float64]:
    """Convert squared-error accumulators to root-mean-square-error costs."""
    if n_bands < 1:
        raise ConfigError(f"band count must be >= 1, got {n_bands}")
    return np.sqrt(acc / n_bands)
