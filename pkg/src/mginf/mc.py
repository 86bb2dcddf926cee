"""Discrete-event Monte Carlo for busy-cycle counts of the M|G|inf queue.

Each replication starts with an arrival at time 0 (the first busy period),
draws exponential interarrival times and service times by inversion, and
counts the arrivals that find the system empty, i.e. that arrive at or after
the running maximum of earlier departure times.

Random streams: replication ``r`` of a run with seed ``s`` draws from
``Philox(SeedSequence(s, spawn_key=(r,)))``, a counter-based generator.
Uniforms are ``(k + 0.5) / 2**53`` for 53-bit integers ``k``, so they lie in
the open unit interval.  Interarrival and service uniforms are drawn in
alternating batches from the same stream.  Counts are aggregated as exact
integer sums, so results do not depend on how replications are scheduled.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dist import QueueModel
from .errors import DomainError

__all__ = [
    "SimulationEstimate",
    "CycleEstimate",
    "replication_stream",
    "simulate_cycle_counts",
    "estimate_curve",
    "simulate_first_cycle",
    "estimate_cycle_moments",
    "z_scores",
]

_CHUNK = 4096
_TWO53 = 2.0**53
# stream family tags, so curve and cycle experiments never share streams
_CURVE, _CYCLE = 0, 1


@dataclass(frozen=True)
class SimulationEstimate:
    grid: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    reps: int
    seed: int


@dataclass(frozen=True)
class CycleEstimate:
    """Sample moments of complete busy cycles (one per replication)."""

    mean: float
    mean_stderr: float
    second_moment: float
    second_moment_stderr: float
    reps: int
    seed: int


def replication_stream(seed: int, rep: int, family: int = _CURVE) -> np.random.Generator:
    """The generator used by replication ``rep``."""
    key = (rep,) if family == _CURVE else (rep, family)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def _uniforms(rng: np.random.Generator, n: int) -> np.ndarray:
    k = rng.integers(0, 1 << 53, size=n, dtype=np.int64)
    return (k + 0.5) / _TWO53


def _batch(m: QueueModel, rng, n):
    gaps = -np.log(_uniforms(rng, n)) / m.lam
    services = m.service.sample(_uniforms(rng, n))
    return gaps, services


def _busy_starts(m: QueueModel, horizon: float, rng) -> np.ndarray:
    """Epochs in [0, horizon] at which a busy period begins."""
    n = int(m.lam * horizon + 5 * math.sqrt(m.lam * horizon) + 16)
    gaps, services = _batch(m, rng, n)
    arrivals = np.concatenate([[0.0], np.cumsum(gaps[:-1])])
    while arrivals[-1] <= horizon:
        more_gaps, more_services = _batch(m, rng, n)
        arrivals = np.concatenate([arrivals, arrivals[-1] + np.cumsum(np.concatenate([[gaps[-1]], more_gaps[:-1]]))])
        gaps = more_gaps
        services = np.concatenate([services, more_services])
    keep = arrivals <= horizon
    a = arrivals[keep]
    dep = a + services[: a.size]
    prev_max = np.concatenate([[-np.inf], np.maximum.accumulate(dep)[:-1]])
    # arrival exactly at the last departure finds the system empty
    return a[a >= prev_max]


def simulate_cycle_counts(m: QueueModel, grid, rng: np.random.Generator) -> np.ndarray:
    """Number of busy periods starting in ``[0, t]`` for each grid point (one replication)."""
    t = np.asarray(grid, dtype=float)
    if t.size == 0:
        return np.zeros(0, dtype=np.int64)
    starts = _busy_starts(m, float(t.max()), rng)
    return np.searchsorted(starts, t, side="right").astype(np.int64)


def _chunk_sums(args):
    m, grid, seed, first, last = args
    s = np.zeros(grid.size, dtype=np.int64)
    ss = np.zeros(grid.size, dtype=np.int64)
    for r in range(first, last):
        c = simulate_cycle_counts(m, grid, replication_stream(seed, r))
        s += c
        ss += c * c
    return s, ss


def _run_chunks(fn, tasks, n_jobs):
    if n_jobs == 1 or len(tasks) == 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, tasks))


def _jobs(n_jobs):
    if n_jobs is None or n_jobs == 0:
        return 1
    if n_jobs < 0:
        return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)
    return int(n_jobs)


def _mean_stderr(total: int, total_sq: int, n: int) -> tuple[float, float]:
    # exact integer arithmetic up to the final division
    num = n * total_sq - total * total
    var = num / (n * (n - 1))
    return total / n, math.sqrt(max(var, 0.0) / n)


def estimate_curve(
    m: QueueModel, grid, reps: int, seed: int, n_jobs: int | None = 1
) -> SimulationEstimate:
    """Mean busy-cycle counts and their standard errors over ``reps`` replications.

    ``n_jobs > 1`` spreads chunks of replications over worker processes
    (``-1`` uses every CPU); the result is bit-identical for any value.
    """
    if int(reps) != reps or reps < 2:
        raise DomainError(f"reps must be an integer >= 2, got {reps!r}")
    if not (0 <= int(seed) < 2**64):
        raise DomainError(f"seed must be a 64-bit unsigned integer, got {seed!r}")
    t = np.asarray(grid, dtype=float).reshape(-1)
    if np.any(np.isnan(t)) or np.any(t < 0) or np.any(np.diff(t) < 0):
        raise DomainError("grid must be ascending and nonnegative")
    reps, seed = int(reps), int(seed)
    tasks = [(m, t, seed, lo, min(lo + _CHUNK, reps)) for lo in range(0, reps, _CHUNK)]
    s = np.zeros(t.size, dtype=object)
    ss = np.zeros(t.size, dtype=object)
    for cs, css in _run_chunks(_chunk_sums, tasks, _jobs(n_jobs)):
        s += cs.astype(object)
        ss += css.astype(object)
    stats = [_mean_stderr(int(a), int(b), reps) for a, b in zip(s, ss)]
    mean = np.array([x[0] for x in stats])
    stderr = np.array([x[1] for x in stats])
    return SimulationEstimate(t, mean, stderr, reps, seed)


def simulate_first_cycle(m: QueueModel, rng: np.random.Generator) -> float:
    """Length of the busy cycle that starts at time 0 (busy period plus idle period)."""
    n = 32
    clock = 0.0
    running_max = -np.inf
    first = True
    while True:
        gaps, services = _batch(m, rng, n)
        if first:
            arrivals = np.concatenate([[0.0], np.cumsum(gaps[:-1])])
            first = False
        else:
            arrivals = clock + np.cumsum(gaps)
        dep = arrivals + services
        prev_max = np.maximum(running_max, np.concatenate([[-np.inf], np.maximum.accumulate(dep)[:-1]]))
        hits = np.flatnonzero(arrivals >= prev_max)
        hits = hits[arrivals[hits] > 0]
        if hits.size:
            return float(arrivals[hits[0]])
        running_max = max(running_max, float(dep.max()))
        clock = float(arrivals[-1])
        n = min(2 * n, 1 << 16)


def _cycle_chunk(args):
    m, seed, first, last = args
    z = np.array([simulate_first_cycle(m, replication_stream(seed, r, _CYCLE)) for r in range(first, last)])
    return z


def estimate_cycle_moments(m: QueueModel, reps: int, seed: int, n_jobs: int | None = 1) -> CycleEstimate:
    """Sample mean and second moment of complete busy cycles.

    Every replication simulates exactly the first cycle from time 0 to the
    next busy-period start, so no cycle is censored by a horizon.
    """
    if int(reps) != reps or reps < 2:
        raise DomainError(f"reps must be an integer >= 2, got {reps!r}")
    reps, seed = int(reps), int(seed)
    tasks = [(m, seed, lo, min(lo + _CHUNK, reps)) for lo in range(0, reps, _CHUNK)]
    z = np.concatenate(_run_chunks(_cycle_chunk, tasks, _jobs(n_jobs)))
    z2 = z * z
    root = math.sqrt(reps)
    return CycleEstimate(
        mean=float(z.mean()),
        mean_stderr=float(z.std(ddof=1) / root),
        second_moment=float(z2.mean()),
        second_moment_stderr=float(z2.std(ddof=1) / root),
        reps=reps,
        seed=seed,
    )


def z_scores(analytic, estimate: SimulationEstimate) -> np.ndarray:
    """``(mean - analytic) / stderr``; 0 where both the gap and stderr vanish, inf for a nonzero gap with zero stderr."""
    diff = estimate.mean - np.asarray(analytic, dtype=float)
    z = np.zeros_like(diff)
    nz = estimate.stderr > 0
    z[nz] = diff[nz] / estimate.stderr[nz]
    exact = ~nz
    z[exact & (np.abs(diff) > 1e-12)] = np.inf
    return z
