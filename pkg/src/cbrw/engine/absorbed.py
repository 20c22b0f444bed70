"""First-passage counts of the BRW without cookies, vectorized over trials.

Each trial starts with ``initial`` particles at 0. A particle reaching
``left_barrier`` or ``right_cutoff`` is counted there and removed together
with its future line, which realizes the first-visitor counts at -n / +n.
Trials are simulated in fixed-size batches, batch ``b`` drawing from stream
``(master_seed, b)``, so results do not depend on how batches are scheduled.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import CountOverflow, DomainError
from ..model import OffspringDistribution
from .parallel import map_ordered
from .sampling import INT64_MAX, _exact_totals
from .seeding import StreamSeed

BATCH_SIZE = 50_000
DEFAULT_CUTOFF = 16
DEFAULT_HORIZON = 400


@dataclass(frozen=True)
class FirstPassageCounts:
    """Per-trial arrays. ``deepest`` is the leftmost site reached (>= barrier)."""

    lambda_minus: np.ndarray
    lambda_plus: np.ndarray
    truncated_mass: np.ndarray
    deepest: np.ndarray

    @property
    def trials(self) -> int:
        return int(self.lambda_minus.size)

    @property
    def truncated_fraction(self) -> float:
        return float(np.mean(self.truncated_mass > 0)) if self.trials else 0.0


def _batch(args) -> tuple[np.ndarray, ...]:
    dist, p_0, a, b, horizon, initial, seed = args
    rng = seed.generator()
    n = initial.size
    width = b - a + 1
    counts = np.zeros((n, width), dtype=np.int64)
    counts[:, -a] = initial
    idx = np.arange(n)
    lam_minus = np.zeros(n, dtype=np.int64)
    lam_plus = np.zeros(n, dtype=np.int64)
    deepest = np.zeros(n, dtype=np.int64)
    limit = INT64_MAX // (2 * max(dist.max_k, 1))
    unit = dist.ks.size == 1 and dist.ks[0] == 1
    for _ in range(horizon):
        if idx.size == 0:
            break
        interior = counts[:, 1:-1]
        occupied = interior > 0
        k = interior[occupied]
        if k.size and k.max() > limit:
            raise CountOverflow("absorbed BRW site count exceeds 64-bit range")
        total = k if unit else _exact_totals(k, dist, rng)
        right = rng.binomial(total, p_0)
        step_r = np.zeros_like(interior)
        step_l = np.zeros_like(interior)
        step_r[occupied] = right
        step_l[occupied] = total - right
        new = np.zeros_like(counts)
        new[:, 2:] += step_r
        new[:, :-2] += step_l
        occupied_next = new > 0
        leftmost = np.where(occupied_next.any(axis=1), occupied_next.argmax(axis=1), width) + a
        deepest[idx] = np.minimum(deepest[idx], leftmost)
        lam_minus[idx] += new[:, 0]
        lam_plus[idx] += new[:, -1]
        new[:, 0] = 0
        new[:, -1] = 0
        alive = new.any(axis=1)
        if not alive.all():
            new = new[alive]
            idx = idx[alive]
        counts = new
    truncated = np.zeros(n, dtype=np.int64)
    truncated[idx] = counts.sum(axis=1)
    return lam_minus, lam_plus, truncated, deepest


def run_brw_absorbed(
    mu_0: OffspringDistribution,
    p_0: float,
    left_barrier: int = -1,
    right_cutoff: int = DEFAULT_CUTOFF,
    horizon: int = DEFAULT_HORIZON,
    seed: StreamSeed | int = 0,
    trials: int = 1,
    initial: int | np.ndarray = 1,
    workers: int = 1,
) -> FirstPassageCounts:
    """Run ``trials`` independent absorbed BRWs and return their counts."""
    if left_barrier >= 0 or right_cutoff <= 0:
        raise DomainError("need left_barrier < 0 < right_cutoff")
    if not 0.0 < p_0 < 1.0:
        raise DomainError(f"p_0 must lie in (0, 1), got {p_0}")
    if not isinstance(seed, StreamSeed):
        seed = StreamSeed(int(seed))
    base = seed.spawn()
    init = np.broadcast_to(np.asarray(initial, dtype=np.int64), (trials,))
    jobs = [
        (mu_0, p_0, left_barrier, right_cutoff, horizon, np.array(init[s : s + BATCH_SIZE]), base.child(i))
        for i, s in enumerate(range(0, trials, BATCH_SIZE))
    ]
    parts = map_ordered(_batch, jobs, workers=workers, chunksize=1)
    if not parts:
        empty = np.zeros(0, dtype=np.int64)
        return FirstPassageCounts(empty, empty, empty, empty)
    cols = [np.concatenate(c) for c in zip(*parts)]
    return FirstPassageCounts(*cols)
