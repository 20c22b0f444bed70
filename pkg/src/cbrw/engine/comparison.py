"""Auxiliary walk that is pushed left whenever it sets a new maximum."""
from __future__ import annotations

import numpy as np

from ..errors import DomainError
from .seeding import StreamSeed

_CHUNK = 1 << 16


def run_comparison_walk(p_0: float, n_levels: int, seed: StreamSeed | np.random.Generator) -> np.ndarray:
    """First hitting times ``T_x`` of levels ``x = 1..n_levels``.

    Off new maxima the walk steps right w.p. ``p_0``; on reaching a level for
    the first time (including 0 at time 0) it steps left.
    """
    if not 0.5 < p_0 < 1.0:
        raise DomainError(f"comparison walk needs p_0 in (1/2, 1), got {p_0}")
    rng = seed.generator() if isinstance(seed, StreamSeed) else seed
    hits = np.empty(n_levels, dtype=np.int64)
    pos, top, t, found = 0, 0, 0, 0
    fresh = True
    while found < n_levels:
        ups = (rng.random(_CHUNK) < p_0).tolist()
        for up in ups:
            if fresh:
                pos -= 1
                fresh = False
            elif up:
                pos += 1
            else:
                pos -= 1
            t += 1
            if pos > top:
                top = pos
                hits[found] = t
                found += 1
                fresh = True
                if found == n_levels:
                    break
    return hits
