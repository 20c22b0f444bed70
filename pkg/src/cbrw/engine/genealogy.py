"""Agent-level reference engine with Ulam-Harris particle labels.

Only meant for small horizons: it is the correctness oracle for the count
engine. Cookie bookkeeping here deliberately does not use frontiers; each
site simply remembers whether its cookie has been eaten.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ..errors import PopulationGuardExceeded
from ..model import CbrwParams, CookieLayout, validate
from .seeding import StreamSeed

Label = tuple[int, ...]
DEFAULT_GUARD = 10**6


@dataclass
class Genealogy:
    """Every particle ever produced, keyed by label, with its position."""

    position: dict[Label, int] = field(default_factory=dict)
    generations: list[list[Label]] = field(default_factory=list)

    def site_counts(self, t: int) -> dict[int, int]:
        return dict(Counter(self.position[v] for v in self.generations[t]))

    def path(self, label: Label) -> list[int]:
        return [self.position[label[:i]] for i in range(len(label) + 1)]

    @property
    def horizon(self) -> int:
        return len(self.generations) - 1


def _has_cookie(site: int, eaten: set[int], layout: CookieLayout) -> bool:
    if site in eaten:
        return False
    return layout is CookieLayout.FULL_LINE or site >= 0


def run_genealogy(
    params: CbrwParams,
    horizon: int,
    seed: StreamSeed | np.random.Generator,
    guard: int = DEFAULT_GUARD,
) -> Genealogy:
    validate(params)
    growth = max(params.m_c, params.m_0)
    if growth > 1 and horizon * math.log(growth) > math.log(guard):
        raise PopulationGuardExceeded(
            f"expected population {growth:.3g}**{horizon} exceeds the guard {guard}"
        )
    rng = seed.generator() if isinstance(seed, StreamSeed) else seed
    tree = Genealogy(position={(): 0}, generations=[[()]])
    eaten: set[int] = set()
    for _ in range(horizon):
        current = tree.generations[-1]
        branched_on_cookie: set[int] = set()
        nxt: list[Label] = []
        for label in current:
            x = tree.position[label]
            if _has_cookie(x, eaten, params.layout):
                dist, p = params.mu_c, params.p_c
                branched_on_cookie.add(x)
            else:
                dist, p = params.mu_0, params.p_0
            n_children = int(rng.choice(dist.ks, p=dist.probs))
            moves = rng.random(n_children) < p
            for i, right in enumerate(moves, start=1):
                child = label + (i,)
                tree.position[child] = x + 1 if right else x - 1
                nxt.append(child)
        if len(nxt) > guard:
            raise PopulationGuardExceeded(f"population {len(nxt)} exceeds the guard {guard}")
        eaten |= branched_on_cookie
        tree.generations.append(nxt)
    return tree
