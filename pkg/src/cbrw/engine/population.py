"""Count-based evolution of the cookie branching random walk.

Particles at one site are exchangeable, so the state is the vector of
per-site counts plus the cookie frontier(s). A step applies, in order:
branching (cookie law at a frontier site, no-cookie law elsewhere), the
nearest-neighbour move of every child, and removal of every cookie at a
site where branching happened.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from ..errors import CountOverflow
from ..model import CbrwParams, CookieLayout, validate
from .sampling import INT64_MAX, binomial_counts, offspring_totals
from .seeding import StreamSeed

BACKENDS = ("exact", "u64")


@dataclass(frozen=True)
class PopulationState:
    """Snapshot of the process. ``counts`` holds only occupied sites."""

    counts: dict[int, int]
    l_frontier: int
    r_frontier: int | None = None
    time: int = 0
    approximate: bool = False

    @classmethod
    def initial(cls, layout: CookieLayout = CookieLayout.HALF_LINE) -> PopulationState:
        r = 0 if CookieLayout(layout) is CookieLayout.FULL_LINE else None
        return cls(counts={0: 1}, l_frontier=0, r_frontier=r)

    def count(self, site: int) -> int:
        return self.counts.get(site, 0)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def lp_size(self) -> int:
        return self.count(self.l_frontier)


class _Cloud:
    """Mutable dense working form of a :class:`PopulationState`."""

    __slots__ = ("lo", "counts", "l", "r", "t", "approx")

    def __init__(self, lo: int, counts: np.ndarray, l: int, r: int | None, t: int, approx: bool):
        self.lo, self.counts, self.l, self.r, self.t, self.approx = lo, counts, l, r, t, approx

    @classmethod
    def from_state(cls, state: PopulationState) -> _Cloud:
        sites = sorted(x for x, c in state.counts.items() if c > 0)
        lo, hi = sites[0], sites[-1]
        big = max(state.counts.values()) > INT64_MAX // 4
        counts = np.zeros(hi - lo + 1, dtype=object if big else np.int64)
        for x in sites:
            counts[x - lo] = state.counts[x]
        return cls(lo, counts, state.l_frontier, state.r_frontier, state.time, state.approximate)

    def to_state(self) -> PopulationState:
        nz = np.nonzero(self.counts)[0]
        return PopulationState(
            counts={int(self.lo + i): int(self.counts[i]) for i in nz},
            l_frontier=self.l,
            r_frontier=self.r,
            time=self.t,
            approximate=self.approx,
        )

    @property
    def hi(self) -> int:
        return self.lo + self.counts.size - 1

    def at(self, site: int) -> int:
        i = site - self.lo
        if 0 <= i < self.counts.size:
            return int(self.counts[i])
        return 0


def _guard_width(cloud: _Cloud, params: CbrwParams, backend: str) -> None:
    if cloud.counts.dtype == object:
        return
    max_k = max(params.mu_c.max_k, params.mu_0.max_k, 1)
    if int(cloud.counts.max()) > INT64_MAX // (2 * max_k):
        if backend == "u64":
            raise CountOverflow(f"site count exceeds the 64-bit backend at t={cloud.t}")
        cloud.counts = cloud.counts.astype(object)


def _advance(cloud: _Cloud, params: CbrwParams, rng: np.random.Generator, backend: str) -> None:
    _guard_width(cloud, params, backend)
    k = cloud.counts
    cookie_sites = [cloud.l] if cloud.r is None or cloud.r == cloud.l else [cloud.l, cloud.r]
    cookie_idx = [x - cloud.lo for x in cookie_sites if 0 <= x - cloud.lo < k.size and k[x - cloud.lo] > 0]

    plain = k.copy()
    plain[cookie_idx] = 0
    totals, a1 = offspring_totals(plain, params.mu_0, rng)
    right, a2 = binomial_counts(totals, params.p_0, rng)
    approx = a1 or a2
    if cookie_idx:
        ck = k[cookie_idx]
        ct, a3 = offspring_totals(ck, params.mu_c, rng)
        cr, a4 = binomial_counts(ct, params.p_c, rng)
        totals[cookie_idx] = ct
        right[cookie_idx] = cr
        approx = approx or a3 or a4
    left = totals - right

    new = np.zeros(k.size + 2, dtype=k.dtype)
    new[2:] += right
    new[:-2] += left
    nz = np.nonzero(new)[0]
    first, last = int(nz[0]), int(nz[-1])

    consumed = {x for x in cookie_sites if (x - cloud.lo) in cookie_idx}
    if cloud.l in consumed:
        cloud.l += 1
    if cloud.r is not None and cloud.r in consumed:
        cloud.r -= 1
    cloud.lo = cloud.lo - 1 + first
    cloud.counts = new[first : last + 1]
    cloud.t += 1
    cloud.approx = cloud.approx or approx


def step(
    state: PopulationState, params: CbrwParams, rng: np.random.Generator, backend: str = "exact"
) -> PopulationState:
    """Advance the process by one time unit."""
    validate(params)
    cloud = _Cloud.from_state(state)
    _advance(cloud, params, rng, backend)
    return cloud.to_state()


TRACE_COLUMNS = ("t", "l", "r", "z0", "lp_size", "total", "min_site", "max_site", "approx_flag")


@dataclass
class Trace:
    """Per-step summary records, one per time ``0..horizon``."""

    t: list[int] = field(default_factory=list)
    l: list[int] = field(default_factory=list)
    r: list[int | None] = field(default_factory=list)
    z0: list[int] = field(default_factory=list)
    lp_size: list[int] = field(default_factory=list)
    total: list[int] = field(default_factory=list)
    min_site: list[int] = field(default_factory=list)
    max_site: list[int] = field(default_factory=list)
    approx_flag: list[bool] = field(default_factory=list)

    def record(self, cloud: _Cloud) -> None:
        self.t.append(cloud.t)
        self.l.append(cloud.l)
        self.r.append(cloud.r)
        self.z0.append(cloud.at(0))
        self.lp_size.append(cloud.at(cloud.l))
        self.total.append(int(cloud.counts.sum()))
        self.min_site.append(cloud.lo)
        self.max_site.append(cloud.hi)
        self.approx_flag.append(cloud.approx)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def approximate(self) -> bool:
        return any(self.approx_flag)

    def rows(self) -> Iterable[tuple]:
        return zip(*(getattr(self, c) for c in TRACE_COLUMNS))

    def to_csv(self, header_lines: Sequence[str] = ()) -> str:
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for row in self.rows():
            writer.writerow(["" if v is None else int(v) for v in row])
        return buf.getvalue()


Observer = Callable[[PopulationState], None]


def run(
    params: CbrwParams,
    horizon: int,
    seed: StreamSeed | np.random.Generator,
    observers: Sequence[Observer] = (),
    backend: str = "exact",
    initial: PopulationState | None = None,
) -> Trace:
    """Simulate ``horizon`` steps from ``initial`` (one particle at 0 by default)."""
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}")
    validate(params)
    rng = seed.generator() if isinstance(seed, StreamSeed) else seed
    cloud = _Cloud.from_state(initial or PopulationState.initial(params.layout))
    trace = Trace()
    trace.record(cloud)
    for obs in observers:
        obs(cloud.to_state())
    for _ in range(horizon):
        _advance(cloud, params, rng, backend)
        trace.record(cloud)
        for obs in observers:
            obs(cloud.to_state())
    return trace
