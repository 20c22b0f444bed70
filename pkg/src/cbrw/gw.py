"""Galton-Watson analytics and Monte Carlo survival reports.

The asymptotic constants of the survival and extinction-time estimates are
never asserted; reports expose scaled columns whose *stabilization* is what
callers check.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .engine.parallel import map_ordered
from .engine.sampling import INT64_MAX, _exact_totals, sample_offspring_total
from .engine.seeding import StreamSeed
from .errors import CountOverflow, DegenerateDistribution, NotCritical, NotSubcritical, ZeroVariance
from .model import GwSpec, OffspringDistribution, pgf

CRITICAL_TOL = 1e-12
BATCH_SIZE = 100_000
_FIXED_POINT_TOL = 1e-14
_MAX_PLAIN_ITERATIONS = 100_000


@dataclass(frozen=True)
class GwTrajectory:
    sizes: tuple[int, ...]
    extinct_at: int | None = None


def extinction_probability(spec: GwSpec) -> float:
    """Probability that the process started from ``spec.initial`` dies out."""
    spec.validated()
    dist = spec.offspring
    if dist.mass(1) == 1.0:
        warnings.warn("offspring law is the point mass at 1; extinction never occurs", DegenerateDistribution)
        return 0.0
    if dist.mean <= 1.0:
        return 1.0
    q, prev = 0.0, -1.0
    iterations = 0
    while abs(q - prev) >= _FIXED_POINT_TOL and iterations < _MAX_PLAIN_ITERATIONS:
        prev, q = q, pgf(dist, q)
        iterations += 1
    if abs(q - prev) >= _FIXED_POINT_TOL:
        # barely supercritical: finish with Newton from below, which stays below the root
        for _ in range(200):
            slope = math.fsum(k * p * q ** (k - 1) for k, p in dist.support if k > 0)
            step = (pgf(dist, q) - q) / (1.0 - slope)
            q = min(q + step, 1.0)
            if abs(step) < _FIXED_POINT_TOL:
                break
    for _ in range(10):
        q = pgf(dist, q)
    return q**spec.initial


def simulate_gw(spec: GwSpec, horizon: int, rng: np.random.Generator | StreamSeed) -> GwTrajectory:
    """One trajectory of generation sizes ``Z_0..Z_horizon`` (arbitrary precision)."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    spec.validated()
    rng = rng.generator() if isinstance(rng, StreamSeed) else rng
    sizes = [spec.initial]
    extinct_at = None
    for n in range(1, horizon + 1):
        size = sample_offspring_total(sizes[-1], spec.offspring, rng) if sizes[-1] else 0
        sizes.append(size)
        if size == 0 and extinct_at is None:
            extinct_at = n
    return GwTrajectory(tuple(sizes), extinct_at)


def _extinction_batch(args) -> np.ndarray:
    dist, z, n_max, count, seed = args
    rng = seed.generator()
    limit = INT64_MAX // max(dist.max_k, 1)
    sizes = np.full(count, z, dtype=np.int64)
    times = np.full(count, n_max + 1, dtype=np.int64)
    idx = np.arange(count)
    for n in range(1, n_max + 1):
        if idx.size == 0:
            break
        if sizes.max() > limit:
            raise CountOverflow("generation size exceeds 64-bit range")
        sizes = _exact_totals(sizes, dist, rng)
        dead = sizes == 0
        times[idx[dead]] = n
        idx, sizes = idx[~dead], sizes[~dead]
    return times


def extinction_times(
    spec: GwSpec, n_max: int, trials: int, seed: StreamSeed | int, workers: int = 1
) -> np.ndarray:
    """Extinction time of each trial, with ``n_max + 1`` meaning alive at ``n_max``."""
    spec.validated()
    seed = seed if isinstance(seed, StreamSeed) else StreamSeed(int(seed))
    base = seed.spawn()
    jobs = [
        (spec.offspring, spec.initial, n_max, min(BATCH_SIZE, trials - s), base.child(i))
        for i, s in enumerate(range(0, trials, BATCH_SIZE))
    ]
    return np.concatenate(map_ordered(_extinction_batch, jobs, workers=workers, chunksize=1))


def exact_survival_probabilities(dist: OffspringDistribution, n_max: int, initial: int = 1) -> np.ndarray:
    """``P(Z_n > 0)`` for ``n = 0..n_max`` by iterating the pgf (small supports only)."""
    if dist.max_k > 8:
        raise ValueError("pgf iteration oracle is limited to supports with max <= 8")
    out = np.empty(n_max + 1)
    f = 0.0
    out[0] = 1.0
    for n in range(1, n_max + 1):
        f = pgf(dist, f)
        out[n] = 1.0 - f**initial
    return out


@dataclass(frozen=True)
class GwReportRow:
    n: int
    estimate: float
    stderr: float
    trials: int
    scaled: float
    scaled_stderr: float


@dataclass(frozen=True)
class GwReport:
    kind: str
    rows: tuple[GwReportRow, ...]
    meta: dict = field(default_factory=dict)

    def row(self, n: int) -> GwReportRow:
        for r in self.rows:
            if r.n == n:
                return r
        raise KeyError(n)

    def to_csv(self, header_lines: Sequence[str] = ()) -> str:
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n", "estimate", "stderr", "trials", "scaled", "scaled_stderr"])
        for r in self.rows:
            writer.writerow([r.n, repr(r.estimate), repr(r.stderr), r.trials, repr(r.scaled), repr(r.scaled_stderr)])
        return buf.getvalue()


def _survival_table(times: np.ndarray, n_max: int) -> tuple[np.ndarray, np.ndarray]:
    trials = times.size
    died_by = np.bincount(np.minimum(times, n_max + 1), minlength=n_max + 2).cumsum()
    alive = (trials - died_by[: n_max + 1]) / trials
    se = np.sqrt(alive * (1.0 - alive) / trials)
    return alive, se


def subcritical_decay_report(
    spec: GwSpec, n_max: int, trials: int, seed: StreamSeed | int, workers: int = 1
) -> GwReport:
    """Rows ``(n, P(Z_n>0), ratio P/m**n)``; the ratio should settle to a constant."""
    m = spec.offspring.mean
    if not m < 1.0 or spec.offspring.mass(0) == 0.0:
        raise NotSubcritical(f"need mean < 1 and mass at 0, got mean {m}")
    alive, se = _survival_table(extinction_times(spec, n_max, trials, seed, workers), n_max)
    rows = tuple(
        GwReportRow(n, float(alive[n]), float(se[n]), trials, float(alive[n] / m**n), float(se[n] / m**n))
        for n in range(1, n_max + 1)
    )
    return GwReport("subcritical", rows, {"mean": m})


def _require_critical(dist: OffspringDistribution) -> None:
    if abs(dist.mean - 1.0) > CRITICAL_TOL:
        raise NotCritical(f"offspring mean {dist.mean} is not 1")
    if dist.variance <= 0.0:
        raise ZeroVariance("critical law must have positive variance")


def critical_survival_report(
    spec: GwSpec, n_max: int, trials: int, seed: StreamSeed | int, workers: int = 1
) -> GwReport:
    """Rows ``(n, P(Z_n>0), n*P)``; for large ``n`` the last column approaches 2/variance."""
    _require_critical(spec.offspring)
    alive, se = _survival_table(extinction_times(spec, n_max, trials, seed, workers), n_max)
    rows = tuple(
        GwReportRow(n, float(alive[n]), float(se[n]), trials, float(n * alive[n]), float(n * se[n]))
        for n in range(1, n_max + 1)
    )
    return GwReport("critical", rows, {"variance": spec.offspring.variance, "kolmogorov": 2.0 / spec.offspring.variance})


@dataclass(frozen=True)
class TailEstimate:
    initial: int
    n: int
    trials: int
    le: float
    le_stderr: float
    eq: float
    eq_stderr: float

    @property
    def fitted_constant(self) -> float:
        """``C`` with ``P(T <= n) = exp(-C z / n)``."""
        return fit_tail_constant(self.initial, self.n, self.le)


def fit_tail_constant(z: int, n: int, p_le: float) -> float:
    return -n * math.log(p_le) / z if p_le > 0 else math.inf


def extinction_time_tail(
    spec: GwSpec, n: int, trials: int, seed: StreamSeed | int, workers: int = 1
) -> TailEstimate:
    """Monte Carlo ``P_z(T <= n)`` and ``P_z(T = n)`` for a critical law."""
    _require_critical(spec.offspring)
    times = extinction_times(spec, n, trials, seed, workers)
    le = float(np.mean(times <= n))
    eq = float(np.mean(times == n))
    return TailEstimate(
        initial=spec.initial,
        n=n,
        trials=trials,
        le=le,
        le_stderr=math.sqrt(le * (1 - le) / trials),
        eq=eq,
        eq_stderr=math.sqrt(eq * (1 - eq) / trials),
    )
