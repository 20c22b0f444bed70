"""Monte Carlo experiments that confront the closed forms with simulation.

Every experiment is a pure function of its inputs and master seed. Trial
``i`` of a population experiment draws from stream ``(master_seed, i)``;
vectorized experiments draw per batch. Aggregation happens in index order.

The recurrence thresholds used by the acceptance checks (0.9 late-window
occupation, the [0.05, 0.95] weak-recurrence band, 1% bound violations)
are calibration constants of this harness, not properties of the model.
Finite simulations can corroborate a regime but never prove it.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

from . import analytic
from .analytic import BrwClass, Regime, classify_brw, classify_cbrw, phi_pair
from .engine.absorbed import DEFAULT_CUTOFF, DEFAULT_HORIZON, run_brw_absorbed
from .engine.comparison import run_comparison_walk
from .engine.parallel import map_ordered
from .engine.population import run
from .engine.seeding import StreamSeed
from .errors import DomainError, InsufficientHits, NotTransient, NotTransientRight
from .model import CbrwParams, OffspringDistribution, validate

LATE_WINDOW_STRONG = 0.9
WEAK_BAND = (0.05, 0.95)
LP_VIOLATION_LIMIT = 0.01


def _seed(seed: StreamSeed | int) -> StreamSeed:
    return seed if isinstance(seed, StreamSeed) else StreamSeed(int(seed))


def _as_float(x: int | float) -> float:
    try:
        return float(x)
    except OverflowError:
        return math.inf


@dataclass(frozen=True)
class EstimateReport:
    name: str
    estimate: float
    stderr: float
    trials: int
    master_seed: int
    truncation_meta: dict[str, Any] | None = None
    closed_form: float | None = None
    z_score: float | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def build(cls, name, estimate, stderr, trials, master_seed, closed_form=None, **kw) -> EstimateReport:
        z = None
        if closed_form is not None:
            diff = estimate - closed_form
            z = diff / stderr if stderr > 0 else (0.0 if diff == 0 else math.copysign(math.inf, diff))
        return cls(name, float(estimate), float(stderr), int(trials), int(master_seed), closed_form=closed_form, z_score=z, **kw)

    def to_json(self) -> dict[str, Any]:
        return asdict(self)


# -- first-passage means -----------------------------------------------------------------


def estimate_phi(
    mu_0: OffspringDistribution,
    p_0: float,
    side: str,
    trials: int,
    seed: StreamSeed | int,
    cutoff: int = DEFAULT_CUTOFF,
    horizon: int = DEFAULT_HORIZON,
    workers: int = 1,
) -> EstimateReport:
    """Mean number of first visitors to -1 (``side="left"``) or +1 (``"right"``)."""
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    if classify_brw(p_0, mu_0.mean) is BrwClass.STRONGLY_RECURRENT:
        raise NotTransient(f"BRW without cookies is strongly recurrent at p_0={p_0}, m_0={mu_0.mean}")
    seed = _seed(seed)
    if side == "left":
        counts = run_brw_absorbed(mu_0, p_0, -1, cutoff, horizon, seed, trials, workers=workers)
        sample, dropped = counts.lambda_minus, counts.lambda_plus
    else:
        counts = run_brw_absorbed(mu_0, p_0, -cutoff, 1, horizon, seed, trials, workers=workers)
        sample, dropped = counts.lambda_plus, counts.lambda_minus
    phi = phi_pair(p_0, mu_0.mean)
    return EstimateReport.build(
        f"phi_{side}",
        sample.mean(),
        sample.std(ddof=1) / math.sqrt(trials),
        trials,
        seed.master_seed,
        closed_form=phi.phi_l if side == "left" else phi.phi_r,
        truncation_meta={
            "truncated_fraction": counts.truncated_fraction,
            "horizon": horizon,
            "cutoff": cutoff,
            "mean_dropped_at_cutoff": float(dropped.mean()),
        },
    )


@dataclass(frozen=True)
class DecayReport:
    slope: float
    slope_stderr: float
    intercept: float
    closed_form_slope: float
    n_values: tuple[int, ...]
    probabilities: tuple[float, ...]
    stderrs: tuple[float, ...]
    method: str
    trials: int
    master_seed: int

    @property
    def c_hat(self) -> float:
        return math.exp(self.intercept)

    def to_json(self) -> dict[str, Any]:
        out = asdict(self)
        out["c_hat"] = self.c_hat
        return out


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, np.ndarray]:
    xc = x - x.mean()
    w = xc / (xc @ xc)
    slope = float(w @ y)
    return slope, float(y.mean() - slope * x.mean()), w


def _reach_by_splitting(mu_0, p_0, n_max, per_level, seed, cutoff, horizon, workers):
    # fixed-effort splitting over the embedded first-passage levels -1, -2, ...
    probs, log_vars = [], []
    survivors = None
    for level in range(1, n_max + 1):
        if survivors is None:
            initial = np.ones(per_level, dtype=np.int64)
        else:
            rng = seed.spawn(level, 0).generator()
            initial = rng.choice(survivors, size=per_level, replace=True)
        lam = run_brw_absorbed(
            mu_0, p_0, -1, cutoff, horizon, seed.spawn(level, 1), per_level, initial=initial, workers=workers
        ).lambda_minus
        hit = lam > 0
        p_hat = float(hit.mean())
        if p_hat == 0.0:
            raise InsufficientHits(f"no trial reached level -{level}; increase trials")
        probs.append(p_hat)
        log_vars.append((1.0 - p_hat) / (p_hat * per_level))
        survivors = lam[hit]
    cum = np.cumprod(probs)
    return cum, np.array(log_vars)


def estimate_left_reach_decay(
    mu_0: OffspringDistribution,
    p_0: float,
    n_range: tuple[int, int] = (3, 12),
    trials: int = 1_000_000,
    seed: StreamSeed | int = 0,
    method: str = "splitting",
    cutoff: int = DEFAULT_CUTOFF,
    horizon: int = DEFAULT_HORIZON,
    workers: int = 1,
) -> DecayReport:
    """Fit the geometric decay rate of ``P(some particle reaches -n)``.

    ``method="direct"`` counts trials reaching each level. ``"splitting"``
    spends ``trials // n_max`` runs per level of the embedded first-passage
    process, which keeps deep levels resolvable.
    """
    m_0 = mu_0.mean
    if classify_brw(p_0, m_0) is not BrwClass.TRANSIENT_RIGHT:
        raise NotTransientRight(f"BRW without cookies is not transient to the right at p_0={p_0}, m_0={m_0}")
    seed = _seed(seed)
    n_lo, n_hi = n_range
    ns = np.arange(n_lo, n_hi + 1)
    if method == "direct":
        counts = run_brw_absorbed(mu_0, p_0, -n_hi, cutoff, horizon, seed, trials, workers=workers)
        p_hat = np.array([np.mean(counts.deepest <= -n) for n in ns])
        if np.any(p_hat == 0):
            raise InsufficientHits(f"no trial reached -{int(ns[p_hat == 0][0])}; increase trials")
        se = np.sqrt(p_hat * (1 - p_hat) / trials)
        y = np.log(p_hat)
        wts = p_hat * trials / (1 - p_hat)
        x = ns.astype(float)
        xm = (wts @ x) / wts.sum()
        ym = (wts @ y) / wts.sum()
        sxx = wts @ (x - xm) ** 2
        slope = float(wts @ ((x - xm) * (y - ym)) / sxx)
        intercept = float(ym - slope * xm)
        slope_se = float(math.sqrt(1.0 / sxx))
    elif method == "splitting":
        per_level = max(trials // n_hi, 1)
        cum, log_vars = _reach_by_splitting(mu_0, p_0, n_hi, per_level, seed, cutoff, horizon, workers)
        p_hat = cum[ns - 1]
        se = p_hat * np.sqrt(np.cumsum(log_vars)[ns - 1])
        slope, intercept, w = _ols(ns.astype(float), np.log(p_hat))
        # log P_n is a cumulative sum of per-level terms; propagate their variances
        level_weight = np.zeros(n_hi)
        for n, wn in zip(ns, w):
            level_weight[:n] += wn
        slope_se = float(math.sqrt(np.sum(log_vars * level_weight**2)))
    else:
        raise ValueError(f"unknown method {method!r}")
    return DecayReport(
        slope=slope,
        slope_stderr=slope_se,
        intercept=intercept,
        closed_form_slope=math.log(phi_pair(p_0, m_0).phi_l),
        n_values=tuple(int(n) for n in ns),
        probabilities=tuple(float(p) for p in p_hat),
        stderrs=tuple(float(s) for s in se),
        method=method,
        trials=trials,
        master_seed=seed.master_seed,
    )


# -- population experiments --------------------------------------------------------------


def _recurrence_trial(args) -> tuple[bool, int, bool]:
    params, horizon, seed, backend = args
    z0 = run(params, horizon, seed, backend=backend).z0
    start = math.ceil(horizon / 2)
    late = any(z > 0 for z in z0[start:])
    returns = [t for t in range(1, horizon + 1) if z0[t] > 0]
    return late, sum(z0[1:]), len(returns) == 1


def _trial_traces(fn, params, horizon, trials, seed, backend, workers):
    seed = _seed(seed)
    jobs = [(params, horizon, seed.child(i), backend) for i in range(trials)]
    return seed, map_ordered(fn, jobs, workers=workers)


@dataclass(frozen=True)
class RecurrenceReport:
    late_window_occupation: float
    stderr: float
    mean_visits: float
    no_visit_after_first_return: float
    trials: int
    horizon: int
    window: tuple[int, int]
    master_seed: int
    predicted: str
    note: str = "finite-horizon statistics corroborate but cannot prove a recurrence regime"

    def to_json(self) -> dict[str, Any]:
        return asdict(self)


def recurrence_statistic(
    params: CbrwParams,
    horizon: int,
    trials: int,
    seed: StreamSeed | int,
    workers: int = 1,
    backend: str = "exact",
) -> RecurrenceReport:
    """Origin-visit statistics over ``trials`` runs of length ``horizon``.

    Returns the fraction of runs with a particle at 0 at some time in
    ``[horizon/2, horizon]``, the mean total number of particle visits to 0
    after time 0, and the fraction of runs whose first return is also their last.
    """
    validate(params)
    seed, rows = _trial_traces(_recurrence_trial, params, horizon, trials, seed, backend, workers)
    late = np.array([r[0] for r in rows], dtype=float)
    frac = float(late.mean())
    return RecurrenceReport(
        late_window_occupation=frac,
        stderr=math.sqrt(frac * (1 - frac) / trials),
        mean_visits=_as_float(sum(r[1] for r in rows)) / trials,
        no_visit_after_first_return=float(np.mean([r[2] for r in rows])),
        trials=trials,
        horizon=horizon,
        window=(math.ceil(horizon / 2), horizon),
        master_seed=seed.master_seed,
        predicted=classify_cbrw(params).kind.value,
    )


def _frontier_trial(args) -> int:
    params, horizon, seed, backend = args
    return run(params, horizon, seed, backend=backend).l[-1]


@dataclass(frozen=True)
class FrontierReport:
    horizon: int
    trials: int
    master_seed: int
    quantiles: dict[str, float]
    mean: float
    nominal_lambda: float | None
    speed_bound_holds: bool | None
    full_speed_holds: bool | None

    def to_json(self) -> dict[str, Any]:
        return asdict(self)


def frontier_speed_estimate(
    params: CbrwParams,
    horizon: int,
    trials: int,
    seed: StreamSeed | int,
    workers: int = 1,
    backend: str = "exact",
) -> FrontierReport:
    """Distribution of ``l(horizon)/horizon`` with the two speed checks.

    ``speed_bound_holds``: the 5th percentile is at least 0.9 times the nominal
    comparison-walk speed (``p_0 > 1/2`` only). ``full_speed_holds``: the
    median is at least 0.9 (``p_0 m_0 > 1`` only).
    """
    validate(params)
    seed, ls = _trial_traces(_frontier_trial, params, horizon, trials, seed, backend, workers)
    ratio = np.array(ls, dtype=float) / horizon
    qs = {f"q{int(q * 100):02d}": float(np.quantile(ratio, q)) for q in (0.05, 0.25, 0.5, 0.75, 0.95)}
    lam = analytic.frontier_speed_bound(params.p_0)[0] if params.p_0 > 0.5 else None
    return FrontierReport(
        horizon=horizon,
        trials=trials,
        master_seed=seed.master_seed,
        quantiles=qs,
        mean=float(ratio.mean()),
        nominal_lambda=lam,
        speed_bound_holds=None if lam is None else qs["q05"] >= 0.9 * lam,
        full_speed_holds=qs["q50"] >= 0.9 if params.p_0 * params.m_0 > 1 else None,
    )


def _lp_trial(args) -> list[int]:
    params, horizon, seed, backend = args
    return run(params, horizon, seed, backend=backend).lp_size


@dataclass(frozen=True)
class LpGrowthReport:
    alpha: float
    m_tilde: float
    n_min: int
    horizon: int
    trials: int
    violations: int
    pairs: int
    master_seed: int

    @property
    def violation_fraction(self) -> float:
        return self.violations / self.pairs if self.pairs else 0.0

    def to_json(self) -> dict[str, Any]:
        out = asdict(self)
        out["violation_fraction"] = self.violation_fraction
        return out


def lp_growth_check(
    params: CbrwParams,
    horizon: int,
    trials: int,
    seed: StreamSeed | int,
    n_min: int = 50,
    alpha: float | None = None,
    workers: int = 1,
    backend: str = "exact",
) -> LpGrowthReport:
    """Count ``(trial, n)`` pairs, ``n >= n_min``, with ``|LP_n| >= alpha**n``."""
    validate(params)
    if params.p_c * params.m_c > 1.0:
        raise DomainError("leading-process bound applies to subcritical or critical leading processes")
    if classify_brw(params.p_0, params.m_0) is not BrwClass.TRANSIENT_RIGHT:
        raise NotTransientRight("leading-process bound needs a BRW transient to the right")
    m_tilde = analytic.lp_growth_rate(params)
    alpha = m_tilde + 0.1 if alpha is None else alpha
    seed, sizes = _trial_traces(_lp_trial, params, horizon, trials, seed, backend, workers)
    thresholds = [alpha**n for n in range(horizon + 1)]
    violations = sum(
        1 for lp in sizes for n in range(n_min, horizon + 1) if lp[n] >= thresholds[n]
    )
    return LpGrowthReport(
        alpha=alpha,
        m_tilde=m_tilde,
        n_min=n_min,
        horizon=horizon,
        trials=trials,
        violations=violations,
        pairs=trials * max(horizon - n_min + 1, 0),
        master_seed=seed.master_seed,
    )


def estimate_comparison_increment(p_0: float, n_levels: int, seed: StreamSeed | int) -> EstimateReport:
    """Mean of ``T_{x+1} - T_x`` for the comparison walk, against ``1 + 2/(2p_0 - 1)``."""
    seed = _seed(seed)
    hits = run_comparison_walk(p_0, n_levels, seed)
    inc = np.diff(np.concatenate(([0], hits))).astype(float)
    centred = inc - inc.mean()
    lag1 = float((centred[:-1] @ centred[1:]) / (centred @ centred))
    return EstimateReport.build(
        "comparison_increment",
        inc.mean(),
        inc.std(ddof=1) / math.sqrt(inc.size),
        inc.size,
        seed.master_seed,
        closed_form=analytic.frontier_speed_bound(p_0)[1],
        extra={"lag1_autocorrelation": lag1, "lag1_stderr": 1.0 / math.sqrt(inc.size)},
    )


# -- phase scans --------------------------------------------------------------------------

AXES = ("p_c", "m_c", "p_0", "m_0")


def with_axis(params: CbrwParams, name: str, value: float) -> CbrwParams:
    if name == "p_c":
        return params.replace(p_c=float(value))
    if name == "p_0":
        return params.replace(p_0=float(value))
    if name == "m_c":
        return params.replace(mu_c=OffspringDistribution.with_mean(float(value)))
    if name == "m_0":
        return params.replace(mu_0=OffspringDistribution.with_mean(float(value)))
    raise ValueError(f"unknown axis {name!r}; choose from {AXES}")


@dataclass(frozen=True)
class PhaseCell:
    x: float
    y: float
    params: CbrwParams
    predicted: Regime
    empirical: RecurrenceReport | None = None


@dataclass(frozen=True)
class PhaseScan:
    x_name: str
    y_name: str
    cells: tuple[PhaseCell, ...]

    def to_csv(self, header_lines: Sequence[str] = ()) -> str:
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        writer = csv.writer(buf, lineterminator="\n")
        header = [self.x_name, self.y_name, "kind", "flags"]
        simulated = any(c.empirical is not None for c in self.cells)
        if simulated:
            header += ["late_window_occupation", "stderr", "mean_visits", "no_visit_after_first_return"]
        writer.writerow(header)
        for c in self.cells:
            row = [repr(c.x), repr(c.y), c.predicted.kind.value, ";".join(f.name for f in c.predicted.boundary_flags)]
            if simulated:
                e = c.empirical
                row += [repr(e.late_window_occupation), repr(e.stderr), repr(e.mean_visits), repr(e.no_visit_after_first_return)]
            writer.writerow(row)
        return buf.getvalue()


def phase_scan(
    base: CbrwParams,
    x_axis: tuple[str, Sequence[float]],
    y_axis: tuple[str, Sequence[float]],
    simulate: bool = False,
    trials: int = 100,
    horizon: int = 200,
    seed: StreamSeed | int = 0,
    workers: int = 1,
) -> PhaseScan:
    """Predicted regime on a grid, row-major over ``x`` then ``y``."""
    seed = _seed(seed)
    (x_name, xs), (y_name, ys) = x_axis, y_axis
    cells = []
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            params = validate(with_axis(with_axis(base, x_name, x), y_name, y))
            empirical = None
            if simulate:
                cell_seed = seed.spawn(i, j)
                empirical = recurrence_statistic(params, horizon, trials, cell_seed, workers=workers)
            cells.append(PhaseCell(float(x), float(y), params, classify_cbrw(params), empirical))
    return PhaseScan(x_name, y_name, tuple(cells))
