import math
import warnings

import numpy as np
import pytest

from cbrw.engine import StreamSeed
from cbrw.errors import CountOverflow, DegenerateDistribution, NotCritical, NotSubcritical, ZeroVariance
from cbrw.gw import (
    critical_survival_report,
    exact_survival_probabilities,
    extinction_probability,
    extinction_time_tail,
    extinction_times,
    fit_tail_constant,
    simulate_gw,
    subcritical_decay_report,
)
from cbrw.model import GwSpec, directional_thinning

from conftest import D

BINARY = D({0: 0.5, 2: 0.5})


@pytest.mark.parametrize(
    "pmf, z, expected",
    [({0: 0.25, 2: 0.75}, 1, 1 / 3), ({0: 0.5, 2: 0.5}, 1, 1.0), ({0: 0.25, 2: 0.75}, 2, 1 / 9)],
)
def test_extinction_probability_examples(pmf, z, expected):
    assert extinction_probability(GwSpec(D(pmf), z)) == pytest.approx(expected, abs=1e-12)


def test_extinction_probability_point_mass_one():
    with pytest.warns(DegenerateDistribution):
        assert extinction_probability(GwSpec(D({1: 1}))) == 0.0


@pytest.mark.parametrize("pmf", [{0: 0.2, 1: 0.3, 3: 0.5}, {0: 0.01, 1: 0.98, 2: 0.01 - 1e-6, 3: 1e-6}, {0: 0.49, 2: 0.51}, {1: 0.5, 2: 0.5}])
def test_extinction_probability_is_smallest_fixed_point(pmf):
    dist = D(pmf)
    q = extinction_probability(GwSpec(dist))
    assert 0.0 <= q <= 1.0
    assert (q == 1.0) == (dist.mean <= 1.0)
    # the smallest root of s = f(s) on [0, 1], from numpy's polynomial roots
    coeffs = np.zeros(dist.max_k + 1)
    for k, p in dist.support:
        coeffs[k] += p
    coeffs[1] -= 1.0
    roots = [r.real for r in np.roots(coeffs[::-1]) if abs(r.imag) < 1e-9 and -1e-12 <= r.real <= 1 + 1e-12]
    assert q == pytest.approx(min(roots), abs=1e-9)


def test_simulate_unit_and_dead_laws():
    rng = np.random.default_rng(0)
    unit = simulate_gw(GwSpec(D({1: 1}), 3), 5, rng)
    assert unit.sizes == (3,) * 6 and unit.extinct_at is None
    dead = simulate_gw(GwSpec(D({0: 1}), 7), 5, rng)
    assert dead.sizes == (7, 0, 0, 0, 0, 0) and dead.extinct_at == 1


def test_simulate_extinction_is_absorbing():
    rng = StreamSeed(3).generator()
    for _ in range(300):
        traj = simulate_gw(GwSpec(BINARY), 30, rng)
        if traj.extinct_at is not None:
            assert all(s == 0 for s in traj.sizes[traj.extinct_at :])
            assert all(s > 0 for s in traj.sizes[: traj.extinct_at])


def test_critical_martingale_mean():
    rng = StreamSeed(4).generator()
    final = np.array([simulate_gw(GwSpec(BINARY), 10, rng).sizes[-1] for _ in range(100_000)], dtype=float)
    se = final.std(ddof=1) / math.sqrt(final.size)
    assert abs(final.mean() - 1.0) <= 3 * se


def test_many_initial_particles_equal_independent_sum():
    dist = D({0: 0.2, 1: 0.3, 2: 0.5})
    rng = StreamSeed(5).generator()
    runs = 100_000
    first = np.array([simulate_gw(GwSpec(dist, 3), 1, rng).sizes[1] for _ in range(runs)])
    # three-fold convolution of the one-particle law
    law = np.zeros(7)
    for a, pa in dist.support:
        for b, pb in dist.support:
            for c, pc in dist.support:
                law[a + b + c] += pa * pb * pc
    freq = np.bincount(first, minlength=7) / runs
    se = np.sqrt(law * (1 - law) / runs)
    assert np.all(np.abs(freq - law) <= 4 * se + 1e-12)
    later = np.array([simulate_gw(GwSpec(dist, 3), 4, rng).sizes[-1] for _ in range(runs)], dtype=float)
    singles = np.array(
        [sum(simulate_gw(GwSpec(dist, 1), 4, rng).sizes[-1] for _ in range(3)) for _ in range(runs // 4)], dtype=float
    )
    diff = later.mean() - singles.mean()
    se = math.sqrt(later.var(ddof=1) / later.size + singles.var(ddof=1) / singles.size)
    assert abs(diff) <= 3 * se


def test_extinction_times_sentinel_and_batching():
    spec = GwSpec(BINARY)
    a = extinction_times(spec, 20, 150_000, StreamSeed(6), workers=1)
    b = extinction_times(spec, 20, 150_000, StreamSeed(6), workers=2)
    assert np.array_equal(a, b)
    assert a.min() >= 1 and a.max() == 21


def test_extinction_times_overflow():
    with pytest.raises(CountOverflow):
        extinction_times(GwSpec(D({2: 1})), 70, 10, StreamSeed(1))


@pytest.mark.parametrize("dist", [D({0: 0.3, 1: 0.7}), directional_thinning(D({1: 1}), 0.6)])
def test_bernoulli_chain_ratio_is_one(dist):
    report = subcritical_decay_report(GwSpec(dist), 20, 50_000, StreamSeed(7))
    for row in report.rows:
        assert abs(row.scaled - 1.0) <= 3 * row.scaled_stderr + 1e-12


def test_subcritical_ratio_stabilizes():
    dist = D({0: 0.375, 1: 0.5, 2: 0.125})
    report = subcritical_decay_report(GwSpec(dist), 30, 400_000, StreamSeed(8))
    a, b = report.row(20), report.row(30)
    assert abs(a.scaled - b.scaled) <= 5 * math.hypot(a.scaled_stderr, b.scaled_stderr)


def test_subcritical_requires_mean_below_one():
    with pytest.raises(NotSubcritical):
        subcritical_decay_report(GwSpec(BINARY), 5, 10, StreamSeed(1))


def test_survival_against_pgf_iteration():
    exact = exact_survival_probabilities(BINARY, 40)
    report = critical_survival_report(GwSpec(BINARY), 40, 100_000, StreamSeed(9))
    for row in report.rows:
        assert abs(row.estimate - exact[row.n]) <= 4 * row.stderr + 1e-12
    assert report.meta["kolmogorov"] == pytest.approx(2.0)


def test_critical_errors():
    with pytest.raises(ZeroVariance):
        critical_survival_report(GwSpec(D({1: 1})), 5, 10, StreamSeed(1))
    with pytest.raises(NotCritical):
        critical_survival_report(GwSpec(D({0: 0.3, 1: 0.7})), 5, 10, StreamSeed(1))


def test_critical_small_variance_law():
    dist = D({0: 0.25, 1: 0.5, 2: 0.25})
    report = critical_survival_report(GwSpec(dist), 200, 200_000, StreamSeed(10))
    assert 3.6 <= report.row(200).scaled <= 4.4


def test_one_generation_extinction():
    one = extinction_time_tail(GwSpec(BINARY, 1), 1, 200_000, StreamSeed(11))
    two = extinction_time_tail(GwSpec(BINARY, 2), 1, 200_000, StreamSeed(12))
    assert abs(one.eq - 0.5) <= 3 * one.eq_stderr
    assert abs(two.eq - 0.25) <= 3 * two.eq_stderr
    assert one.le == one.eq


def test_tail_nonincreasing_in_initial_size():
    tails = [extinction_time_tail(GwSpec(BINARY, z), 8, 100_000, StreamSeed(13, z)) for z in (1, 2, 4, 8)]
    for a, b in zip(tails, tails[1:]):
        assert b.le <= a.le + 3 * math.hypot(a.le_stderr, b.le_stderr)


def test_fit_tail_constant_inverts():
    c = fit_tail_constant(10, 5, math.exp(-3.0 * 10 / 5))
    assert c == pytest.approx(3.0)
    assert fit_tail_constant(10, 5, 0.0) == math.inf


def test_report_csv_columns():
    report = critical_survival_report(GwSpec(BINARY), 3, 1000, StreamSeed(1))
    lines = report.to_csv(["seed=1"]).splitlines()
    assert lines[0] == "# seed=1"
    assert lines[1].split(",")[:4] == ["n", "estimate", "stderr", "trials"]
    assert len(lines) == 5
