import math

import numpy as np
import pytest

from cbrw.analytic import RegimeKind
from cbrw.engine import StreamSeed
from cbrw.errors import DomainError, InsufficientHits, NotTransient, NotTransientRight
from cbrw.estimators import (
    estimate_comparison_increment,
    estimate_left_reach_decay,
    estimate_phi,
    frontier_speed_estimate,
    lp_growth_check,
    phase_scan,
    recurrence_statistic,
)
from cbrw.model import CookieLayout

from conftest import BRW_08, D, params

UNIT = D({1: 1})


def test_phi_report_fields():
    report = estimate_phi(UNIT, 0.7, "left", 100_000, StreamSeed(1))
    assert report.closed_form == pytest.approx(3 / 7)
    assert report.z_score == pytest.approx((report.estimate - report.closed_form) / report.stderr)
    assert abs(report.z_score) <= 3
    assert report.truncation_meta["truncated_fraction"] <= 1e-3
    assert report.trials == 100_000 and report.master_seed == 1


def test_phi_right_side():
    report = estimate_phi(BRW_08, 0.8, "right", 100_000, StreamSeed(2))
    assert report.closed_form == pytest.approx(1.1932416284510985)
    assert abs(report.z_score) <= 3


def test_phi_rejects_recurrent_brw():
    with pytest.raises(NotTransient):
        estimate_phi(UNIT, 0.5, "left", 10, StreamSeed(1))


def test_phi_reproducible():
    a = estimate_phi(BRW_08, 0.8, "left", 60_000, StreamSeed(3), workers=1)
    b = estimate_phi(BRW_08, 0.8, "left", 60_000, StreamSeed(3), workers=2)
    assert a == b


def test_decay_single_walk():
    # a lone walk reaches -n with probability (q/p)**n
    report = estimate_left_reach_decay(UNIT, 0.7, (2, 10), trials=200_000, seed=StreamSeed(4))
    assert report.slope == pytest.approx(math.log(3 / 7), abs=0.05)
    assert report.c_hat > 0
    exact = [(3 / 7) ** n for n in report.n_values]
    for est, se, ref in zip(report.probabilities, report.stderrs, exact):
        assert abs(est - ref) <= 4 * se


def test_decay_direct_method_agrees():
    report = estimate_left_reach_decay(UNIT, 0.7, (2, 6), trials=100_000, seed=StreamSeed(5), method="direct")
    assert report.slope == pytest.approx(math.log(3 / 7), abs=0.05)


def test_decay_errors():
    with pytest.raises(NotTransientRight):
        estimate_left_reach_decay(UNIT, 0.3, (2, 4), trials=100, seed=1)
    with pytest.raises(InsufficientHits):
        estimate_left_reach_decay(BRW_08, 0.8, (3, 12), trials=120, seed=1, method="direct")


def test_recurrence_march_never_returns(march):
    report = recurrence_statistic(march, 50, 5, StreamSeed(6))
    assert report.late_window_occupation == 0.0
    assert report.mean_visits == 0.0


def test_recurrence_strong_example_small(strongly_recurrent):
    report = recurrence_statistic(strongly_recurrent, 60, 30, StreamSeed(7))
    assert report.predicted == "strongly_recurrent"
    assert report.late_window_occupation >= 0.9
    assert report.window == (30, 60)


def test_recurrence_reproducible_across_workers(strongly_recurrent):
    a = recurrence_statistic(strongly_recurrent, 40, 12, StreamSeed(8), workers=1)
    b = recurrence_statistic(strongly_recurrent, 40, 12, StreamSeed(8), workers=3)
    assert a == b


def test_frontier_unit_offspring():
    p = params({1: 1}, 0.75, UNIT, 0.75)
    report = frontier_speed_estimate(p, 200, 200, StreamSeed(9))
    assert report.nominal_lambda == pytest.approx(0.2)
    assert report.speed_bound_holds
    assert report.full_speed_holds is None


def test_frontier_median_grows_with_horizon():
    p = params({1: 1}, 0.75, UNIT, 0.75)
    medians = [frontier_speed_estimate(p, h, 200, StreamSeed(10, h)).quantiles["q50"] for h in (100, 200, 400)]
    # speeds sit well above the lower bound; allow sampling wobble of one lattice step pair
    assert medians[0] <= medians[2] + 0.02
    assert all(m > 0.2 for m in medians)


def test_lp_growth_march(march):
    report = lp_growth_check(march.replace(p_0=0.8), 80, 3, StreamSeed(11))
    assert report.violations == 0 and report.m_tilde == 1.0


def test_lp_growth_critical_lp():
    report = lp_growth_check(params({2: 1}, 0.5), 120, 100, StreamSeed(12))
    assert report.violation_fraction <= 0.01
    assert report.pairs == 100 * 71


def test_lp_growth_preconditions():
    with pytest.raises(DomainError):
        lp_growth_check(params({4: 1}, 0.9), 10, 1, StreamSeed(1))
    with pytest.raises(NotTransientRight):
        lp_growth_check(params({1: 1}, 0.5, p_0=0.2), 10, 1, StreamSeed(1))


def test_comparison_increment_report():
    report = estimate_comparison_increment(0.9, 100_000, StreamSeed(13))
    assert report.closed_form == pytest.approx(3.5)
    assert abs(report.z_score) <= 3
    assert abs(report.extra["lag1_autocorrelation"]) <= 3 * report.extra["lag1_stderr"]


def test_phase_single_cell(strongly_recurrent):
    scan = phase_scan(strongly_recurrent, ("p_c", [0.9]), ("m_c", [4.0]))
    (cell,) = scan.cells
    assert cell.predicted.kind is RegimeKind.STRONGLY_RECURRENT
    assert cell.empirical is None


def test_phase_full_line_flips_to_weak():
    grid = ("p_c", [0.1, 0.3, 0.5, 0.7, 0.9]), ("m_c", [1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    half = phase_scan(params({1: 1}, 0.5), *grid)
    full = phase_scan(params({1: 1}, 0.5, layout=CookieLayout.FULL_LINE), *grid)
    flipped = 0
    for h, f in zip(half.cells, full.cells):
        if h.predicted.kind is RegimeKind.TRANSIENT_RIGHT and (1 - h.x) * h.y > 1 + 1e-9:
            assert f.predicted.kind is RegimeKind.WEAKLY_RECURRENT
            flipped += 1
        elif h.predicted.kind is RegimeKind.STRONGLY_RECURRENT:
            assert f.predicted.kind is RegimeKind.STRONGLY_RECURRENT
    assert flipped >= 5


def test_phase_csv_and_simulated_cells(strongly_recurrent):
    scan = phase_scan(strongly_recurrent, ("p_c", [0.5, 0.9]), ("m_0", [1.0, 1.1]), simulate=True, trials=4, horizon=20, seed=3)
    lines = scan.to_csv().splitlines()
    assert lines[0].startswith("p_c,m_0,kind,flags,late_window_occupation")
    assert len(lines) == 5
    again = phase_scan(strongly_recurrent, ("p_c", [0.5, 0.9]), ("m_0", [1.0, 1.1]), simulate=True, trials=4, horizon=20, seed=3)
    assert again.to_csv() == scan.to_csv()
