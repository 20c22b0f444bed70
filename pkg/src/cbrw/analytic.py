"""Closed forms: first-visit generating functions, BRW and CBRW classification.

All theorem inequalities are evaluated with plain float comparisons; nearness
to a threshold is reported separately through ``Regime.boundary_flags``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any

from .errors import DomainError, NotTransient, NotTransientRight
from .model import CbrwParams, CookieLayout, validate

BOUNDARY_EPS = 1e-9


class BrwClass(str, enum.Enum):
    TRANSIENT_RIGHT = "transient_right"
    TRANSIENT_LEFT = "transient_left"
    STRONGLY_RECURRENT = "strongly_recurrent"


class RegimeKind(str, enum.Enum):
    STRONGLY_RECURRENT = "strongly_recurrent"
    WEAKLY_RECURRENT = "weakly_recurrent"
    TRANSIENT_RIGHT = "transient_right"
    TRANSIENT_LEFT = "transient_left"


@dataclass(frozen=True)
class BoundaryFlag:
    name: str
    distance: float


@dataclass(frozen=True)
class Regime:
    kind: RegimeKind
    boundary_flags: tuple[BoundaryFlag, ...] = ()
    decisive: dict[str, Any] = field(default_factory=dict, compare=False)

    def to_json(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "decisive_quantities": dict(self.decisive),
            "boundary_flags": [{"name": f.name, "distance": f.distance} for f in self.boundary_flags],
        }


@dataclass(frozen=True)
class PhiPair:
    phi_r: float
    phi_l: float


def _check_p(p_0: float) -> None:
    if not 0.0 < p_0 < 1.0:
        raise DomainError(f"p_0 must lie in (0, 1), got {p_0}")


def transience_bound(p_0: float) -> float:
    """Largest no-cookie mean for which the BRW is still transient: 1/(2 sqrt(p q))."""
    _check_p(p_0)
    return 1.0 / (2.0 * math.sqrt(p_0 * (1.0 - p_0)))


def classify_brw(p_0: float, m_0: float) -> BrwClass:
    _check_p(p_0)
    if m_0 < 1.0:
        raise DomainError(f"m_0 must be >= 1, got {m_0}")
    if m_0 <= transience_bound(p_0):
        if p_0 > 0.5:
            return BrwClass.TRANSIENT_RIGHT
        if p_0 < 0.5:
            return BrwClass.TRANSIENT_LEFT
    return BrwClass.STRONGLY_RECURRENT


def _first_passage_numerator(p_0: float, z: float) -> float:
    disc = 1.0 - 4.0 * p_0 * (1.0 - p_0) * z * z
    # rounding can push the discriminant just below zero on the boundary
    return 1.0 - math.sqrt(max(disc, 0.0))


def first_visit_gf(p_0: float, start: int, target: int, z: float) -> float:
    """F(start, target | z) for the nearest-neighbour walk stepping right w.p. ``p_0``.

    Multi-step displacements factor into products of one-step first passages.
    """
    _check_p(p_0)
    if not 0.0 < z <= transience_bound(p_0):
        raise DomainError(f"z = {z} lies outside the convergence region (0, {transience_bound(p_0)}]")
    d = target - start
    if d == 0:
        return 1.0
    num = _first_passage_numerator(p_0, z)
    if d > 0:
        return (num / (2.0 * (1.0 - p_0) * z)) ** d
    return (num / (2.0 * p_0 * z)) ** (-d)


def phi_pair(p_0: float, m_0: float) -> PhiPair:
    """Mean numbers of first visitors to +1 and -1 in the BRW without cookies."""
    if classify_brw(p_0, m_0) is BrwClass.STRONGLY_RECURRENT:
        raise NotTransient(f"BRW without cookies is strongly recurrent at p_0={p_0}, m_0={m_0}")
    return PhiPair(phi_r=first_visit_gf(p_0, 0, 1, m_0), phi_l=first_visit_gf(p_0, 0, -1, m_0))


def left_reach_decay_rate(p_0: float, m_0: float) -> float:
    if classify_brw(p_0, m_0) is not BrwClass.TRANSIENT_RIGHT:
        raise NotTransientRight(f"BRW without cookies is not transient to the right at p_0={p_0}, m_0={m_0}")
    return phi_pair(p_0, m_0).phi_l


def frontier_speed_bound(p_0: float) -> tuple[float, float]:
    """Return ``(lambda, E[T_1])`` for the comparison walk.

    The guaranteed frontier speed is *strictly* below ``lambda = 1/E[T_1]``;
    the nominal value is returned and callers apply their own margin.
    """
    if not 0.5 < p_0 < 1.0:
        raise DomainError(f"frontier speed bound needs p_0 in (1/2, 1), got {p_0}")
    expected_t1 = 1.0 + 2.0 / (2.0 * p_0 - 1.0)
    return 1.0 / expected_t1, expected_t1


def lp_growth_rate(params: CbrwParams) -> float:
    return max(1.0, params.p_0 * params.m_0)


def _flags(quantities: dict[str, float]) -> tuple[BoundaryFlag, ...]:
    return tuple(
        BoundaryFlag(name, abs(value))
        for name, value in quantities.items()
        if value is not None and abs(value) < BOUNDARY_EPS
    )


def _half_line_kind(brw: BrwClass, pcmc: float, pcmc_phil: float | None) -> RegimeKind:
    if brw is BrwClass.STRONGLY_RECURRENT:
        return RegimeKind.STRONGLY_RECURRENT
    if brw is BrwClass.TRANSIENT_RIGHT:
        if pcmc > 1.0 and pcmc_phil >= 1.0:
            return RegimeKind.STRONGLY_RECURRENT
        return RegimeKind.TRANSIENT_RIGHT
    if pcmc > 1.0:
        return RegimeKind.WEAKLY_RECURRENT
    return RegimeKind.TRANSIENT_LEFT


def _full_line_kind(lead: float, lead_phi: float, trail: float, transient: RegimeKind) -> RegimeKind:
    # lead: mean of the LP on the side the BRW escapes to; trail: the other LP
    if lead > 1.0 and lead_phi >= 1.0:
        return RegimeKind.STRONGLY_RECURRENT
    if trail > 1.0:
        return RegimeKind.WEAKLY_RECURRENT
    return transient


def classify_cbrw(params: CbrwParams) -> Regime:
    validate(params)
    p_0, m_0, m_c = params.p_0, params.m_0, params.m_c
    brw = classify_brw(p_0, m_0)
    pcmc = params.p_c * m_c
    qcmc = params.q_c * m_c
    phi = None if brw is BrwClass.STRONGLY_RECURRENT else phi_pair(p_0, m_0)
    pcmc_phil = None if phi is None else pcmc * phi.phi_l
    qcmc_phir = None if phi is None else qcmc * phi.phi_r

    near = {
        "pcmc": pcmc - 1.0,
        "m0_transience_bound": m_0 - transience_bound(p_0),
        "p0_half": p_0 - 0.5,
    }
    if params.layout is CookieLayout.HALF_LINE:
        kind = _half_line_kind(brw, pcmc, pcmc_phil)
        if brw is BrwClass.TRANSIENT_RIGHT:
            near["pcmc_phil"] = pcmc_phil - 1.0
    else:
        near["qcmc"] = qcmc - 1.0
        if brw is BrwClass.STRONGLY_RECURRENT:
            kind = RegimeKind.STRONGLY_RECURRENT
        elif brw is BrwClass.TRANSIENT_RIGHT:
            kind = _full_line_kind(pcmc, pcmc_phil, qcmc, RegimeKind.TRANSIENT_RIGHT)
            near["pcmc_phil"] = pcmc_phil - 1.0
        else:
            kind = _full_line_kind(qcmc, qcmc_phir, pcmc, RegimeKind.TRANSIENT_LEFT)
            near["qcmc_phir"] = qcmc_phir - 1.0

    decisive = {
        "pcmc": pcmc,
        "pcmc_phil": pcmc_phil,
        "qcmc": qcmc,
        "qcmc_phir": qcmc_phir,
        "brw_class": brw.value,
        "phi_l": None if phi is None else phi.phi_l,
        "phi_r": None if phi is None else phi.phi_r,
    }
    return Regime(kind=kind, boundary_flags=_flags(near), decisive=decisive)
