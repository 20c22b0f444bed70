"""Offspring laws, model parameters and their validation.

Every object here is immutable. Constructors are permissive so that
:func:`validate` can report *all* problems of a parameter set at once;
operations that need a well-formed law assume it has been validated.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np

from .errors import DomainError, ValidationError, Violation

PMF_TOLERANCE = 1e-12
DEFAULT_MAX_SUPPORT = 64


class CookieLayout(str, enum.Enum):
    HALF_LINE = "half_line"
    FULL_LINE = "full_line"


def parse_probability(value: Any) -> float:
    """Accept a number or a rational string such as ``"3/4"``."""
    if isinstance(value, bool):
        raise DomainError(f"not a probability: {value!r}")
    if isinstance(value, str):
        return float(Fraction(value.strip()))
    return float(value)


@dataclass(frozen=True)
class OffspringDistribution:
    """Finite-support pmf stored as ``((k, prob), ...)`` sorted by ``k``."""

    support: tuple[tuple[int, float], ...]

    def __post_init__(self):
        items = tuple((int(k), float(p)) for k, p in self.support)
        object.__setattr__(self, "support", tuple(sorted(items, key=lambda kp: kp[0])))

    @classmethod
    def from_mapping(cls, pmf: Mapping[int, Any]) -> OffspringDistribution:
        """Build from ``{k: prob}``; exact zeros are dropped."""
        items = [(int(k), parse_probability(p)) for k, p in pmf.items()]
        return cls(tuple((k, p) for k, p in items if p != 0.0))

    @classmethod
    def point_mass(cls, k: int) -> OffspringDistribution:
        return cls(((k, 1.0),))

    @classmethod
    def with_mean(cls, m: float) -> OffspringDistribution:
        """Two-point law on ``floor(m)`` and ``ceil(m)`` with mean ``m``."""
        if m < 0 or not math.isfinite(m):
            raise DomainError(f"mean must be finite and nonnegative, got {m}")
        lo = math.floor(m)
        frac = m - lo
        if frac == 0.0:
            return cls.point_mass(lo)
        return cls(((lo, 1.0 - frac), (lo + 1, frac)))

    @cached_property
    def ks(self) -> np.ndarray:
        return np.array([k for k, _ in self.support], dtype=np.int64)

    @cached_property
    def probs(self) -> np.ndarray:
        return np.array([p for _, p in self.support], dtype=np.float64)

    @property
    def max_k(self) -> int:
        return self.support[-1][0] if self.support else 0

    def mass(self, k: int) -> float:
        for kk, p in self.support:
            if kk == k:
                return p
        return 0.0

    @property
    def mean(self) -> float:
        return mean(self)

    @property
    def variance(self) -> float:
        m = mean(self)
        return math.fsum(p * (k - m) ** 2 for k, p in self.support)

    def as_dict(self) -> dict[int, float]:
        return dict(self.support)

    def violations(self, name: str = "pmf", max_support: int = DEFAULT_MAX_SUPPORT) -> list[Violation]:
        out: list[Violation] = []
        if not self.support:
            return [Violation("EmptySupport", f"{name} has no support points")]
        ks = [k for k, _ in self.support]
        if len(set(ks)) != len(ks):
            out.append(Violation("MalformedSupport", f"{name} has duplicate support points"))
        if ks[0] < 0:
            out.append(Violation("MalformedSupport", f"{name} has a negative support point"))
        for k, p in self.support:
            if not (0.0 < p <= 1.0) or not math.isfinite(p):
                out.append(Violation("ProbabilityOutOfRange", f"{name}({k}) = {p} is not in (0, 1]"))
        total = math.fsum(p for _, p in self.support)
        if abs(total - 1.0) > PMF_TOLERANCE:
            out.append(Violation("UnnormalizedPmf", f"{name} sums to {total!r}"))
        if ks[-1] > max_support:
            out.append(
                Violation("SupportTooLarge", f"{name} has support point {ks[-1]} > cap {max_support}")
            )
        return out

    def to_json(self) -> list[dict[str, Any]]:
        return [{"k": k, "p": p} for k, p in self.support]

    @classmethod
    def from_json(cls, entries: Iterable[Mapping[str, Any]] | Mapping[str, Any]) -> OffspringDistribution:
        if isinstance(entries, Mapping):
            return cls.from_mapping({int(k): v for k, v in entries.items()})
        return cls(tuple((int(e["k"]), parse_probability(e["p"])) for e in entries))


def mean(dist: OffspringDistribution) -> float:
    return math.fsum(k * p for k, p in dist.support)


def pgf(dist: OffspringDistribution, s: float) -> float:
    """Probability generating function ``sum_k mu(k) s**k`` on ``[0, 1]``."""
    if not 0.0 <= s <= 1.0:
        raise DomainError(f"pgf argument must lie in [0, 1], got {s}")
    return math.fsum(p * s**k for k, p in dist.support)


def directional_thinning(dist: OffspringDistribution, p: float) -> OffspringDistribution:
    """Law of the number of children stepping right when each does so w.p. ``p``."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"thinning probability must lie in (0, 1), got {p}")
    acc: dict[int, list[float]] = {}
    for n, w in dist.support:
        for j in range(n + 1):
            acc.setdefault(j, []).append(w * math.comb(n, j) * p**j * (1.0 - p) ** (n - j))
    return OffspringDistribution(tuple((j, math.fsum(v)) for j, v in sorted(acc.items()) if math.fsum(v) > 0))


@dataclass(frozen=True)
class CbrwParams:
    mu_c: OffspringDistribution
    p_c: float
    mu_0: OffspringDistribution
    p_0: float
    layout: CookieLayout = CookieLayout.HALF_LINE
    max_support: int = field(default=DEFAULT_MAX_SUPPORT, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "layout", CookieLayout(self.layout))

    @property
    def q_c(self) -> float:
        return 1.0 - self.p_c

    @property
    def q_0(self) -> float:
        return 1.0 - self.p_0

    @property
    def m_c(self) -> float:
        return mean(self.mu_c)

    @property
    def m_0(self) -> float:
        return mean(self.mu_0)

    def violations(self) -> list[Violation]:
        out: list[Violation] = []
        for name, dist in (("mu_c", self.mu_c), ("mu_0", self.mu_0)):
            out.extend(dist.violations(name, self.max_support))
            if dist.mass(0) > 0:
                out.append(Violation("ZeroOffspringMass", f"{name}(0) = {dist.mass(0)} must be 0"))
        for name, p in (("p_c", self.p_c), ("p_0", self.p_0)):
            if not (0.0 < p < 1.0):
                out.append(Violation("ProbabilityOutOfRange", f"{name} = {p} is not in (0, 1)"))
        return out

    def replace(self, **changes: Any) -> CbrwParams:
        return replace(self, **changes)

    def to_json(self) -> dict[str, Any]:
        return {
            "mu_c": self.mu_c.to_json(),
            "p_c": self.p_c,
            "mu_0": self.mu_0.to_json(),
            "p_0": self.p_0,
            "layout": self.layout.value,
        }

    @classmethod
    def from_json(cls, doc: Mapping[str, Any], max_support: int = DEFAULT_MAX_SUPPORT) -> CbrwParams:
        missing = [key for key in ("mu_c", "p_c", "mu_0", "p_0") if key not in doc]
        if missing:
            raise ValidationError([Violation("MissingKey", f"config lacks {key!r}") for key in missing])
        try:
            return cls(
                mu_c=OffspringDistribution.from_json(doc["mu_c"]),
                p_c=parse_probability(doc["p_c"]),
                mu_0=OffspringDistribution.from_json(doc["mu_0"]),
                p_0=parse_probability(doc["p_0"]),
                layout=CookieLayout(doc.get("layout", "half_line")),
                max_support=max_support,
            )
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError([Violation("MalformedConfig", str(exc))]) from exc


def load_params(path: str | Path, max_support: int = DEFAULT_MAX_SUPPORT) -> CbrwParams:
    with open(path) as fh:
        return CbrwParams.from_json(json.load(fh), max_support=max_support)


def validate(params: CbrwParams) -> CbrwParams:
    """Return ``params`` unchanged, or raise with every violation found."""
    problems = params.violations()
    if problems:
        raise ValidationError(problems)
    return params


@dataclass(frozen=True)
class GwSpec:
    """Galton-Watson law started from ``initial`` particles; mass at zero allowed."""

    offspring: OffspringDistribution
    initial: int = 1

    def violations(self) -> list[Violation]:
        out = self.offspring.violations("offspring")
        if self.initial < 1:
            out.append(Violation("InvalidInitial", f"initial = {self.initial} must be >= 1"))
        return out

    def validated(self) -> GwSpec:
        problems = self.violations()
        if problems:
            raise ValidationError(problems)
        return self
