"""Sampling kernels for particle counts.

Counts below ``EXACT_THRESHOLD`` are sampled exactly with numpy. Larger
counts use a Gaussian approximation (continuity corrected, clamped to the
feasible range) and the caller is told the result is approximate.

Array arguments may be ``int64`` or ``object`` (Python ints); the returned
array has the same dtype.
"""
from __future__ import annotations

import math

import numpy as np

from ..model import OffspringDistribution

EXACT_THRESHOLD = 2**48
INT64_MAX = 2**63 - 1


def _conditional_probs(dist: OffspringDistribution) -> np.ndarray:
    probs = dist.probs
    tail = np.cumsum(probs[::-1])[::-1]
    return np.clip(probs / tail, 0.0, 1.0)


def _exact_totals(k: np.ndarray, dist: OffspringDistribution, rng: np.random.Generator) -> np.ndarray:
    # multinomial split of k parents over the support, via successive binomials
    ks = dist.ks
    if ks.size == 1:
        return k * ks[0]
    cond = _conditional_probs(dist)
    remaining = k.copy()
    total = np.zeros_like(k)
    for j in range(ks.size - 1):
        n_j = rng.binomial(remaining, cond[j])
        total += ks[j] * n_j
        remaining -= n_j
    total += ks[-1] * remaining
    return total


def _to_float(values: np.ndarray) -> np.ndarray:
    try:
        return values.astype(np.float64)
    except OverflowError:
        return np.array([math.ldexp(float(v >> 960), 960) if v.bit_length() > 1000 else float(v) for v in values])


def _round_clamped(mean: np.ndarray, sd: np.ndarray, z: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    x = np.floor(mean + sd * z + 0.5)
    ints = np.array([int(v) for v in x], dtype=object)
    return np.minimum(np.maximum(ints, lo), hi)


def _gaussian_totals(k: np.ndarray, dist: OffspringDistribution, rng: np.random.Generator) -> np.ndarray:
    kf = _to_float(k)
    z = rng.standard_normal(k.size)
    return _round_clamped(kf * dist.mean, np.sqrt(kf * dist.variance), z, k * int(dist.ks[0]), k * int(dist.ks[-1]))


def _gaussian_binomial(n: np.ndarray, p: float, rng: np.random.Generator) -> np.ndarray:
    nf = _to_float(n)
    z = rng.standard_normal(n.size)
    return _round_clamped(nf * p, np.sqrt(nf * p * (1.0 - p)), z, np.zeros(n.size, dtype=object), n)


def _split(k: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    big = np.asarray(k >= EXACT_THRESHOLD, dtype=bool)
    return ~big, big


def offspring_totals(
    k: np.ndarray, dist: OffspringDistribution, rng: np.random.Generator
) -> tuple[np.ndarray, bool]:
    """Total offspring of ``k[i]`` independent parents at each entry."""
    if k.dtype != object and (k.size == 0 or k.max() < EXACT_THRESHOLD):
        return _exact_totals(k, dist, rng), False
    small, big = _split(k)
    out = np.zeros(k.size, dtype=k.dtype)
    if small.any():
        exact = _exact_totals(k[small].astype(np.int64), dist, rng)
        out[small] = exact if k.dtype != object else [int(x) for x in exact]
    out[big] = _gaussian_totals(k[big].astype(object), dist, rng)
    return out, True


def binomial_counts(n: np.ndarray, p: float, rng: np.random.Generator) -> tuple[np.ndarray, bool]:
    """Binomial(n[i], p) at each entry."""
    if n.dtype != object and (n.size == 0 or n.max() < EXACT_THRESHOLD):
        return rng.binomial(n, p), False
    small, big = _split(n)
    out = np.zeros(n.size, dtype=n.dtype)
    if small.any():
        exact = rng.binomial(n[small].astype(np.int64), p)
        out[small] = exact if n.dtype != object else [int(x) for x in exact]
    out[big] = _gaussian_binomial(n[big].astype(object), p, rng)
    return out, True


def sample_offspring_total(count: int, dist: OffspringDistribution, rng: np.random.Generator) -> int:
    """Total number of children of ``count`` parents (arbitrary precision)."""
    arr = np.array([count], dtype=object if count >= EXACT_THRESHOLD else np.int64)
    totals, _ = offspring_totals(arr, dist, rng)
    return int(totals[0])


def sample_binomial(n: int, p: float, rng: np.random.Generator) -> int:
    if p <= 0.0:
        return 0
    if p >= 1.0:
        return int(n)
    arr = np.array([n], dtype=object if n >= EXACT_THRESHOLD else np.int64)
    out, _ = binomial_counts(arr, p, rng)
    return int(out[0])


def is_exact(n: int) -> bool:
    return n < EXACT_THRESHOLD
