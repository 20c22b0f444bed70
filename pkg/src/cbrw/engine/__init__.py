"""Stochastic engines: count-based CBRW, genealogy oracle, absorbed BRW, comparison walk."""
from .absorbed import DEFAULT_CUTOFF, FirstPassageCounts, run_brw_absorbed
from .comparison import run_comparison_walk
from .genealogy import Genealogy, run_genealogy
from .population import PopulationState, Trace, run, step
from .sampling import EXACT_THRESHOLD, sample_binomial, sample_offspring_total
from .seeding import StreamSeed, fresh_seed, parse_seed

__all__ = [
    "DEFAULT_CUTOFF",
    "EXACT_THRESHOLD",
    "FirstPassageCounts",
    "Genealogy",
    "PopulationState",
    "StreamSeed",
    "Trace",
    "fresh_seed",
    "parse_seed",
    "run",
    "run_brw_absorbed",
    "run_comparison_walk",
    "run_genealogy",
    "sample_binomial",
    "sample_offspring_total",
    "step",
]
