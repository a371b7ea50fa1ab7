"""Spectra of random k-subsets of frames versus the MANOVA limit law."""

__version__ = "0.1.0"

from .ensembles import ManovaParams, sample_manova, sample_manova_reversed
from .experiments import (
    ConvergenceFit,
    ExperimentConfig,
    TrialAggregate,
    run_trials,
    sample_subsets,
    tabulate,
    test1_fit,
    test2_fit,
)
from .frames import FAMILIES, FrameMatrix, admissible_sizes, construct, diagnostics
from .functionals import FunctionalSpec, delta_psi, psi_eval, psi_limit
from .rng import RngStream
from .spectra import LimitLaw, SpectralSample, ks_distance, law_cdf, manova_law, mp_law, subset_spectrum

__all__ = [
    "FAMILIES",
    "ConvergenceFit",
    "ExperimentConfig",
    "FrameMatrix",
    "FunctionalSpec",
    "LimitLaw",
    "ManovaParams",
    "RngStream",
    "SpectralSample",
    "TrialAggregate",
    "admissible_sizes",
    "construct",
    "delta_psi",
    "diagnostics",
    "ks_distance",
    "law_cdf",
    "manova_law",
    "mp_law",
    "psi_eval",
    "psi_limit",
    "run_trials",
    "sample_manova",
    "sample_manova_reversed",
    "sample_subsets",
    "subset_spectrum",
    "tabulate",
    "test1_fit",
    "test2_fit",
]
