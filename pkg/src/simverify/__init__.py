"""Differentially private verification of survey-weighted estimates
computed from synthetic data, plus the simulation harness and HTTP service
around it."""

from .survey import (
    EstimandKind,
    Population,
    PopulationModel,
    SurveySample,
    compute_inclusion_probabilities,
    draw_pps_sample,
    generate_population,
    horvitz_thompson_total,
    ratio_mean,
    srs_estimate,
)
from .synthesis import SyntheticData, SynthesisMethod, synthesize_biased, synthesize_srs
from .verification import (
    IntervalMode,
    PartitionScheme,
    ToleranceKind,
    ToleranceSpec,
    VerificationResult,
    build_interval,
    count_within,
    partition,
    partition_estimate,
    privatize_count,
    verify,
)
from .posterior import (
    PosteriorResult,
    gibbs_medians,
    gibbs_posterior,
    oracle_posterior,
    sample_r_given_s,
    sample_s_given_r,
)

__version__ = "0.1.0"
