"""Measure and repair diversity loss in black-box samplers.

Stratified rejection reweighting over auxiliary-feature strata, plus
multi-objective candidate generation and Pareto-front subset selection.
"""

from .analysis import DetrimentReport, StratumComposition, analyze_class, dl_after_reweighting
from .metrics import DiversityLoss, FrequencyVector, class_frequencies, diversity_loss, remaining_dl_percent
from .moo import Candidate, CandidateSet, MultiObjectiveProblem, dominates, msr_generate, optimize_scalar, pareto_front
from .rejection import MaxTrialsExceeded, ReweightPlan, SampleBatch, build_plan, sample_batch, sample_one
from .strata import (
    Discretizer,
    FeatureMatrix,
    StratumDistribution,
    assign_stratum,
    estimate_stratum_probs,
    fit_quantile_bins,
    select_features,
)
from .subset import coverage_cost, hypervolume, select_subset
from .synthgen import (
    CollapsedModelSpec,
    PopulationSampler,
    PopulationSpec,
    QualityBiasedSampler,
    oracle_user,
    quality_biased_sampler,
    sample_population,
)

__version__ = "0.1.0"
