"""Bayesian projection clustering for longitudinal data.

Fit a Gaussian linear mixed model by blocked Gibbs sampling, form mixed
predictive replicates that share a chosen subset of random effects, and
cluster subjects by KL-optimal projection onto K distinct shared values,
with posterior coincidence summaries and two cluster-count selection rules.
"""

from .dataset import (
    BasisSpec,
    LongitudinalDataset,
    ModelSpec,
    SubjectRecord,
    bspline_design,
    fourier_design,
    load_csv,
    power_spectrum,
    standardize,
    write_csv,
)
from .errors import NumericalError, ParseError, ProjclustError, ValidationError
from .evaluation import adjusted_rand, coincidence, rand_index, threshold_summary
from .projection import Partition, assign, centroid_update, objective_kl, project_cluster
from .replicate import (
    GPartition,
    conditional_prior,
    kl_term,
    partition_G,
    projection_metric,
    replicate_predictive,
    subject_metrics,
)
from .sampler import (
    McmcConfig,
    PosteriorDraw,
    PriorSpec,
    fitted_mean_replicate,
    gibbs_fit,
    load_draws,
    save_draws,
)
from .selection import (
    InstabilityCurve,
    KlCurve,
    choose_k_bootstrap,
    choose_k_kl,
    fitted_mean_matrix,
    instability,
    instability_curve,
    kl_curve,
)
from .synthgen import SynthConfig, generate_example1

__version__ = "0.1.0"
