"""Standard errors for bagged ensembles and random forests.

The package bags a base learner over bootstrap resamples, keeps the
resample counts next to the replicate predictions, and turns that trace
into per-prediction variance estimates: the infinitesimal jackknife, the
jackknife-after-bootstrap, their Monte-Carlo-bias-corrected versions, and
the average of the corrected pair.  A simulation harness checks the Monte
Carlo error laws and sampling-bias behaviour of the estimators at desk
scale.
"""

from .bagging import ResampleTrace, bag_predict, exact_bag_predict, oob_error
from .errors import (
    BagvarError,
    CapacityError,
    ConfigError,
    DataError,
    EstimationError,
    FitError,
    ReplicateError,
)
from .estimators import (
    DecompositionEstimate,
    MCErrorPrediction,
    VarianceEstimate,
    VarOfVarEstimate,
    averaged_estimator,
    bootstrap_base_variance,
    conditional_prediction_variances,
    ij_unbiased,
    ij_variance,
    jackknife_unbiased,
    jackknife_variance,
    predict_mc_moments,
    tree_decomposition,
    var_of_var,
)
from .generators import GeneratorSpec, generate, sample_features, signal
from .learners import (
    AdaptivePolyModel,
    Dataset,
    LearnerSpec,
    TreeModel,
    TreeParams,
    fit_adaptive_poly,
    fit_regression_tree,
    fit_weighted_learner,
    predict_poly,
    predict_tree,
    sample_mean_learner,
    scalar_learner,
)
from .resampling import (
    ExactResampleSet,
    ResamplePlan,
    draw_resample_counts,
    enumerate_exact_resamples,
)
from .studies import (
    AnovaOracle,
    RatioCurves,
    SpikeProfile,
    StudyReport,
    anova_oracle,
    local_maxima,
    run_mc_ratio_experiment,
    run_spike_study,
    run_table_study,
    standard_estimators,
)

__version__ = "0.1.0"

__all__ = [
    "AdaptivePolyModel",
    "AnovaOracle",
    "BagvarError",
    "CapacityError",
    "ConfigError",
    "DataError",
    "Dataset",
    "DecompositionEstimate",
    "EstimationError",
    "ExactResampleSet",
    "FitError",
    "GeneratorSpec",
    "LearnerSpec",
    "MCErrorPrediction",
    "RatioCurves",
    "ReplicateError",
    "ResamplePlan",
    "ResampleTrace",
    "SpikeProfile",
    "StudyReport",
    "TreeModel",
    "TreeParams",
    "VarOfVarEstimate",
    "VarianceEstimate",
    "anova_oracle",
    "averaged_estimator",
    "bag_predict",
    "bootstrap_base_variance",
    "conditional_prediction_variances",
    "draw_resample_counts",
    "enumerate_exact_resamples",
    "exact_bag_predict",
    "fit_adaptive_poly",
    "fit_regression_tree",
    "fit_weighted_learner",
    "generate",
    "ij_unbiased",
    "ij_variance",
    "jackknife_unbiased",
    "jackknife_variance",
    "local_maxima",
    "oob_error",
    "predict_mc_moments",
    "predict_poly",
    "predict_tree",
    "run_mc_ratio_experiment",
    "run_spike_study",
    "run_table_study",
    "sample_features",
    "sample_mean_learner",
    "scalar_learner",
    "signal",
    "standard_estimators",
    "tree_decomposition",
    "var_of_var",
]
