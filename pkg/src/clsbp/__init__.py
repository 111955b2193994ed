"""Causal inference with a covariate-dependent logit stick-breaking mixture.

The public surface groups into: the data model (:mod:`clsbp.data`), the
sampler (:mod:`clsbp.lsbp`), causal estimands (:mod:`clsbp.estimands`), the
built-in propensity model (:mod:`clsbp.propensity`), and the simulation
benchmark harness (:mod:`clsbp.simulate`). The most common entry points are
re-exported here.
"""

from .data import (
    FeatureMaps,
    FeatureTransform,
    ObservationSet,
    ProfileRows,
    SamplerConfig,
    build_feature_maps,
    load_observations,
    validate,
)
from .estimands import (
    EffectSummary,
    PredictiveDensity,
    cate_draw,
    mate_draw,
    predictive_density,
    qte,
    subgroup_cate,
    summarize,
)
from .lsbp import (
    ChainState,
    PosteriorDraws,
    gibbs_step,
    log_likelihood,
    run_gibbs,
    stick_weights,
)
from .propensity import LogisticModel, fit_logistic, predict_propensity
from .simulate import (
    MetricsRow,
    ScenarioSpec,
    SimulatedDataset,
    dgp_sim1,
    dgp_sim2,
    drmse,
    run_replications,
    score,
)

__version__ = "0.1.0"

__all__ = [
    "ObservationSet", "SamplerConfig", "FeatureMaps", "FeatureTransform", "ProfileRows",
    "validate", "build_feature_maps", "load_observations",
    "ChainState", "PosteriorDraws", "run_gibbs", "gibbs_step", "log_likelihood",
    "stick_weights",
    "EffectSummary", "PredictiveDensity", "summarize", "cate_draw", "mate_draw",
    "subgroup_cate", "predictive_density", "qte",
    "LogisticModel", "fit_logistic", "predict_propensity",
    "SimulatedDataset", "MetricsRow", "ScenarioSpec", "dgp_sim1", "dgp_sim2",
    "score", "drmse", "run_replications",
    "__version__",
]
