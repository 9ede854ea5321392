"""Confounded contextual bandits via dual instrumental-variable regression."""

from .dualiv import (
    DualIVModel,
    ObjectiveReport,
    TripleDataset,
    closed_form_feature_space,
    dual_coefficients,
    fit,
    naive_krr_fit,
    objective_report,
    oracle_predict_many,
    predict,
    predict_many,
)
from .envs import (
    DEFAULT_NOISE_SCALE,
    ConfoundedEnv,
    EnvSpec,
    RoundObservation,
    best_arm,
    collect_dataset,
    sample_env,
    structural_value,
    structural_values,
    unconfounded_variant,
)
from .errors import InputError, NumericalError, UnsupportedKernelError
from .kernels import (
    FeatureMap,
    KernelSpec,
    eval_kernel,
    feature_map,
    featurize,
    featurize_many,
    gram,
    monomial_exponents,
    space_dim,
)
from .policy import (
    DivElsPolicy,
    EpochSchedule,
    NaiveKrrPolicy,
    PolicyConfig,
    UniformPolicy,
    effective_dim,
    gamma_schedule,
    igw_probabilities,
    lambda_schedule,
)
from .runner import (
    ExperimentResult,
    RegretTrace,
    RunConfig,
    emit_csv,
    emit_metadata,
    resolve_env,
    run_experiment,
    run_once,
    simulate,
)
from .toyworld import DiscreteToyWorld, IdentityReport, discrete_world_checks

__version__ = "0.1.0"
