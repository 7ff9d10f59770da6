from src.inference.engines import (
    ENGINE_ORDER,
    ENGINES,
    get_engine,
    hyper_objective,
    latent_predict,
    pack_hyperparams,
    run_engine,
    split_hyperparams,
)
from src.inference.ep import ep_infer, tilted_moments
from src.inference.kld import expected_log_lik, joint_objective, kld_infer
from src.inference.laplace import laplace_infer
from src.inference.posterior import (
    Diagnostics,
    GaussianPosterior,
    InferenceOptions,
    InferenceResult,
    SiteSet,
    VariationalParams,
)
from src.inference.taylor import taylor_infer, transformed_targets

__all__ = [
    "ENGINES",
    "ENGINE_ORDER",
    "Diagnostics",
    "GaussianPosterior",
    "InferenceOptions",
    "InferenceResult",
    "SiteSet",
    "VariationalParams",
    "ep_infer",
    "expected_log_lik",
    "get_engine",
    "hyper_objective",
    "joint_objective",
    "kld_infer",
    "laplace_infer",
    "latent_predict",
    "pack_hyperparams",
    "run_engine",
    "split_hyperparams",
    "taylor_infer",
    "tilted_moments",
    "transformed_targets",
]
