"""Coupled item-based matrix factorization.

A recommender library built around one idea: categorical item attributes are
not independent, and the co-occurrence structure between attribute values
carries similarity information that a plain latent-factor model never sees.
The coupled item similarity aggregates intra-attribute frequency similarity
and inter-attribute co-occurrence overlap, and enters training as a
neighborhood regularizer pulling each item's factors toward its most similar
items'. Baselines (plain MF, user/item CF, and pearson/cosine/jaccard
attribute hybrids) plus an RMSE/MAE cross-validation harness round out the
comparison tooling.
"""

from .attributes import MISSING_VALUE, AttributeSpace, build_space
from .baselines import METHOD_KINDS, MethodSpec, Prediction, cf_predict, run_method
from .coupling import (
    SIMILARITY_KINDS,
    CouplingConfig,
    SimilarityModel,
    attribute_vector_similarity,
    build_neighborhoods,
    cavs,
    cis,
    dump_neighborhoods,
    iaavs,
    ieavs,
    irs,
    load_neighborhoods,
)
from .evaluation import (
    EvalReport,
    FoldPlan,
    evaluate_grid,
    improvement,
    mae,
    make_folds,
    rmse,
)
from .factorization import (
    Checkpoint,
    FactorModel,
    TrainingConfig,
    TrainingDiverged,
    TrainResult,
    grad_item,
    grad_user,
    gradients,
    load_checkpoint,
    objective,
    predict,
    save_checkpoint,
    train,
)
from .ingestion import (
    GenericSchema,
    LoadStats,
    load_bookcrossing,
    load_demo,
    load_generic,
    load_movielens,
)
from .ratings import RatingDataset, build_dataset

__version__ = "0.1.0"

__all__ = [
    "AttributeSpace",
    "Checkpoint",
    "CouplingConfig",
    "EvalReport",
    "FactorModel",
    "FoldPlan",
    "GenericSchema",
    "LoadStats",
    "METHOD_KINDS",
    "MISSING_VALUE",
    "MethodSpec",
    "Prediction",
    "RatingDataset",
    "SIMILARITY_KINDS",
    "SimilarityModel",
    "TrainResult",
    "TrainingConfig",
    "TrainingDiverged",
    "attribute_vector_similarity",
    "build_dataset",
    "build_neighborhoods",
    "build_space",
    "cavs",
    "cf_predict",
    "cis",
    "dump_neighborhoods",
    "evaluate_grid",
    "grad_item",
    "grad_user",
    "gradients",
    "iaavs",
    "ieavs",
    "improvement",
    "irs",
    "load_bookcrossing",
    "load_checkpoint",
    "load_demo",
    "load_generic",
    "load_movielens",
    "load_neighborhoods",
    "mae",
    "make_folds",
    "objective",
    "predict",
    "rmse",
    "run_method",
    "save_checkpoint",
    "train",
]
