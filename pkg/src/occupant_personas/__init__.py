"""Survey-to-persona pipeline.

Ingests residential energy-survey microdata, trains six classical
classifiers to predict 16 occupant characteristics, evaluates them with a
10-fold cross-validation protocol, and synthesizes building-occupant persona
cards from the predictions.
"""

__version__ = "0.1.0"

from . import evaluation, features, ingest, learners, persona  # noqa: F401
from .evaluation import accuracy, best_scores, cross_validate, evaluate_suite, kfold, mae, r2
from .features import apply_drop_rules, pearson, separate, top_correlates
from .ingest import AgeGroup, CleaningRules, Dataset, bin_age, clean, fetch_recs, load_table, split
from .learners import Hyperparams, ModelKind, TrainedModel, fit, predict
from .persona import LabelMap, PersonaCard, PredictionVector, build_persona, decode, render

__all__ = [
    "__version__",
    "AgeGroup", "CleaningRules", "Dataset", "bin_age", "clean", "fetch_recs",
    "load_table", "split",
    "apply_drop_rules", "pearson", "separate", "top_correlates",
    "Hyperparams", "ModelKind", "TrainedModel", "fit", "predict",
    "accuracy", "best_scores", "cross_validate", "evaluate_suite", "kfold", "mae", "r2",
    "LabelMap", "PersonaCard", "PredictionVector", "build_persona", "decode", "render",
]
