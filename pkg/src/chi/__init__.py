"""Configuration health index (CHI).

Learns a saturating or unimodal health curve per configuration variable from
observed configuration/performance data and scores configurations by the
geometric mean of their per-variable health values.
"""

from .dataset import ConfigDataset, NormStats, load_csv, normalize, prepare
from .errors import ChiError, ContractError, DatasetError, ModelFormatError, SchemaError, TrainingError
from .kernels import BACKEND
from .model import CvCurve, HealthModel, aggregate, curve_samples, health, load_model, save_model, score
from .schema import CvSchema, CvSpec, load_schema, validate_schema
from .training import TrainOptions, evaluate_holdout, fit

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ChiError", "ConfigDataset", "ContractError", "CvCurve", "CvSchema", "CvSpec",
    "DatasetError", "HealthModel", "ModelFormatError", "NormStats", "SchemaError", "TrainOptions",
    "TrainingError", "aggregate", "curve_samples", "evaluate_holdout", "fit", "health",
    "load_csv", "load_model", "load_schema", "normalize", "prepare", "save_model", "score",
    "validate_schema",
]
