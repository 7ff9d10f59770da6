from src.model.fit import Candidate, FitOptions, FitResult, fit
from src.model.ggpm import GgpmModel
from src.model.metrics import Metrics, evaluate, nlp_contributions
from src.model.predict import PredictiveDistribution, predict
from src.model.sampling import SampledDataset, sample_dataset
from src.model.serialization import load_model, save_model

__all__ = [
    "Candidate",
    "FitOptions",
    "FitResult",
    "GgpmModel",
    "Metrics",
    "PredictiveDistribution",
    "SampledDataset",
    "evaluate",
    "fit",
    "load_model",
    "nlp_contributions",
    "predict",
    "sample_dataset",
    "save_model",
]
