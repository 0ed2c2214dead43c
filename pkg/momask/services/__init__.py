# momask Services
from .pipeline import PipelineService, get_pipeline_service
from .predictor import CountModel, OraclePredictor, PredictorBundle, PredictorContract, oracle_predictor

__all__ = [
    "PipelineService",
    "get_pipeline_service",
    "CountModel",
    "OraclePredictor",
    "PredictorBundle",
    "PredictorContract",
    "oracle_predictor",
]
