from .checkpoint import CheckpointError, load_model, read_checkpoint, save_checkpoint
from .config import TrainConfig, dump_config, load_config, parse_config_text
from .evaluate import (
    EvalReport,
    evaluate,
    evaluate_checkpoint,
    evaluate_predictions,
    ground_truth_predictor,
    model_predictor,
    query_sweep,
    read_report,
    write_report,
)
from .infer import InferenceResult, infer, infer_checkpoint, parse_line_text, read_line_file, save_inference
from .train import RunLog, TrainingAborted, TrainResult, read_log, train

__all__ = [
    "CheckpointError", "EvalReport", "InferenceResult", "RunLog", "TrainConfig", "TrainResult", "TrainingAborted",
    "dump_config", "evaluate", "evaluate_checkpoint", "evaluate_predictions", "ground_truth_predictor", "infer",
    "infer_checkpoint", "load_config", "load_model", "model_predictor", "parse_config_text", "parse_line_text",
    "query_sweep", "read_checkpoint", "read_line_file", "read_log", "read_report", "save_checkpoint",
    "save_inference", "train", "write_report",
]
