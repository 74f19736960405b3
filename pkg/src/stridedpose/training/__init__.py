from .optim import AMSGrad
from .trainer import (
    RunLog,
    TrainConfig,
    TrainingDiverged,
    compute_losses,
    evaluate,
    export_attention,
    flip_average,
    predict,
    stitch_sequences,
    train,
)

__all__ = [
    "AMSGrad",
    "RunLog",
    "TrainConfig",
    "TrainingDiverged",
    "compute_losses",
    "evaluate",
    "export_attention",
    "flip_average",
    "predict",
    "stitch_sequences",
    "train",
]
