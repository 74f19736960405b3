from .checkpoint import CheckpointError, ChecksumError, load_checkpoint, save_checkpoint
from .config import SCHEMES, STRIDE_SCHEDULES, ModelConfig
from .network import ForwardOutput, forward, msa, pose_embedding, regression_head, ste_layer, vte_layer
from .params import count_trainable, init_params, is_trainable, param_shapes

__all__ = [
    "CheckpointError",
    "ChecksumError",
    "ForwardOutput",
    "ModelConfig",
    "SCHEMES",
    "STRIDE_SCHEDULES",
    "count_trainable",
    "forward",
    "init_params",
    "is_trainable",
    "load_checkpoint",
    "msa",
    "param_shapes",
    "pose_embedding",
    "regression_head",
    "save_checkpoint",
    "ste_layer",
    "vte_layer",
]
