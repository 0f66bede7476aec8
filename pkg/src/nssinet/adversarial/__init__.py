from .heads import Heads, MLPHead, build_heads
from .losses import (LossContractError, LossWeights, loss_disease, loss_domain, loss_gan,
                     loss_gender, loss_reconstruction, loss_signal, total_loss)
from .training import (Batch, DomainData, LossRecord, TrainConfig, TrainState, TrainingDiverged,
                       TrainingError, assemble, extract_features, init_state, predict_proba,
                       save_state, train, train_step, write_loss_csv)

__all__ = [
    "Heads",
    "MLPHead",
    "build_heads",
    "LossContractError",
    "LossWeights",
    "loss_disease",
    "loss_domain",
    "loss_gan",
    "loss_gender",
    "loss_reconstruction",
    "loss_signal",
    "total_loss",
    "Batch",
    "DomainData",
    "LossRecord",
    "TrainConfig",
    "TrainState",
    "TrainingDiverged",
    "TrainingError",
    "assemble",
    "extract_features",
    "init_state",
    "predict_proba",
    "save_state",
    "train",
    "train_step",
    "write_loss_csv",
]
