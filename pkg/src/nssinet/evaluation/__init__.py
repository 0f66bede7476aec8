from .baseline import bandpower_cv, bandpower_features, probe_accuracy
from .cv import (CVReport, CVSettings, FoldContext, FoldError, FoldResult, constant_runner,
                 run_cv, train_fold)
from .metrics import ConfusionMatrix, accuracy, confusion, subject_vote
from .sweeps import (TAU_GRID, VARIANTS, WEIGHT_RATIOS, SweepRow, SweepTable, Variant, ablate,
                     ratio_sweep, sampling_robustness, weight_sweep)
from .topo import (COORDINATES, MONTAGE_63, ChannelImportanceMap, channel_importance,
                   normalize_scores, render_svg)

__all__ = [
    "bandpower_cv",
    "bandpower_features",
    "probe_accuracy",
    "CVReport",
    "CVSettings",
    "FoldContext",
    "FoldError",
    "FoldResult",
    "constant_runner",
    "run_cv",
    "train_fold",
    "ConfusionMatrix",
    "accuracy",
    "confusion",
    "subject_vote",
    "WEIGHT_RATIOS",
    "TAU_GRID",
    "VARIANTS",
    "SweepRow",
    "SweepTable",
    "Variant",
    "ablate",
    "ratio_sweep",
    "sampling_robustness",
    "weight_sweep",
    "COORDINATES",
    "MONTAGE_63",
    "ChannelImportanceMap",
    "channel_importance",
    "normalize_scores",
    "render_svg",
]
