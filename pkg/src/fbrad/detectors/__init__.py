from .base import (
    KINDS,
    LAYOUT_VERSION,
    DetectorSpec,
    TrainedDetector,
    TrainingConfig,
    build_network,
    fit_detector,
    gradient_check,
    loss_and_grad,
    score_windows,
)

__all__ = [
    "KINDS", "LAYOUT_VERSION", "DetectorSpec", "TrainedDetector", "TrainingConfig",
    "build_network", "fit_detector", "gradient_check", "loss_and_grad", "score_windows",
]
