"""Online algorithms with unreliable guidance: simulation and verification."""
from .core import (
    EmptyValidSet,
    GuideProtocolError,
    IllegalAnswer,
    InvalidParam,
    LengthMismatch,
    OagConfig,
    OagError,
    Objective,
    RngStreams,
    Source,
    StepChoice,
    evaluate,
    run_oag,
    run_online,
)
from .dtb import DtbWrapped, dtb_step, dtb_transform

__all__ = [
    "DtbWrapped",
    "EmptyValidSet",
    "GuideProtocolError",
    "IllegalAnswer",
    "InvalidParam",
    "LengthMismatch",
    "OagConfig",
    "OagError",
    "Objective",
    "RngStreams",
    "Source",
    "StepChoice",
    "dtb_step",
    "dtb_transform",
    "evaluate",
    "run_oag",
    "run_online",
]
__version__ = "0.1.0"
