"""Modality-aware edge/cloud offloading: complexity scoring, routing policy and simulation."""

from .errors import CalibrationError, ConfigError, DomainError, MoaOffError, ParseError
from .perception import (
    Calibration,
    GrayImage,
    ImageComplexity,
    ImageWeights,
    TextComplexity,
    TextParams,
    fit_calibration,
    image_complexity,
    text_complexity,
)
from .policy import Decision, DecisionVector, Modality, PolicyConfig, SystemState, decide_modality, decide_request

__version__ = "0.1.0"

__all__ = [
    "Calibration",
    "CalibrationError",
    "ConfigError",
    "Decision",
    "DecisionVector",
    "DomainError",
    "GrayImage",
    "ImageComplexity",
    "ImageWeights",
    "Modality",
    "MoaOffError",
    "ParseError",
    "PolicyConfig",
    "SystemState",
    "TextComplexity",
    "TextParams",
    "decide_modality",
    "decide_request",
    "fit_calibration",
    "image_complexity",
    "text_complexity",
]
