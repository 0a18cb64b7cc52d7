from .backbone import ConfigError, PyramidBackbone, TopDownDecoder
from .planeformer import (
    AuxPrediction,
    DecodedPlanes,
    LineValidationError,
    ModelConfig,
    ModelOutput,
    PixelOutputs,
    PlaneFormer,
    PlaneInstanceSet,
    TokenSequence,
)
from .position import bilinear_sample, grid_encoding, sine_encoding

__all__ = [
    "AuxPrediction", "ConfigError", "DecodedPlanes", "LineValidationError", "ModelConfig", "ModelOutput",
    "PixelOutputs", "PlaneFormer", "PlaneInstanceSet", "PyramidBackbone", "TokenSequence", "TopDownDecoder",
    "bilinear_sample", "grid_encoding", "sine_encoding",
]
