"""Placeholder-enhanced Transformer forecasting, self-contained.

Subpackage map:
  tensor    float64 arrays + tape-based reverse-mode differentiation
  layers    linear / attention / batch-norm / dropout building blocks
  masks     history-future attention masks
  model     the forecaster: patching, placeholders, encoder, heads, RevIN
  data      CSV loading, splits, windowing, synthetic signals
  training  losses, metrics, Adam, the train loop
  cli       command-line entry points
"""

from .errors import (
    ConfigError,
    ContractError,
    DataError,
    DivergenceError,
    PetformerError,
    ShapeError,
)
from .tensor import Tape, Tensor, backward

__version__ = "0.1.0"

__all__ = [
    "Tensor",
    "Tape",
    "backward",
    "PetformerError",
    "ConfigError",
    "DataError",
    "ShapeError",
    "ContractError",
    "DivergenceError",
    "__version__",
]
