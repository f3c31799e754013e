"""
Numerics package: matrices, seeded randomness, dense nets and their gradients.
"""

from .matrix import Rng, as_matrix, draw_gaussian, matmul
from .net import (
    Activation,
    DenseNet,
    DenseNetDocument,
    GradTape,
    Var,
    backward,
    decode_blob,
    encode_blob,
    forward,
)
from .optim import Adam

__all__ = [
    "Rng",
    "as_matrix",
    "draw_gaussian",
    "matmul",
    "Activation",
    "DenseNet",
    "DenseNetDocument",
    "GradTape",
    "Var",
    "backward",
    "decode_blob",
    "encode_blob",
    "forward",
    "Adam",
]
