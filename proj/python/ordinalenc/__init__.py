"""Ordinal age encodings (LDL, Hard-ranking, Soft-ranking), Maskout masks and metrics."""

from ._core import (
    ContractError,
    FormatError,
    NumericInputError,
    benchmark,
    decode_hard_rank,
    decode_ldl,
    decode_soft_rank,
    encode,
    epsilon_error,
    gradcheck,
    landmark_masks,
    loss,
    mae,
    make_mask,
    output_dim,
    predict_age,
    softmax,
)

__all__ = [
    "ContractError",
    "FormatError",
    "NumericInputError",
    "benchmark",
    "decode_hard_rank",
    "decode_ldl",
    "decode_soft_rank",
    "encode",
    "epsilon_error",
    "gradcheck",
    "landmark_masks",
    "loss",
    "mae",
    "make_mask",
    "output_dim",
    "predict_age",
    "softmax",
]
