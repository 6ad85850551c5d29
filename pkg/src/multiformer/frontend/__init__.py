"""CSI preprocessing: amplitude, upsampling, dual-dimension tokenization, embedding."""

from .csi import (
    CsiFormatError,
    CsiWindow,
    amplitude,
    make_tokens,
    read_csi,
    tokenize_window,
    upsample_grid,
    write_csi,
)
from .embedding import TokenEmbedding
from .resample import lowpass_taps, rational_factors, resample, resample_axis, resample_matrix

__all__ = [
    "CsiFormatError",
    "CsiWindow",
    "TokenEmbedding",
    "amplitude",
    "lowpass_taps",
    "make_tokens",
    "rational_factors",
    "read_csi",
    "resample",
    "resample_axis",
    "resample_matrix",
    "tokenize_window",
    "upsample_grid",
    "write_csi",
]
