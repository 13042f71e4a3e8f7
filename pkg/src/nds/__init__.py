"""Decoding laboratory for short LDPC codes.

Core pipeline: normalized min-sum decoding, reliability refinement of the
failed frames with a small convolutional model, statistics-driven ordering
of test error patterns into a fixed decoding path, and ordered-statistics
reprocessing with a learned sliding-window early-termination arbiter.
"""

__version__ = "0.1.0"

from .gf2 import BitMatrix, BitVector, Permutation, RankDeficiencyError, SystematicForm
from .code import CodeSpec, ccsds_128_64, load_code

__all__ = [
    "BitMatrix",
    "BitVector",
    "Permutation",
    "RankDeficiencyError",
    "SystematicForm",
    "CodeSpec",
    "ccsds_128_64",
    "load_code",
    "__version__",
]
