"""Finite-dimensional quantum instruments on direct sums of matrix algebras.

The package decides extremality, C*-extremity, purity, spectrality and
decomposability of instruments through their minimal bi-dilation, and emits
certificates that :func:`check_certificate` re-verifies independently.
"""
from .algebra import AlgebraElement, AlgebraSpec
from .certificates import Certificate, check_certificate
from .convexity import (dominates, is_cstar_extreme_instrument, is_extreme,
                        is_pure_instrument, rn_apply, rn_derivative)
from .cpmap import CPMap, cpmap_from_kraus
from .dilation import BiDilation, minimal_bidilation, verify_bidilation
from .errors import CheckFailed, InstrumentError, ParseError, ShapeError, TheoryViolation
from .instrument import POVM, Instrument, is_decomposable, is_spectral, luders, validate
from .linalg import Tolerance

__version__ = "0.1.0"

__all__ = [
    "AlgebraElement", "AlgebraSpec", "BiDilation", "CPMap", "Certificate", "CheckFailed",
    "Instrument", "InstrumentError", "POVM", "ParseError", "ShapeError", "TheoryViolation",
    "Tolerance", "check_certificate", "cpmap_from_kraus", "dominates",
    "is_cstar_extreme_instrument", "is_decomposable", "is_extreme", "is_pure_instrument",
    "is_spectral", "luders", "minimal_bidilation", "rn_apply", "rn_derivative", "validate",
    "verify_bidilation", "__version__",
]
