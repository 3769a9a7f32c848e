from .linalg import (MembershipVerdict, Status, complex_to_real, hermitian, min_eigenvalue,
                     psd_check, real_to_complex_dual)
from .sdp import Affine, SdpOutcome, SdpProblem, SdpStatus, max_margin, sdp_solve

__all__ = [
    "Affine", "MembershipVerdict", "SdpOutcome", "SdpProblem", "SdpStatus", "Status",
    "complex_to_real", "hermitian", "max_margin", "min_eigenvalue", "psd_check",
    "real_to_complex_dual", "sdp_solve",
]
