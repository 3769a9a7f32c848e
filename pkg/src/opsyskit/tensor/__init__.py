from .cones import (DmaxReport, MaxCertificate, MaxWitness, TensorElement, dmax_check,
                    max_certificate_from_psd, max_witness, min_membership, product_element,
                    psd_to_dmax, tensor_element, unit_tensor, verify_witness)
from .kirchberg import (KirchbergResult, NcFactorization, kirchberg_certify, nc_factorization,
                        random_min_positive)

__all__ = [
    "DmaxReport", "KirchbergResult", "MaxCertificate", "MaxWitness", "NcFactorization",
    "TensorElement", "dmax_check", "kirchberg_certify", "max_certificate_from_psd", "max_witness",
    "min_membership", "nc_factorization", "product_element", "psd_to_dmax", "tensor_element",
    "random_min_positive", "unit_tensor", "verify_witness",
]
