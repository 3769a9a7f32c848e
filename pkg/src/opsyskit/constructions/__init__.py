from .coproduct import (CoproductElement, CoproductMap, CoproductStatus, CoproductSystem,
                        CoproductVerdict, Realization, classes_equal, compose_coproduct_maps,
                        coproduct, coproduct_membership, coproduct_quotient_realization, refute,
                        shift_value, verify_family, verify_shifts, recenter, repair_family)
from .dual import DualCoproductPackage, check_package, dual_coproduct
from .lifting import LiftInstance, PerturbedLift, perturbed_lift, random_lift_instance
from .quotient import (KernelSubspace, QuotientCheck, QuotientReport, QuotientSystem, kernel_of,
                       make_kernel, quotient, quotient_map_check, quotient_membership)
from .universal import (MatrixPairModel, PadFactorization, UniversalQuotient, affine_element,
                        matrix_pair_system, pad_factorization, pair_algebra, universal_quotient)

__all__ = [
    "CoproductElement", "CoproductMap", "CoproductStatus", "CoproductSystem", "CoproductVerdict",
    "DualCoproductPackage", "KernelSubspace", "MatrixPairModel", "PadFactorization",
    "LiftInstance", "PerturbedLift", "QuotientCheck", "QuotientReport", "QuotientSystem", "Realization",
    "UniversalQuotient", "affine_element", "check_package", "classes_equal",
    "compose_coproduct_maps", "coproduct", "coproduct_membership",
    "coproduct_quotient_realization", "dual_coproduct", "kernel_of", "make_kernel",
    "matrix_pair_system", "pad_factorization", "pair_algebra", "perturbed_lift", "random_lift_instance", "quotient",
    "quotient_map_check", "quotient_membership", "refute", "shift_value", "universal_quotient",
    "verify_family", "verify_shifts", "recenter", "repair_family",
]
