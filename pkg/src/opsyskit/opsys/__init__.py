from .maps import (ChoiElement, CpMap, CpStatus, CpVerdict, choi_apply, choi_matrix, choi_of_map,
                   compose, cp_check, cp_extend, dual_matrix_iso, functional_matrix, functional_of,
                   map_from_choi, map_from_function, state_map, unitalize_lift)
from .systems import (ConcreteOperatorSystem, Element, direct_sum, element, ell_inf, full_algebra,
                      join_levels, level_membership, make_system, matrix_algebra, split_levels,
                      unit_element)

__all__ = [
    "ChoiElement", "ConcreteOperatorSystem", "CpMap", "CpStatus", "CpVerdict", "Element",
    "choi_apply", "choi_matrix", "choi_of_map", "compose", "cp_check", "cp_extend", "direct_sum",
    "dual_matrix_iso", "element", "ell_inf", "full_algebra", "functional_matrix", "functional_of",
    "join_levels", "level_membership", "make_system", "map_from_choi", "map_from_function",
    "matrix_algebra", "split_levels", "state_map", "unit_element", "unitalize_lift",
]
