"""Parabolic fractional maximal functions, dyadic parabolic lattices and two-weight constants."""

from .geometry import (Box, ParabolicRectangle, ParameterError, Params, dilate, lower_part,
                       upper_part)
from .field import (CellRange, DegenerateBoxError, Field, Grid, PrefixAggregate, box_average,
                    read_field, snap_box, weighted_measure, write_field)
from .maximal import (BACKWARD, FORWARD, RectFamily, ScaleFamily, maximal_centered,
                      maximal_field, maximal_uncentered)
from .lattice import (DyadicLattice, DyadicRect, build_family, build_lattice, domination_check,
                      dyadic_maximal, find_cover, parent, widened_nesting_check)
from .covering import (ContractError, SelectionInput, SelectionResult, greedy_select,
                       scale_bucket_overlap, trim_sets)
from .weights import (WeightPair, a1_pointwise_gap, a_1r_constant, a_qr_constant, bump_constant,
                      minmax_closure_check, sawyer_constant)
from .reports import ConstantReport, VerificationReport
from .verify import (cz_decompose, linearize, verify_fefferman_stein, verify_sawyer,
                     verify_strong_bump, verify_weak_type)

__version__ = "0.1.0"

__all__ = [
    "Box",
    "ParabolicRectangle",
    "ParameterError",
    "Params",
    "dilate",
    "lower_part",
    "upper_part",
    "CellRange",
    "DegenerateBoxError",
    "Field",
    "Grid",
    "PrefixAggregate",
    "box_average",
    "read_field",
    "snap_box",
    "weighted_measure",
    "write_field",
    "BACKWARD",
    "FORWARD",
    "RectFamily",
    "ScaleFamily",
    "maximal_centered",
    "maximal_field",
    "maximal_uncentered",
    "DyadicLattice",
    "DyadicRect",
    "build_family",
    "build_lattice",
    "domination_check",
    "dyadic_maximal",
    "find_cover",
    "parent",
    "widened_nesting_check",
    "ContractError",
    "SelectionInput",
    "SelectionResult",
    "greedy_select",
    "scale_bucket_overlap",
    "trim_sets",
    "WeightPair",
    "a1_pointwise_gap",
    "a_1r_constant",
    "a_qr_constant",
    "bump_constant",
    "minmax_closure_check",
    "sawyer_constant",
    "ConstantReport",
    "VerificationReport",
    "cz_decompose",
    "linearize",
    "verify_fefferman_stein",
    "verify_sawyer",
    "verify_strong_bump",
    "verify_weak_type",
    "__version__",
]
