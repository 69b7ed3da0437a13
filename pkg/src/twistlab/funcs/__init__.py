"""Lipschitz function descriptors and numerical calculus on them."""

from .calculus import (
    additivity_defect,
    bid_functional,
    bid_quotient,
    bid_sweep,
    equivalence_test,
    hyers_linearize,
    in_L_bis,
    lipschitz_bounds,
    projective_equivalence_test,
)
from .descriptors import (
    ComplexCombine,
    DerivativeUnavailable,
    DescriptorError,
    Func,
    Linear,
    PowerPhase,
    Scale,
    SinLog,
    SinPlain,
    Sum,
    eval_d1,
    eval_d2,
    evaluate,
    from_dict,
    from_json,
    linear_part,
    to_dict,
    to_json,
    with_bounds,
)
from .growth import (
    BOUNDED,
    GROWING,
    INCONCLUSIVE,
    GrowthConfig,
    GrowthReport,
    LogGrid,
    classify_growth,
)
