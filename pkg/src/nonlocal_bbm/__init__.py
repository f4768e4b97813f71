"""Numerical evaluation of nonlocal fractional operators and their limiting
behavior as the order approaches one."""

__version__ = "0.1.0"

from .constants import (
    bbm_constant,
    bbm_constant_p,
    gamma_fn,
    riesz_constant,
    sphere_area,
)
from .fields import (
    TestField,
    bump,
    dilate,
    make_field,
    modulated_bump,
    poly_bump,
    product,
    standard_catalog,
    sum_fields,
    translate,
    w11_norms,
    zero_field,
)
from .limits import (
    AlphaSchedule,
    AuditReport,
    SweepReport,
    composed_limit_sweep,
    composed_limit_sweep_p,
    inequality_audit,
    pointwise_gradient_limit_sweep,
    rate_fit,
    seminorm_limit_sweep,
)
from .operators import (
    DecayingFunction,
    OperatorValue,
    bbm_operator,
    bbm_operator_p,
    bbm_poincare_sides,
    frac_derivative,
    frac_derivative_p,
    frac_derivative_truncated,
    gagliardo_seminorm,
    leibniz_gap,
    linear_kernel_identity,
    riesz_of_gradient,
    riesz_potential,
)
from .quadrature import (
    QuadratureSpec,
    build_sphere_rule,
    composed_spec,
    default_spec,
    fast_spec,
    high_spec,
    pairwise_sum,
    rotate_rule,
    sphere_integrate,
)

__all__ = [
    "__version__",
    "AlphaSchedule",
    "AuditReport",
    "DecayingFunction",
    "OperatorValue",
    "QuadratureSpec",
    "SweepReport",
    "TestField",
    "bbm_constant",
    "bbm_constant_p",
    "bbm_operator",
    "bbm_operator_p",
    "bbm_poincare_sides",
    "build_sphere_rule",
    "bump",
    "composed_limit_sweep",
    "composed_limit_sweep_p",
    "composed_spec",
    "default_spec",
    "dilate",
    "fast_spec",
    "frac_derivative",
    "frac_derivative_p",
    "frac_derivative_truncated",
    "gagliardo_seminorm",
    "gamma_fn",
    "high_spec",
    "inequality_audit",
    "leibniz_gap",
    "linear_kernel_identity",
    "make_field",
    "modulated_bump",
    "pairwise_sum",
    "pointwise_gradient_limit_sweep",
    "poly_bump",
    "product",
    "rate_fit",
    "riesz_constant",
    "riesz_of_gradient",
    "riesz_potential",
    "rotate_rule",
    "seminorm_limit_sweep",
    "sphere_area",
    "sphere_integrate",
    "standard_catalog",
    "sum_fields",
    "translate",
    "w11_norms",
    "zero_field",
]
