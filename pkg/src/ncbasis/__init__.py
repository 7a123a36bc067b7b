"""Non-commutative Haar systems in finite matrix algebras with product states."""

from .matcore import (
    NormSpec,
    NumericFailure,
    diag_power,
    kron,
    matrix_from_json,
    matrix_to_json,
    schatten_norm,
    singular_values,
    weighted_norm,
)
from .algebra import (
    Weight,
    embed,
    expect_diagonal,
    expect_level,
    kms_function,
    modular_flow,
    state,
)
from .haar import (
    HaarSystem,
    MeasureTable,
    RademacherQuad,
    commutative_haar,
    distorted_measure,
    haar_analyze,
    haar_build,
    haar_synthesize,
    matrix_units_shell,
    shell_index,
    shell_pair,
    standard_quad,
)

__version__ = "0.1.0"
