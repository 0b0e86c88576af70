"""LODE-GP: Gaussian processes whose realizations satisfy a given system of
linear homogeneous ODEs with constant coefficients.

The construction decouples the system through a Smith normal form over the
operator polynomial ring, assigns a base covariance to each scalar equation
on the diagonal, and pushes the resulting diagonal prior forward through
the base change matrix V.
"""

from .errors import (
    DivergedError,
    EmptySelectionError,
    LodegpError,
    NeedsRefactorizeModeError,
    NoReferenceSolutionError,
    NotDiagonalError,
    NotPositiveDefiniteError,
    ParseError,
    ShapeMismatchError,
    SingularEvaluationError,
    SymbolicRootsUnsupportedError,
    UnboundSymbolError,
    UnknownSystemError,
    UnsupportedOrderError,
)
from .gp import (
    Dataset,
    LodeGPModel,
    Posterior,
    eig_count,
    gram,
    init_model,
    marginalize,
    neg_mll,
    posterior,
    posterior_mean,
    sample,
    transform,
)
from .kernelalg import (
    CompiledKernel,
    KernelExpr,
    LatentDiagonal,
    PrimaryFactor,
    RefactorizeKernel,
    apply_operator,
    base_kernel,
    compile_lodegp,
    diagonal_se_kernel,
    diff_kernel,
    factor_primary,
    kernel_to_str,
    pushforward,
)
from .opalgebra import (
    MultiPoly,
    OperatorMatrix,
    OperatorPoly,
    RatFun,
    Rational,
    mat_det,
    mat_mul,
    op_divmod,
    parse_matrix,
    parse_poly,
    poly_to_str,
    ratfun_arith,
    ratfun_eval,
)
from .smith import SmithDecomposition, is_controllable, smith_normal_form, verify_snf
from .systems import SystemSpec, make_system, generate_data
from .train import TrainConfig, TrainResult, fit, grad_check
from .verify import OdeErrorReport, ode_residual, rmse

__version__ = "0.1.0"
