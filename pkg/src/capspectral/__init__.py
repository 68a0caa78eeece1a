"""Sparse spectral methods on the spherical cap z > alpha.

Set CAPSPECTRAL_NUM_THREADS before the first import to cap BLAS threads.
"""
import os

_threads = os.environ.get("CAPSPECTRAL_NUM_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

from .semiclassical import (AccuracyLossError, GaussRule1D, ParameterError, RecurrenceTable,  # noqa: E402
                            TableExtentError, WeightParams, eval_R, eval_R_all, family, gauss_rule,
                            normalization, recurrence_table)
from .harmonics import HarmonicIndex, InvalidIndexError, eval_Y  # noqa: E402
from .coeffs import (BasisSpec, CoefficientVector, Ordering, OrderingError, block_sizes,  # noqa: E402
                     reorder)
from .bbb import (BandedBlockBanded, MaskError, NotDecoupledError, SingularSystemError,  # noqa: E402
                  identity, product, solve)
from .basis import (CapPoint, CapPointError, clenshaw_matrices, eval_basis, eval_Q, evaluate,  # noqa: E402
                    jacobi_matrix, jacobi_operator)
from .transforms import cap_quadrature, expand, expand_values, expansion_quadrature, integrate  # noqa: E402
from .operators import (Kind, OperatorSpec, SUB_BLOCK_BANDWIDTHS, assemble, biharmonic,  # noqa: E402
                        helmholtz_operator, rho2_laplacian, variable_coefficient)
from .solvers import (BoundaryResolutionError, PdeProblem, PdeSolution, ProblemKind,  # noqa: E402
                      catalog_problem, lift_boundary, solve_biharmonic, solve_helmholtz,
                      solve_poisson, solve_problem)
