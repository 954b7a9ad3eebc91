"""Nonlocal H-convergence on finite-dimensional Hilbert complexes."""

from .complex_core import (BC, ComplexError, ComplexReport, HilbertComplex, build_grid_complex_3d,
                           build_interval_complex, build_maxwell_grid_complex, build_trivial_complex,
                           compose_maxwell_complex, load_complex, save_complex, verify_complex)
from .decomposition import (BlockDecomposition, BlockOperator, CoefficientBounds, DecompositionError,
                            MembershipReport, SingularBlockError, assemble_from_blocks,
                            block_inverse, block_representation, build_decomposition,
                            check_membership, harmonic_subspace_V, load_decomposition,
                            save_decomposition, schur_complement, schur_factorize)
from .solvers import (RangeFunctional, ReducedOperator, VariationalSolution, functional_from_dual,
                      reduce, solve_dual, solve_primal)
from .coefficients import (CellFunction, ConvolutionSpec, OperatorSequence, convolution_operator,
                           multiplication_operator, sequence, two_phase_cell)
from .hconv import (ConvergenceReport, HLimitReport, WOTProbe, default_probe, divcurl_flux_check,
                    divcurl_pairing, extract_h_limit, h_pseudometric, prepare,
                    verify_h_convergence_definition, wot_limit)
from .maxwell import (MaterialLaw, MaxwellOperator, maxwell_operator, memory_kernel,
                      resolvent_convergence_experiment, solve_laplace_domain,
                      solve_via_block_reduction)

__version__ = "0.1.0"
