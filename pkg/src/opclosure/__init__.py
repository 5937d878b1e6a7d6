"""Linear moment closures for radiative transfer via measure-averaged prediction.

Subpackages by task:

* :mod:`opclosure.measures`        -- Gaussian measures and projections
* :mod:`opclosure.prediction`      -- finite-matrix prediction engine
* :mod:`opclosure.moments`         -- slab moment hierarchy and closures
* :mod:`opclosure.twocomponent`    -- analytic two-component benchmark
* :mod:`opclosure.slab1d`          -- staggered-grid 1D solver
* :mod:`opclosure.lattice2d`       -- 2D lattice diffusion solver
* :mod:`opclosure.spatial_moments` -- moment tables, oracle, optimality check
* :mod:`opclosure.scenarios`       -- scenario drivers and reports
* :mod:`opclosure.cli`             -- command-line interface
"""

from .measures import GaussianMeasure, ProjectionPair, condition, project_matrix, projection_pair
from .moments import ClosureCoefficients, ClosureSpec, MomentMatrices, build_matrices, closure_coefficients
from .prediction import KernelTrace, LinearSystem, memory_kernel, solve_full_op

__version__ = "0.1.0"

__all__ = [
    "GaussianMeasure", "ProjectionPair", "condition", "projection_pair",
    "project_matrix", "LinearSystem", "KernelTrace", "memory_kernel",
    "solve_full_op", "MomentMatrices", "ClosureSpec", "ClosureCoefficients",
    "build_matrices", "closure_coefficients", "__version__",
]
