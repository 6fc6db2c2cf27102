"""Numerics for a quantum test particle in a dilute Bose gas.

The package builds the one-particle scattering matrix and the Markovian
(linear Boltzmann) generator of the test particle from discretized model
data, simulates the limiting dynamics as a Poisson collision model, and
verifies the underlying limit theorems with an exact Wick-pairing
evaluator and truncated Fock-space numerics.
"""

from .errors import (
    CombinatoricsOverflow,
    InvalidState,
    ModelFormatError,
    ShapeMismatch,
    SingularTMatrix,
    TruncationTooSmall,
)
from .model import (
    EnergyGrid,
    FormFactorSet,
    GammaTable,
    GasState,
    SystemModel,
    bohr_decompose,
    gamma_table,
    gibbs_density,
)
from .scattering import ScatteringBlock, ScatteringData, build_smatrix, r_ops, t_inverses, theta_map
from .generator import (
    GeneratorPair,
    TMatrixInput,
    boltzmann_from_T,
    cp_check,
    duality_check,
    evolve_density,
    heisenberg_generator,
)
from .collision import CollisionKernel, TrajectoryRecord, build_kernel, ensemble_average, sample_trajectory
from .wick import (
    CorrelatorSpec,
    convergence_report,
    exact_correlator,
    factorization_check,
    limit_correlator,
)
from .fock import (
    TruncatedFock,
    coherent_vector,
    ito_scaling_check,
    number_characterization_check,
    quasifree_two_point_check,
    second_quantization_check,
)

__version__ = "0.1.0"

__all__ = [
    "SystemModel", "EnergyGrid", "FormFactorSet", "GasState", "GammaTable",
    "bohr_decompose", "gibbs_density", "gamma_table",
    "ScatteringBlock", "ScatteringData", "t_inverses", "r_ops", "build_smatrix", "theta_map",
    "GeneratorPair", "TMatrixInput", "heisenberg_generator", "boltzmann_from_T",
    "evolve_density", "duality_check", "cp_check",
    "CollisionKernel", "TrajectoryRecord", "build_kernel", "sample_trajectory", "ensemble_average",
    "CorrelatorSpec", "exact_correlator", "limit_correlator", "convergence_report",
    "factorization_check",
    "TruncatedFock", "coherent_vector", "number_characterization_check",
    "second_quantization_check", "quasifree_two_point_check", "ito_scaling_check",
    "SingularTMatrix", "InvalidState", "ShapeMismatch", "TruncationTooSmall",
    "CombinatoricsOverflow", "ModelFormatError",
    "__version__",
]
