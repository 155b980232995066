"""Thermodynamic formalism for iterated function systems with weights.

Transfer and Markov operators on a grid over [0,1]^d, eigenfunctions and
eigenmeasures, holonomic measures and their entropies, topological pressure
and equilibrium states.
"""

from .expr import Expr, ExprDomainError, ExprError, ExprSyntaxError, evaluate, evaluate_many, parse, to_string
from .grid import Grid, GridFunction
from .ifs import (IFSValidationError, MapSystem, NormalizedIFS, PotentialIFS, WeightedIFS,
                  from_potential, normalize, validate)
from .transfer import (DiscountSchedule, EigenPair, apply, eigen_discounted, eigen_power,
                       log_pressure_sequence, optimal_function, power_apply, word_sum_oracle)
from .markov import ParticleMeasure, chaos_game, eigen_measure, hutchinson_fixed_point, markov_apply
from .holonomic import (HolonomicMeasure, average_entropy, discrete_differential, empirical_holonomic,
                        holonomic_lift, holonomy_defect, variational_entropy_upper)
from .pressure import NoEigenfunctionError, equilibrium, gateaux_probe
from .config import ConfigError, RunConfig, load_config

__version__ = "0.1.0"

__all__ = [
    "Expr", "ExprError", "ExprSyntaxError", "ExprDomainError", "parse", "to_string", "evaluate", "evaluate_many",
    "Grid", "GridFunction",
    "MapSystem", "WeightedIFS", "PotentialIFS", "NormalizedIFS", "IFSValidationError",
    "validate", "from_potential", "normalize",
    "apply", "power_apply", "word_sum_oracle", "log_pressure_sequence", "EigenPair", "eigen_power",
    "DiscountSchedule", "eigen_discounted", "optimal_function",
    "ParticleMeasure", "markov_apply", "eigen_measure", "hutchinson_fixed_point", "chaos_game",
    "HolonomicMeasure", "discrete_differential", "empirical_holonomic", "holonomy_defect", "holonomic_lift",
    "average_entropy", "variational_entropy_upper",
    "equilibrium", "gateaux_probe", "NoEigenfunctionError",
    "RunConfig", "ConfigError", "load_config",
]
