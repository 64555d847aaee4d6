"""Classical and entanglement-assisted fingerprinting with one-sided error.

Exact evaluation of shared-randomness strategies, the optimal grouping
constructions, a brute-force optimality oracle, unitary operator frames for
the entanglement-assisted protocols and a seeded round simulator.
"""

from .classical import (
    GroupAssignment,
    PermutationKey,
    classical_bound,
    exact_permuted_error,
    grouping_strategy,
    permuted_grouping,
    semiclassical_bound,
)
from .oracle import BudgetExceeded, exhaustive_min_ne, ne_of_deterministic
from .quantum import theorem6_error, utof_frame
from .strategy import (
    ErrorProfile,
    StrategyTriple,
    acceptance_probability,
    derive_referee,
    error_profile,
    is_one_sided,
)

__version__ = "0.1.0"
