"""Multi-index rearrangements of conditionally convergent series with prescribed iterated sums."""

from .errors import (ConfigError, DepthExceeded, MissingStage, MultisumError, NotConvergable,
                     PartitionExhausted, PhaseStarvation, QuadratureFailure)
from .perms import Permutation, PermTargets, all_permutations
from .series import SeriesSource, alternating_harmonic, alternating_sqrt, witness_convergability
from .partition import IndexPartition, split_conditionally_convergable, split_divergent
from .riemann import ConvergenceReport, greedy_to_infinity, greedy_to_value
from .builder import Assignment, TruncationBudget, build_2d, build_nd

__version__ = "0.1.0"
