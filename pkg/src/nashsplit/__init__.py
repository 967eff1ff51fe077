"""Asynchronous block-iterative Nash equilibrium solver.

Games are built from player blocks (nonsmooth plus smooth individual
losses and a linear mix into a shared interaction space), optional
nonsmooth-plus-smooth couplings on strategy mixtures, and the monotone
stacked gradient of the joint losses. The solver activates arbitrary
subsets of blocks per tick, tolerates bounded staleness in what they
read, and converges through relaxed half-space projections certified by
first-order residuals.
"""

from .linops import Compose, Dense, DimensionError, HStack, Identity, LinOp, ScaledIdentity, Zero
from .model import (
    CouplingBlock,
    Game,
    InteractionGradient,
    PlayerBlock,
    SmoothTerm,
    SolverParams,
    quadratic_smooth,
    validate_params,
    validate_problem,
    zero_smooth,
)
from .oracle import (
    BestResponseResult,
    Certificate,
    ExactEquilibrium,
    best_response_fixed_point,
    check_equilibrium,
    equilibrium_tuple,
    quadratic_game_exact,
)
from .proximal import NonsmoothTerm, prox, prox_optimality_check
from .schedules import Schedule, audit, cyclic, randomized, synchronous
from .solver import (
    IterState,
    MissingHistoryError,
    NumericalAbortError,
    SolveResult,
    TickReport,
    solve,
    tick,
    tuple_distance,
)

__version__ = "0.1.0"

__all__ = [
    "Game", "PlayerBlock", "CouplingBlock", "InteractionGradient", "SmoothTerm",
    "SolverParams", "NonsmoothTerm", "LinOp", "Dense", "Identity", "ScaledIdentity",
    "Zero", "HStack", "Compose", "DimensionError", "Schedule", "synchronous",
    "cyclic", "randomized", "audit", "IterState", "TickReport", "SolveResult",
    "MissingHistoryError", "NumericalAbortError", "solve", "tick", "tuple_distance",
    "Certificate", "check_equilibrium", "equilibrium_tuple", "BestResponseResult",
    "best_response_fixed_point", "ExactEquilibrium", "quadratic_game_exact",
    "prox", "prox_optimality_check", "quadratic_smooth", "zero_smooth",
    "validate_problem", "validate_params",
]
