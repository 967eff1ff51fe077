"""Problem model for modular Nash games and desk-scale validation.

A game consists of player blocks (a nonsmooth term, a smooth term with a
Lipschitz gradient, and a linear map into a shared interaction space),
optional coupling blocks acting on linear mixtures of the strategies, and
the stacked interaction gradient whose monotonicity ties the players
together. Spaces are finite-dimensional real vectors represented as 1-D
float64 numpy arrays; the interfaces never assume a basis beyond the
dimensions.

All types are immutable after construction and safe to share across
threads; user-supplied callables must be reentrant. Validation is
advisory: the ``validate_*`` functions return lists of violation strings
(empty means valid) and never raise on a bad game.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from .linops import LinOp
from .proximal import NonsmoothTerm

__all__ = [
    "SmoothTerm",
    "zero_smooth",
    "quadratic_smooth",
    "PlayerBlock",
    "CouplingBlock",
    "InteractionGradient",
    "Game",
    "SolverParams",
    "StepSchedule",
    "as_vector",
    "validate_problem",
    "validate_params",
]

# Relative slack for the sampled analytic checks (monotonicity, Lipschitz
# bounds, adjoint consistency).
_SAMPLE_TOL = 1e-9


def as_vector(x, dim: Optional[int] = None, what: str = "vector") -> np.ndarray:
    """Coerce to a finite 1-D float64 array, optionally of a fixed dimension."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{what}: expected a 1-D vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"{what}: expected dimension {dim}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what}: entries must be finite")
    return arr


@dataclass(frozen=True)
class SmoothTerm:
    """A convex differentiable term given by value and gradient callables."""

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]


def zero_smooth() -> SmoothTerm:
    return SmoothTerm(lambda x: 0.0, lambda x: np.zeros_like(x))


def quadratic_smooth(curvature: float, linear) -> SmoothTerm:
    """The smooth term ``(curvature/2)||x||^2 + <linear, x>``."""
    c = float(curvature)
    b = np.atleast_1d(np.asarray(linear, dtype=float))
    return SmoothTerm(
        lambda x: 0.5 * c * float(np.dot(x, x)) + float(np.dot(b, x)),
        lambda x: c * x + b,
    )


@dataclass(frozen=True)
class PlayerBlock:
    """One player: strategy space, loss terms, and the mix into the interaction space.

    Attributes
    ----------
    dim_strategy : int
        Dimension of the player's strategy space.
    dim_interaction : int
        Dimension of the player's slot in the stacked interaction space.
    nonsmooth : NonsmoothTerm
        Proper lsc convex individual term (constraints enter here).
    smooth : SmoothTerm
        Differentiable individual term.
    smooth_lipschitz : float
        Lipschitz constant of the smooth gradient (caller-supplied).
    mix : LinOp
        Linear map from the strategy space into the interaction slot.
    interaction_bound : float
        Positive per-player curvature bound of the interaction gradient
        (caller-supplied; verified only by sampling).
    """

    dim_strategy: int
    dim_interaction: int
    nonsmooth: NonsmoothTerm
    smooth: SmoothTerm
    smooth_lipschitz: float
    mix: LinOp
    interaction_bound: float

    def __post_init__(self):
        if self.dim_strategy < 1 or self.dim_interaction < 1:
            raise ValueError("player dimensions must be positive")
        if self.smooth_lipschitz < 0.0:
            raise ValueError("smooth_lipschitz must be nonnegative")
        if not self.interaction_bound > 0.0:
            raise ValueError("interaction_bound must be positive")


@dataclass(frozen=True)
class CouplingBlock:
    """One nonsmooth-plus-smooth coupling acting on a mixture of strategies.

    ``maps`` sends a player index to the linear map of that player into the
    coupling space; absent entries mean the zero operator.
    """

    dim: int
    nonsmooth: NonsmoothTerm
    smooth: SmoothTerm
    smooth_lipschitz: float
    maps: Mapping[int, LinOp]

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("coupling dimension must be positive")
        if self.smooth_lipschitz < 0.0:
            raise ValueError("smooth_lipschitz must be nonnegative")
        object.__setattr__(self, "maps", dict(self.maps))


@dataclass(frozen=True)
class InteractionGradient:
    """Stacked partial-gradient operator of the joint smooth losses.

    ``eval`` takes the stacked interaction vector and returns the stacked
    partial gradients, one block per player. It must be monotone and
    ``lipschitz``-Lipschitzian; both are sampled properties, not enforced
    structurally.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    lipschitz: float

    def __post_init__(self):
        if not self.lipschitz > 0.0:
            raise ValueError("interaction lipschitz constant must be positive")


@dataclass(frozen=True)
class Game:
    """A full modular Nash game: players, couplings, interaction gradient."""

    players: Sequence[PlayerBlock]
    interaction: InteractionGradient
    couplings: Sequence[CouplingBlock] = ()

    def __post_init__(self):
        object.__setattr__(self, "players", tuple(self.players))
        object.__setattr__(self, "couplings", tuple(self.couplings))
        if not self.players:
            raise ValueError("a game needs at least one player")
        object.__setattr__(
            self, "_offsets", np.cumsum([0] + [p.dim_interaction for p in self.players])
        )

    @property
    def num_players(self) -> int:
        return len(self.players)

    @property
    def num_couplings(self) -> int:
        return len(self.couplings)

    @property
    def strategy_dims(self) -> tuple:
        return tuple(p.dim_strategy for p in self.players)

    @property
    def interaction_dims(self) -> tuple:
        return tuple(p.dim_interaction for p in self.players)

    @property
    def coupling_dims(self) -> tuple:
        return tuple(c.dim for c in self.couplings)

    @property
    def total_interaction_dim(self) -> int:
        return sum(self.interaction_dims)

    def interaction_offsets(self) -> np.ndarray:
        return self._offsets

    def split_interaction(self, stacked: np.ndarray) -> list:
        """Split a stacked interaction vector into per-player blocks."""
        offs = self.interaction_offsets()
        return [stacked[offs[i]:offs[i + 1]] for i in range(self.num_players)]

    def stack_interaction(self, blocks) -> np.ndarray:
        return np.concatenate([np.asarray(b, dtype=float) for b in blocks])

    def coupling_mixture(self, k: int, strategies) -> np.ndarray:
        """Evaluate the mixture sum of coupling ``k`` over the given strategies."""
        blk = self.couplings[k]
        acc = np.zeros(blk.dim)
        for i in sorted(blk.maps):
            acc = acc + blk.maps[i].apply(strategies[i])
        return acc


# A per-block step schedule: a constant, one constant per block, or a
# callable (block, tick) -> value. Schedules are pure functions so lagged
# indexing needs no storage.
StepSchedule = Union[float, Sequence[float], Callable[[int, int], float]]


def _step_at(schedule: StepSchedule, block: int, tick: int) -> float:
    if callable(schedule):
        return float(schedule(block, tick))
    if isinstance(schedule, (int, float)):
        return float(schedule)
    return float(schedule[block])


@dataclass(frozen=True)
class SolverParams:
    """Step-size schedules and run limits for the half-space solver.

    ``epsilon`` and ``eta`` bound every schedule: the strategy steps live in
    ``[epsilon, 1/(alpha_i + eta)]``, the interaction steps in
    ``[epsilon, 1/(chi_i + eta)]``, the coupling steps in
    ``[epsilon, 1/(beta_k + eta)]``, and both dual steps in
    ``[epsilon, 1/epsilon]``. The relaxation stays in
    ``[epsilon, 2 - epsilon]``. ``max_lag`` bounds how stale a block
    computation may be and ``window`` is the quasi-cyclic covering span.
    """

    epsilon: float = 0.01
    eta: float = 0.1
    max_lag: int = 0
    window: int = 0
    relaxation: Union[float, Callable[[int], float]] = 1.8
    strategy_steps: StepSchedule = 1.0
    interaction_steps: StepSchedule = 1.0
    player_dual_steps: StepSchedule = 1.0
    coupling_steps: StepSchedule = 1.0
    coupling_dual_steps: StepSchedule = 1.0
    max_iters: int = 100_000
    tol: float = 1e-8

    def strategy_step(self, i: int, n: int) -> float:
        return _step_at(self.strategy_steps, i, n)

    def interaction_step(self, i: int, n: int) -> float:
        return _step_at(self.interaction_steps, i, n)

    def player_dual_step(self, i: int, n: int) -> float:
        return _step_at(self.player_dual_steps, i, n)

    def coupling_step(self, k: int, n: int) -> float:
        return _step_at(self.coupling_steps, k, n)

    def coupling_dual_step(self, k: int, n: int) -> float:
        return _step_at(self.coupling_dual_steps, k, n)

    def relaxation_at(self, n: int) -> float:
        if callable(self.relaxation):
            return float(self.relaxation(n))
        return float(self.relaxation)

    @staticmethod
    def for_game(game: Game, epsilon: float = 0.01, eta: float = 0.1, **overrides) -> "SolverParams":
        """Defaults for a game: largest admissible constant steps.

        The dual steps default to 1.0; the theory only confines them to
        ``[epsilon, 1/epsilon]`` and offers no guidance, so treat them as
        untuned knobs.
        """
        fields = dict(
            epsilon=epsilon,
            eta=eta,
            strategy_steps=tuple(1.0 / (p.smooth_lipschitz + eta) for p in game.players),
            interaction_steps=tuple(1.0 / (p.interaction_bound + eta) for p in game.players),
            coupling_steps=tuple(1.0 / (c.smooth_lipschitz + eta) for c in game.couplings) or 1.0,
        )
        fields.update(overrides)
        return SolverParams(**fields)


def _sample_vec(rng, dim, scale=1.0):
    return scale * rng.standard_normal(dim)


def validate_problem(game: Game, samples: int = 25, seed: int = 0) -> list:
    """Check everything about a game that is checkable at desk scale.

    Returns a list of violation strings (empty means no violation found).
    Structural dimension mismatches are reported exactly; adjoint
    consistency, gradient Lipschitz bounds, interaction monotonicity, and
    the per-player curvature bound are sampled with ``samples`` draws from
    the given seed. Violations are data, not failures.
    """
    report = []
    rng = np.random.default_rng(seed)

    for i, p in enumerate(game.players):
        if p.mix.in_dim != p.dim_strategy or p.mix.out_dim != p.dim_interaction:
            report.append(
                f"player {i}: mix operator maps {p.mix.in_dim}->{p.mix.out_dim}, "
                f"expected {p.dim_strategy}->{p.dim_interaction}"
            )
        if p.nonsmooth.dim is not None and p.nonsmooth.dim != p.dim_strategy:
            report.append(
                f"player {i}: nonsmooth term has dimension {p.nonsmooth.dim}, "
                f"strategy space has {p.dim_strategy}"
            )
    for k, c in enumerate(game.couplings):
        if c.nonsmooth.dim is not None and c.nonsmooth.dim != c.dim:
            report.append(f"coupling {k}: nonsmooth term dimension {c.nonsmooth.dim} != {c.dim}")
        for i, op in c.maps.items():
            if i < 0 or i >= game.num_players:
                report.append(f"coupling {k}: map references unknown player {i}")
                continue
            if op.out_dim != c.dim or op.in_dim != game.players[i].dim_strategy:
                report.append(
                    f"coupling {k}: map for player {i} is {op.in_dim}->{op.out_dim}, "
                    f"expected {game.players[i].dim_strategy}->{c.dim}"
                )
    if report:
        # Sampled checks would only cascade spurious errors on top of a
        # structurally broken game.
        return report

    dim_y = game.total_interaction_dim
    probe = game.interaction.eval(np.zeros(dim_y))
    probe = np.asarray(probe, dtype=float)
    if probe.shape != (dim_y,):
        report.append(
            f"interaction gradient returned shape {probe.shape}, expected ({dim_y},)"
        )
        return report

    ops = [(f"player {i} mix", p.mix) for i, p in enumerate(game.players)]
    ops += [
        (f"coupling {k} map for player {i}", op)
        for k, c in enumerate(game.couplings)
        for i, op in sorted(c.maps.items())
    ]
    for name, op in ops:
        worst = 0.0
        for _ in range(samples):
            xs = _sample_vec(rng, op.in_dim)
            ys = _sample_vec(rng, op.out_dim)
            lhs = float(np.dot(op.apply(xs), ys))
            rhs = float(np.dot(xs, op.adjoint_apply(ys)))
            scale = 1.0 + abs(lhs) + abs(rhs)
            worst = max(worst, abs(lhs - rhs) / scale)
        if worst > _SAMPLE_TOL:
            report.append(f"{name}: adjoint inconsistency {worst:.3e}")

    def lipschitz_violation(grad, dim, bound, scale=3.0):
        worst = 0.0
        for _ in range(samples):
            a = _sample_vec(rng, dim, scale)
            b = a + _sample_vec(rng, dim)
            num = float(np.linalg.norm(np.asarray(grad(a)) - np.asarray(grad(b))))
            den = float(np.linalg.norm(a - b))
            if den > 0:
                worst = max(worst, num - bound * den * (1.0 + _SAMPLE_TOL))
        return worst

    for i, p in enumerate(game.players):
        excess = lipschitz_violation(p.smooth.grad, p.dim_strategy, p.smooth_lipschitz)
        if excess > _SAMPLE_TOL:
            report.append(f"player {i}: smooth gradient exceeds Lipschitz bound by {excess:.3e}")
    for k, c in enumerate(game.couplings):
        excess = lipschitz_violation(c.smooth.grad, c.dim, c.smooth_lipschitz)
        if excess > _SAMPLE_TOL:
            report.append(f"coupling {k}: smooth gradient exceeds Lipschitz bound by {excess:.3e}")

    bounds = np.array([p.interaction_bound for p in game.players])
    offs = game.interaction_offsets()
    for _ in range(samples):
        ya = _sample_vec(rng, dim_y, 3.0)
        yb = ya + _sample_vec(rng, dim_y)
        qa = np.asarray(game.interaction.eval(ya), dtype=float)
        qb = np.asarray(game.interaction.eval(yb), dtype=float)
        dy, dq = ya - yb, qa - qb
        inner = float(np.dot(dy, dq))
        sq = float(np.dot(dy, dy))
        scale = 1.0 + abs(inner)
        if inner < -_SAMPLE_TOL * scale:
            report.append(f"interaction gradient not monotone: <dy, dQ> = {inner:.3e}")
            break
        cap = sum(
            bounds[i] * float(np.dot(dy[offs[i]:offs[i + 1]], dy[offs[i]:offs[i + 1]]))
            for i in range(game.num_players)
        )
        if inner > cap * (1.0 + _SAMPLE_TOL) + _SAMPLE_TOL:
            report.append(
                f"interaction curvature bound violated: <dy, dQ> = {inner:.3e} > {cap:.3e}"
            )
            break
        lip = float(np.linalg.norm(dq))
        if lip > game.interaction.lipschitz * np.sqrt(sq) * (1.0 + _SAMPLE_TOL) + _SAMPLE_TOL:
            report.append(
                f"interaction gradient exceeds Lipschitz constant: "
                f"{lip:.3e} > {game.interaction.lipschitz:.3e} * |dy|"
            )
            break
    return report


def validate_params(game: Game, params: SolverParams, horizon: int = 1000) -> list:
    """Check the step-size schedules against their admissible intervals.

    Evaluates every schedule for ticks ``0..horizon`` and reports interval
    breaches; also checks the global coupling between ``epsilon``,
    ``eta``, and the Lipschitz data.
    """
    report = []
    eps, eta = params.epsilon, params.eta
    if not 0.0 < eps < 1.0:
        report.append(f"epsilon must lie in (0, 1), got {eps}")
    if not eta > 0.0:
        report.append(f"eta must be positive, got {eta}")
    if params.max_lag < 0 or params.window < 0:
        report.append("max_lag and window must be nonnegative")
    if params.max_iters < 1:
        report.append("max_iters must be positive")
    if not params.tol > 0.0:
        report.append("tol must be positive")
    if report:
        return report

    caps = [p.smooth_lipschitz + eta for p in game.players]
    caps += [p.interaction_bound + eta for p in game.players]
    caps += [c.smooth_lipschitz + eta for c in game.couplings]
    cap = max(caps)
    if not 1.0 / eps > cap:
        report.append(f"1/epsilon = {1.0 / eps:g} must exceed max(alpha+eta, beta+eta, chi+eta) = {cap:g}")

    def check_interval(fetch, lo, hi, what, n):
        try:
            value = fetch()
        except Exception as exc:  # malformed schedules are violations, not crashes
            report.append(f"{what} at tick {n}: schedule evaluation failed ({exc})")
            return False
        if not (lo <= value <= hi):
            report.append(f"{what} at tick {n}: {value:g} outside [{lo:g}, {hi:g}]")
            return False
        return True

    for n in range(horizon + 1):
        if not check_interval(lambda: params.relaxation_at(n), eps, 2.0 - eps, "relaxation", n):
            break
    for i, p in enumerate(game.players):
        for n in range(horizon + 1):
            ok = check_interval(
                lambda: params.strategy_step(i, n), eps, 1.0 / (p.smooth_lipschitz + eta),
                f"strategy step (player {i})", n,
            )
            ok &= check_interval(
                lambda: params.interaction_step(i, n), eps, 1.0 / (p.interaction_bound + eta),
                f"interaction step (player {i})", n,
            )
            ok &= check_interval(
                lambda: params.player_dual_step(i, n), eps, 1.0 / eps,
                f"player dual step (player {i})", n,
            )
            if not ok:
                break
    for k, c in enumerate(game.couplings):
        for n in range(horizon + 1):
            ok = check_interval(
                lambda: params.coupling_step(k, n), eps, 1.0 / (c.smooth_lipschitz + eta),
                f"coupling step (coupling {k})", n,
            )
            ok &= check_interval(
                lambda: params.coupling_dual_step(k, n), eps, 1.0 / eps,
                f"coupling dual step (coupling {k})", n,
            )
            if not ok:
                break
    return report
