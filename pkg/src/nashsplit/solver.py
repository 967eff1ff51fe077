"""Asynchronous block-iterative half-space projection solver.

Each tick recomputes candidate points for the activated player and
coupling blocks from (possibly lagged) history snapshots, carries the
remaining candidates forward, assembles a point on the graph of the
underlying monotone operator, and relaxedly projects the full iterate
``(x, y, z, u*, v*)`` onto the half-space that the candidate pair
separates from the solution set.

Two execution modes share one contract. Simulated-async mode runs on a
single logical thread with lags supplied by the schedule and is
bit-reproducible. Parallel mode evaluates the activated block steps on
worker threads that read immutable history snapshots; the coordinator
alone mutates state and applies the projection serially in tick order.
Parallel runs satisfy the same invariants but are not required to be
bitwise equal to simulated runs.

Arithmetic is double precision throughout; the scalar test and step size
accumulate in plain double without compensated summation, which desk-scale
dimensions make sufficient.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import Game, SolverParams, as_vector, validate_params, validate_problem
from .proximal import prox
from .schedules import Schedule
from . import oracle

__all__ = [
    "IterState",
    "TickReport",
    "SolveResult",
    "MissingHistoryError",
    "NumericalAbortError",
    "player_local_step",
    "coupling_local_step",
    "refresh_e",
    "assemble_duals",
    "compute_pi",
    "apply_update",
    "tick",
    "solve",
    "candidate_gap",
    "tuple_distance",
]


class MissingHistoryError(RuntimeError):
    """A lagged read asked for a tick outside the retained history.

    Signals a breach of the scheduler/max_lag contract, not a numerical
    failure.
    """


class NumericalAbortError(RuntimeError):
    """The projection step denominator degenerated; state is corrupt."""


@dataclass(frozen=True)
class Snapshot:
    """Immutable copy of the full iterate at one tick."""

    x: tuple
    y: tuple
    z: tuple
    u_star: tuple
    v_star: tuple
    y_stacked: np.ndarray


def _freeze(blocks) -> tuple:
    out = []
    for b in blocks:
        c = np.array(b, dtype=float)
        c.flags.writeable = False
        out.append(c)
    return tuple(out)


@dataclass(frozen=True)
class TickReport:
    """Per-tick record: scalar test, step, residual, and activation data."""

    n: int
    pi: float
    theta: Optional[float]      # present exactly when pi < 0
    step_norm: float            # full-tuple norm of the update
    kkt_residual: float
    active_players: tuple
    active_couplings: tuple
    player_lags: dict
    coupling_lags: dict


@dataclass(frozen=True)
class SolveResult:
    """Final tuple, per-tick reports, and the closing certificate."""

    x: tuple
    y: tuple
    z: tuple
    u_star: tuple
    v_star: tuple
    reports: list
    certificate: "oracle.Certificate"
    status: str                 # "converged" | "max_iters" | "stagnated"
    ticks: int


class IterState:
    """Mutable iterate of the big-space algorithm plus its block caches.

    Holds the current ``(x, y, z, u*, v*)`` tuple, the per-player candidate
    cache ``(q, c*, a, s*, c)``, the per-coupling cache ``(b, e*, b*, e)``,
    and a ring of the last ``max_lag + 1`` full tuples for lagged reads.
    History snapshots are immutable and may be read concurrently; only the
    coordinator mutates the live fields.
    """

    def __init__(self, game: Game, x=None, y=None, z=None, u_star=None, v_star=None,
                 max_lag: int = 0):
        self.game = game
        self.max_lag = int(max_lag)

        def init_blocks(given, dims, what):
            if given is None:
                return [np.zeros(d) for d in dims]
            blocks = list(given)
            if len(blocks) != len(dims):
                raise ValueError(f"{what}: expected {len(dims)} blocks, got {len(blocks)}")
            return [as_vector(b, d, what) for b, d in zip(blocks, dims)]

        self.x = init_blocks(x, game.strategy_dims, "x0")
        self.y = init_blocks(y, game.interaction_dims, "y0")
        self.z = init_blocks(z, game.coupling_dims, "z0")
        self.u_star = init_blocks(u_star, game.interaction_dims, "u0")
        self.v_star = init_blocks(v_star, game.coupling_dims, "v0")

        m, K = game.num_players, game.num_couplings
        self.cand_q = [None] * m
        self.cand_c_star = [None] * m
        self.cand_a = [None] * m
        self.cand_s_star = [None] * m
        self.cand_c = [None] * m
        self.cand_b = [None] * K
        self.cand_e_star = [None] * K
        self.cand_b_star = [None] * K
        self.cand_e = [None] * K
        self.dual_a_star = [None] * m
        self.dual_q_star = [None] * m

        self.n = 0
        self.pi: Optional[float] = None
        self.history: dict = {}
        self._interaction_memo: dict = {}
        self._push_history(0)

    def _push_history(self, idx: int) -> None:
        snap = Snapshot(
            _freeze(self.x), _freeze(self.y), _freeze(self.z),
            _freeze(self.u_star), _freeze(self.v_star),
            np.concatenate(self.y) if self.y else np.zeros(0),
        )
        self.history[idx] = snap
        for old in [j for j in self.history if j < idx - self.max_lag]:
            del self.history[old]

    def snapshot_at(self, tick_index: int) -> Snapshot:
        try:
            return self.history[tick_index]
        except KeyError:
            raise MissingHistoryError(
                f"history has ticks {sorted(self.history)}, requested {tick_index}; "
                f"schedule lags exceed the retained depth"
            ) from None

    def lagged_interaction_grad(self, tick_index: int) -> np.ndarray:
        """Stacked interaction gradient at a history tick, memoized per tick."""
        got = self._interaction_memo.get(tick_index)
        if got is None:
            got = np.asarray(
                self.game.interaction.eval(self.snapshot_at(tick_index).y_stacked), dtype=float
            )
            self._interaction_memo[tick_index] = got
        return got

    def current_tuple(self) -> tuple:
        """Copies of the live ``(x, y, z, u*, v*)`` blocks."""
        return (
            tuple(np.array(b) for b in self.x),
            tuple(np.array(b) for b in self.y),
            tuple(np.array(b) for b in self.z),
            tuple(np.array(b) for b in self.u_star),
            tuple(np.array(b) for b in self.v_star),
        )


def tuple_distance(t1, t2) -> float:
    """Norm of the difference of two full ``(x, y, z, u*, v*)`` tuples."""
    acc = 0.0
    for group1, group2 in zip(t1, t2):
        for a, b in zip(group1, group2):
            d = np.asarray(a) - np.asarray(b)
            acc += float(np.dot(d, d))
    return float(np.sqrt(acc))


def player_local_step(game: Game, params: SolverParams, state: IterState, i: int, tau: int):
    """Candidate computation for player ``i`` reading history tick ``tau``.

    Returns ``(q_i, c*_i, a_i, s*_i, c_i)``. Step sizes are indexed at the
    lag time ``tau``, exactly as the iteration prescribes.
    """
    snap = state.snapshot_at(tau)
    p = game.players[i]
    offs = game.interaction_offsets()
    grad_y = state.lagged_interaction_grad(tau)[offs[i]:offs[i + 1]]
    step_y = params.interaction_step(i, tau)
    step_u = params.player_dual_step(i, tau)
    step_x = params.strategy_step(i, tau)

    q_i = snap.y[i] + step_y * (snap.u_star[i] - grad_y)
    c_star_i = snap.u_star[i] + step_u * (p.mix.apply(snap.x[i]) - snap.y[i])
    pull = p.smooth.grad(snap.x[i]) + p.mix.adjoint_apply(snap.u_star[i])
    for k, blk in enumerate(game.couplings):
        op = blk.maps.get(i)
        if op is not None:
            pull = pull + op.adjoint_apply(snap.v_star[k])
    x_star = snap.x[i] - step_x * pull
    a_i = prox(p.nonsmooth, step_x, x_star)
    s_star_i = (x_star - a_i) / step_x + p.smooth.grad(a_i) + p.mix.adjoint_apply(c_star_i)
    c_i = q_i - p.mix.apply(a_i)
    return q_i, c_star_i, a_i, s_star_i, c_i


def coupling_local_step(game: Game, params: SolverParams, state: IterState, k: int, delta: int):
    """Candidate computation for coupling ``k`` reading history tick ``delta``.

    Returns ``(d*_k, b_k, e*_k, b*_k)``; the primal gap ``e_k`` is not
    computed here because it must be refreshed from the newest player
    candidates every tick (see :func:`refresh_e`).
    """
    snap = state.snapshot_at(delta)
    blk = game.couplings[k]
    step_z = params.coupling_step(k, delta)
    step_v = params.coupling_dual_step(k, delta)

    d_star = snap.z[k] + step_z * (snap.v_star[k] - blk.smooth.grad(snap.z[k]))
    b_k = prox(blk.nonsmooth, step_z, d_star)
    mixture = np.zeros(blk.dim)
    for i in sorted(blk.maps):
        mixture = mixture + blk.maps[i].apply(snap.x[i])
    e_star_k = snap.v_star[k] + step_v * (mixture - snap.z[k])
    b_star_k = (d_star - b_k) / step_z + blk.smooth.grad(b_k) - e_star_k
    return d_star, b_k, e_star_k, b_star_k


def refresh_e(game: Game, state: IterState) -> list:
    """Recompute ``e_k = b_k - sum_i L_ki a_i`` for every coupling.

    Runs every tick for active and inactive couplings alike, always against
    the freshest player candidates; carrying ``e_k`` forward instead would
    silently break the graph property of the candidate pair.
    """
    out = []
    for k, blk in enumerate(game.couplings):
        mixture = np.zeros(blk.dim)
        for i in sorted(blk.maps):
            mixture = mixture + blk.maps[i].apply(state.cand_a[i])
        out.append(state.cand_b[k] - mixture)
    return out


def assemble_duals(game: Game, state: IterState):
    """Dual candidates for every player from the current caches.

    ``a*_i`` adds the coupling pullbacks to ``s*_i``; ``q*_i`` evaluates
    the stacked interaction gradient once at the full fresh candidate
    ``q`` (inactive players included) and subtracts ``c*_i``.
    """
    q_stacked = np.concatenate(state.cand_q) if state.cand_q else np.zeros(0)
    grads = np.asarray(game.interaction.eval(q_stacked), dtype=float)
    offs = game.interaction_offsets()
    a_star, q_star = [], []
    for i in range(game.num_players):
        acc = state.cand_s_star[i]
        for k, blk in enumerate(game.couplings):
            op = blk.maps.get(i)
            if op is not None:
                acc = acc + op.adjoint_apply(state.cand_e_star[k])
        a_star.append(acc)
        q_star.append(grads[offs[i]:offs[i + 1]] - state.cand_c_star[i])
    state.dual_a_star = a_star
    state.dual_q_star = q_star
    return a_star, q_star


def compute_pi(game: Game, state: IterState) -> float:
    """Scalar separation test between the iterate and the candidate pair."""
    pi = 0.0
    for i in range(game.num_players):
        pi += (
            float(np.dot(state.cand_a[i] - state.x[i], state.dual_a_star[i]))
            + float(np.dot(state.cand_q[i] - state.y[i], state.dual_q_star[i]))
            + float(np.dot(state.cand_c[i], state.cand_c_star[i] - state.u_star[i]))
        )
    for k in range(game.num_couplings):
        pi += (
            float(np.dot(state.cand_b[k] - state.z[k], state.cand_b_star[k]))
            + float(np.dot(state.cand_e[k], state.cand_e_star[k] - state.v_star[k]))
        )
    state.pi = pi
    return pi


def apply_update(game: Game, state: IterState, params: SolverParams):
    """Relaxed projection of the iterate onto the separating half-space.

    With a negative scalar test the update moves every block along the
    dual candidate direction by ``theta = relaxation * pi / ||dual||^2``;
    otherwise the state is left untouched. The history ring advances
    either way. A nonpositive denominator under a negative test is
    mathematically impossible and aborts the run.
    """
    if state.pi is None:
        raise RuntimeError("compute_pi must run before apply_update")
    pi = state.pi
    state.pi = None
    n = state.n
    if not np.isfinite(pi):
        raise NumericalAbortError(f"scalar test is not finite at tick {n}: {pi}")
    theta = None
    step_norm = 0.0
    if pi < 0.0:
        den = 0.0
        for i in range(game.num_players):
            den += (
                float(np.dot(state.dual_a_star[i], state.dual_a_star[i]))
                + float(np.dot(state.dual_q_star[i], state.dual_q_star[i]))
                + float(np.dot(state.cand_c[i], state.cand_c[i]))
            )
        for k in range(game.num_couplings):
            den += (
                float(np.dot(state.cand_b_star[k], state.cand_b_star[k]))
                + float(np.dot(state.cand_e[k], state.cand_e[k]))
            )
        if not np.isfinite(den) or den <= 0.0:
            raise NumericalAbortError(
                f"projection denominator {den} with negative scalar test at tick {n}"
            )
        theta = params.relaxation_at(n) * pi / den
        for i in range(game.num_players):
            state.x[i] = state.x[i] + theta * state.dual_a_star[i]
            state.y[i] = state.y[i] + theta * state.dual_q_star[i]
            state.u_star[i] = state.u_star[i] + theta * state.cand_c[i]
        for k in range(game.num_couplings):
            state.z[k] = state.z[k] + theta * state.cand_b_star[k]
            state.v_star[k] = state.v_star[k] + theta * state.cand_e[k]
        step_norm = abs(theta) * float(np.sqrt(den))
    state._push_history(n + 1)
    return pi, theta, step_norm


def tick(game: Game, params: SolverParams, schedule: Schedule, state: IterState,
         executor=None) -> TickReport:
    """Run one full iteration and append its report data.

    Queries the schedule, runs the local steps for the activated blocks
    (concurrently when an executor is supplied), carries the inactive
    caches forward, refreshes the coupling gaps and player duals, and
    applies the half-space update. The reported residual certifies the
    post-update iterate.
    """
    n = state.n
    info = schedule.next_tick(n, game.num_players, game.num_couplings)
    state._interaction_memo.clear()

    if executor is not None:
        for tau in sorted({*info.player_lags.values()}):
            state.lagged_interaction_grad(tau)
        player_jobs = {
            i: executor.submit(player_local_step, game, params, state, i, info.player_lags[i])
            for i in info.active_players
        }
        coupling_jobs = {
            k: executor.submit(coupling_local_step, game, params, state, k, info.coupling_lags[k])
            for k in info.active_couplings
        }
        player_results = {i: job.result() for i, job in player_jobs.items()}
        coupling_results = {k: job.result() for k, job in coupling_jobs.items()}
    else:
        player_results = {
            i: player_local_step(game, params, state, i, info.player_lags[i])
            for i in info.active_players
        }
        coupling_results = {
            k: coupling_local_step(game, params, state, k, info.coupling_lags[k])
            for k in info.active_couplings
        }

    for i, (q_i, c_star_i, a_i, s_star_i, c_i) in player_results.items():
        state.cand_q[i] = q_i
        state.cand_c_star[i] = c_star_i
        state.cand_a[i] = a_i
        state.cand_s_star[i] = s_star_i
        state.cand_c[i] = c_i
    for k, (_, b_k, e_star_k, b_star_k) in coupling_results.items():
        state.cand_b[k] = b_k
        state.cand_e_star[k] = e_star_k
        state.cand_b_star[k] = b_star_k

    state.cand_e = refresh_e(game, state)
    assemble_duals(game, state)
    compute_pi(game, state)
    pi, theta, step_norm = apply_update(game, state, params)
    residual = oracle.check_equilibrium(
        game, state.x, state.u_star, state.v_star, coerce=False
    ).max_residual
    report = TickReport(
        n=n,
        pi=pi,
        theta=theta,
        step_norm=step_norm,
        kkt_residual=residual,
        active_players=info.active_players,
        active_couplings=info.active_couplings,
        player_lags=info.player_lags,
        coupling_lags=info.coupling_lags,
    )
    state.n = n + 1
    return report


def candidate_gap(game: Game, state: IterState, reference) -> float:
    """Inner product ``<ref - candidate, candidate dual>`` after a tick.

    For a reference tuple assembled from a solution, monotonicity forces
    this to be nonpositive: the solution set lies inside the projection
    half-space.
    """
    rx, ry, rz, ru, rv = reference
    acc = 0.0
    for i in range(game.num_players):
        acc += float(np.dot(np.asarray(rx[i]) - state.cand_a[i], state.dual_a_star[i]))
        acc += float(np.dot(np.asarray(ry[i]) - state.cand_q[i], state.dual_q_star[i]))
        acc += float(np.dot(np.asarray(ru[i]) - state.cand_c_star[i], state.cand_c[i]))
    for k in range(game.num_couplings):
        acc += float(np.dot(np.asarray(rz[k]) - state.cand_b[k], state.cand_b_star[k]))
        acc += float(np.dot(np.asarray(rv[k]) - state.cand_e_star[k], state.cand_e[k]))
    return acc


def solve(game: Game, params: SolverParams, schedule: Schedule, x0=None, *,
          state: Optional[IterState] = None, parallel: bool = False,
          validate: bool = True, stall_window: int = 1000) -> SolveResult:
    """Iterate to a certified equilibrium or a tick limit.

    Parameters
    ----------
    game, params, schedule
        The problem, its step schedules, and the activation schedule.
    x0
        Initial strategies (per-player blocks); defaults to all zeros.
        Pass a prebuilt ``state`` instead to warm-start the full tuple.
    parallel
        Evaluate activated block steps on worker threads. Same contract
        and invariants, not bitwise equal to the simulated mode.
    validate
        Run the desk-scale problem and parameter validations first and
        raise ValueError on any violation; pass False to override.
    stall_window
        Declare stagnation when the state has not moved for this many
        consecutive ticks while the residual stays above tolerance. The
        underlying theory offers no remedy for a persistent nonnegative
        scalar test, so the run stops and reports it.

    Returns
    -------
    SolveResult
        Final tuple, per-tick reports, closing certificate, and status
        ("converged", "max_iters", or "stagnated").
    """
    if schedule.max_lag > params.max_lag:
        raise ValueError(
            f"schedule lags up to {schedule.max_lag} exceed the retained history "
            f"depth max_lag={params.max_lag}"
        )
    if validate:
        issues = validate_game_and_params(game, params)
        if issues:
            raise ValueError("validation failed:\n" + "\n".join(issues))

    if state is None:
        state = IterState(game, x=x0, max_lag=params.max_lag)
    elif x0 is not None:
        raise ValueError("pass either x0 or a prebuilt state, not both")

    executor = None
    if parallel:
        from concurrent.futures import ThreadPoolExecutor

        executor = ThreadPoolExecutor(max_workers=min(8, game.num_players + game.num_couplings))
    reports = []
    status = "max_iters"
    frozen_ticks = 0
    try:
        for _ in range(params.max_iters):
            report = tick(game, params, schedule, state, executor=executor)
            reports.append(report)
            if report.kkt_residual <= params.tol:
                status = "converged"
                break
            frozen_ticks = frozen_ticks + 1 if report.theta is None else 0
            if stall_window and frozen_ticks >= stall_window:
                status = "stagnated"
                break
    finally:
        if executor is not None:
            executor.shutdown()
    certificate = oracle.check_equilibrium(game, state.x, state.u_star, state.v_star)
    xs, ys, zs, us, vs = state.current_tuple()
    return SolveResult(xs, ys, zs, us, vs, reports, certificate, status, state.n)


def validate_game_and_params(game: Game, params: SolverParams, samples: int = 16,
                             seed: int = 0, horizon: int = 256) -> list:
    """Combined advisory validation used as the solve() entry gate."""
    return validate_problem(game, samples=samples, seed=seed) + validate_params(
        game, params, horizon=horizon
    )
