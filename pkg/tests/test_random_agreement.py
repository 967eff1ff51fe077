"""Randomized desk-scale instances: solver vs exact active-set oracle."""

import numpy as np

import nashsplit as ns
from nashsplit import proximal
from nashsplit.model import validate_problem
from nashsplit.problems import build_quadratic_coupling, build_shared_constraint


def test_random_shared_constraint_instances_agree_with_exact_oracle():
    rng = np.random.default_rng(123)
    for _ in range(5):
        m = int(rng.integers(2, 4))
        targets = rng.uniform(-2.0, 2.0, size=m)
        rows = rng.uniform(0.2, 1.5, size=m)
        rhs = float(rows @ targets + rng.uniform(-1.0, 2.0))
        game, _ = build_shared_constraint(
            [1] * m,
            [proximal.box([-5.0], [5.0]) for _ in range(m)],
            [[t] for t in targets],
            [[[float(r)]] for r in rows],
            [rhs],
        )
        assert validate_problem(game, samples=20, seed=1) == []
        exact = ns.quadratic_game_exact(game)
        cert = ns.check_equilibrium(game, exact.x, exact.u_star, exact.v_star)
        assert cert.max_residual <= 1e-8
        result = ns.solve(game, ns.SolverParams.for_game(game), ns.synchronous())
        assert result.status == "converged"
        gap = np.linalg.norm(np.concatenate(result.x) - np.concatenate(exact.x))
        assert gap <= 1e-4


def test_random_symmetric_consensus_instances_agree_with_exact_oracle():
    # symmetric pairwise weights keep the assembled gradient map monotone
    # (asymmetric ones are refused by the builder); pairwise disjoint boxes
    # rule out the diagonal continuum of equilibria that overlapping sets
    # would admit
    rng = np.random.default_rng(321)
    for _ in range(4):
        m = int(rng.integers(2, 4))
        weights_matrix = rng.uniform(0.3, 2.0, size=(m, m))
        weights_matrix = 0.5 * (weights_matrix + weights_matrix.T)
        boxes = []
        for i in range(m):
            lo = 3.0 * i + rng.uniform(0.0, 0.5)
            boxes.append((lo, lo + rng.uniform(0.3, 1.0)))
        weights = [
            [(float(weights_matrix[i, j]), {j: 1.0}) for j in range(m) if j != i]
            for i in range(m)
        ]
        game, _ = build_quadratic_coupling(
            [1] * m,
            [proximal.box([lo], [hi]) for lo, hi in boxes],
            weights,
            interaction_dim=1,
        )
        assert validate_problem(game, samples=20, seed=2) == []
        exact = ns.quadratic_game_exact(game)
        cert = ns.check_equilibrium(game, exact.x, exact.u_star, exact.v_star)
        assert cert.max_residual <= 1e-8
        result = ns.solve(game, ns.SolverParams.for_game(game), ns.synchronous())
        assert result.status == "converged"
        gap = np.linalg.norm(np.concatenate(result.x) - np.concatenate(exact.x))
        assert gap <= 1e-4
        # distance monotonicity holds with respect to any solution, unique
        # or not: the run must end no farther from the oracle point than it
        # started
        reference = ns.equilibrium_tuple(game, exact.x)
        final_gap = ns.tuple_distance(
            (result.x, result.y, result.z, result.u_star, result.v_star), reference
        )
        zero_state = ns.IterState(game)
        initial_gap = ns.tuple_distance(zero_state.current_tuple(), reference)
        assert final_gap <= initial_gap + 1e-10
