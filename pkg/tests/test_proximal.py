"""Proximity operators: closed forms, optimality sampling, firm nonexpansiveness."""

import numpy as np
import pytest

from nashsplit import proximal
from nashsplit.proximal import NonsmoothTerm, prox, prox_optimality_check

from _oracles import grid_simplex_projection_2d


def built_in_terms():
    return [
        ("zero", proximal.zero(), 3),
        ("box", proximal.box([-1.0, 0.0, 2.0], [1.0, 0.5, 3.0]), 3),
        ("ball", proximal.ball([1.0, -1.0], 2.0), 2),
        ("orthant", proximal.shifted_orthant([0.0, 5.0]), 2),
        ("simplex", proximal.simplex(), 4),
        ("singleton", proximal.singleton([1.0, 2.0]), 2),
        ("l1", proximal.l1(0.7), 3),
        ("quadratic", proximal.quadratic(2.0, [1.0, -1.0]), 2),
    ]


def test_box_clamp_gamma_independent():
    term = proximal.box([0.0], [1.0])
    assert np.array_equal(prox(term, 7.0, [1.5]), [1.0])


def test_zero_term_is_identity():
    x = np.array([3.0, -4.0])
    assert np.array_equal(prox(proximal.zero(), 2.0, x), x)


def test_l1_soft_threshold():
    got = prox(proximal.l1(1.0), 0.5, [0.3, -2.0])
    assert np.allclose(got, [0.0, -1.5], atol=0.0)


def test_simplex_projection_example():
    got = prox(proximal.simplex(), 1.0, [0.4, 0.4])
    assert np.allclose(got, [0.5, 0.5], atol=1e-12)


def test_simplex_against_grid_search():
    rng = np.random.default_rng(4)
    for _ in range(10):
        p = rng.standard_normal(2) * 2.0
        fast = prox(proximal.simplex(), 1.0, p)
        brute = grid_simplex_projection_2d(p)
        assert np.max(np.abs(fast - brute)) <= 1e-5


def test_shifted_orthant_projection():
    got = prox(proximal.shifted_orthant([5.0]), 1.0, [4.2])
    assert np.array_equal(got, [5.0])


def test_ball_projection():
    term = proximal.ball([0.0, 0.0], 1.0)
    inside = prox(term, 1.0, [0.3, 0.4])
    assert np.array_equal(inside, [0.3, 0.4])
    outside = prox(term, 1.0, [3.0, 4.0])
    assert np.allclose(outside, [0.6, 0.8], atol=1e-15)


def test_quadratic_prox_formula():
    term = proximal.quadratic(2.0, [1.0])
    # minimizer of ||y||^2 + y + (y - x)^2 / (2 * 0.5) at x = 1: y = (1 - 0.5) / 2
    got = prox(term, 0.5, [1.0])
    assert np.allclose(got, [(1.0 - 0.5) / 2.0], atol=1e-15)


def test_singleton_prox():
    assert np.array_equal(prox(proximal.singleton([2.0]), 3.0, [-9.0]), [2.0])


def test_box_optimality_sampling():
    term = proximal.box([0.0, 0.0], [1.0, 1.0])
    assert prox_optimality_check(term, 2.0, [1.5, -0.5], trials=100, seed=0) <= 1e-10


def test_l1_optimality_sampling():
    term = proximal.l1(1.3)
    assert prox_optimality_check(term, 0.7, [0.4, -2.0, 0.0], trials=100, seed=1) <= 1e-10


def test_wrong_prox_detected():
    lo, hi = np.zeros(2), np.ones(2)

    def member(v):
        return bool(np.all(v >= lo - 1e-9) and np.all(v <= hi + 1e-9))

    broken = NonsmoothTerm(
        "custom",
        2,
        lambda g, x: x,  # claims to project but returns the input
        lambda v: 0.0 if member(v) else np.inf,
    )
    violation = prox_optimality_check(broken, 1.0, [1.5, 0.5], trials=50, seed=2)
    assert violation > 0.0


def test_firm_nonexpansiveness_sampled():
    rng = np.random.default_rng(5)
    for name, term, dim in built_in_terms():
        for _ in range(100):
            u = rng.standard_normal(dim) * 3.0
            v = rng.standard_normal(dim) * 3.0
            gamma = float(rng.uniform(0.2, 4.0))
            pu = prox(term, gamma, u)
            pv = prox(term, gamma, v)
            d = pu - pv
            lhs = float(np.dot(d, d))
            rhs = float(np.dot(d, u - v))
            assert lhs <= rhs + 1e-10, name


def test_indicator_idempotence_and_gamma_independence():
    rng = np.random.default_rng(6)
    for name, term, dim in built_in_terms():
        if not proximal.is_indicator(term):
            continue
        for _ in range(25):
            u = rng.standard_normal(dim) * 4.0
            p1 = prox(term, 1.0, u)
            assert np.max(np.abs(prox(term, 1.0, p1) - p1)) <= 1e-12, name
            for gamma in (0.1, 1.0, 10.0):
                assert np.max(np.abs(prox(term, gamma, u) - p1)) <= 1e-12, name


def test_indicator_output_in_set():
    rng = np.random.default_rng(7)
    for name, term, dim in built_in_terms():
        if not proximal.is_indicator(term):
            continue
        for _ in range(25):
            u = rng.standard_normal(dim) * 4.0
            assert term.value_fn(prox(term, 1.0, u)) == 0.0, name


def test_custom_resolvent_firmly_nonexpansive():
    soft = proximal.custom_resolvent(
        lambda g, x: np.sign(x) * np.maximum(np.abs(x) - g, 0.0),
        value=lambda v: float(np.sum(np.abs(v))),
    )
    rng = np.random.default_rng(8)
    for _ in range(50):
        u, v = rng.standard_normal(3), rng.standard_normal(3)
        pu, pv = prox(soft, 1.0, u), prox(soft, 1.0, v)
        d = pu - pv
        assert float(np.dot(d, d)) <= float(np.dot(d, u - v)) + 1e-10
    assert prox_optimality_check(soft, 1.0, rng.standard_normal(3), trials=60, seed=9) <= 1e-10


def test_infeasible_box_rejected():
    with pytest.raises(ValueError):
        proximal.box([1.0], [0.0])


def test_prox_validates_inputs():
    term = proximal.box([0.0], [1.0])
    with pytest.raises(ValueError):
        prox(term, 0.0, [0.5])
    with pytest.raises(ValueError):
        prox(term, 1.0, [0.5, 0.5])
