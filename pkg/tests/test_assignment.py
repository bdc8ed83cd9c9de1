import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import linear_sum_assignment

from reda.assignment import (
    AuctionConfig,
    AuctionNotConverged,
    check_assignment,
    objective_value,
    solve_auction,
    solve_brute_force,
    solve_exact,
)

B1 = np.array([[2, 3, 0], [0, 2, 3], [3, 0, 2]], dtype=float)
B2 = np.array([[0, 3, 0], [0, 0, 0.1], [0.1, 0, 0]])


@st.composite
def benefit_matrices(draw, max_n=5, max_m=7, integer=False):
    n = draw(st.integers(1, max_n))
    m = draw(st.integers(n, max_m))
    if integer:
        elems = st.integers(-3, 3).map(float)
    else:
        elems = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
    return draw(arrays(np.float64, (n, m), elements=elems))


def test_dictator_state_one():
    x = solve_exact(B1)
    assert x.tolist() == [1, 2, 0]
    assert objective_value(B1, x) == 9


def test_identity_and_zeros():
    assert solve_exact(np.eye(3)).tolist() == [0, 1, 2]
    assert objective_value(np.eye(3), solve_exact(np.eye(3))) == 3
    assert solve_exact(np.zeros((3, 3))).tolist() == [0, 1, 2]
    assert solve_exact(np.zeros((2, 5))).tolist() == [0, 1]


def test_brute_force_examples():
    assert objective_value(B2, solve_brute_force(B2)) == pytest.approx(3.2, abs=1e-12)
    assert solve_brute_force([[7.0]]).tolist() == [0]
    assert objective_value([[7.0]], [0]) == 7
    assert objective_value(np.zeros((2, 3)), solve_brute_force(np.zeros((2, 3)))) == 0


def test_objective_value_examples():
    assert objective_value(B1, [0, 1, 2]) == 6
    assert objective_value(B1, [1, 2, 0]) == 9
    beta = np.array([[0.0, 0.0, 5.0], [0.0, 0.0, -1.0]])
    assert objective_value(beta, [0, 1]) == 0
    with pytest.raises(IndexError):
        objective_value(B1, [0, 1, 3])


@pytest.mark.parametrize(
    "bad",
    [np.ones((3, 2)), np.array([[1.0, np.nan]]), np.array([[np.inf, 0.0]]), np.zeros((0, 3))],
)
def test_rejects_invalid(bad):
    with pytest.raises(ValueError):
        solve_exact(bad)
    with pytest.raises(ValueError):
        solve_auction(bad)


def test_brute_force_size_guard():
    with pytest.raises(ValueError):
        solve_brute_force(np.zeros((2, 9)))


@settings(max_examples=300, deadline=None)
@given(benefit_matrices(integer=True))
def test_lexicographic_tie_break_matches_brute_force(beta):
    # small integer entries make ties common
    assert solve_exact(beta).tolist() == solve_brute_force(beta).tolist()


@settings(max_examples=300, deadline=None)
@given(benefit_matrices())
def test_exact_matches_scipy_objective(beta):
    rows, cols = linear_sum_assignment(beta, maximize=True)
    x = solve_exact(beta)
    check_assignment(x, beta.shape[1])
    assert objective_value(beta, x) == pytest.approx(beta[rows, cols].sum(), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(benefit_matrices(), st.floats(0.01, 100))
def test_positive_scaling(beta, c):
    v = objective_value(beta, solve_exact(beta))
    vc = objective_value(beta * c, solve_exact(beta * c))
    assert vc == pytest.approx(c * v, rel=1e-9, abs=1e-9)


@settings(max_examples=150, deadline=None)
@given(benefit_matrices(), st.sampled_from([0.5, 0.1, 0.01]))
def test_auction_within_bound(beta, eps):
    x = solve_auction(beta, AuctionConfig(epsilon_bid=eps))
    check_assignment(x, beta.shape[1])
    best = objective_value(beta, solve_exact(beta))
    assert objective_value(beta, x) >= best - beta.shape[0] * eps - 1e-9


def test_auction_examples():
    assert objective_value(B1, solve_auction(B1, AuctionConfig(0.01))) >= 9 - 3 * 0.01
    assert objective_value(np.eye(3), solve_auction(np.eye(3), AuctionConfig(0.1))) >= 3 - 0.3
    assert objective_value(B2, solve_auction(B2, AuctionConfig(0.001))) >= 3.2 - 0.003


def test_auction_reports_non_convergence():
    beta = np.array([[1000.0, 1000.0], [1000.0, 1000.0 - 1e-9]])
    # three agents chasing two equally valuable tasks raise prices by about
    # epsilon per round, so a tiny increment needs far more than 100 rounds
    war = np.array([[100.0, 100.0, 0.0]] * 3)
    with pytest.raises(AuctionNotConverged):
        solve_auction(war, AuctionConfig(1e-3, max_rounds=100))
    assert objective_value(war, solve_auction(war, AuctionConfig(1.0))) >= 200 - 3.0
    assert solve_auction(beta, AuctionConfig(0.5)).shape == (2,)


def test_auction_config_validation():
    with pytest.raises(ValueError):
        AuctionConfig(epsilon_bid=0.0)


def test_deterministic():
    rng = np.random.default_rng(3)
    beta = rng.integers(0, 3, (6, 9)).astype(float)
    assert solve_exact(beta).tolist() == solve_exact(beta.copy()).tolist()
    assert solve_auction(beta).tolist() == solve_auction(beta.copy()).tolist()


def test_check_assignment():
    check_assignment(np.array([2, 0]), 3)
    with pytest.raises(ValueError):
        check_assignment(np.array([1, 1]), 3)
    with pytest.raises(ValueError):
        check_assignment(np.array([0, 3]), 3)


def test_batch_solver_matches_single():
    from reda.assignment import solve_exact_batch

    rng = np.random.default_rng(0)
    betas = rng.integers(-2, 3, (50, 4, 6)).astype(float)
    got = solve_exact_batch(betas)
    assert got.tolist() == [solve_exact(b).tolist() for b in betas]
    with pytest.raises(ValueError):
        solve_exact_batch(np.full((2, 2, 2), np.nan))
