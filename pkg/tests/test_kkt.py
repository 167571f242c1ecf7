"""Tests for the KKT closed forms, stationarity residuals and multiplier recovery."""

import numpy as np
import pytest

from app.allocator import (
    kkt_d_star,
    kkt_tau_star,
    recover_multipliers,
    relaxed_solve,
    stationarity_residual,
    stationarity_residuals,
)
from app.core.exceptions import DegenerateMultiplier, InvalidMultipliers, NoCertificate
from app.schemas import MultiplierSet, PairMultipliers
from app.staleness import pair_count, pair_matrix, u_vectors_direct

from tests.conftest import make_problem, target_tau_problem


def _d_stationarity_family(cont, problem, omega: float) -> MultiplierSet:
    """lambda_k = -omega / (c2*tau_k + c1) with all bound multipliers at zero."""
    k = problem.num_learners
    n = pair_count(k)
    return MultiplierSet(
        lambda_=tuple(-omega / (c.c2 * t + c.c1) for c, t in zip(problem.coefficients, cont.taus)),
        alpha=(0.0,) * k,
        omega=omega,
        nu=(0.0,) * k,
        nu_prime=(0.0,) * k,
        pair=PairMultipliers(mu=(0.0,) * n, mu_prime=(0.0,) * n),
    )


@pytest.mark.parametrize("seed", range(5))
def test_tau_star_reproduces_relaxed_tau(seed: int) -> None:
    problem, _ = target_tau_problem(np.random.default_rng(seed), 3, 120)
    cont = relaxed_solve(problem)
    mult = _d_stationarity_family(cont, problem, omega=-0.7)
    for k, coeff in enumerate(problem.coefficients, start=1):
        assert kkt_tau_star(mult, coeff, k) == pytest.approx(cont.taus[k - 1], rel=1e-12)


def test_d_star_reproduces_relaxed_batch(heterogeneous_problem) -> None:
    cont = relaxed_solve(heterogeneous_problem)
    pair = PairMultipliers(mu=(0.8,), mu_prime=(0.2,))
    u, u_prime = u_vectors_direct(pair_matrix(2), pair)
    lam = tuple(
        -(u[k] + u_prime[k]) / (c.c2 * cont.batches[k]) for k, c in enumerate(heterogeneous_problem.coefficients)
    )
    mult = MultiplierSet(lambda_=lam, alpha=(0.0, 0.0), omega=0.0, nu=(0.0, 0.0), nu_prime=(0.0, 0.0), pair=pair)
    for k, coeff in enumerate(heterogeneous_problem.coefficients, start=1):
        assert kkt_d_star(mult, coeff, u, u_prime, k) == pytest.approx(cont.batches[k - 1], rel=1e-12)


def test_closed_forms_reject_zero_lambda(homogeneous_problem) -> None:
    cont = relaxed_solve(homogeneous_problem)
    mult = _d_stationarity_family(cont, homogeneous_problem, omega=0.0)
    coeff = homogeneous_problem.coefficients[0]
    with pytest.raises(DegenerateMultiplier):
        kkt_tau_star(mult, coeff, 1)
    with pytest.raises(DegenerateMultiplier):
        kkt_d_star(mult, coeff, (0.0, 0.0), (0.0, 0.0), 1)


def test_residual_rows_and_sign_convention(homogeneous_problem) -> None:
    cont = relaxed_solve(homogeneous_problem)
    mult = MultiplierSet(
        lambda_=(0.0, 0.0),
        alpha=(0.5, 0.0),
        omega=0.0,
        nu=(1.0, 0.0),
        nu_prime=(0.0, 2.0),
        pair=PairMultipliers(mu=(0.5,), mu_prime=(0.5,)),
    )
    residuals = stationarity_residuals(mult, cont, homogeneous_problem)
    assert residuals.shape == (5,)
    assert residuals == pytest.approx([-1.0, 2.0, -0.5, 0.0, 0.0])


def test_residual_rejects_short_multipliers(homogeneous_problem) -> None:
    cont = relaxed_solve(homogeneous_problem)
    mult = MultiplierSet(
        lambda_=(0.0,),
        alpha=(0.0, 0.0),
        omega=0.0,
        nu=(0.0, 0.0),
        nu_prime=(0.0, 0.0),
        pair=PairMultipliers(mu=(0.5,), mu_prime=(0.5,)),
    )
    with pytest.raises(InvalidMultipliers):
        stationarity_residual(mult, cont, homogeneous_problem)


def test_certificate_on_homogeneous_toy(homogeneous_problem) -> None:
    certificate = recover_multipliers(relaxed_solve(homogeneous_problem), homogeneous_problem)
    assert certificate.residual <= 1e-6
    assert certificate.pair_multiplier_sum == pytest.approx(1.0, abs=1e-9)
    assert certificate.multipliers.omega == pytest.approx(0.0, abs=1e-9)


def test_certificate_single_learner_has_no_pair_row() -> None:
    problem = make_problem([0.5], [0.1], [1.0], budget=11.0, dataset_size=4)
    certificate = recover_multipliers(relaxed_solve(problem), problem)
    assert certificate.residual == pytest.approx(0.0, abs=1e-12)
    assert certificate.pair_multiplier_sum == 0.0


def test_no_certificate_when_tolerance_is_impossible(homogeneous_problem) -> None:
    cont = relaxed_solve(homogeneous_problem)
    # Spread the update counts so no staleness constraint is active.
    skewed = cont.model_copy(update={"taus": (1.5, 2.5), "slack_z": 5.0})
    with pytest.raises(NoCertificate) as excinfo:
        recover_multipliers(skewed, homogeneous_problem)
    assert excinfo.value.residual > 1e-6
    assert excinfo.value.exit_code == 2


def test_clamped_solution_needs_bound_multipliers() -> None:
    problem = make_problem([1.0, 3.0], [0.0, 0.0], [0.0, 0.0], budget=12.0, dataset_size=10, upper=6)
    cont = relaxed_solve(problem)
    certificate = recover_multipliers(cont, problem, free_bound_multipliers=True)
    assert certificate.residual <= 1e-6
    assert certificate.multipliers.nu_prime[0] >= 0.0


def test_clamped_solution_has_no_certificate_with_fixed_bounds() -> None:
    problem = make_problem([1.0, 3.0], [0.0, 0.0], [0.0, 0.0], budget=12.0, dataset_size=10, upper=6)
    cont = relaxed_solve(problem)
    assert cont.taus == pytest.approx((2.0, 1.0))
    with pytest.raises(NoCertificate) as excinfo:
        recover_multipliers(cont, problem)
    assert excinfo.value.residual > 1e-6
