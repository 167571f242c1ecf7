"""Tests for aggregation, the auxiliary model and divergence traces."""

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings
from hypothesis import strategies as st

from app.core.exceptions import InvalidInputError, InvalidModel
from app.divergence_sim import (
    AggregationState,
    aggregate,
    auxiliary_step,
    divergence_trace,
    global_gradient,
    local_gradient,
    local_sgd,
    make_convex_learner,
    synthetic_learners,
)
from app.schemas import IntegerAllocation, Scheme
from app.staleness import pair_matrix, staleness_report


def _allocation(taus, batches) -> IntegerAllocation:
    return IntegerAllocation(
        scheme=Scheme.HA_ASYNC,
        taus=tuple(taus),
        batches=tuple(batches),
        times=tuple(0.0 for _ in taus),
        participating=tuple(True for _ in taus),
        report=staleness_report(taus, pair_matrix(len(taus))),
    )


def test_local_sgd_reaches_minimizer_in_one_step_for_identity() -> None:
    learner = make_convex_learner(np.eye(3), np.array([1.0, -2.0, 0.5]), step_size=1.0, weight=np.ones(3))
    assert local_sgd(learner, 1) == pytest.approx([1.0, -2.0, 0.5])


def test_local_sgd_scalar_contraction() -> None:
    learner = make_convex_learner([[1.0]], [0.0], step_size=0.5, weight=[1.0])
    assert local_sgd(learner, 2) == pytest.approx([0.25])


def test_local_sgd_requires_one_update() -> None:
    learner = make_convex_learner([[1.0]], [0.0], step_size=0.5)
    with pytest.raises(InvalidInputError):
        local_sgd(learner, 0)


def test_make_learner_rejects_mismatched_target() -> None:
    with pytest.raises(InvalidModel):
        make_convex_learner(np.eye(2), np.zeros(3), step_size=0.1)


def test_aggregate_is_batch_weighted_mean() -> None:
    assert aggregate([np.array([0.0]), np.array([2.0])], [5, 5]) == pytest.approx([1.0])
    assert aggregate([np.array([0.0]), np.array([4.0])], [3, 1]) == pytest.approx([1.0])
    assert aggregate([np.array([3.0, -1.0])], [7]) == pytest.approx([3.0, -1.0])


def test_aggregate_rejects_dimension_mismatch() -> None:
    with pytest.raises(InvalidModel):
        aggregate([np.zeros(2), np.zeros(3)], [1, 1])


def test_global_gradient_is_weighted_mean_of_local_gradients() -> None:
    rng = np.random.default_rng(3)
    learners = synthetic_learners(rng, 3, 4, 6)
    w = rng.standard_normal(4)
    expected = (2 * local_gradient(learners[0], w) + 1 * local_gradient(learners[1], w) + 5 * local_gradient(learners[2], w)) / 8
    assert global_gradient(learners, [2, 1, 5], w) == pytest.approx(expected)


def test_auxiliary_step_moves_against_gradient() -> None:
    state = AggregationState(global_weight=(0.0, 0.0), auxiliary_weight=(1.0, 1.0))
    updated = auxiliary_step(state, np.array([2.0, -4.0]), 0.25)
    assert updated.auxiliary_weight == pytest.approx((0.5, 2.0))
    assert updated.global_weight == (0.0, 0.0)


def test_single_learner_has_no_divergence() -> None:
    learners = synthetic_learners(np.random.default_rng(0), 1, 5, 8)
    trace = divergence_trace(_allocation([4], [10]), learners, cycles=6)
    assert max(trace.divergence) <= 1e-12


def test_identical_learners_without_staleness_do_not_diverge() -> None:
    learners = synthetic_learners(np.random.default_rng(1), 4, 8, 16, identical=True)
    trace = divergence_trace(_allocation([3, 3, 3, 3], [5, 5, 5, 5]), learners, cycles=10)
    assert len(trace.divergence) == 10
    assert max(trace.divergence) <= 1e-12
    assert trace.max_staleness == 0


def test_one_step_each_equals_centralized_step() -> None:
    learners = synthetic_learners(np.random.default_rng(2), 5, 8, 16, heterogeneity=2.0)
    trace = divergence_trace(_allocation([1] * 5, [3, 9, 1, 4, 7]), learners, cycles=8)
    assert max(trace.divergence) <= 1e-12


def test_global_loss_decreases_without_staleness() -> None:
    learners = synthetic_learners(np.random.default_rng(4), 3, 6, 12, identical=True)
    trace = divergence_trace(_allocation([2, 2, 2], [4, 4, 4]), learners, cycles=15)
    assert all(later <= earlier + 1e-12 for earlier, later in zip(trace.global_loss, trace.global_loss[1:]))


@pytest.mark.parametrize("seed", range(5))
def test_stale_learner_increases_divergence(seed: int) -> None:
    learners = synthetic_learners(np.random.default_rng(seed), 4, 8, 16, heterogeneity=1.0)
    batches = [10, 10, 10, 10]
    balanced = divergence_trace(_allocation([1, 1, 1, 1], batches), learners, cycles=10)
    stale = divergence_trace(_allocation([4, 4, 4, 1], batches), learners, cycles=10)
    assert all(s >= b for s, b in zip(stale.divergence, balanced.divergence))


def test_smoothness_bounds_gradient_lipschitz_ratio() -> None:
    rng = np.random.default_rng(5)
    for learner in synthetic_learners(rng, 4, 6, 10):
        for _ in range(20):
            x, y = rng.standard_normal(6), rng.standard_normal(6)
            ratio = np.linalg.norm(local_gradient(learner, x) - local_gradient(learner, y)) / np.linalg.norm(x - y)
            assert ratio <= learner.smoothness * (1 + 1e-12)


@hyp_settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=10_000),
    taus=st.lists(st.integers(min_value=0, max_value=6), min_size=1, max_size=5),
    step_scale=st.floats(min_value=0.05, max_value=1.0),
)
def test_divergence_bound_holds(seed: int, taus, step_scale: float) -> None:
    taus = [max(taus)] + taus[1:] if max(taus) else [1] + taus[1:]
    rng = np.random.default_rng(seed)
    learners = synthetic_learners(rng, len(taus), 5, 8, heterogeneity=1.5, step_scale=step_scale)
    batches = [int(b) for b in rng.integers(1, 20, size=len(taus))]
    trace = divergence_trace(_allocation(taus, batches), learners, cycles=5)
    assert sum(trace.bound_violations) == 0
