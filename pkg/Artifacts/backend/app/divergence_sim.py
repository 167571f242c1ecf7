"""
Divergence between asynchronous aggregation and a centralized reference.

Learners hold convex quadratic losses F_k(w) = 1/2 ||A_k w - b_k||^2 and run
full-gradient steps. Every cycle each learner starts from the shared global
weight, runs tau_k steps, and the orchestrator takes the batch-weighted mean

    w = (1/d) * sum_k d_k * w_k

The auxiliary model restarts from the same global weight and takes
tau_m = max_k tau_k centralized steps on F(w) = (1/d) * sum_k d_k * F_k(w).
Learners that stop early hold their weight, which is where staleness shows up
as divergence ||w - w_aux||.

At every local step the growth of the divergence is bounded by

    ||w[l+1] - w_aux[l+1]|| <= ||w[l] - w_aux[l]|| + (eta*beta/d) * sum_k h_k

with h_k = d_k*||w_k[l] - w_aux[l]|| for learners still updating and
h_k = d_k*||grad F_k(w_aux[l])|| / beta for learners that have stopped.
`divergence_trace` counts the steps where this fails beyond float tolerance.
"""
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field

from app.core.exceptions import InvalidInputError, InvalidModel
from app.schemas import DomainModel, IntegerAllocation

logger = structlog.get_logger(__name__)

_BOUND_RTOL = 1e-12


class ConvexLearner(BaseModel):
    """A learner with a fixed quadratic loss and its current weight."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    matrix: np.ndarray = Field(..., description="A_k, rows x M")
    target: np.ndarray = Field(..., description="b_k, rows")
    weight: np.ndarray = Field(..., description="Current model w_k, M")
    batch_size: int = Field(1, ge=1)
    step_size: float = Field(..., gt=0)
    smoothness: float = Field(..., gt=0, description="beta_k, largest eigenvalue of A_k^T A_k")

    @property
    def dimension(self) -> int:
        return self.matrix.shape[1]


class AggregationState(DomainModel):
    global_weight: Tuple[float, ...]
    auxiliary_weight: Tuple[float, ...]
    cycle_index: int = 0
    update_counts: Tuple[int, ...] = ()


class DivergenceTrace(DomainModel):
    """Per-cycle measurements, all sequences of length `cycles`."""
    divergence: Tuple[float, ...]
    global_loss: Tuple[float, ...]
    bound_violations: Tuple[int, ...]
    max_staleness: int


def make_convex_learner(
    matrix: np.ndarray,
    target: np.ndarray,
    step_size: float,
    *,
    weight: Optional[np.ndarray] = None,
    batch_size: int = 1,
) -> ConvexLearner:
    """Build a learner, checking that A_k, b_k and w_k agree in dimension."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    target = np.atleast_1d(np.asarray(target, dtype=float))
    if target.shape != (matrix.shape[0],):
        raise InvalidModel(f"Target has shape {target.shape}, expected ({matrix.shape[0]},)")
    weight = np.zeros(matrix.shape[1]) if weight is None else np.atleast_1d(np.asarray(weight, dtype=float))
    if weight.shape != (matrix.shape[1],):
        raise InvalidModel(f"Weight has shape {weight.shape}, expected ({matrix.shape[1]},)")
    smoothness = float(np.linalg.eigvalsh(matrix.T @ matrix)[-1])
    if not np.isfinite(smoothness) or smoothness <= 0:
        raise InvalidModel(f"Loss matrix has smoothness {smoothness!r}; it must be positive and finite")
    return ConvexLearner(
        matrix=matrix,
        target=target,
        weight=weight,
        batch_size=batch_size,
        step_size=step_size,
        smoothness=smoothness,
    )


def local_loss(learner: ConvexLearner, w: np.ndarray) -> float:
    residual = learner.matrix @ w - learner.target
    return 0.5 * float(residual @ residual)


def local_gradient(learner: ConvexLearner, w: np.ndarray) -> np.ndarray:
    return learner.matrix.T @ (learner.matrix @ w - learner.target)


def local_sgd(learner: ConvexLearner, tau: int, start: Optional[np.ndarray] = None) -> np.ndarray:
    """Run `tau` full-gradient steps from `start` (default: the learner's weight)."""
    if tau < 1:
        raise InvalidInputError(f"Local training needs at least one update, got tau={tau}")
    if learner.step_size > 2.0 / learner.smoothness:
        logger.warning("divergent_step_size", step_size=learner.step_size, limit=2.0 / learner.smoothness)
    w = np.array(learner.weight if start is None else start, dtype=float)
    for _ in range(tau):
        w = w - learner.step_size * local_gradient(learner, w)
    return w


def _aggregation_weights(batches: Sequence[int]) -> np.ndarray:
    batches = np.asarray(batches, dtype=float)
    return batches / batches.sum()


def aggregate(weights: Sequence[np.ndarray], batches: Sequence[int]) -> np.ndarray:
    """Batch-weighted mean (1/d) * sum_k d_k * w_k."""
    if len(weights) != len(batches) or not weights:
        raise InvalidModel(f"Got {len(weights)} local models for {len(batches)} batches")
    dimensions = {np.shape(w) for w in weights}
    if len(dimensions) != 1:
        raise InvalidModel(f"Local models disagree in dimension: {sorted(dimensions)}")
    return _aggregation_weights(batches) @ np.vstack(weights)


def global_loss(learners: Sequence[ConvexLearner], batches: Sequence[int], w: np.ndarray) -> float:
    """F(w) = (1/d) * sum_k d_k * F_k(w)."""
    return float(_aggregation_weights(batches) @ np.array([local_loss(lr, w) for lr in learners]))


def global_gradient(learners: Sequence[ConvexLearner], batches: Sequence[int], w: np.ndarray) -> np.ndarray:
    return _aggregation_weights(batches) @ np.vstack([local_gradient(lr, w) for lr in learners])


def auxiliary_step(state: AggregationState, gradient: np.ndarray, step_size: float) -> AggregationState:
    """One centralized step of the auxiliary model: w_aux <- w_aux - eta * grad F(w_aux)."""
    current = np.asarray(state.auxiliary_weight, dtype=float)
    if np.shape(gradient) != current.shape:
        raise InvalidModel(f"Gradient has shape {np.shape(gradient)}, expected {current.shape}")
    updated = current - step_size * np.asarray(gradient, dtype=float)
    return state.model_copy(update={"auxiliary_weight": tuple(float(x) for x in updated)})


def synthetic_learners(
    rng: np.random.Generator,
    num_learners: int,
    dimension: int,
    rows: int,
    *,
    heterogeneity: float = 1.0,
    noise_std: float = 0.1,
    identical: bool = False,
    step_scale: float = 0.1,
) -> List[ConvexLearner]:
    """
    Random least-squares learners sharing one step size eta = step_scale / max_k beta_k.

    A_k has i.i.d. N(0, 1/rows) entries and b_k = A_k w*_k + noise, where the
    learner optima w*_k scatter around a common center with spread
    `heterogeneity`. With `identical` every learner gets the first learner's data.
    """
    center = rng.standard_normal(dimension)
    data = []
    for _ in range(num_learners):
        matrix = rng.standard_normal((rows, dimension)) / np.sqrt(rows)
        optimum = center + heterogeneity * rng.standard_normal(dimension)
        target = matrix @ optimum + noise_std * rng.standard_normal(rows)
        data.append((matrix, target))
    if identical:
        data = [data[0]] * num_learners
    # Step size is fixed after every beta_k is known.
    learners = [make_convex_learner(a, b, step_size=1.0) for a, b in data]
    step_size = step_scale / max(lr.smoothness for lr in learners)
    return [lr.model_copy(update={"step_size": step_size}) for lr in learners]


def divergence_trace(
    allocation: IntegerAllocation,
    learners: Sequence[ConvexLearner],
    cycles: int,
    *,
    initial_weight: Optional[np.ndarray] = None,
) -> DivergenceTrace:
    """
    Simulate `cycles` aggregation cycles under an allocation's update counts and batches.

    Records ||w - w_aux|| and F(w) after each aggregation, and the number of local
    steps in the cycle where the per-step divergence bound failed.
    """
    if len(learners) != len(allocation.taus):
        raise InvalidModel(f"Allocation covers {len(allocation.taus)} learners, got {len(learners)}")
    dimensions = {lr.dimension for lr in learners}
    step_sizes = {lr.step_size for lr in learners}
    if len(dimensions) != 1 or len(step_sizes) != 1:
        raise InvalidModel("Learners must share model dimension and step size")
    dimension, eta = dimensions.pop(), step_sizes.pop()

    taus = [int(t) for t in allocation.taus]
    batches = [int(d) for d in allocation.batches]
    learners = [lr.model_copy(update={"batch_size": d}) for lr, d in zip(learners, batches)]
    total = float(sum(batches))
    beta = max(lr.smoothness for lr in learners)
    tau_max = max(taus)
    if eta > 2.0 / beta:
        logger.warning("divergent_step_size", step_size=eta, limit=2.0 / beta)

    global_w = np.zeros(dimension) if initial_weight is None else np.asarray(initial_weight, dtype=float)
    divergences: List[float] = []
    losses: List[float] = []
    violations: List[int] = []
    for cycle in range(1, cycles + 1):
        state = AggregationState(
            global_weight=tuple(float(x) for x in global_w),
            auxiliary_weight=tuple(float(x) for x in global_w),
            cycle_index=cycle,
            update_counts=tuple(taus),
        )
        local = [global_w.copy() for _ in learners]
        auxiliary = global_w.copy()
        gap = 0.0
        cycle_violations = 0
        for step in range(tau_max):
            contributions = 0.0
            for k, learner in enumerate(learners):
                if step < taus[k]:
                    contributions += learner.batch_size * float(np.linalg.norm(local[k] - auxiliary))
                else:
                    contributions += (
                        learner.batch_size * float(np.linalg.norm(local_gradient(learner, auxiliary))) / beta
                    )
            local = [
                w - eta * local_gradient(lr, w) if step < taus[k] else w
                for k, (lr, w) in enumerate(zip(learners, local))
            ]
            state = auxiliary_step(state, global_gradient(learners, batches, auxiliary), eta)
            auxiliary = np.asarray(state.auxiliary_weight)
            next_gap = float(np.linalg.norm(aggregate(local, batches) - auxiliary))
            bound = gap + (eta * beta / total) * contributions
            if next_gap > bound * (1.0 + _BOUND_RTOL) + _BOUND_RTOL:
                cycle_violations += 1
            gap = next_gap
        global_w = aggregate(local, batches)
        divergences.append(float(np.linalg.norm(global_w - auxiliary)))
        losses.append(global_loss(learners, batches, global_w))
        violations.append(cycle_violations)

    logger.debug("divergence_trace_complete", cycles=cycles, final_divergence=divergences[-1] if divergences else 0.0)
    return DivergenceTrace(
        divergence=tuple(divergences),
        global_loss=tuple(losses),
        bound_violations=tuple(violations),
        max_staleness=tau_max - min(taus),
    )
