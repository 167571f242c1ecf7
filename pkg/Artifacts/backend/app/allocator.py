"""
Staleness-minimizing allocation of local updates and batches.

Problem: choose integer update counts tau_k and batches d_k so that every
learner fits its cycle time law into the global clock T, the batches cover the
dataset exactly and stay within [d_l, d_u], and the largest pairwise gap
|tau_k - tau_l| is as small as possible.

This module provides:
- the relaxed (continuous) solve by bisection on a common update count,
- KKT diagnostics: the closed forms for tau* and d*, the stationarity
  residual and a multiplier recovery by non-negative least squares,
- suggest-and-improve (SAI) integerization,
- an exhaustive oracle for small instances,
- the heterogeneity-unaware (HU) and synchronous (HA-sync) baselines.

Integer allocations satisfy t_k <= T: flooring only shortens a cycle.
"""
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy.optimize import nnls

from app.core.config import settings
from app.core.exceptions import (
    AllocationInvariantError,
    DegenerateMultiplier,
    EnumerationGuardError,
    InfeasibleLearner,
    InfeasibleProblem,
    InvalidMultipliers,
    NoCertificate,
)
from app.edge_model import cycle_time
from app.schemas import (
    AllocationProblem,
    ContinuousAllocation,
    IntegerAllocation,
    KKTCertificate,
    MultiplierSet,
    PairMultipliers,
    Scheme,
    TauInterval,
    TimeCoefficients,
)
from app.staleness import pair_matrix, staleness_report, u_vectors_direct

logger = structlog.get_logger(__name__)

# Relative guard for floors of quotients that are integral in exact arithmetic.
_FLOOR_GUARD = 1e-12


def _floor(value: float) -> int:
    return math.floor(value + _FLOOR_GUARD * max(1.0, abs(value)))


# --------------------------------------------------------------------------------
# Time-law inversions
# --------------------------------------------------------------------------------


def batch_for_tau(coeff: TimeCoefficients, budget: float, tau: float) -> float:
    """Batch that makes the cycle last exactly `budget`: (T - c0) / (c2*tau + c1)."""
    return (budget - coeff.c0) / (coeff.c2 * tau + coeff.c1)


def tau_for_batch(coeff: TimeCoefficients, budget: float, batch: float) -> float:
    """Update count that makes the cycle last exactly `budget`: (T - c0 - c1*d) / (c2*d)."""
    return (budget - coeff.c0 - coeff.c1 * batch) / (coeff.c2 * batch)


def batch_capacity(coeff: TimeCoefficients, budget: float, tau: int, upper: int) -> int:
    """Largest integer batch, capped at `upper`, that fits `tau` updates into `budget`."""
    return min(upper, _floor(batch_for_tau(coeff, budget, tau)))


def learner_tau_bounds(problem: AllocationProblem) -> List[TauInterval]:
    """
    Range of update counts each learner can run while its batch stays in [d_l, d_u].

    Raises InfeasibleLearner(k) when T <= c0 + c1*d_l for learner k.
    """
    budget = problem.cycle_budget_s
    lower_batch, upper_batch = problem.batch_lower, problem.batch_upper
    bounds = []
    for k, coeff in enumerate(problem.coefficients, start=1):
        head = budget - coeff.c0 - coeff.c1 * lower_batch
        if head <= 0:
            raise InfeasibleLearner(k)
        upper = head / (coeff.c2 * lower_batch)
        lower = max(0.0, tau_for_batch(coeff, budget, upper_batch))
        bounds.append(TauInterval(lower=lower, upper=upper))
    return bounds


# --------------------------------------------------------------------------------
# Relaxed solve
# --------------------------------------------------------------------------------


def _clamped_taus(bounds: Sequence[TauInterval], tau: float) -> List[float]:
    return [min(max(tau, b.lower), b.upper) for b in bounds]


def _total_batch(problem: AllocationProblem, bounds: Sequence[TauInterval], tau: float) -> float:
    budget = problem.cycle_budget_s
    return math.fsum(
        batch_for_tau(coeff, budget, t)
        for coeff, t in zip(problem.coefficients, _clamped_taus(bounds, tau))
    )


def relaxed_solve(
    problem: AllocationProblem,
    *,
    rtol: Optional[float] = None,
    xtol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> ContinuousAllocation:
    """
    Continuous optimum of the relaxed min-max problem.

    Every learner's time equality makes its batch a strictly decreasing function
    of its update count, so the spread is minimized by pushing all learners to a
    common tau, clamped to each learner's feasible interval. The common value is
    the root of g(tau) = sum_k d_k(clamp(tau)) - d, found by bisection.
    """
    rtol = settings.BISECTION_RTOL if rtol is None else rtol
    xtol = settings.BISECTION_XTOL if xtol is None else xtol
    max_iter = settings.BISECTION_MAX_ITER if max_iter is None else max_iter

    bounds = learner_tau_bounds(problem)
    target = float(problem.dataset_size)
    lo = min(b.lower for b in bounds)
    hi = max(b.upper for b in bounds)
    total_lo = _total_batch(problem, bounds, lo)
    total_hi = _total_batch(problem, bounds, hi)
    if total_lo < target * (1.0 - rtol) or total_hi > target * (1.0 + rtol):
        raise InfeasibleProblem(
            f"Batches between {total_hi:.6g} and {total_lo:.6g} samples cannot cover d={problem.dataset_size}"
        )

    if abs(total_lo - target) <= rtol * target:
        tau = lo
    elif abs(total_hi - target) <= rtol * target:
        tau = hi
    else:
        a, b = lo, hi
        tau = 0.5 * (a + b)
        width_tol = xtol * max(1.0, hi)
        for iteration in range(1, max_iter + 1):
            tau = 0.5 * (a + b)
            total = _total_batch(problem, bounds, tau)
            if abs(total - target) <= rtol * target:
                break
            if total > target:
                a = tau
            else:
                b = tau
            if b - a <= width_tol:
                tau = 0.5 * (a + b)
                break
        else:
            logger.warning("bisection_max_iter_reached", iterations=max_iter, bracket=(a, b))
        logger.debug("relaxed_solve_converged", iterations=iteration, tau=tau)

    taus = _clamped_taus(bounds, tau)
    budget = problem.cycle_budget_s
    batches = [batch_for_tau(c, budget, t) for c, t in zip(problem.coefficients, taus)]
    times = [cycle_time(c, t, d) for c, t, d in zip(problem.coefficients, taus, batches)]
    return ContinuousAllocation(
        taus=taus,
        batches=batches,
        slack_z=max(taus) - min(taus),
        times=times,
        common_tau=tau,
    )


# --------------------------------------------------------------------------------
# KKT diagnostics
# --------------------------------------------------------------------------------


def kkt_tau_star(mult: MultiplierSet, coeff: TimeCoefficients, k: int) -> float:
    """tau_k* = -(lambda_k*c1 + nu_k + nu'_k + omega) / (lambda_k*c2), k 1-based."""
    lam = mult.lambda_[k - 1]
    if lam == 0:
        raise DegenerateMultiplier(f"lambda_{k} is zero; tau_{k}* is undefined")
    return -(lam * coeff.c1 + mult.nu[k - 1] + mult.nu_prime[k - 1] + mult.omega) / (lam * coeff.c2)


def kkt_d_star(
    mult: MultiplierSet,
    coeff: TimeCoefficients,
    u: Sequence[float],
    u_prime: Sequence[float],
    k: int,
) -> float:
    """d_k* = -(u_k + u'_k + alpha_k) / (lambda_k*c2), k 1-based."""
    lam = mult.lambda_[k - 1]
    if lam == 0:
        raise DegenerateMultiplier(f"lambda_{k} is zero; d_{k}* is undefined")
    return -(u[k - 1] + u_prime[k - 1] + mult.alpha[k - 1]) / (lam * coeff.c2)


def stationarity_residuals(
    mult: MultiplierSet, cont: ContinuousAllocation, problem: AllocationProblem
) -> np.ndarray:
    """
    Residuals of the stationarity system, in order:
    K rows d-stationarity   lambda_k*(c2*tau_k + c1) - nu_k + nu'_k + omega
    K rows tau-stationarity lambda_k*c2*d_k + u_k + u'_k - alpha_k
    1 row z-stationarity    1 - sum(mu + mu')   (omitted for a single learner)
    """
    num_learners = problem.num_learners
    for name in ("lambda_", "alpha", "nu", "nu_prime"):
        if len(getattr(mult, name)) != num_learners:
            raise InvalidMultipliers(f"{name} must have {num_learners} entries")
    pm = pair_matrix(num_learners)
    u, u_prime = u_vectors_direct(pm, mult.pair)
    rows = []
    for k, coeff in enumerate(problem.coefficients):
        rows.append(
            mult.lambda_[k] * (coeff.c2 * cont.taus[k] + coeff.c1)
            - mult.nu[k] + mult.nu_prime[k] + mult.omega
        )
    for k, coeff in enumerate(problem.coefficients):
        rows.append(mult.lambda_[k] * coeff.c2 * cont.batches[k] + u[k] + u_prime[k] - mult.alpha[k])
    if pm.size:
        rows.append(1.0 - math.fsum(mult.pair.mu) - math.fsum(mult.pair.mu_prime))
    return np.asarray(rows, dtype=float)


def stationarity_residual(mult: MultiplierSet, cont: ContinuousAllocation, problem: AllocationProblem) -> float:
    """Largest absolute stationarity residual."""
    residuals = stationarity_residuals(mult, cont, problem)
    return float(np.max(np.abs(residuals))) if residuals.size else 0.0


def recover_multipliers(
    cont: ContinuousAllocation,
    problem: AllocationProblem,
    *,
    free_bound_multipliers: bool = False,
    tolerance: Optional[float] = None,
    active_tol: Optional[float] = None,
) -> KKTCertificate:
    """
    Fit Lagrange multipliers to a continuous solution.

    Pair multipliers are restricted to active staleness constraints. lambda and
    omega are free; nu, nu' and alpha are fixed at zero unless
    `free_bound_multipliers` is set, in which case they are fitted for learners
    whose batch or update count sits on a bound. The fit is a non-negative
    least-squares solve of the stationarity system with lambda and omega split
    into positive and negative parts.

    Raises NoCertificate when the best fit leaves a residual above `tolerance`.
    """
    tolerance = settings.KKT_TOLERANCE if tolerance is None else tolerance
    active_tol = settings.ACTIVE_CONSTRAINT_TOL if active_tol is None else active_tol

    num_learners = problem.num_learners
    pm = pair_matrix(num_learners)
    taus, batches, z = cont.taus, cont.batches, cont.slack_z
    num_rows = 2 * num_learners + (1 if pm.size else 0)
    z_row = 2 * num_learners

    columns: List[np.ndarray] = []
    labels: List[Tuple[str, int, float]] = []

    def add_column(entries: dict, label: Tuple[str, int, float]) -> None:
        col = np.zeros(num_rows)
        for row, value in entries.items():
            col[row] = value
        columns.append(col)
        labels.append(label)

    for k, coeff in enumerate(problem.coefficients):
        d_row, t_row = k, num_learners + k
        for sign in (1.0, -1.0):
            add_column(
                {d_row: sign * (coeff.c2 * taus[k] + coeff.c1), t_row: sign * coeff.c2 * batches[k]},
                ("lambda", k, sign),
            )
    for sign in (1.0, -1.0):
        add_column({k: sign for k in range(num_learners)}, ("omega", 0, sign))

    for n, (first, second) in enumerate(pm.pairs):
        gap = taus[first - 1] - taus[second - 1]
        first_row, second_row = num_learners + first - 1, num_learners + second - 1
        if gap >= z - active_tol:
            add_column({first_row: 1.0, second_row: -1.0, z_row: 1.0}, ("mu", n, 1.0))
        if -gap >= z - active_tol:
            add_column({first_row: -1.0, second_row: 1.0, z_row: 1.0}, ("mu_prime", n, 1.0))

    if free_bound_multipliers:
        for k in range(num_learners):
            if batches[k] <= problem.batch_lower * (1.0 + active_tol):
                add_column({k: -1.0}, ("nu", k, 1.0))
            if batches[k] >= problem.batch_upper * (1.0 - active_tol):
                add_column({k: 1.0}, ("nu_prime", k, 1.0))
            if taus[k] <= active_tol:
                add_column({num_learners + k: -1.0}, ("alpha", k, 1.0))

    rhs = np.zeros(num_rows)
    if pm.size:
        rhs[z_row] = 1.0
    solution, _ = nnls(np.column_stack(columns), rhs)

    lam = [0.0] * num_learners
    alpha = [0.0] * num_learners
    nu = [0.0] * num_learners
    nu_prime = [0.0] * num_learners
    mu = [0.0] * pm.size
    mu_prime = [0.0] * pm.size
    omega = 0.0
    for value, (name, index, sign) in zip(solution, labels):
        value = float(value)
        if name == "lambda":
            lam[index] += sign * value
        elif name == "omega":
            omega += sign * value
        elif name == "mu":
            mu[index] = value
        elif name == "mu_prime":
            mu_prime[index] = value
        elif name == "nu":
            nu[index] = value
        elif name == "nu_prime":
            nu_prime[index] = value
        else:
            alpha[index] = value

    multipliers = MultiplierSet(
        lambda_=lam,
        alpha=alpha,
        omega=omega,
        nu=nu,
        nu_prime=nu_prime,
        pair=PairMultipliers(mu=mu, mu_prime=mu_prime),
    )
    residual = stationarity_residual(multipliers, cont, problem)
    if residual > tolerance:
        raise NoCertificate(residual)
    return KKTCertificate(
        multipliers=multipliers,
        residual=residual,
        pair_multiplier_sum=math.fsum(mu) + math.fsum(mu_prime),
    )


# --------------------------------------------------------------------------------
# Integer allocations
# --------------------------------------------------------------------------------


def _assign_batches(caps: Sequence[int], taus: Sequence[int], problem: AllocationProblem) -> List[int]:
    """Start every learner at d_l and hand out the rest by decreasing tau (ties by id) up to each cap."""
    batches = [problem.batch_lower] * len(caps)
    remaining = problem.dataset_size - problem.batch_lower * len(caps)
    for k in sorted(range(len(caps)), key=lambda i: (-taus[i], i)):
        extra = min(remaining, caps[k] - problem.batch_lower)
        batches[k] += extra
        remaining -= extra
    if remaining > 0:
        raise InfeasibleProblem(f"Batch caps leave {remaining} samples unassigned")
    return batches


def _build_allocation(
    scheme: Scheme,
    problem: AllocationProblem,
    taus: Sequence[int],
    batches: Sequence[int],
    participating: Optional[Sequence[bool]] = None,
) -> IntegerAllocation:
    taus = [int(t) for t in taus]
    batches = [int(d) for d in batches]
    times = [cycle_time(c, t, d) for c, t, d in zip(problem.coefficients, taus, batches)]
    return IntegerAllocation(
        scheme=scheme,
        taus=taus,
        batches=batches,
        times=times,
        participating=participating if participating is not None else [True] * len(taus),
        report=staleness_report(taus, pair_matrix(problem.num_learners)),
    )


def _level_surplus(batches: List[int], lower: int, excess: int) -> List[int]:
    """
    Remove `excess` samples by repeatedly taking one from the largest slack
    d_k - d_l (ties to the lowest index), computed in one pass as a water level.
    """
    slacks = [d - lower for d in batches]
    level_lo, level_hi = 0, max(slacks)
    # Smallest level L whose removal sum(max(0, s - L)) does not exceed the excess.
    while level_lo < level_hi:
        mid = (level_lo + level_hi) // 2
        if sum(max(0, s - mid) for s in slacks) <= excess:
            level_hi = mid
        else:
            level_lo = mid + 1
    level = level_lo
    leftover = excess - sum(max(0, s - level) for s in slacks)
    result = []
    for s in slacks:
        s = min(s, level)
        if leftover > 0 and s == level and level > 0:
            s -= 1
            leftover -= 1
        result.append(lower + s)
    return result


def integerize_sai(cont: ContinuousAllocation, problem: AllocationProblem) -> IntegerAllocation:
    """
    Suggest-and-improve integerization of a relaxed solution.

    Suggest: floor every tau (at least 1) and give each learner its batch cap.
    Improve: (a) while the caps cannot cover d, decrement the largest tau >= 2,
    preferring the learner whose cap grows most; (b) remove any surplus from
    the learners with the most slack above d_l; (c) raise lagging learners
    toward the largest tau while their cycle still fits in T; (d) lower the
    leaders until every tau equals the smallest one.
    """
    coeffs = problem.coefficients
    budget, upper, lower = problem.cycle_budget_s, problem.batch_upper, problem.batch_lower

    taus = []
    for k, (coeff, tau) in enumerate(zip(coeffs, cont.taus), start=1):
        nearest = round(tau)
        suggested = nearest if abs(tau - nearest) <= 1e-9 * max(1.0, tau) else math.floor(tau)
        suggested = max(1, int(suggested))
        while suggested > 1 and batch_capacity(coeff, budget, suggested, upper) < lower:
            suggested -= 1
        if batch_capacity(coeff, budget, suggested, upper) < lower:
            raise InfeasibleLearner(k)
        taus.append(suggested)
    caps = [batch_capacity(c, budget, t, upper) for c, t in zip(coeffs, taus)]

    decrements = 0
    while sum(caps) < problem.dataset_size:
        candidates = [k for k in range(len(taus)) if taus[k] >= 2]
        if not candidates:
            raise InfeasibleProblem(
                f"Even one update per learner leaves caps summing to {sum(caps)} < d={problem.dataset_size}"
            )
        largest = max(taus[k] for k in candidates)
        k = max(
            (k for k in candidates if taus[k] == largest),
            key=lambda i: (batch_capacity(coeffs[i], budget, taus[i] - 1, upper) - caps[i], -i),
        )
        taus[k] -= 1
        caps[k] = batch_capacity(coeffs[k], budget, taus[k], upper)
        decrements += 1

    batches = list(caps)
    excess = sum(batches) - problem.dataset_size
    if excess > 0:
        batches = _level_surplus(batches, lower, excess)

    raises = 0
    while True:
        top = max(taus)
        lagging = [
            k for k in range(len(taus))
            if taus[k] < top and cycle_time(coeffs[k], taus[k] + 1, batches[k]) <= budget
        ]
        if not lagging:
            break
        k = min(lagging, key=lambda i: (taus[i], i))
        taus[k] += 1
        raises += 1

    # Fewer updates on a fixed batch never lengthen a cycle.
    floor_tau = min(taus)
    lowered = sum(t - floor_tau for t in taus)
    taus = [floor_tau] * len(taus)

    logger.info(
        "sai_complete", decrements=decrements, surplus_removed=max(excess, 0), raises=raises, lowered=lowered
    )
    return _build_allocation(Scheme.HA_ASYNC, problem, taus, batches)


def brute_force_oracle(
    problem: AllocationProblem,
    tau_cap: int,
    *,
    max_learners: Optional[int] = None,
    max_tau_cap: Optional[int] = None,
) -> IntegerAllocation:
    """
    Exhaustive search over tau in {1..tau_cap}^K.

    A vector is feasible when every cap is at least d_l and the caps cover d.
    The winner minimizes (max staleness, average staleness) and then maximizes
    sum tau_k*d_k; remaining ties go to the first vector in lexicographic order.
    """
    max_learners = settings.ORACLE_MAX_LEARNERS if max_learners is None else max_learners
    max_tau_cap = settings.ORACLE_MAX_TAU_CAP if max_tau_cap is None else max_tau_cap
    num_learners = problem.num_learners
    if num_learners > max_learners or not 1 <= tau_cap <= max_tau_cap:
        raise EnumerationGuardError(
            f"Oracle enumerates at most {max_learners} learners and tau_cap <= {max_tau_cap} "
            f"(got K={num_learners}, tau_cap={tau_cap})"
        )

    budget, upper, lower = problem.cycle_budget_s, problem.batch_upper, problem.batch_lower
    caps = np.array(
        [[batch_capacity(c, budget, t, upper) for t in range(1, tau_cap + 1)] for c in problem.coefficients],
        dtype=np.int64,
    )
    learner_idx = np.arange(num_learners)
    gap_weights = 2 * np.arange(num_learners) - num_learners + 1
    if num_learners > 1:
        rest = np.indices((tau_cap,) * (num_learners - 1)).reshape(num_learners - 1, -1).T
    else:
        rest = np.zeros((1, 0), dtype=np.int64)

    # Keys order by (spread, sum of pairwise gaps); the gap sum is below tau_cap * N.
    key_scale = tau_cap * max(1, num_learners * (num_learners - 1) // 2) + 1
    best_key: Optional[int] = None
    candidates: List[np.ndarray] = []
    for first in range(tau_cap):
        idx = np.column_stack([np.full(len(rest), first, dtype=np.int64), rest])
        cap_rows = caps[learner_idx, idx]
        feasible = (cap_rows >= lower).all(axis=1) & (cap_rows.sum(axis=1) >= problem.dataset_size)
        if not feasible.any():
            continue
        taus = idx[feasible] + 1
        spread = taus.max(axis=1) - taus.min(axis=1)
        gap_sum = np.sort(taus, axis=1) @ gap_weights
        keys = spread * key_scale + gap_sum
        chunk_best = int(keys.min())
        if best_key is None or chunk_best < best_key:
            best_key, candidates = chunk_best, [taus[keys == chunk_best]]
        elif chunk_best == best_key:
            candidates.append(taus[keys == chunk_best])

    if best_key is None:
        raise InfeasibleProblem(f"No update vector in {{1..{tau_cap}}}^{num_learners} is feasible")

    best_taus: Optional[List[int]] = None
    best_batches: List[int] = []
    best_work = -1
    for row in np.concatenate(candidates):
        taus = [int(t) for t in row]
        row_caps = [int(caps[k, t - 1]) for k, t in enumerate(taus)]
        batches = _assign_batches(row_caps, taus, problem)
        work = sum(t * d for t, d in zip(taus, batches))
        if work > best_work:
            best_taus, best_batches, best_work = taus, batches, work
    logger.debug("oracle_complete", optimum_key=best_key, candidates=sum(len(c) for c in candidates))
    return _build_allocation(Scheme.HA_ASYNC_ORACLE, problem, best_taus, best_batches)


def hu_equal_allocation(problem: AllocationProblem) -> IntegerAllocation:
    """
    Heterogeneity-unaware baseline: equal batches, each learner runs as many
    updates as fit. Learners that fit none are reported as non-participating.
    """
    num_learners = problem.num_learners
    base, remainder = divmod(problem.dataset_size, num_learners)
    batches = [base + 1 if k < remainder else base for k in range(num_learners)]
    taus = [
        max(0, _floor(tau_for_batch(c, problem.cycle_budget_s, d)))
        for c, d in zip(problem.coefficients, batches)
    ]
    participating = [t >= 1 for t in taus]
    idle = [k + 1 for k, p in enumerate(participating) if not p]
    if idle:
        logger.info("hu_non_contributing_learners", learners=idle)
    return _build_allocation(Scheme.HU_ASYNC, problem, taus, batches, participating)


def synchronous_baseline(problem: AllocationProblem) -> IntegerAllocation:
    """Largest common update count whose batch caps still cover the dataset."""
    coeffs = problem.coefficients
    budget, upper, lower = problem.cycle_budget_s, problem.batch_upper, problem.batch_lower

    def caps_for(tau: int) -> List[int]:
        return [batch_capacity(c, budget, tau, upper) for c in coeffs]

    def feasible(tau: int) -> bool:
        caps = caps_for(tau)
        return min(caps) >= lower and sum(caps) >= problem.dataset_size

    if not feasible(1):
        raise InfeasibleProblem("A single synchronized update does not fit the cycle budget")
    bounds = learner_tau_bounds(problem)
    lo, hi = 1, max(1, _floor(max(b.upper for b in bounds)) + 1)
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if feasible(mid):
            lo = mid
        else:
            hi = mid - 1
    taus = [lo] * len(coeffs)
    return _build_allocation(Scheme.HA_SYNC, problem, taus, _assign_batches(caps_for(lo), taus, problem))


def validate_allocation(
    allocation: IntegerAllocation, problem: AllocationProblem, *, rtol: float = 1e-9
) -> IntegerAllocation:
    """Re-check an integer allocation against its problem; returns it unchanged when valid."""
    num_learners = problem.num_learners
    if not len(allocation.taus) == len(allocation.batches) == len(allocation.participating) == num_learners:
        raise AllocationInvariantError(f"Allocation does not cover {num_learners} learners")
    if sum(allocation.batches) != problem.dataset_size:
        raise AllocationInvariantError(
            f"Batches sum to {sum(allocation.batches)}, expected {problem.dataset_size}"
        )
    budget = problem.cycle_budget_s
    for k, (coeff, tau, batch, active) in enumerate(
        zip(problem.coefficients, allocation.taus, allocation.batches, allocation.participating), start=1
    ):
        if not problem.batch_lower <= batch <= problem.batch_upper:
            raise AllocationInvariantError(f"Learner {k} batch {batch} is outside its bounds")
        if not active:
            continue
        if tau < 1:
            raise AllocationInvariantError(f"Participating learner {k} performs no update")
        if cycle_time(coeff, tau, batch) > budget * (1.0 + rtol):
            raise AllocationInvariantError(f"Learner {k} overruns the cycle budget")
    return allocation
