"""
Experiment harness: config files, scenario generation, sweeps and simulations.

Config files are flat `key = value` text with dotted keys, read with
python-dotenv and validated against `RunConfig`. Scenarios follow the edge
environment defaults (50 m radius, 5 MHz per learner, 23 dBm, -174 dBm/Hz,
half the learners at 2.4 GHz and half at 700 MHz, MNIST task profile).
"""
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import structlog
import ujson
from dotenv import dotenv_values
from pydantic import ValidationError

from app import allocator
from app.core.config import settings
from app.core.exceptions import AppException, ConfigError, InfeasibleError
from app.divergence_sim import divergence_trace, synthetic_learners
from app.edge_model import achievable_rate, build_learner, component_times, cycle_time, time_coefficients
from app.schemas import (
    AllocationProblem,
    ClockMixing,
    IntegerAllocation,
    OracleComparisonRow,
    ProfileRow,
    RunConfig,
    Scenario,
    ScenarioSpec,
    Scheme,
    SweepResult,
    SweepRow,
    TimeCoefficients,
    TraceRow,
)

logger = structlog.get_logger(__name__)

ORACLE_SKIPPED = "skipped: enumeration guard"


# --------------------------------------------------------------------------------
# Config loading
# --------------------------------------------------------------------------------


def _decode_value(raw: str) -> Any:
    try:
        return ujson.loads(raw)
    except ValueError:
        return raw


def _fold_dotted(flat: Dict[str, Any]) -> Dict[str, Any]:
    nested: Dict[str, Any] = {}
    for key, value in flat.items():
        *sections, leaf = key.split(".")
        node = nested
        for depth, section in enumerate(sections):
            node = node.setdefault(section, {})
            if not isinstance(node, dict):
                raise ConfigError("key is both a value and a section", field_path=".".join(sections[: depth + 1]))
        if isinstance(node.get(leaf), dict):
            raise ConfigError("key is both a value and a section", field_path=key)
        node[leaf] = value
    return nested


def parse_config(data: Dict[str, Any]) -> RunConfig:
    """Validate a nested config mapping; errors name the offending dotted key."""
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        error = exc.errors()[0]
        path = ".".join(str(part) for part in error["loc"])
        raise ConfigError(error["msg"], field_path=path or None) from exc


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Read an experiment config file and apply dotted-key overrides.

    With no path the defaults (the default edge scenario) are returned, still subject
    to the overrides.
    """
    flat: Dict[str, Any] = {}
    if path is not None:
        config_path = Path(path)
        if not config_path.is_file():
            raise ConfigError(f"config file not found: {path}")
        for key, raw in dotenv_values(config_path).items():
            if raw is None:
                raise ConfigError("missing value", field_path=key)
            flat[key] = _decode_value(raw)
    flat.update(overrides or {})
    config = parse_config(_fold_dotted(flat))
    logger.debug("config_loaded", path=path, keys=sorted(flat))
    return config


# --------------------------------------------------------------------------------
# Scenarios
# --------------------------------------------------------------------------------


def _clock_rates(spec: ScenarioSpec, rng: np.random.Generator) -> List[float]:
    pool = spec.clock_pool_hz
    if spec.clock_mixing == ClockMixing.RANDOM:
        return [float(pool[i]) for i in rng.integers(0, len(pool), size=spec.num_learners)]
    # Contiguous blocks, earlier pool entries first: two rates give ceil(K/2) fast learners.
    return [float(pool[(k * len(pool)) // spec.num_learners]) for k in range(spec.num_learners)]


def generate_scenario(spec: ScenarioSpec) -> Scenario:
    """
    Build the allocation problem for one scenario, deterministically from its seed.

    Explicit `coefficients` bypass the radio and compute model entirely.
    """
    dataset_size = spec.task.dataset_size
    batch_upper = spec.batch_upper if spec.batch_upper is not None else dataset_size

    if spec.coefficients is not None:
        explicit = spec.coefficients
        coefficients = tuple(
            TimeCoefficients(c2=c2, c1=c1, c0=c0) for c2, c1, c0 in zip(explicit.c2, explicit.c1, explicit.c0)
        )
        learners: Tuple = ()
    else:
        rng = np.random.default_rng(spec.seed)
        distances = spec.radius_m * (1.0 - rng.random(spec.num_learners))
        clocks = _clock_rates(spec, rng)
        if spec.num_learners * spec.node_bandwidth_hz > spec.system_bandwidth_hz:
            logger.warning(
                "system_bandwidth_oversubscribed",
                learners=spec.num_learners,
                node_bandwidth_hz=spec.node_bandwidth_hz,
                system_bandwidth_hz=spec.system_bandwidth_hz,
            )
        learners = tuple(
            build_learner(
                k,
                float(distance),
                clock,
                spec.node_bandwidth_hz,
                spec.tx_power_dbm,
                spec.noise_psd_dbm_hz,
                spec.mode,
            )
            for k, (distance, clock) in enumerate(zip(distances, clocks), start=1)
        )
        coefficients = tuple(time_coefficients(learner, spec.task) for learner in learners)

    problem = AllocationProblem(
        coefficients=coefficients,
        cycle_budget_s=spec.cycle_budget_s,
        dataset_size=dataset_size,
        batch_lower=spec.batch_lower,
        batch_upper=batch_upper,
    )
    return Scenario(problem=problem, learners=learners)


def default_oracle_cap(problem: AllocationProblem) -> int:
    """Smallest cap covering every learner's largest update count, within the oracle guard."""
    largest = max(bound.upper for bound in allocator.learner_tau_bounds(problem))
    return max(1, min(settings.ORACLE_MAX_TAU_CAP, math.ceil(largest)))


def run_scheme(problem: AllocationProblem, scheme: Scheme, *, oracle_tau_cap: Optional[int] = None) -> IntegerAllocation:
    """Allocate with one scheme and re-validate the result."""
    if scheme == Scheme.HA_ASYNC:
        allocation = allocator.integerize_sai(allocator.relaxed_solve(problem), problem)
    elif scheme == Scheme.HA_ASYNC_ORACLE:
        cap = oracle_tau_cap if oracle_tau_cap is not None else default_oracle_cap(problem)
        allocation = allocator.brute_force_oracle(problem, cap)
    elif scheme == Scheme.HU_ASYNC:
        allocation = allocator.hu_equal_allocation(problem)
    else:
        allocation = allocator.synchronous_baseline(problem)
    return allocator.validate_allocation(allocation, problem)


# --------------------------------------------------------------------------------
# Sweeps
# --------------------------------------------------------------------------------


def _status(exc: AppException) -> str:
    return f"{type(exc).__name__}: {exc.detail}"


def _instance_rows(
    spec: ScenarioSpec, schemes: Sequence[Scheme], oracle_tau_cap: Optional[int]
) -> List[SweepRow]:
    base = {"num_learners": spec.num_learners, "cycle_budget_s": spec.cycle_budget_s, "seed": spec.seed}
    try:
        problem = generate_scenario(spec).problem
    except AppException as exc:
        logger.warning("sweep_cell_failed", error=_status(exc), **base)
        return [SweepRow(scheme=scheme, status=_status(exc), **base) for scheme in schemes]
    base["num_learners"] = problem.num_learners

    rows = []
    for scheme in schemes:
        if scheme == Scheme.HA_ASYNC_ORACLE and problem.num_learners > settings.ORACLE_MAX_LEARNERS:
            rows.append(SweepRow(scheme=scheme, status=ORACLE_SKIPPED, **base))
            continue
        try:
            allocation = run_scheme(problem, scheme, oracle_tau_cap=oracle_tau_cap)
        except AppException as exc:
            logger.warning("sweep_cell_failed", scheme=scheme.value, error=_status(exc), **base)
            rows.append(SweepRow(scheme=scheme, status=_status(exc), **base))
            continue
        rows.append(
            SweepRow(
                scheme=scheme,
                max_staleness=allocation.report.max_staleness,
                avg_staleness=allocation.report.avg_staleness,
                taus=allocation.taus,
                batches=allocation.batches,
                **base,
            )
        )
    return rows


def _sweep_task(args: Tuple[ScenarioSpec, Tuple[Scheme, ...], Optional[int]]) -> List[SweepRow]:
    return _instance_rows(*args)


def sweep_cells(config: RunConfig) -> List[ScenarioSpec]:
    """Scenario per grid instance, ordered K x T x seed."""
    scenario_fields = set(ScenarioSpec.model_fields)
    base = config.model_dump(include=scenario_fields)
    return [
        ScenarioSpec.model_validate({**base, "num_learners": k, "cycle_budget_s": budget, "seed": seed})
        for k in config.sweep.num_learners
        for budget in config.sweep.cycle_budgets
        for seed in config.sweep.seeds
    ]


def run_sweep(config: RunConfig, *, workers: Optional[int] = None) -> SweepResult:
    """
    One row per (instance, scheme) in grid order K x T x seed x scheme.

    Per-cell errors are recorded as the row status; the sweep never aborts.
    """
    workers = settings.SWEEP_WORKERS if workers is None else workers
    tasks = [(spec, config.sweep.schemes, config.sweep.oracle_tau_cap) for spec in sweep_cells(config)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(_sweep_task, tasks))
    else:
        batches = [_sweep_task(task) for task in tasks]
    rows = tuple(row for batch in batches for row in batch)
    logger.info("sweep_complete", instances=len(tasks), rows=len(rows), workers=workers)
    return SweepResult(rows=rows)


def budget_ladder(spec: ScenarioSpec, budgets: Iterable[float]) -> List[Tuple[float, Optional[float]]]:
    """Relaxed optimum z for each cycle budget on the same scenario; None where infeasible."""
    ladder = []
    for budget in budgets:
        problem = generate_scenario(spec.model_copy(update={"cycle_budget_s": float(budget)})).problem
        try:
            ladder.append((float(budget), allocator.relaxed_solve(problem).slack_z))
        except AppException as exc:
            logger.info("ladder_rung_infeasible", cycle_budget_s=budget, error=_status(exc))
            ladder.append((float(budget), None))
    return ladder


def compare_with_oracle(
    spec: ScenarioSpec, seeds: Sequence[int], *, tau_cap: Optional[int] = None
) -> List[OracleComparisonRow]:
    """
    SAI versus the exhaustive optimum, one row per seed.

    Infeasible seeds are recorded in `status`. The enumeration guard is not
    caught: an oversized instance fails the whole report.
    """
    rows = []
    for seed in seeds:
        problem = generate_scenario(spec.model_copy(update={"seed": seed})).problem
        try:
            cap = tau_cap if tau_cap is not None else default_oracle_cap(problem)
        except InfeasibleError:
            cap = settings.ORACLE_MAX_TAU_CAP
        base = {"seed": seed, "num_learners": problem.num_learners, "tau_cap": cap}
        try:
            oracle = run_scheme(problem, Scheme.HA_ASYNC_ORACLE, oracle_tau_cap=cap)
        except InfeasibleError as exc:
            logger.info("oracle_seed_infeasible", seed=seed, error=_status(exc))
            rows.append(OracleComparisonRow(status=_status(exc), **base))
            continue
        try:
            sai = run_scheme(problem, Scheme.HA_ASYNC)
        except AppException as exc:
            rows.append(OracleComparisonRow(status=_status(exc), **base))
            continue
        rows.append(
            OracleComparisonRow(
                sai_max_staleness=sai.report.max_staleness,
                sai_avg_staleness=sai.report.avg_staleness,
                oracle_max_staleness=oracle.report.max_staleness,
                oracle_avg_staleness=oracle.report.avg_staleness,
                **base,
            )
        )
    return rows


def summarize_oracle_rows(rows: Sequence[OracleComparisonRow]) -> Dict[str, int]:
    """Count instances where SAI matches, is within one of, or trails the optimum."""
    summary = {"equal": 0, "within_one": 0, "worse": 0, "failed": 0}
    for row in rows:
        if row.status != "ok":
            summary["failed"] += 1
        elif row.sai_max_staleness == row.oracle_max_staleness:
            summary["equal"] += 1
        elif row.sai_max_staleness <= row.oracle_max_staleness + 1:
            summary["within_one"] += 1
        else:
            summary["worse"] += 1
    return summary


# --------------------------------------------------------------------------------
# Profiles and simulations
# --------------------------------------------------------------------------------


def profile_table(spec: ScenarioSpec) -> List[ProfileRow]:
    """
    Per-learner coefficients and time split at the HA allocation.

    When no HA allocation exists the coefficient columns are still filled and
    the allocation columns stay empty, with the error in `status`.
    """
    scenario = generate_scenario(spec)
    problem = scenario.problem
    allocation: Optional[IntegerAllocation] = None
    status = "ok"
    try:
        allocation = run_scheme(problem, Scheme.HA_ASYNC)
    except AppException as exc:
        status = _status(exc)
        logger.warning("profile_without_allocation", error=status)
    rows = []
    for k, coeff in enumerate(problem.coefficients):
        row: Dict[str, Any] = {"learner": k + 1, "c2": coeff.c2, "c1": coeff.c1, "c0": coeff.c0, "status": status}
        learner = scenario.learners[k] if scenario.learners else None
        if learner is not None:
            row.update(
                distance_m=learner.distance_m,
                clock_hz=learner.compute.clock_hz,
                rate_bps=achievable_rate(learner.channel),
            )
        if allocation is not None:
            tau, batch = allocation.taus[k], allocation.batches[k]
            row.update(tau=tau, batch=batch, cycle_time=cycle_time(coeff, tau, batch))
            if learner is not None:
                split = component_times(learner, spec.task, batch)
                row.update(
                    t_send=split.t_send,
                    t_compute=tau * split.t_compute_per_update,
                    t_receive=split.t_receive,
                )
        rows.append(ProfileRow(**row))
    return rows


def run_divergence_experiment(
    config: RunConfig,
    *,
    schemes: Optional[Sequence[Scheme]] = None,
    cycles: Optional[int] = None,
    seeds: Optional[Sequence[int]] = None,
) -> List[TraceRow]:
    """
    Divergence traces for each seed and scheme.

    Synthetic learners are drawn once per seed and shared by every scheme, so
    traces differ only through the allocations.
    """
    sim = config.simulation
    schemes = tuple(schemes or sim.schemes)
    cycles = cycles or sim.cycles
    seeds = tuple(seeds if seeds is not None else config.sweep.seeds)
    scenario_fields = set(ScenarioSpec.model_fields)

    rows: List[TraceRow] = []
    for seed in seeds:
        spec = ScenarioSpec.model_validate({**config.model_dump(include=scenario_fields), "seed": seed})
        problem = generate_scenario(spec).problem
        learners = synthetic_learners(
            np.random.default_rng([seed, problem.num_learners]),
            problem.num_learners,
            sim.dimension,
            sim.rows_per_learner,
            heterogeneity=sim.heterogeneity,
            noise_std=sim.noise_std,
            identical=sim.identical_learners,
            step_scale=sim.step_scale,
        )
        for scheme in schemes:
            allocation = run_scheme(problem, scheme)
            trace = divergence_trace(allocation, learners, cycles)
            violations = sum(trace.bound_violations)
            if violations:
                logger.warning("divergence_bound_violated", scheme=scheme.value, seed=seed, steps=violations)
            rows.extend(
                TraceRow(
                    scheme=scheme,
                    seed=seed,
                    cycle=g,
                    divergence=trace.divergence[g - 1],
                    global_loss=trace.global_loss[g - 1],
                    max_staleness=trace.max_staleness,
                    bound_violations=trace.bound_violations[g - 1],
                )
                for g in range(1, cycles + 1)
            )
    return rows
