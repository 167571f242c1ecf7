import enum
from typing import Optional, Tuple

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeFloat,
    NonNegativeInt,
    PositiveFloat,
    PositiveInt,
    model_validator,
)

from app.core.exceptions import InvalidScenario


# ======================================================================================
# Base Configuration & Enums
# ======================================================================================

class DomainModel(BaseModel):
    """Base model for all value records: immutable, finite floats only."""
    model_config = ConfigDict(frozen=True, allow_inf_nan=False)


class ConfigModel(BaseModel):
    """Base model for config-file sections. Unknown keys are errors."""
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)


class LearningMode(str, enum.Enum):
    PARALLELIZED = "PL"
    FEDERATED = "FL"


class ClockMixing(str, enum.Enum):
    SPLIT = "split"
    RANDOM = "random"


class Scheme(str, enum.Enum):
    HA_ASYNC = "HA-async"
    HA_ASYNC_ORACLE = "HA-async-oracle"
    HU_ASYNC = "HU-async"
    HA_SYNC = "HA-sync"


class OutputFormat(str, enum.Enum):
    CSV = "csv"
    JSONLINES = "jsonlines"


# ======================================================================================
# Edge Model Schemas
# ======================================================================================

class ChannelParams(DomainModel):
    bandwidth_hz: PositiveFloat = Field(..., description="Dedicated bandwidth W of the learner's link")
    tx_power_watts: PositiveFloat = Field(..., description="Transmission power P_ko")
    channel_gain: PositiveFloat = Field(..., description="Linear channel gain h_ko")
    noise_psd_watts_per_hz: PositiveFloat = Field(..., description="Noise power spectral density N_0")


class ComputeParams(DomainModel):
    clock_hz: PositiveFloat = Field(..., description="Processing rate f_k in cycles per second")


class TaskProfile(ConfigModel):
    """ML task constants. Defaults are the MNIST profile."""
    features: PositiveInt = Field(784, description="Features per sample F")
    data_precision_bits: PositiveFloat = Field(8.0, description="Bits per feature P_d")
    model_precision_bits: PositiveFloat = Field(32.0, description="Bits per model parameter P_m")
    model_size_slope: NonNegativeFloat = Field(0.0, description="Parameters per allocated sample S_d")
    model_size_intercept: PositiveFloat = Field(280_440.0, description="Architecture parameters S_m")
    complexity_cycles_per_sample: PositiveFloat = Field(
        1_123_736.0, description="Clock cycles per sample per update C_m"
    )
    dataset_size: PositiveInt = Field(60_000, description="Total dataset size d")


class LearnerProfile(DomainModel):
    id: PositiveInt = Field(..., description="1-based learner index k")
    channel: ChannelParams
    compute: ComputeParams
    mode: LearningMode = LearningMode.PARALLELIZED
    distance_m: Optional[PositiveFloat] = Field(None, description="Distance to the orchestrator, when placed")


class TimeCoefficients(DomainModel):
    """Cycle time law t = c2*tau*d + c1*d + c0."""
    c2: PositiveFloat = Field(..., description="Seconds per sample-update")
    c1: NonNegativeFloat = Field(..., description="Seconds per sample")
    c0: NonNegativeFloat = Field(..., description="Seconds per cycle, independent of the batch")


class ComponentTimes(DomainModel):
    t_send: NonNegativeFloat
    t_compute_per_update: NonNegativeFloat
    t_receive: NonNegativeFloat


# ======================================================================================
# Staleness Schemas
# ======================================================================================

class PairMatrix(DomainModel):
    num_learners: PositiveInt
    pairs: Tuple[Tuple[int, int], ...] = ()

    @property
    def size(self) -> int:
        return len(self.pairs)


class StalenessReport(DomainModel):
    max_staleness: NonNegativeFloat = 0.0
    avg_staleness: NonNegativeFloat = 0.0
    per_pair: Tuple[NonNegativeFloat, ...] = ()


class PairMultipliers(DomainModel):
    # Sign checks raise InvalidMultipliers in the staleness module, not here.
    mu: Tuple[float, ...] = ()
    mu_prime: Tuple[float, ...] = ()


# ======================================================================================
# Allocation Schemas
# ======================================================================================

class AllocationProblem(DomainModel):
    coefficients: Tuple[TimeCoefficients, ...]
    cycle_budget_s: PositiveFloat = Field(..., description="Global cycle clock T")
    dataset_size: PositiveInt = Field(..., description="Total dataset size d")
    batch_lower: PositiveInt = Field(1, description="Per-learner batch lower bound d_l")
    batch_upper: PositiveInt = Field(..., description="Per-learner batch upper bound d_u")

    @model_validator(mode="after")
    def _check_bounds(self) -> "AllocationProblem":
        k = len(self.coefficients)
        if k < 1:
            raise InvalidScenario("An allocation problem needs at least one learner")
        if self.batch_lower > self.batch_upper:
            raise InvalidScenario(
                f"batch_lower ({self.batch_lower}) exceeds batch_upper ({self.batch_upper})"
            )
        if not k * self.batch_lower <= self.dataset_size <= k * self.batch_upper:
            raise InvalidScenario(
                f"Dataset size {self.dataset_size} cannot be split over {k} learners "
                f"with batches in [{self.batch_lower}, {self.batch_upper}]"
            )
        return self

    @property
    def num_learners(self) -> int:
        return len(self.coefficients)


class TauInterval(DomainModel):
    lower: NonNegativeFloat
    upper: NonNegativeFloat


class ContinuousAllocation(DomainModel):
    taus: Tuple[NonNegativeFloat, ...]
    batches: Tuple[float, ...]
    slack_z: NonNegativeFloat
    times: Tuple[float, ...]
    common_tau: NonNegativeFloat = Field(..., description="Bisection root before per-learner clamping")


class IntegerAllocation(DomainModel):
    scheme: Scheme
    taus: Tuple[NonNegativeInt, ...]
    batches: Tuple[NonNegativeInt, ...]
    times: Tuple[NonNegativeFloat, ...]
    participating: Tuple[bool, ...]
    report: StalenessReport


class MultiplierSet(DomainModel):
    lambda_: Tuple[float, ...] = Field(..., description="Time-constraint multipliers")
    alpha: Tuple[float, ...] = Field(..., description="Multipliers of tau_k >= 0")
    omega: float = Field(..., description="Batch-sum multiplier")
    nu: Tuple[float, ...] = Field(..., description="Batch lower-bound multipliers")
    nu_prime: Tuple[float, ...] = Field(..., description="Batch upper-bound multipliers")
    pair: PairMultipliers


class KKTCertificate(DomainModel):
    multipliers: MultiplierSet
    residual: NonNegativeFloat
    pair_multiplier_sum: float


# ======================================================================================
# Experiment Config Schemas
# ======================================================================================

class ExplicitCoefficients(ConfigModel):
    c2: Tuple[PositiveFloat, ...] = Field(..., min_length=1)
    c1: Tuple[NonNegativeFloat, ...] = Field(..., min_length=1)
    c0: Tuple[NonNegativeFloat, ...] = Field(..., min_length=1)

    @model_validator(mode="after")
    def _same_length(self) -> "ExplicitCoefficients":
        if not len(self.c2) == len(self.c1) == len(self.c0):
            raise ValueError("c2, c1 and c0 must list the same number of learners")
        return self


class ScenarioSpec(ConfigModel):
    """One instance of the default edge environment. Unset fields keep the defaults."""
    num_learners: PositiveInt = 20
    radius_m: PositiveFloat = 50.0
    node_bandwidth_hz: PositiveFloat = 5e6
    system_bandwidth_hz: PositiveFloat = 100e6
    tx_power_dbm: float = 23.0
    noise_psd_dbm_hz: float = -174.0
    clock_pool_hz: Tuple[PositiveFloat, ...] = Field((2.4e9, 700e6), min_length=1)
    clock_mixing: ClockMixing = ClockMixing.SPLIT
    task: TaskProfile = Field(default_factory=TaskProfile)
    cycle_budget_s: PositiveFloat = 7.5
    batch_lower: PositiveInt = 1
    batch_upper: Optional[PositiveInt] = None
    mode: LearningMode = LearningMode.PARALLELIZED
    seed: int = 0
    coefficients: Optional[ExplicitCoefficients] = None


class SweepSpec(ConfigModel):
    num_learners: Tuple[PositiveInt, ...] = Field((5, 10, 15, 20), min_length=1)
    cycle_budgets: Tuple[PositiveFloat, ...] = Field((7.5, 15.0), min_length=1)
    seeds: Tuple[int, ...] = Field((0,), min_length=1)
    schemes: Tuple[Scheme, ...] = Field(
        (Scheme.HA_ASYNC, Scheme.HA_ASYNC_ORACLE, Scheme.HU_ASYNC, Scheme.HA_SYNC), min_length=1
    )
    oracle_tau_cap: Optional[PositiveInt] = None


class SimulationSpec(ConfigModel):
    cycles: PositiveInt = 20
    dimension: PositiveInt = 8
    rows_per_learner: PositiveInt = 16
    step_scale: PositiveFloat = Field(0.1, description="eta = step_scale / beta")
    heterogeneity: NonNegativeFloat = 1.0
    noise_std: NonNegativeFloat = 0.1
    identical_learners: bool = False
    schemes: Tuple[Scheme, ...] = Field(
        (Scheme.HA_ASYNC, Scheme.HU_ASYNC, Scheme.HA_SYNC), min_length=1
    )


class OutputSpec(ConfigModel):
    format: OutputFormat = OutputFormat.CSV


class RunConfig(ScenarioSpec):
    """Root of an experiment config file: scenario keys plus optional sections."""
    sweep: SweepSpec = Field(default_factory=SweepSpec)
    simulation: SimulationSpec = Field(default_factory=SimulationSpec)
    output: OutputSpec = Field(default_factory=OutputSpec)


# ======================================================================================
# Result Row Schemas
# ======================================================================================

class SweepRow(DomainModel):
    scheme: Scheme
    num_learners: PositiveInt
    cycle_budget_s: PositiveFloat
    seed: int
    max_staleness: Optional[float] = None
    avg_staleness: Optional[float] = None
    taus: Tuple[int, ...] = ()
    batches: Tuple[int, ...] = ()
    status: str = "ok"


class SweepResult(DomainModel):
    rows: Tuple[SweepRow, ...] = ()


class TraceRow(DomainModel):
    scheme: Scheme
    seed: int
    cycle: PositiveInt
    divergence: NonNegativeFloat
    global_loss: NonNegativeFloat
    max_staleness: NonNegativeFloat
    bound_violations: NonNegativeInt = 0


class Scenario(DomainModel):
    """A generated instance: the allocation problem and, when derived, its learners."""
    problem: AllocationProblem
    learners: Tuple[LearnerProfile, ...] = ()


class OracleComparisonRow(DomainModel):
    seed: int
    num_learners: PositiveInt
    tau_cap: PositiveInt
    sai_max_staleness: Optional[float] = None
    sai_avg_staleness: Optional[float] = None
    oracle_max_staleness: Optional[float] = None
    oracle_avg_staleness: Optional[float] = None
    status: str = "ok"


class ProfileRow(DomainModel):
    learner: PositiveInt
    distance_m: Optional[float] = None
    clock_hz: Optional[float] = None
    rate_bps: Optional[float] = None
    c2: float
    c1: float
    c0: float
    tau: Optional[int] = None
    batch: Optional[int] = None
    t_send: Optional[float] = None
    t_compute: Optional[float] = None
    t_receive: Optional[float] = None
    cycle_time: Optional[float] = None
    status: str = "ok"


class SolveSummary(DomainModel):
    """One solved instance next to its relaxed optimum."""
    scheme: Scheme
    num_learners: PositiveInt
    cycle_budget_s: PositiveFloat
    taus: Tuple[int, ...]
    batches: Tuple[int, ...]
    times: Tuple[float, ...]
    participating: Tuple[bool, ...]
    max_staleness: float
    avg_staleness: float
    relaxed_z: Optional[float] = None
    relaxed_common_tau: Optional[float] = None
    relaxed_taus: Tuple[float, ...] = ()
    relaxed_batches: Tuple[float, ...] = ()
