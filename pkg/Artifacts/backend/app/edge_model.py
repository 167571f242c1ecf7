"""
Wireless and compute model of a learner.

Turns a learner's channel and processor into the three coefficients of its
cycle time law

    t_k = c2 * tau_k * d_k + c1 * d_k + c0

which every allocator consumes. Uplink and downlink share one achievable rate
(the channel is reciprocal within a global cycle), noise power is N_0 * W, and
one floating point operation is counted as one clock cycle.

All functions are pure and operate on immutable records.
"""
import math

from app.core.exceptions import InvalidChannel, InvalidDistance
from app.schemas import (
    ChannelParams,
    ComponentTimes,
    ComputeParams,
    LearnerProfile,
    LearningMode,
    TaskProfile,
    TimeCoefficients,
)


# --------------------------------------------------------------------------------
# Unit conversions and radio helpers
# --------------------------------------------------------------------------------


def dbm_to_watts(dbm: float) -> float:
    """Convert dBm (or dBm/Hz) to watts (or W/Hz)."""
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    """Convert watts to dBm."""
    if watts <= 0:
        raise InvalidChannel(f"Power must be positive to express in dBm, got {watts}")
    return 10.0 * math.log10(watts) + 30.0


def path_loss_gain(distance_m: float) -> float:
    """
    Linear channel gain for the indoor attenuation model L = 7 + 2.1*log10(R) dB.

    Raises InvalidDistance for non-positive distances.
    """
    if not distance_m > 0 or not math.isfinite(distance_m):
        raise InvalidDistance(f"Distance must be a positive finite number of meters, got {distance_m}")
    loss_db = 7.0 + 2.1 * math.log10(distance_m)
    return 10.0 ** (-loss_db / 10.0)


def achievable_rate(ch: ChannelParams) -> float:
    """Shannon rate W*log2(1 + P*h / (N_0*W)) in bits per second."""
    snr = ch.tx_power_watts * ch.channel_gain / (ch.noise_psd_watts_per_hz * ch.bandwidth_hz)
    rate = ch.bandwidth_hz * math.log2(1.0 + snr)
    if not math.isfinite(rate) or rate <= 0:
        raise InvalidChannel(f"Achievable rate is not a positive finite number (snr={snr!r})")
    return rate


def model_bits(task: TaskProfile, batch: float = 0.0) -> float:
    """Size in bits of the model exchanged for a learner holding `batch` samples."""
    return task.model_precision_bits * (batch * task.model_size_slope + task.model_size_intercept)


def build_learner(
    k: int,
    distance_m: float,
    clock_hz: float,
    bandwidth_hz: float,
    tx_power_dbm: float,
    noise_psd_dbm_hz: float,
    mode: LearningMode = LearningMode.PARALLELIZED,
) -> LearnerProfile:
    """Place learner `k` at `distance_m` and attach its radio and processor."""
    channel = ChannelParams(
        bandwidth_hz=bandwidth_hz,
        tx_power_watts=dbm_to_watts(tx_power_dbm),
        channel_gain=path_loss_gain(distance_m),
        noise_psd_watts_per_hz=dbm_to_watts(noise_psd_dbm_hz),
    )
    return LearnerProfile(
        id=k,
        channel=channel,
        compute=ComputeParams(clock_hz=clock_hz),
        mode=mode,
        distance_m=distance_m,
    )


# --------------------------------------------------------------------------------
# Time law
# --------------------------------------------------------------------------------


def _data_bits_per_sample(learner: LearnerProfile, task: TaskProfile) -> float:
    # Federated learners keep their data; only models move.
    if learner.mode == LearningMode.FEDERATED:
        return 0.0
    return task.features * task.data_precision_bits


def time_coefficients(learner: LearnerProfile, task: TaskProfile) -> TimeCoefficients:
    """
    Quadratic, linear and constant coefficients of the learner's cycle time.

    c2 = C_m / f_k
    c1 = (F*P_d [PL only] + 2*P_m*S_d) / rate
    c0 = 2*P_m*S_m / rate
    """
    rate = achievable_rate(learner.channel)
    c1_bits = _data_bits_per_sample(learner, task) + 2.0 * task.model_precision_bits * task.model_size_slope
    c0_bits = 2.0 * task.model_precision_bits * task.model_size_intercept
    return TimeCoefficients(
        c2=task.complexity_cycles_per_sample / learner.compute.clock_hz,
        c1=c1_bits / rate,
        c0=c0_bits / rate,
    )


def cycle_time(coeff: TimeCoefficients, tau: float, batch: float) -> float:
    """Wall-clock time of one global cycle: c2*tau*d + c1*d + c0."""
    return coeff.c2 * tau * batch + coeff.c1 * batch + coeff.c0


def component_times(learner: LearnerProfile, task: TaskProfile, batch: float) -> ComponentTimes:
    """
    Send, per-update compute and receive times for a learner holding `batch` samples.

    t_send + tau * t_compute_per_update + t_receive equals cycle_time for the
    same learner, task and batch.
    """
    rate = achievable_rate(learner.channel)
    model = model_bits(task, batch)
    return ComponentTimes(
        t_send=(batch * _data_bits_per_sample(learner, task) + model) / rate,
        t_compute_per_update=batch * task.complexity_cycles_per_sample / learner.compute.clock_hz,
        t_receive=model / rate,
    )
