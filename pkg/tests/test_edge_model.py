"""Unit tests for the wireless and compute time model."""

import math

import pytest

from app.core.exceptions import InvalidChannel, InvalidDistance
from app.edge_model import (
    achievable_rate,
    build_learner,
    component_times,
    cycle_time,
    dbm_to_watts,
    model_bits,
    path_loss_gain,
    time_coefficients,
    watts_to_dbm,
)
from app.schemas import ChannelParams, LearningMode, TaskProfile, TimeCoefficients


def _learner(distance: float = 10.0, clock: float = 2.4e9, mode: LearningMode = LearningMode.PARALLELIZED):
    return build_learner(1, distance, clock, 5e6, 23.0, -174.0, mode)


def test_dbm_conversions_match_radio_defaults() -> None:
    assert dbm_to_watts(23.0) == pytest.approx(0.19953, rel=1e-4)
    assert dbm_to_watts(-174.0) == pytest.approx(3.981e-21, rel=1e-3)
    assert watts_to_dbm(dbm_to_watts(17.5)) == pytest.approx(17.5)


def test_watts_to_dbm_rejects_non_positive_power() -> None:
    with pytest.raises(InvalidChannel):
        watts_to_dbm(0.0)


def test_path_loss_at_one_meter_is_seven_db() -> None:
    assert path_loss_gain(1.0) == pytest.approx(10 ** -0.7)


def test_path_loss_at_ten_meters() -> None:
    assert path_loss_gain(10.0) == pytest.approx(10 ** -0.91)


def test_path_loss_decreases_with_distance() -> None:
    gains = [path_loss_gain(d) for d in (0.5, 1.0, 5.0, 25.0, 50.0)]
    assert gains == sorted(gains, reverse=True)


@pytest.mark.parametrize("distance", [0.0, -3.0, math.inf])
def test_path_loss_rejects_bad_distance(distance: float) -> None:
    with pytest.raises(InvalidDistance):
        path_loss_gain(distance)


def test_achievable_rate_with_unit_snr() -> None:
    channel = ChannelParams(bandwidth_hz=1e6, tx_power_watts=1.0, channel_gain=1.0, noise_psd_watts_per_hz=1e-6)
    assert achievable_rate(channel) == pytest.approx(1e6)


def test_achievable_rate_grows_with_power() -> None:
    rates = [
        achievable_rate(
            ChannelParams(bandwidth_hz=1e6, tx_power_watts=p, channel_gain=1.0, noise_psd_watts_per_hz=1e-6)
        )
        for p in (0.5, 1.0, 2.0, 8.0)
    ]
    assert rates == sorted(rates)


def test_achievable_rate_rejects_vanishing_snr() -> None:
    channel = ChannelParams(bandwidth_hz=1e6, tx_power_watts=1e-300, channel_gain=1e-300, noise_psd_watts_per_hz=1.0)
    with pytest.raises(InvalidChannel):
        achievable_rate(channel)


def test_mnist_model_is_8974080_bits() -> None:
    task = TaskProfile()
    assert model_bits(task) == 8_974_080
    assert model_bits(task, batch=5_000) == 8_974_080


def test_mnist_coefficients_carry_two_model_transfers() -> None:
    learner = _learner()
    coeff = time_coefficients(learner, TaskProfile())
    rate = achievable_rate(learner.channel)
    assert coeff.c0 * rate == pytest.approx(2 * 8_974_080)
    assert coeff.c1 * rate == pytest.approx(784 * 8)
    assert coeff.c2 == pytest.approx(1_123_736 / 2.4e9)


def test_federated_mode_drops_data_transfer() -> None:
    coeff = time_coefficients(_learner(mode=LearningMode.FEDERATED), TaskProfile())
    assert coeff.c1 == 0.0
    assert coeff.c0 > 0


def test_cycle_time_is_quadratic_law() -> None:
    coeff = TimeCoefficients(c2=0.5, c1=0.25, c0=2.0)
    assert cycle_time(coeff, 3, 4) == pytest.approx(0.5 * 12 + 0.25 * 4 + 2.0)


@pytest.mark.parametrize("mode", list(LearningMode))
def test_component_times_add_up_to_cycle_time(mode: LearningMode) -> None:
    task = TaskProfile(model_size_slope=3.0)
    learner = _learner(distance=37.0, clock=700e6, mode=mode)
    coeff = time_coefficients(learner, task)
    split = component_times(learner, task, batch=1_200)
    total = split.t_send + 4 * split.t_compute_per_update + split.t_receive
    assert total == pytest.approx(cycle_time(coeff, 4, 1_200), rel=1e-12)


def test_build_learner_records_placement() -> None:
    learner = build_learner(7, 12.5, 700e6, 5e6, 23.0, -174.0)
    assert learner.id == 7
    assert learner.distance_m == 12.5
    assert learner.channel.channel_gain == pytest.approx(path_loss_gain(12.5))
    assert learner.compute.clock_hz == 700e6


def test_achievable_rate_at_cell_edge() -> None:
    assert achievable_rate(_learner(distance=50.0).channel) == pytest.approx(1.98e8, rel=1e-2)


def test_doubling_bandwidth_less_than_doubles_rate() -> None:
    narrow = ChannelParams(bandwidth_hz=1e6, tx_power_watts=1.0, channel_gain=1e-3, noise_psd_watts_per_hz=1e-15)
    wide = narrow.model_copy(update={"bandwidth_hz": 2e6})
    assert achievable_rate(narrow) < achievable_rate(wide) < 2 * achievable_rate(narrow)


def test_doubling_clock_halves_c2_only() -> None:
    task = TaskProfile(model_size_slope=2.0)
    slow = time_coefficients(_learner(distance=20.0, clock=1.2e9), task)
    fast = time_coefficients(_learner(distance=20.0, clock=2.4e9), task)
    assert fast.c2 == pytest.approx(slow.c2 / 2, rel=1e-15)
    assert fast.c1 == slow.c1
    assert fast.c0 == slow.c0


@pytest.mark.parametrize("slope", [0.0, 3.0])
def test_parallelized_c1_exceeds_federated_by_data_term(slope: float) -> None:
    task = TaskProfile(model_size_slope=slope)
    pl = _learner(distance=30.0)
    fl = _learner(distance=30.0, mode=LearningMode.FEDERATED)
    pl_c1 = time_coefficients(pl, task).c1
    fl_c1 = time_coefficients(fl, task).c1
    assert pl_c1 > fl_c1
    assert (pl_c1 - fl_c1) * achievable_rate(pl.channel) == pytest.approx(task.features * task.data_precision_bits)
