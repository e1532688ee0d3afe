import pytest

from wlansdar.errors import NegativeRate, NonPositiveNodes, ScenarioError, ZeroBuffer
from wlansdar.params import (
    UNEQUAL_RATES,
    AccessMode,
    MacParams,
    PhyParams,
    Scenario,
    compute_slot_durations,
    validate_scenario,
)


def test_basic_slot_durations_match_hand_sum():
    # DATA = 192 us + (28 + 1000) * 8 bits / 11 Mb/s; ACK = 192 us + 112 / 2 Mb/s
    data_us = 192 + 8224 / 11
    ack_us = 192 + 56
    t_s_us = data_us + 10 + ack_us + 50
    t_c_us = data_us + 50
    sl = compute_slot_durations(PhyParams(), 8000)
    assert abs(sl.t_s_ns - t_s_us * 1000) <= 1
    assert abs(sl.t_c_ns - t_c_us * 1000) <= 1
    assert sl.sigma_ns == 20_000
    assert sl.t_s_ns == 1_247_636
    assert sl.t_c_ns == 989_636


def test_rts_cts_durations():
    sl = compute_slot_durations(PhyParams(), 8000, mode=AccessMode.RTS_CTS)
    rts, cts, ack = 192 + 80, 192 + 56, 192 + 56
    data = 192 + 8224 / 11
    assert abs(sl.t_s_ns - (rts + 10 + cts + 10 + data + 10 + ack + 50) * 1000) <= 1
    assert sl.t_c_ns == (rts + 50) * 1000
    assert sl.t_c < compute_slot_durations(PhyParams(), 8000).t_c


def test_slot_lengths_add_sigma():
    sl = Scenario.homogeneous(3, 1.0).slots()
    assert sl.l_idle == sl.sigma
    assert sl.l_succ == pytest.approx(sl.t_s + sl.sigma)
    assert sl.l_coll == pytest.approx(sl.t_c + sl.sigma)


def test_windows_double_and_cap():
    mac = MacParams()
    assert [mac.window(k) for k in range(7)] == [31, 63, 127, 255, 511, 1023, 1023]
    assert mac.max_stage == 5


@pytest.mark.parametrize(
    "kwargs, exc",
    [
        (dict(lambdas=()), NonPositiveNodes),
        (dict(lambdas=(1.0, -2.0)), NegativeRate),
        (dict(lambdas=(1.0,), buffer=0), ZeroBuffer),
    ],
)
def test_hard_validation_errors(kwargs, exc):
    with pytest.raises(exc):
        validate_scenario(Scenario(**kwargs))


def test_unequal_rates_are_a_soft_diagnostic():
    s = Scenario(lambdas=(5.0, 10.0))
    assert validate_scenario(s).diagnostics == ()
    assert UNEQUAL_RATES in validate_scenario(s, analytical=True).diagnostics


def test_bad_phy_rejected():
    with pytest.raises(ScenarioError):
        PhyParams(sifs=60e-6)
    with pytest.raises(ScenarioError):
        MacParams(cw_min=64, cw_max=32)
