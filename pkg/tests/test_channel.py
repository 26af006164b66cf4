import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skynoma import channel


def test_distance_vertical():
    assert channel.distance_3d((0.0, 0.0), (0.0, 0.0, 100.0)) == 100.0


def test_distance_pythagorean_triple():
    assert channel.distance_3d((3.0, 4.0), (0.0, 0.0, 12.0)) == pytest.approx(13.0, abs=0)


def test_distance_matches_reference():
    rng = np.random.default_rng(3)
    for _ in range(50):
        ux, uy, x, y, h = rng.uniform(0.0, 1000.0, 5)
        h = max(h, 1.0)
        want = math.sqrt((ux - x) ** 2 + (uy - y) ** 2 + h * h)
        assert channel.distance_3d((ux, uy), (x, y, h)) == pytest.approx(want, rel=1e-15)


def test_d0_at_height_100():
    assert channel.los_params(100.0).d0 == pytest.approx(155.16, rel=1e-9)


def test_d0_floor_applies_at_low_heights():
    assert channel.los_params(20.0).d0 == 18.0


def test_plos_unity_within_d0():
    # horizontal distance 10 m at h=100 is well inside d0 = 155.16
    d3d = math.hypot(10.0, 100.0)
    assert channel.p_los(d3d, 100.0) == 1.0


def test_plos_rejects_impossible_geometry():
    with pytest.raises(ValueError):
        channel.p_los(50.0, 100.0)


def test_plos_nonincreasing_beyond_d0():
    h = 100.0
    probs = [channel.p_los(math.hypot(r, h), h) for r in np.linspace(0, 2500, 300)]
    assert all(b <= a + 1e-12 for a, b in zip(probs, probs[1:]))


def test_los_loss_hand_value():
    l_los, _, _ = channel.path_loss(100.0, 100.0, 2.0)
    assert l_los == pytest.approx(30.9 + 2 * 21.5 + 20 * math.log10(2.0), rel=1e-12)


def test_nlos_never_below_los():
    for d, h in ((50.0, 40.0), (400.0, 100.0), (2000.0, 25.0)):
        l_los, l_nlos, _ = channel.path_loss(d, h, 2.0)
        assert l_nlos >= l_los


def test_expected_loss_in_pure_los_regime():
    l_los, _, l_exp = channel.path_loss(100.0, 100.0, 2.0)
    assert l_exp == l_los  # P_LoS = 1 here


def test_channel_gain_round_values():
    assert channel.channel_gain(80.0, 1.0) == pytest.approx(1e-8, rel=1e-12)
    assert channel.channel_gain(79.92, 0.0) == 0.0


def test_channel_gain_matches_oracle():
    want = 1.0 / 10.0 ** (0.1 * 79.92)
    assert channel.channel_gain(79.92, 1.0) == pytest.approx(want, rel=1e-12)


def test_golden_table_against_package_data():
    from skynoma.verification import check_channel_goldens

    res = check_channel_goldens()
    assert res.passed, res.detail


def test_noise_power():
    assert channel.noise_power_watts(-100.0, 15e3) == pytest.approx(1.5e-9, rel=1e-12)


def test_config_validation():
    with pytest.raises(ValueError):
        channel.ChannelConfig(fc_hz=0.0)
    with pytest.raises(ValueError):
        channel.ChannelConfig(fading_mode="rice")


@settings(max_examples=60, derandomize=True)
@given(
    r=st.floats(min_value=0.0, max_value=5000.0),
    h=st.floats(min_value=2.0, max_value=150.0),
)
def test_plos_bounded(r, h):
    p = channel.p_los(math.hypot(r, h), h)
    assert 0.0 <= p <= 1.0


@settings(max_examples=60, derandomize=True)
@given(
    r=st.floats(min_value=0.0, max_value=5000.0),
    h=st.floats(min_value=2.0, max_value=150.0),
    fc=st.floats(min_value=0.5, max_value=6.0),
)
def test_expected_loss_bracketed(r, h, fc):
    d3d = math.hypot(r, h)
    if d3d < 1.0:
        return
    l_los, l_nlos, l_exp = channel.path_loss(d3d, h, fc)
    assert l_los - 1e-9 <= l_exp <= l_nlos + 1e-9


def test_purity_same_inputs_same_outputs():
    a = channel.path_loss(321.0, 77.0, 2.0)
    b = channel.path_loss(321.0, 77.0, 2.0)
    assert a == b
