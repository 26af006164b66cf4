import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skynoma import noma
from skynoma.noma import Association, PowerAllocation


def two_uav_setup():
    assoc = Association(clusters=((0, 1), (2,)), n_users=3)
    gains = np.array(
        [
            [2.0e-9, 8.0e-9, 1.0e-10],
            [3.0e-10, 1.0e-10, 5.0e-9],
        ]
    )
    power = PowerAllocation(totals=(0.79, 0.79), fractions=((0.7, 0.3), (1.0,)))
    return assoc, gains, power, 1.5e-9


def test_association_rejects_double_service():
    with pytest.raises(ValueError):
        Association(clusters=((0, 1), (1,)), n_users=2)


def test_association_rejects_unserved_user():
    with pytest.raises(ValueError):
        Association(clusters=((0,), ()), n_users=2)


def test_power_fractions_must_sum_to_one():
    with pytest.raises(ValueError):
        PowerAllocation(totals=(1.0,), fractions=((0.4, 0.4),))


def test_interference_single_uav_is_zero():
    assoc = Association(clusters=((0, 1),), n_users=2)
    gains = np.array([[1e-9, 2e-9]])
    power = PowerAllocation(totals=(0.79,), fractions=((0.5, 0.5),))
    assert noma.inter_cluster_interference(0, 0, gains, power) == 0.0


def test_interference_two_uav_value():
    assoc, gains, power, _ = two_uav_setup()
    want = gains[1, 0] * math.sqrt(0.79)
    assert noma.inter_cluster_interference(0, 0, gains, power) == pytest.approx(want, rel=1e-12)


def test_interference_sqrt_power_scaling():
    assoc, gains, power, _ = two_uav_setup()
    base = noma.inter_cluster_interference(0, 0, gains, power)
    quadrupled = PowerAllocation(totals=(0.79, 4 * 0.79), fractions=power.fractions)
    assert noma.inter_cluster_interference(0, 0, gains, quadrupled) == pytest.approx(
        2 * base, rel=1e-12
    )


def test_equivalent_gain_no_interference():
    assoc = Association(clusters=((0,),), n_users=1)
    gains = np.array([[4e-9]])
    power = PowerAllocation(totals=(0.79,), fractions=((1.0,),))
    assert noma.equivalent_gain(0, 0, gains, power, 2e-9) == pytest.approx(2.0, rel=1e-12)


def test_equivalent_gain_linear_in_own_gain():
    assoc, gains, power, noise = two_uav_setup()
    g1 = noma.equivalent_gain(0, 0, gains, power, noise)
    doubled = gains.copy()
    doubled[0, 0] *= 2
    assert noma.equivalent_gain(0, 0, doubled, power, noise) == pytest.approx(2 * g1, rel=1e-12)


def test_decoding_order_sorts_ascending():
    order = noma.decoding_order(["a", "b", "c"], {"a": 0.5, "b": 0.2, "c": 0.9})
    assert order == ("b", "a", "c")


def test_decoding_order_singleton():
    assert noma.decoding_order([7], {7: 1.0}) == (7,)


def test_decoding_order_ties_break_by_id():
    for _ in range(5):
        assert noma.decoding_order([3, 1, 2], {1: 1.0, 2: 1.0, 3: 1.0}) == (1, 2, 3)


def test_single_user_sinr():
    assoc = Association(clusters=((0,),), n_users=1)
    gains = np.array([[4e-9]])
    power = PowerAllocation(totals=(0.81,), fractions=((1.0,),))
    got = noma.sinr_decoded(0, (0,), 0, gains, power, {0: 1.0}, 1e-9)
    assert got == pytest.approx(4e-9 * 0.9 / 1e-9, rel=1e-12)


def test_last_decoded_user_sees_no_intra_interference():
    assoc, gains, power, noise = two_uav_setup()
    cluster = noma.decode_cluster(0, assoc, gains, power, noise, 15e3)
    strongest = cluster.order[-1]
    inter = noma.inter_cluster_interference(strongest, 0, gains, power)
    frac = dict(zip(assoc.clusters[0], power.fractions[0]))
    want = gains[0, strongest] * math.sqrt(0.79 * frac[strongest]) / (inter + noise)
    assert cluster.sinr[strongest] == pytest.approx(want, rel=1e-12)


def test_two_uav_cluster_matches_term_expansion():
    assoc, gains, power, noise = two_uav_setup()
    cluster = noma.decode_cluster(0, assoc, gains, power, noise, 15e3)
    # weakest first: equivalent gains decide, then Eq. 14 term by term
    g_eq = {}
    for k in (0, 1):
        inter = gains[1, k] * math.sqrt(0.79)
        g_eq[k] = gains[0, k] / (inter + noise)
    order = tuple(sorted((0, 1), key=lambda k: (g_eq[k], k)))
    assert cluster.order == order
    frac = dict(zip(assoc.clusters[0], power.fractions[0]))
    weak, strong = order
    intra_weak = gains[0, strong] * math.sqrt(0.79 * frac[strong])
    inter_weak = gains[1, weak] * math.sqrt(0.79)
    want_weak = gains[0, weak] * math.sqrt(0.79 * frac[weak]) / (intra_weak + inter_weak + noise)
    assert cluster.sinr[weak] == pytest.approx(want_weak, rel=1e-12)


def test_intra_interference_monotonicity():
    # zeroing a later-decoded user's power strictly raises earlier SINRs
    assoc, gains, power, noise = two_uav_setup()
    cluster = noma.decode_cluster(0, assoc, gains, power, noise, 15e3)
    weak, strong = cluster.order
    members = assoc.clusters[0]
    zeroed = {k: (0.0 if k == strong else 1.0) for k in members}
    boosted = noma.sinr_decoded(0, cluster.order, 0, gains, power, zeroed, noise)
    assert boosted > cluster.sinr[weak]


def test_user_rate_round_values():
    assert noma.user_rate(1.0, 15000.0) == pytest.approx(15000.0, rel=1e-12)
    assert noma.user_rate(0.0, 15000.0) == 0.0
    assert noma.user_rate(3.0, 15000.0) == pytest.approx(30000.0, rel=1e-12)


def test_slot_sum_and_throughput():
    assoc, gains, power, noise = two_uav_setup()
    clusters = [
        noma.decode_cluster(u, assoc, gains, power, noise, 15e3) for u in range(2)
    ]
    total = noma.slot_sum_rate(clusters)
    assert total == pytest.approx(
        sum(r for c in clusters for r in c.rates.values()), rel=1e-15
    )
    assert noma.episode_throughput([total, total], 1.0) == pytest.approx(2 * total, rel=1e-15)


@settings(max_examples=40, derandomize=True)
@given(perm=st.permutations(range(3)))
def test_slot_sum_rate_order_invariant(perm):
    assoc = Association(clusters=((0, 1), (2,), (3,)), n_users=4)
    gains = 10.0 ** (-np.random.default_rng(0).uniform(8, 11, size=(3, 4)))
    power = PowerAllocation(totals=(0.8, 0.8, 0.8), fractions=((0.7, 0.3), (1.0,), (1.0,)))
    clusters = [noma.decode_cluster(u, assoc, gains, power, 1e-9, 15e3) for u in range(3)]
    shuffled = [clusters[i] for i in perm]
    assert noma.slot_sum_rate(shuffled) == pytest.approx(noma.slot_sum_rate(clusters), rel=1e-12)


def test_oma_single_user_equals_noma():
    assoc = Association(clusters=((0,), (1,)), n_users=2)
    gains = np.array([[4e-9, 1e-10], [2e-10, 3e-9]])
    power = PowerAllocation(totals=(0.79, 0.79), fractions=((1.0,), (1.0,)))
    noise = 1.5e-9
    noma_rates = noma.decode_cluster(0, assoc, gains, power, noise, 15e3).rates
    oma_rates = noma.oma_rate(0, assoc, gains, power, noise, 15e3)
    assert oma_rates[0] == pytest.approx(noma_rates[0], rel=1e-12)


def test_oma_symmetric_users_equal_rates():
    assoc = Association(clusters=((0, 1),), n_users=2)
    gains = np.array([[3e-9, 3e-9]])
    power = PowerAllocation(totals=(0.79,), fractions=((0.5, 0.5),))
    rates = noma.oma_rate(0, assoc, gains, power, 1.5e-9, 15e3)
    assert rates[0] == pytest.approx(rates[1], rel=1e-15)


def test_oma_fixed_scenario_matches_hand_calc():
    assoc, gains, power, noise = two_uav_setup()
    rates = noma.oma_rate(0, assoc, gains, power, noise, 15e3)
    n = 2
    for k in (0, 1):
        inter = gains[1, k] * math.sqrt(0.79)
        sinr = gains[0, k] * math.sqrt(0.79 / n) / (inter / n + noise / n)
        want = (15e3 / n) * math.log2(1 + sinr)
        assert rates[k] == pytest.approx(want, rel=1e-12)


def test_rates_finite_and_nonnegative():
    assoc, gains, power, noise = two_uav_setup()
    for u in range(2):
        for r in noma.decode_cluster(u, assoc, gains, power, noise, 15e3).rates.values():
            assert r >= 0.0 and math.isfinite(r)
