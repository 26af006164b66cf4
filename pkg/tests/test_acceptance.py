"""Acceptance suite: one test per criterion, at its stated tolerance.

The exact property criteria run the shared verification checks. The
directional trend criteria train the desk-scale scenarios (500 m map,
teams of users departing the control center, 3 fixed seeds) and compare
medians; each test prints its criterion verdict on one line.

These are the slowest tests in the repo (the trend ones train dozens of
models); run them with `pytest tests/test_acceptance.py -v`.
"""
import numpy as np
import pytest

from skynoma import verification
from skynoma.agent import HyperParams
from skynoma.env import SimConfig, audit_trace
from skynoma.training import (
    episodes_to_fraction_of_max,
    evaluate,
    final_level,
    train,
)

SEEDS = (1, 2, 3)
EPISODES = 70

DESK = SimConfig(
    x_max=500.0,
    y_max=500.0,
    map_cells=50,
    uav_init_xy="origin",
    dest_mode="teams",
    dest_team_spread=8,
)
HYPER = HyperParams()


def report(name: str, passed: bool, detail: str) -> None:
    print(f"[{'PASS' if passed else 'FAIL'}] acceptance: {name}: {detail}")


@pytest.fixture(scope="module")
def trained():
    """Train every scheme the trend criteria need, once per seed."""
    results = {}
    for scheme in ("sdqn3d", "sdqn3d-oma", "mutual", "private-dqn"):
        results[scheme] = [
            train(scheme, DESK, HYPER, seed=seed, episodes=EPISODES) for seed in SEEDS
        ]
    return results


def median_gap_pct(numer, denom) -> float:
    return float(np.median([100.0 * (a / b - 1.0) for a, b in zip(numer, denom)]))


# -- exact property criteria -------------------------------------------------


def test_channel_goldens_match_oracle():
    res = verification.check_channel_goldens()
    anchors = verification.check_channel_anchors()
    report("channel-goldens", res.passed and anchors.passed, f"{res.detail}; {anchors.detail}")
    assert res.passed, res.detail
    assert anchors.passed, anchors.detail


def test_sinr_pipeline_equals_bruteforce():
    res = verification.check_sinr_oracle(cases=200)
    report("sinr-oracle-200-cases", res.passed, res.detail)
    assert res.passed, res.detail


def test_clustering_criteria():
    mono = verification.check_kmeans_monotone(instances=100)
    inv = verification.check_cluster_invariants(instances=100)
    opt = verification.check_kmeans_near_optimal(instances=12)
    ok = mono.passed and inv.passed and opt.passed
    report("clustering", ok, f"{mono.detail}; {inv.detail}; {opt.detail}")
    assert mono.passed, mono.detail
    assert inv.passed, inv.detail
    assert opt.passed, opt.detail


def test_learning_machinery():
    grad = verification.check_gradients()
    mask = verification.check_mask_exclusion(draws=100_000)
    replay = verification.check_replay_uniformity()
    td = verification.check_td_target()
    ok = all(c.passed for c in (grad, mask, replay, td))
    report(
        "learning-machinery", ok,
        f"{grad.detail}; {mask.detail}; {replay.detail}; {td.detail}",
    )
    for check in (grad, mask, replay, td):
        assert check.passed, check.detail


# -- trend criteria ----------------------------------------------------------


def test_noma_beats_oma(trained):
    noma_fin = [final_level(r.throughputs) for r in trained["sdqn3d"]]
    oma_fin = [final_level(r.throughputs) for r in trained["sdqn3d-oma"]]
    gap = median_gap_pct(noma_fin, oma_fin)
    report("noma-over-oma", gap >= 5.0, f"median gap {gap:+.1f}% (need >= +5%)")
    assert gap >= 5.0, f"NOMA over OMA median gap {gap:+.1f}% below +5%"


def test_sharing_speeds_convergence(trained):
    sdqn = [final_level(r.throughputs) for r in trained["sdqn3d"]]
    mutual = [final_level(r.throughputs) for r in trained["mutual"]]
    private = [final_level(r.throughputs) for r in trained["private-dqn"]]
    ep_sdqn = float(np.median([episodes_to_fraction_of_max(r.throughputs) for r in trained["sdqn3d"]]))
    ep_priv = float(np.median([episodes_to_fraction_of_max(r.throughputs) for r in trained["private-dqn"]]))

    sm = median_gap_pct(sdqn, mutual)
    mp = median_gap_pct(mutual, private)
    sp = median_gap_pct(sdqn, private)
    ok = ep_sdqn < ep_priv and sm >= 0.0 and mp >= 0.0 and sp >= 3.0
    report(
        "sharing-speeds-convergence", ok,
        f"episodes-to-90%: sdqn {ep_sdqn:.0f} vs private {ep_priv:.0f}; "
        f"gaps sdqn/mutual {sm:+.1f}%, mutual/private {mp:+.1f}%, sdqn/private {sp:+.1f}%",
    )
    assert ep_sdqn < ep_priv, f"episodes-to-90%: sdqn {ep_sdqn} !< private {ep_priv}"
    assert sm >= 0.0, f"sdqn below mutual by {sm:+.1f}%"
    assert mp >= 0.0, f"mutual below private by {mp:+.1f}%"
    assert sp >= 3.0, f"sdqn over private {sp:+.1f}% below +3%"


def test_reclustering_benefit(trained):
    gaps, pre_gaps = [], []
    pre_slots = int(round(DESK.recluster_interval / DESK.dt))
    for res in trained["sdqn3d"]:
        on = evaluate(res, eval_seed=(res.seed, 0), recluster=True)
        off = evaluate(res, eval_seed=(res.seed, 0), recluster=False)
        gaps.append(100.0 * (on.throughput_bits() / off.throughput_bits() - 1.0))
        pre_on = float(on.slot_sum_rates[:pre_slots].sum())
        pre_off = float(off.slot_sum_rates[:pre_slots].sum())
        pre_gaps.append(100.0 * (pre_on / pre_off - 1.0))
    gap = float(np.median(gaps))
    worst_pre = max(abs(g) for g in pre_gaps)
    ok = gap >= 10.0 and worst_pre <= 2.0
    report(
        "reclustering-benefit", ok,
        f"median episode gap {gap:+.1f}% (need >= +10%), "
        f"pre-interval gap magnitude {worst_pre:.2f}% (need <= 2%)",
    )
    assert gap >= 10.0, f"re-clustering gain {gap:+.1f}% below +10%"
    assert worst_pre <= 2.0, f"pre-interval gap {worst_pre:.2f}% exceeds 2%"


def test_constraint_audit_zero_violations(trained):
    checked = 0
    for scheme, results in trained.items():
        for res in results:
            trace = evaluate(res, eval_seed=(res.seed, 9))
            problems = audit_trace(trace, res.config)
            assert problems == [], f"{scheme} seed {res.seed}: {problems[:3]}"
            checked += len(trace)
    report("constraint-audit", True, f"{checked} trace rows clean across {len(trained)} schemes")
