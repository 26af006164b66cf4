"""Benchmark the compiled MLP kernels against the numpy fallback.

Times the three kernel entry points at training shapes and a short
end-to-end training slice under each backend, and checks that both
produce the same numbers. Run: python benchmarks/bench_backends.py
"""
import time

import numpy as np

from skynoma import backend
from skynoma.agent import HyperParams
from skynoma.env import SimConfig
from skynoma.neuralnet import AdamState, QNetwork, train_step


def time_call(fn, repeats=300):
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats * 1e6  # us


def bench_kernels():
    rng = np.random.default_rng(0)
    n_in, hidden, n_out, batch = 17, 70, 63, 128
    net = QNetwork(n_in, n_out, seed=1, hidden=hidden)
    x1 = rng.normal(size=(1, n_in))
    xb = rng.normal(size=(batch, n_in))
    actions = rng.integers(0, n_out, size=batch)
    targets = rng.normal(size=batch)

    rows = []
    for name in backend.available_backends():
        k = backend.get_kernels(name)
        fwd1 = time_call(lambda: k.qvalues(x1, *net.params))
        fwdb = time_call(lambda: k.qvalues(xb, *net.params))
        lg = time_call(lambda: k.loss_and_grads(xb, actions, targets, *net.params))

        step_net = QNetwork(n_in, n_out, seed=1, hidden=hidden)
        opt = AdamState().bind(step_net)
        full = time_call(lambda: train_step(step_net, opt, xb, actions, targets, k), repeats=200)
        rows.append((name, fwd1, fwdb, lg, full))

    print(f"{'backend':<8} {'fwd(1)':>9} {'fwd(128)':>9} {'grads':>9} {'train_step':>11}")
    for name, f1, fb, lg, full in rows:
        print(f"{name:<8} {f1:>7.1f}us {fb:>7.1f}us {lg:>7.1f}us {full:>9.1f}us")
    if len(rows) == 2:
        speedup = rows[0][4] / rows[1][4]
        faster = rows[1][0] if speedup > 1 else rows[0][0]
        print(f"train_step speedup: {max(speedup, 1/speedup):.2f}x in favor of {faster}")


def check_agreement():
    names = backend.available_backends()
    if len(names) < 2:
        print("only one backend available; skipping agreement check")
        return
    rng = np.random.default_rng(2)
    net = QNetwork(17, 63, seed=3)
    xb = rng.normal(size=(64, 17))
    actions = rng.integers(0, 63, size=64)
    targets = rng.normal(size=64)
    results = []
    for name in names:
        k = backend.get_kernels(name)
        loss, *grads = k.loss_and_grads(xb, actions, targets, *net.params)
        results.append((loss, grads))
    (la, ga), (lb, gb) = results
    rel = abs(la - lb) / abs(la)
    worst = max(
        float(np.max(np.abs(a - b) / (np.abs(a) + 1e-300))) for a, b in zip(ga, gb)
    )
    print(f"backend agreement: loss rel err {rel:.2e}, worst grad rel err {worst:.2e}")


def bench_training_slice():
    cfg = SimConfig(x_max=500, y_max=500, map_cells=50, uav_init_xy="origin", horizon=60.0)
    hyper = HyperParams(replay_capacity=540)
    from skynoma.training import train

    original = backend.ACTIVE
    try:
        for name in backend.available_backends():
            backend.ACTIVE = backend.get_kernels(name)
            t0 = time.perf_counter()
            train("sdqn3d", cfg, hyper, seed=1, episodes=6)
            dt = time.perf_counter() - t0
            print(f"{name}: 6 training episodes in {dt:.2f}s")
    finally:
        backend.ACTIVE = original


if __name__ == "__main__":
    print(f"active backend: {backend.ACTIVE.NAME}")
    bench_kernels()
    check_agreement()
    bench_training_slice()
