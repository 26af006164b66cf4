"""Fully-connected Q-function approximator with hand-rolled backprop.

One hidden ReLU layer (70 nodes by default), identity outputs, Adam
optimizer, mean squared TD error on the taken action only. The heavy
lifting lives in the kernel backend (compiled or numpy).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import backend

__all__ = ["QNetwork", "AdamState", "forward", "train_step", "copy_params",
           "save_checkpoint", "load_checkpoint"]

HIDDEN_NODES = 70
CHECKPOINT_VERSION = 1


class QNetwork:
    """input -> hidden ReLU -> linear action values."""

    def __init__(self, n_inputs: int, n_actions: int, seed, hidden: int = HIDDEN_NODES):
        self.n_inputs = n_inputs
        self.n_actions = n_actions
        self.hidden = hidden
        rng = np.random.default_rng(seed)
        # uniform init scaled by fan-in
        lim1 = 1.0 / np.sqrt(n_inputs)
        lim2 = 1.0 / np.sqrt(hidden)
        self.w1 = rng.uniform(-lim1, lim1, size=(n_inputs, hidden))
        self.b1 = np.zeros(hidden)
        self.w2 = rng.uniform(-lim2, lim2, size=(hidden, n_actions))
        self.b2 = np.zeros(n_actions)

    @property
    def params(self) -> tuple[np.ndarray, ...]:
        return (self.w1, self.b1, self.w2, self.b2)


@dataclass
class AdamState:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    moments1: list = field(default_factory=list)
    moments2: list = field(default_factory=list)

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")

    def bind(self, net: QNetwork) -> "AdamState":
        self.moments1 = [np.zeros_like(p) for p in net.params]
        self.moments2 = [np.zeros_like(p) for p in net.params]
        return self


def forward(net: QNetwork, state: np.ndarray, kernels=None) -> np.ndarray:
    """Action values for one state vector or a (B, n_inputs) batch."""
    k = kernels or backend.ACTIVE
    x = np.asarray(state, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != net.n_inputs:
        raise ValueError(f"expected {net.n_inputs} inputs, got {x.shape[1]}")
    q = k.qvalues(x, net.w1, net.b1, net.w2, net.b2)
    return q[0] if single else q


def train_step(
    net: QNetwork,
    opt: AdamState,
    states: np.ndarray,
    actions: np.ndarray,
    targets: np.ndarray,
    kernels=None,
) -> float:
    """One optimizer update on a batch; returns the pre-update loss."""
    k = kernels or backend.ACTIVE
    states = np.asarray(states, dtype=float)
    actions = np.asarray(actions, dtype=np.int64)
    targets = np.asarray(targets, dtype=float)
    if states.ndim != 2 or states.shape[0] == 0:
        raise ValueError("batch must be a non-empty 2D array")
    if not np.all(np.isfinite(targets)):
        raise ValueError("targets must be finite")
    if not opt.moments1:
        opt.bind(net)
    loss, *grads = k.loss_and_grads(states, actions, targets, net.w1, net.b1, net.w2, net.b2)
    opt.step += 1
    k.adam_step(
        net.params, grads, opt.moments1, opt.moments2,
        opt.step, opt.learning_rate, opt.beta1, opt.beta2, opt.eps,
    )
    return loss


def copy_params(source: QNetwork, dest: QNetwork) -> None:
    """Make ``dest`` an exact, independent parameter copy of ``source``."""
    if (source.n_inputs, source.hidden, source.n_actions) != (
        dest.n_inputs, dest.hidden, dest.n_actions
    ):
        raise ValueError("networks must share a topology")
    dest.w1 = source.w1.copy()
    dest.b1 = source.b1.copy()
    dest.w2 = source.w2.copy()
    dest.b2 = source.b2.copy()


def save_checkpoint(net: QNetwork, path) -> None:
    np.savez(
        path,
        version=CHECKPOINT_VERSION,
        n_inputs=net.n_inputs,
        n_actions=net.n_actions,
        hidden=net.hidden,
        w1=net.w1, b1=net.b1, w2=net.w2, b2=net.b2,
    )


def load_checkpoint(path) -> QNetwork:
    data = np.load(path)
    if int(data["version"]) != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {int(data['version'])}")
    net = QNetwork(int(data["n_inputs"]), int(data["n_actions"]), seed=0,
                   hidden=int(data["hidden"]))
    net.w1 = data["w1"].copy()
    net.b1 = data["b1"].copy()
    net.w2 = data["w2"].copy()
    net.b2 = data["b2"].copy()
    return net
