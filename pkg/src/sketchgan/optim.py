"""In-place parameter updates: Adam for training, heavy-ball for projection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor


@dataclass
class AdamState:
    """Adam moments for a fixed parameter list.

    Training defaults follow the DCGAN recipe (lr 2e-4, beta1 0.5);
    beta2/epsilon are the usual Adam defaults.
    """

    learning_rate: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, learning_rate=2e-4, beta1=0.5, beta2=0.999,
                   epsilon=1e-8):
        state = cls(learning_rate, beta1, beta2, epsilon)
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
        return state


@dataclass
class MomentumState:
    """Heavy-ball velocity: v <- momentum*v + g, p <- p - lr*v."""

    learning_rate: float = 0.01
    momentum: float = 0.9
    velocity: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, learning_rate=0.01, momentum=0.9):
        state = cls(learning_rate, momentum)
        state.velocity = [np.zeros_like(p.data) for p in params]
        return state


def _check_shapes(params, grads, slots, kind):
    if len(params) != len(grads) or len(params) != len(slots):
        raise ValueError(f"{kind}: {len(params)} params, {len(grads)} grads, "
                         f"{len(slots)} state slots")
    for p, g, s in zip(params, grads, slots):
        if g is None:
            raise ValueError(f"{kind}: missing gradient for param of shape {p.data.shape}")
        if g.shape != p.data.shape or s.shape != p.data.shape:
            raise ValueError(f"{kind}: shape mismatch param {p.data.shape} "
                             f"grad {g.shape} state {s.shape}")


def adam_step(params: list[Tensor], grads, state: AdamState) -> None:
    _check_shapes(params, grads, state.m, "adam_step")
    state.step_count += 1
    t = state.step_count
    lr, b1, b2, eps = state.learning_rate, state.beta1, state.beta2, state.epsilon
    bias1 = 1.0 - b1 ** t
    bias2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        dt = p.data.dtype.type
        m *= dt(b1)
        m += dt(1.0 - b1) * g
        v *= dt(b2)
        v += dt(1.0 - b2) * (g * g)
        m_hat = m / dt(bias1)
        v_hat = v / dt(bias2)
        p.data -= dt(lr) * m_hat / (np.sqrt(v_hat) + dt(eps))


def momentum_step(params: list[Tensor], grads, state: MomentumState) -> None:
    _check_shapes(params, grads, state.velocity, "momentum_step")
    lr, mom = state.learning_rate, state.momentum
    for p, g, v in zip(params, grads, state.velocity):
        dt = p.data.dtype.type
        v *= dt(mom)
        v += g
        p.data -= dt(lr) * v


def zero_grads(params) -> None:
    for p in params:
        p.grad = None
