"""Adam with bias correction and a step-halving learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["OptimState", "init_optim", "scheduled_lr", "optim_step"]


@dataclass
class OptimState:
    m: dict
    v: dict
    step: int = 0
    lr: float = 1e-4
    base_lr: float = 1e-4
    halve_every: int = 200_000
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_optim(params: dict, lr: float = 1e-4, halve_every: int = 200_000) -> OptimState:
    if lr <= 0 or halve_every <= 0:
        raise ValueError(f"need lr > 0 and halve_every > 0, got {lr}, {halve_every}")
    return OptimState(
        m={k: np.zeros_like(p) for k, p in params.items()},
        v={k: np.zeros_like(p) for k, p in params.items()},
        lr=lr,
        base_lr=lr,
        halve_every=halve_every,
    )


def scheduled_lr(base_lr: float, step: int, halve_every: int) -> float:
    """Learning rate after ``step`` completed updates."""
    return base_lr * 0.5 ** (step // halve_every)


def optim_step(params: dict, grads: dict, state: OptimState) -> tuple[dict, OptimState]:
    """One Adam update; returns fresh ``(params, state)`` and leaves the inputs untouched.

    The update uses ``state.lr``; afterwards the step counter advances and
    the stored lr is recomputed from the halving schedule.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient in layer {name!r} at step {state.step + 1}")
    if set(grads) != set(params):
        raise ValueError(f"gradient names {sorted(grads)} do not match parameters {sorted(params)}")

    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    new_params, new_m, new_v = {}, {}, {}
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=p.dtype)
        if g.shape != p.shape:
            raise ValueError(f"{name}: gradient shape {g.shape} != parameter shape {p.shape}")
        m = b1 * state.m[name] + (1.0 - b1) * g
        v = b2 * state.v[name] + (1.0 - b2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        new_params[name] = (p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.dtype)
        new_m[name] = m.astype(p.dtype)
        new_v[name] = v.astype(p.dtype)

    new_state = OptimState(
        m=new_m,
        v=new_v,
        step=t,
        lr=scheduled_lr(state.base_lr, t, state.halve_every),
        base_lr=state.base_lr,
        halve_every=state.halve_every,
        beta1=b1,
        beta2=b2,
        eps=state.eps,
    )
    return new_params, new_state
