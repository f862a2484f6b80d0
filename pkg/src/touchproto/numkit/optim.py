"""Adam optimizer over ParamSets."""

from __future__ import annotations

import numpy as np

from .checkpoint import ParamSet
from .tensor import ContractError


class AdamState:
    """First/second moments per parameter plus the shared step counter."""

    def __init__(self, params: ParamSet, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.step = 0
        self.m = {n: np.zeros_like(t.data) for n, t in params.items()}
        self.v = {n: np.zeros_like(t.data) for n, t in params.items()}


def adam_step(params: ParamSet, grads: dict[str, np.ndarray], state: AdamState):
    """Bias-corrected Adam update in place; returns (params, state)."""
    missing = [n for n in params.names() if n not in grads]
    if missing:
        raise ContractError(f"gradients missing for {missing[:3]}{'...' if len(missing) > 3 else ''}")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.data.shape:
            raise ContractError(f"gradient shape {g.shape} != parameter shape {p.data.shape} for {name}")
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.data -= (state.lr / c1) * m / (np.sqrt(v / c2) + state.eps)
    return params, state
