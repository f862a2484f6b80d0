"""Finite-difference verification of tape gradients."""

from __future__ import annotations

import numpy as np

from .checkpoint import ParamSet
from .layers import backward as grad_map
from .tensor import Tensor


def grad_check(closure, params: ParamSet, epsilon: float = 1e-5,
               samples_per_param: int = 6, rng: np.random.Generator | None = None):
    """Compare tape gradients with central finite differences.

    `closure(params) -> scalar Tensor` must be deterministic and the params
    64-bit. A random subsample of entries is probed per parameter. Returns
    (max relative error, report rows).
    """
    rng = rng or np.random.default_rng(0)
    loss = closure(params)
    if not isinstance(loss, Tensor) or loss.data.size != 1:
        raise ValueError("closure must return a scalar Tensor")
    grads = grad_map(loss, params)
    rows = []
    worst = 0.0
    for name, p in params.items():
        flat = p.data.reshape(-1)
        n = flat.size
        idx = rng.choice(n, size=min(samples_per_param, n), replace=False)
        local_worst = 0.0
        for i in idx:
            orig = flat[i]
            flat[i] = orig + epsilon
            f_plus = closure(params).item()
            flat[i] = orig - epsilon
            f_minus = closure(params).item()
            flat[i] = orig
            fd = (f_plus - f_minus) / (2.0 * epsilon)
            an = float(grads[name].reshape(-1)[i])
            denom = max(1e-8, abs(fd) + abs(an))
            rel = abs(fd - an) / denom
            local_worst = max(local_worst, rel)
        rows.append((name, len(idx), local_worst))
        worst = max(worst, local_worst)
    return worst, rows


def format_grad_report(rows, worst: float | None = None) -> str:
    """Plain-text table of per-parameter worst relative errors."""
    name_w = max([len(r[0]) for r in rows] + [len("parameter")])
    lines = [f"{'parameter':<{name_w}}  {'probed':>6}  {'max rel err':>12}"]
    lines.append("-" * (name_w + 22))
    for name, count, rel in rows:
        lines.append(f"{name:<{name_w}}  {count:>6}  {rel:>12.3e}")
    if worst is not None:
        lines.append("-" * (name_w + 22))
        lines.append(f"{'worst':<{name_w}}  {'':>6}  {worst:>12.3e}")
    return "\n".join(lines)
