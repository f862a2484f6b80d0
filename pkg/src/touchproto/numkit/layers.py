"""Network building blocks: fully connected layers and GRU cells.

Parameters live in a ParamSet under `prefix/...` names. Forward helpers take
either a single sample (vector) or a batch (rows) and run on the autodiff
tape. Initialization is uniform fan-in scaling, with a small-scale override
for final actor layers so initial actions sit near zero.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .checkpoint import ParamSet
from .tensor import ShapeError, Tensor

_FC_ACTIVATIONS = ("relu", "tanh", "none")
_GRU_ACTIVATIONS = ("relu", "tanh", "none")


def init_fc(ps: ParamSet, prefix: str, in_dim: int, out_dim: int, rng: np.random.Generator,
            weight_scale: float | None = None, dtype=np.float32):
    """Create `prefix/weight` (in, out) and `prefix/bias` (out,)."""
    k = weight_scale if weight_scale is not None else 1.0 / np.sqrt(in_dim)
    ps.add(f"{prefix}/weight", rng.uniform(-k, k, size=(in_dim, out_dim)).astype(dtype))
    ps.add(f"{prefix}/bias", rng.uniform(-k, k, size=(out_dim,)).astype(dtype))


def init_gru(ps: ParamSet, prefix: str, in_dim: int, hidden: int, rng: np.random.Generator,
             dtype=np.float32):
    """Create the three gate blocks of a GRU cell (update z, reset r, candidate n)."""
    k = 1.0 / np.sqrt(hidden)
    for gate in ("z", "r", "n"):
        ps.add(f"{prefix}/w_{gate}", rng.uniform(-k, k, size=(in_dim, hidden)).astype(dtype))
        ps.add(f"{prefix}/u_{gate}", rng.uniform(-k, k, size=(hidden, hidden)).astype(dtype))
        ps.add(f"{prefix}/b_{gate}", rng.uniform(-k, k, size=(hidden,)).astype(dtype))


def _as_rows(x) -> tuple[Tensor, bool]:
    t = x if isinstance(x, Tensor) else T.constant(np.asarray(x))
    if t.data.ndim == 1:
        return T.constant(t.data[None, :]) if not t.requires_grad else _reshape_row(t), True
    if t.data.ndim != 2:
        raise ShapeError(f"expected vector or rows, got shape {t.data.shape}")
    return t, False


def _reshape_row(t: Tensor) -> Tensor:
    out_data = t.data[None, :]

    def backward(g):
        T._accum(t, g[0])

    return T._node(out_data, (t,), backward)


def forward_fc(x, layer: dict[str, Tensor], normalize: bool = False,
               activation: str = "relu") -> Tensor:
    """y = activation(layernorm?(x @ W + b)). `layer` is a ParamSet slice."""
    if activation not in _FC_ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}")
    rows, squeeze = _as_rows(x)
    w, b = layer["weight"], layer["bias"]
    if rows.data.shape[-1] != w.data.shape[0]:
        raise ShapeError(f"input width {rows.data.shape[-1]} != layer input width {w.data.shape[0]}")
    y = T.linear(rows, w, b)
    if normalize:
        y = T.layer_norm(y)
    if activation == "relu":
        y = T.relu(y)
    elif activation == "tanh":
        y = T.tanh(y)
    return _squeeze_row(y) if squeeze else y


def _squeeze_row(t: Tensor) -> Tensor:
    out_data = t.data[0]

    def backward(g):
        T._accum(t, g[None, :])

    return T._node(out_data, (t,), backward)


def forward_gru_step(x, h, cell: dict[str, Tensor], candidate_activation: str = "tanh") -> Tensor:
    """One GRU update: sigmoid gates, configurable candidate nonlinearity.

        z = sigmoid(x Wz + h Uz + bz)
        r = sigmoid(x Wr + h Ur + br)
        n = act(x Wn + r * (h Un) + bn)
        h' = (1 - z) * n + z * h
    """
    if candidate_activation not in _GRU_ACTIVATIONS:
        raise ValueError(f"unknown candidate activation {candidate_activation!r}")
    xr, squeeze = _as_rows(x)
    hr, _ = _as_rows(h)
    if xr.data.shape[-1] != cell["w_z"].data.shape[0]:
        raise ShapeError(f"input width {xr.data.shape[-1]} != cell input width {cell['w_z'].data.shape[0]}")
    if hr.data.shape[-1] != cell["u_z"].data.shape[0]:
        raise ShapeError(f"hidden width {hr.data.shape[-1]} != cell hidden width {cell['u_z'].data.shape[0]}")
    z = T.sigmoid(T.add(T.linear(xr, cell["w_z"], cell["b_z"]), T.matmul(hr, cell["u_z"])))
    r = T.sigmoid(T.add(T.linear(xr, cell["w_r"], cell["b_r"]), T.matmul(hr, cell["u_r"])))
    n_pre = T.add(T.linear(xr, cell["w_n"], cell["b_n"]), T.mul(r, T.matmul(hr, cell["u_n"])))
    if candidate_activation == "relu":
        n = T.relu(n_pre)
    elif candidate_activation == "tanh":
        n = T.tanh(n_pre)
    else:
        n = n_pre
    one_minus_z = T.sub(T.constant(np.ones_like(z.data)), z)
    h_new = T.add(T.mul(one_minus_z, n), T.mul(z, hr))
    return _squeeze_row(h_new) if squeeze else h_new


def backward(loss: Tensor, params: ParamSet) -> dict[str, np.ndarray]:
    """Gradient map for every parameter; zeros where the loss does not reach."""
    params.zero_grad()
    T.backward(loss)
    out = {}
    for name, t in params.items():
        out[name] = t.grad if t.grad is not None else np.zeros_like(t.data)
    return out
