"""Actor/critic networks for the user and interface agents.

Hidden layers follow the FCX pattern: fully connected with layer
normalization and ReLU. Actor outputs are tanh-bounded; final actor layers
start at 1e-3 scale so initial actions are near zero. Critics concatenate
the action after their first hidden layer and end in a linear unit.

The user actor carries a second head, branched off the first hidden layer,
that predicts the interface's action (the self-supervision signal).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import numkit as nk
from ..numkit import tensor as T

FINAL_LAYER_SCALE = 1e-3


@dataclass
class AgentNets:
    actor: nk.ParamSet
    critic: nk.ParamSet
    target_actor: nk.ParamSet
    target_critic: nk.ParamSet
    adam_actor: nk.AdamState
    adam_critic: nk.AdamState
    kind: str                 # "user" or "interface"
    hidden: int
    state_dim: int
    action_dim: int
    est_dim: int = 0          # user only: size of the predicted interface action
    critic_state_dim: int = 0  # critic observation width (may exceed state_dim)
    updates: int = 0          # ddpg updates applied so far


def _init_actor(kind, state_dim, action_dim, hidden, est_dim, rng, seed, dtype):
    ps = nk.ParamSet(seed=seed, version="1")
    nk.init_fc(ps, "fc1", state_dim, hidden, rng, dtype=dtype)
    nk.init_fc(ps, "fc2", hidden, hidden, rng, dtype=dtype)
    if kind == "user":
        # the user's latent head starts at fan-in scale: a near-zero initial
        # encoding would hand the interface a dead channel for a whole epoch
        nk.init_fc(ps, "out", hidden, action_dim, rng, dtype=dtype)
        nk.init_fc(ps, "est_hidden", hidden, hidden, rng, dtype=dtype)
        nk.init_fc(ps, "est_out", hidden, est_dim, rng, weight_scale=FINAL_LAYER_SCALE, dtype=dtype)
    else:
        nk.init_fc(ps, "out", hidden, action_dim, rng, weight_scale=FINAL_LAYER_SCALE, dtype=dtype)
    return ps


def _init_critic(state_dim, action_dim, hidden, rng, seed, dtype):
    ps = nk.ParamSet(seed=seed, version="1")
    nk.init_fc(ps, "fc1", state_dim, hidden, rng, dtype=dtype)
    nk.init_fc(ps, "fc2", hidden + action_dim, hidden, rng, dtype=dtype)
    nk.init_fc(ps, "out", hidden, 1, rng, dtype=dtype)
    return ps


def init_agent(kind: str, state_dim: int, action_dim: int, hidden: int,
               rng: np.random.Generator, actor_lr: float, critic_lr: float,
               est_dim: int = 0, critic_state_dim: int | None = None,
               dtype=np.float32) -> AgentNets:
    """critic_state_dim > state_dim gives the critic privileged environment
    state during training (centralized critic); the actor never sees it."""
    if kind not in ("user", "interface"):
        raise ValueError(f"unknown agent kind {kind!r}")
    seed = int(rng.integers(1 << 31))
    cs = state_dim if critic_state_dim is None else critic_state_dim
    actor = _init_actor(kind, state_dim, action_dim, hidden, est_dim, rng, seed, dtype)
    critic = _init_critic(cs, action_dim, hidden, rng, seed, dtype)
    return AgentNets(
        actor=actor,
        critic=critic,
        target_actor=actor.copy(),
        target_critic=critic.copy(),
        adam_actor=nk.AdamState(actor, lr=actor_lr),
        adam_critic=nk.AdamState(critic, lr=critic_lr),
        kind=kind,
        hidden=hidden,
        state_dim=state_dim,
        action_dim=action_dim,
        est_dim=est_dim,
        critic_state_dim=cs,
    )


def actor_forward_t(ps: nk.ParamSet, s, with_estimate: bool = False,
                    with_preactivation: bool = False):
    """Tape-recorded actor pass. Returns (tanh action, estimate or None[, pre-tanh])."""
    h1 = nk.forward_fc(s, ps.slice("fc1"), normalize=True, activation="relu")
    h2 = nk.forward_fc(h1, ps.slice("fc2"), normalize=True, activation="relu")
    pre = nk.forward_fc(h2, ps.slice("out"), activation="none")
    a = T.tanh(pre)
    est = None
    if with_estimate:
        he = nk.forward_fc(h1, ps.slice("est_hidden"), normalize=True, activation="relu")
        est = nk.forward_fc(he, ps.slice("est_out"), activation="none")
    if with_preactivation:
        return a, est, pre
    return a, est


def critic_forward_t(ps: nk.ParamSet, s, a):
    """Tape-recorded critic pass: action joins after the first hidden layer."""
    h1 = nk.forward_fc(s, ps.slice("fc1"), normalize=True, activation="relu")
    h1a = T.concat([h1, a if isinstance(a, T.Tensor) else T.constant(a)], axis=-1)
    h2 = nk.forward_fc(h1a, ps.slice("fc2"), normalize=True, activation="relu")
    return nk.forward_fc(h2, ps.slice("out"), activation="none")


def act(nets: AgentNets, state: np.ndarray, explore: bool, sigma: float,
        rng: np.random.Generator | None = None, with_estimate: bool = False):
    """Deterministic policy output for one state, optionally with Gaussian
    exploration noise (clipped back into [-1, 1])."""
    dt = nets.actor["fc1/weight"].data.dtype
    s = np.asarray(state, dtype=dt).reshape(1, -1)
    with nk.no_grad():
        a, est = actor_forward_t(nets.actor, T.constant(s), with_estimate=with_estimate)
    out = a.data[0].astype(np.float64)
    if explore:
        out = np.clip(out + rng.normal(0.0, sigma, size=out.shape), -1.0, 1.0)
    return (out, est.data[0].astype(np.float64) if est is not None else None)


def soft_update(online: nk.ParamSet, target: nk.ParamSet, tau: float):
    """target <- tau * online + (1 - tau) * target."""
    for name, t in target.items():
        t.data *= (1.0 - tau)
        t.data += tau * online[name].data
