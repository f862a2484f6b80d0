"""Deterministic-policy actor-critic update on a replay batch."""

from __future__ import annotations

import numpy as np

from .. import numkit as nk
from ..numkit import tensor as T
from .config import MarlConfig
from .nets import AgentNets, actor_forward_t, critic_forward_t, soft_update


def ddpg_update(nets: AgentNets, batch: dict, cfg: MarlConfig,
                actor_enabled: bool = True) -> dict:
    """One critic regression step, one actor ascent step, target blending.

    The user agent's actor loss additionally carries the self-supervision
    term: squared L2 between its interface-action estimate and the logged
    interface action, with no extra weighting coefficient.
    """
    dt = nets.actor["fc1/weight"].data.dtype
    s = batch["state"].astype(dt, copy=False)
    a = batch["action"].astype(dt, copy=False)
    r = batch["reward"].astype(dt, copy=False)
    s2 = batch["next_state"].astype(dt, copy=False)
    done = batch["done"].astype(dt, copy=False)
    b = s.shape[0]

    # centralized critic: when the replay logs privileged environment state,
    # the critic observes it alongside the agent's own observation
    if "env_state" in batch:
        cs = np.concatenate([s, batch["env_state"].astype(dt, copy=False)], axis=1)
        cs2 = np.concatenate([s2, batch["next_env_state"].astype(dt, copy=False)], axis=1)
    else:
        cs, cs2 = s, s2

    # critic target: r + bootstrap * Q'(s', pi'(s')); rewards are scaled down
    # so value magnitudes stay near unit range for the regression. With n-step
    # transitions the replay supplies the discounted reward sum and the
    # bootstrap factor gamma^k * (1 - done_k) directly.
    with nk.no_grad():
        a2, _ = actor_forward_t(nets.target_actor, T.constant(s2))
        q2 = critic_forward_t(nets.target_critic, T.constant(cs2), a2).data[:, 0]
    if "bootstrap" in batch:
        boot = batch["bootstrap"].astype(dt, copy=False)
    else:
        boot = cfg.gamma * (1.0 - done)
    y = cfg.reward_scale * r + boot * q2

    q = critic_forward_t(nets.critic, T.constant(cs), T.constant(a))
    err = T.sub(q, T.constant(y.reshape(-1, 1)))
    critic_loss = T.tmean(T.square(err))
    grads = nk.backward(critic_loss, nets.critic)
    nk.adam_step(nets.critic, grads, nets.adam_critic)
    nets.updates += 1

    # actor: ascend Q(s, pi(s)); delayed behind the critic warmup and updated
    # every actor_delay-th call; user agent also fits its estimator head
    est_loss_val = None
    actor_obj = None
    if (actor_enabled and nets.updates > cfg.critic_warmup_updates
            and nets.updates % cfg.actor_delay == 0):
        with_est = nets.kind == "user" and "peer_action" in batch
        a_pi, est, pre = actor_forward_t(nets.actor, T.constant(s),
                                         with_estimate=with_est, with_preactivation=True)
        q_pi = critic_forward_t(nets.critic, T.constant(cs), a_pi)
        actor_loss = T.scale(T.tmean(q_pi), -1.0)
        if cfg.presat_penalty > 0:
            actor_loss = T.add(actor_loss, T.scale(T.tmean(T.square(pre)), cfg.presat_penalty))
        if with_est:
            peer = batch["peer_action"].astype(dt, copy=False)
            diff = T.sub(est, T.constant(peer))
            est_loss = T.scale(T.tsum(T.square(diff)), 1.0 / b)
            actor_loss = T.add(actor_loss, est_loss)
            est_loss_val = est_loss.item()
        grads = nk.backward(actor_loss, nets.actor)
        nk.adam_step(nets.actor, grads, nets.adam_actor)
        actor_obj = -actor_loss.item()

    soft_update(nets.actor, nets.target_actor, cfg.tau_target)
    soft_update(nets.critic, nets.target_critic, cfg.tau_target)

    return {
        "critic_loss": critic_loss.item(),
        "actor_objective": actor_obj,
        "estimation_loss": est_loss_val,
        "undersized_batch": bool(batch.get("undersized", False)),
    }
