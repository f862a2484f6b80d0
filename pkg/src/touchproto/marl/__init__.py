"""Cooperative two-agent DDPG: user agent, interface agent, training loops."""

from .config import AMP_2D, AMP_2D_CENTER, AMP_3D, MarlConfig
from .ddpg import ddpg_update
from .loops import (
    UnrollRecord,
    agent_hash,
    evaluate_2d,
    evaluate_3d,
    load_agent,
    run_2d_episode,
    run_marl_episode,
    save_agent,
    scale_action_2d,
    scale_action_3d,
    train_2d_interface,
    train_marl,
    unroll_step,
)
from .nets import AgentNets, act, actor_forward_t, critic_forward_t, init_agent, soft_update
from .replay import ReplayMemory, Transition

__all__ = [
    "AMP_2D", "AMP_2D_CENTER", "AMP_3D", "AgentNets", "MarlConfig",
    "ReplayMemory", "Transition", "UnrollRecord", "act", "actor_forward_t",
    "agent_hash", "critic_forward_t", "ddpg_update", "evaluate_2d",
    "evaluate_3d", "init_agent", "load_agent", "run_2d_episode",
    "run_marl_episode", "save_agent", "scale_action_2d", "scale_action_3d",
    "soft_update", "train_2d_interface", "train_marl", "unroll_step",
]
