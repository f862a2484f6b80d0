"""Rollout and training loops for the cooperative setup.

One unroll step wires the agents exactly as the cooperative protocol
dictates: the user agent reads the camera pose, emits a latent code, the
decoder expands it to a gesture, the interface agent reads that gesture
verbatim and emits the camera residual(s). Both agents log the same reward.

Training alternates: within an epoch (100 rollout/training cycles) only one
agent's parameters change while the other stays frozen.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import geometry as geo
from .. import numkit as nk
from .. import sim
from .. import vae as vae_mod
from .config import AMP_2D, AMP_2D_CENTER, AMP_3D, MarlConfig
from .ddpg import ddpg_update
from .nets import AgentNets, act, init_agent
from .replay import ReplayMemory, Transition

USER, IFACE = "user", "interface"


def push_nstep(replay: ReplayMemory, rows: list[Transition], n: int, gamma: float):
    """Convert an episode's 1-step transitions to n-step ones and store them.

    Each stored transition carries the discounted k-step reward sum
    (k = min(n, steps left)), the state k steps ahead, and the bootstrap
    factor gamma^k * (1 - done_k).
    """
    length = len(rows)
    for t in range(length):
        k = min(n, length - t)
        reward = 0.0
        for j in range(k):
            reward += (gamma ** j) * rows[t + j].reward
        last = rows[t + k - 1]
        boot = 0.0 if last.done else gamma ** k
        replay.push(Transition(
            state=rows[t].state, action=rows[t].action, reward=reward,
            next_state=last.next_state, done=last.done,
            peer_action=rows[t].peer_action,
            env_state=rows[t].env_state, next_env_state=last.next_env_state,
            bootstrap=boot))


@dataclass
class UnrollRecord:
    """One cooperative step, kept for replay pairing and wiring audits."""

    s_u: np.ndarray          # camera pose fed to the user agent
    z: np.ndarray            # user action: latent code
    a_u: np.ndarray          # decoded gesture, flattened
    s_i: np.ndarray          # interface observation (== a_u)
    a_i: np.ndarray          # interface action (tanh space)
    r_u: float
    r_i: float
    done: bool
    success: bool
    pose_after: np.ndarray
    substeps: int


def scale_action_2d(a: np.ndarray) -> np.ndarray:
    return AMP_2D_CENTER + AMP_2D * np.asarray(a, dtype=np.float64)


def scale_action_3d(a: np.ndarray) -> np.ndarray:
    return AMP_3D * np.asarray(a, dtype=np.float64)


def unroll_step(cfg: MarlConfig, env_cfg: sim.Env3DConfig, state: sim.Env3DState,
                user: AgentNets, iface: AgentNets, vae_ps: nk.ParamSet,
                vae_cfg: vae_mod.VaeConfig, rng: np.random.Generator,
                explore_user: bool, explore_iface: bool,
                sigma: float | None = None) -> tuple[UnrollRecord, sim.Env3DState]:
    sigma = cfg.sigma_explore if sigma is None else sigma
    s_u = state.pose.copy()
    z, _ = act(user, s_u, explore_user, sigma, rng)
    gesture = vae_mod.decode(z, cfg.gesture_steps, vae_ps, vae_cfg)
    a_u = gesture.reshape(-1)
    s_i = a_u.copy()
    a_i, _ = act(iface, s_i, explore_iface, sigma, rng)
    if cfg.mode == "two_instant":
        state2, reward, done = sim.step_3d(env_cfg, state, scale_action_3d(a_i))
        substeps = 1
    else:
        deltas = scale_action_3d(a_i.reshape(9, 6))
        state2, reward, done, substeps = sim.apply_deltas_3d(env_cfg, state, deltas)
    success = done and geo.summed_vertex_distance(
        state2.object_vertices(), state2.target_vertices) < env_cfg.success_eps
    rec = UnrollRecord(s_u=s_u, z=z, a_u=a_u, s_i=s_i, a_i=a_i,
                       r_u=reward, r_i=reward, done=done, success=success,
                       pose_after=state2.pose.copy(), substeps=substeps)
    return rec, state2


def run_marl_episode(cfg: MarlConfig, env_cfg: sim.Env3DConfig, user: AgentNets,
                     iface: AgentNets, vae_ps: nk.ParamSet, vae_cfg: vae_mod.VaeConfig,
                     rng: np.random.Generator, explore_user: bool, explore_iface: bool,
                     user_replay: ReplayMemory | None = None,
                     iface_replay: ReplayMemory | None = None,
                     audit: list | None = None, sigma: float | None = None) -> dict:
    """Roll one episode; optionally append transitions to both replay memories."""
    state = sim.reset_3d(env_cfg, rng)
    records: list[UnrollRecord] = []
    done = False
    while not done:
        rec, state = unroll_step(cfg, env_cfg, state, user, iface, vae_ps, vae_cfg,
                                 rng, explore_user, explore_iface, sigma=sigma)
        records.append(rec)
        done = rec.done
    if audit is not None:
        audit.extend(records)
    if user_replay is not None:
        # the user observes the environment state directly; no extra critic input
        rows = [Transition(rec.s_u, rec.z, rec.r_u, rec.pose_after, rec.done,
                           peer_action=rec.a_i)
                for rec in records]
        push_nstep(user_replay, rows, cfg.nstep, cfg.gamma)
    if iface_replay is not None:
        rows = []
        for t, rec in enumerate(records):
            nxt = records[t + 1].s_i if t + 1 < len(records) else np.zeros_like(rec.s_i)
            rows.append(Transition(rec.s_i, rec.a_i, rec.r_i, nxt, rec.done,
                                   env_state=rec.s_u.copy(),
                                   next_env_state=rec.pose_after.copy()))
        push_nstep(iface_replay, rows, cfg.nstep, cfg.gamma)
    return {
        "rl_steps": len(records),
        "env_steps": int(sum(r.substeps for r in records)),
        "reward": float(sum(r.r_i for r in records)),
        "success": records[-1].success,
    }


def run_2d_episode(cfg: MarlConfig, env_cfg: sim.Env2DConfig, iface: AgentNets,
                   rng: np.random.Generator, explore: bool,
                   replay: ReplayMemory | None = None,
                   sigma: float | None = None) -> dict:
    """One 2D episode against the oracle user."""
    sigma = cfg.sigma_explore if sigma is None else sigma
    state = sim.reset_2d(env_cfg, rng)
    fingers = sim.oracle_user_2d(env_cfg, state, rng).flat()
    done = False
    total = 0.0
    success = False
    steps = 0
    rows = []
    while not done:
        theta_before = state.theta.copy()
        a, _ = act(iface, fingers, explore, sigma, rng)
        state, r, done = sim.step_2d(env_cfg, state, scale_action_2d(a))
        steps += 1
        total += r
        success = done and geo.summed_vertex_distance(
            state.object_vertices(), state.target_vertices) < env_cfg.success_eps
        nxt = np.zeros(8) if done else sim.oracle_user_2d(env_cfg, state, rng).flat()
        if replay is not None:
            rows.append(Transition(fingers, a, r, nxt, done,
                                   env_state=theta_before, next_env_state=state.theta.copy()))
        fingers = nxt
    if replay is not None:
        push_nstep(replay, rows, cfg.nstep, cfg.gamma)
    return {"rl_steps": steps, "env_steps": steps, "reward": total, "success": success}


# ---------------------------------------------------------------------------
# run directory bookkeeping
# ---------------------------------------------------------------------------

METRIC_FIELDS = ["epoch", "env_steps", "success_count", "mean_reward", "mean_steps", "trained_agent"]


def write_resolved_config(out_dir: Path, payload: dict):
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "config.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o)}")


def append_metrics(out_dir: Path, row: dict):
    path = out_dir / "metrics.csv"
    new = not path.exists()
    with open(path, "a", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=METRIC_FIELDS)
        if new:
            w.writeheader()
        w.writerow({k: row[k] for k in METRIC_FIELDS})


def save_agent(nets: AgentNets, ckpt_dir: Path, prefix: str):
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    nk.save_params(nets.actor, ckpt_dir / f"{prefix}_actor.tpk")
    nk.save_params(nets.critic, ckpt_dir / f"{prefix}_critic.tpk")
    nk.save_params(nets.target_actor, ckpt_dir / f"{prefix}_target_actor.tpk")
    nk.save_params(nets.target_critic, ckpt_dir / f"{prefix}_target_critic.tpk")


def load_agent(ckpt_dir: Path, prefix: str, kind: str, cfg: MarlConfig,
               state_dim: int, action_dim: int, hidden: int, est_dim: int = 0,
               critic_state_dim: int | None = None) -> AgentNets:
    nets = init_agent(kind, state_dim, action_dim, hidden, np.random.default_rng(0),
                      cfg.actor_lr, cfg.critic_lr, est_dim=est_dim,
                      critic_state_dim=critic_state_dim)
    nets.actor.load_values_from(nk.load_params(Path(ckpt_dir) / f"{prefix}_actor.tpk"))
    nets.critic.load_values_from(nk.load_params(Path(ckpt_dir) / f"{prefix}_critic.tpk"))
    nets.target_actor.load_values_from(nk.load_params(Path(ckpt_dir) / f"{prefix}_target_actor.tpk"))
    nets.target_critic.load_values_from(nk.load_params(Path(ckpt_dir) / f"{prefix}_target_critic.tpk"))
    return nets


def agent_hash(nets: AgentNets) -> str:
    return nets.actor.sha256() + ":" + nets.critic.sha256()


# ---------------------------------------------------------------------------
# training drivers
# ---------------------------------------------------------------------------

def train_2d_interface(cfg: MarlConfig, env_cfg: sim.Env2DConfig, out_dir,
                       rng: np.random.Generator, oracle_mean: float | None = None,
                       target_ratio: float = 1.2, log=None) -> dict:
    """Single-agent DDPG against the oracle user; stops once the learned
    interface matches the analytic pipeline (success 100% and mean steps within
    target_ratio of the oracle mean) or the env-step budget runs out."""
    out_dir = Path(out_dir)
    if oracle_mean is None:
        oracle_mean = sim.mean_oracle_steps(env_cfg, 100, seed=int(rng.integers(1 << 31)))
    write_resolved_config(out_dir, {
        "kind": "train-2d", "marl": cfg.to_dict(), "env": vars(env_cfg).copy(),
        "oracle_mean": oracle_mean, "target_ratio": target_ratio,
    })
    iface = init_agent(IFACE, 8, 4, cfg.iface_hidden, rng, cfg.actor_lr, cfg.critic_lr,
                       critic_state_dim=8 + 4)
    replay = ReplayMemory(cfg.replay_capacity)
    env_steps = 0
    summary = {"converged_epoch": None, "env_steps_at_convergence": None,
               "oracle_mean": oracle_mean, "epochs": 0}
    t0 = time.time()
    for epoch in range(cfg.max_epochs):
        rewards, steps_l, succ = [], [], 0
        sigma = cfg.sigma_at(epoch)
        epoch_updates = 0
        for _ in range(cfg.cycles_per_epoch):
            stats = run_2d_episode(cfg, env_cfg, iface, rng, explore=True, replay=replay,
                                   sigma=sigma)
            env_steps += stats["env_steps"]
            rewards.append(stats["reward"])
            steps_l.append(stats["rl_steps"])
            succ += int(stats["success"])
            if len(replay) >= cfg.warmup:
                for _ in range(cfg.updates_per_cycle):
                    ddpg_update(iface, replay.sample(cfg.batch, rng), cfg,
                                actor_enabled=epoch_updates >= cfg.epoch_actor_freeze)
                    epoch_updates += 1
        mean_steps = float(np.mean(steps_l))
        append_metrics(out_dir, {
            "epoch": epoch, "env_steps": env_steps, "success_count": succ,
            "mean_reward": float(np.mean(rewards)), "mean_steps": mean_steps,
            "trained_agent": IFACE,
        })
        save_agent(iface, out_dir / "ckpt" / f"epoch-{epoch}", "iface")
        summary["epochs"] = epoch + 1
        if log:
            log(f"[train-2d] epoch {epoch} steps {env_steps} success {succ}/{cfg.cycles_per_epoch} "
                f"mean_steps {mean_steps:.1f} ({time.time() - t0:.0f}s)")
        if succ == cfg.cycles_per_epoch and mean_steps <= target_ratio * oracle_mean:
            summary["converged_epoch"] = epoch
            summary["env_steps_at_convergence"] = env_steps
            break
        if cfg.env_step_budget is not None and env_steps >= cfg.env_step_budget:
            break
    save_agent(iface, out_dir / "ckpt" / "final", "iface")
    summary["env_steps"] = env_steps
    with open(out_dir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
    return {"summary": summary, "iface": iface, "out_dir": out_dir}


def train_marl(cfg: MarlConfig, env_cfg: sim.Env3DConfig, vae_ckpt,
               out_dir, rng: np.random.Generator, vae_cfg: vae_mod.VaeConfig | None = None,
               log=None) -> dict:
    """Alternating cooperative training of the user and interface agents.

    The VAE checkpoint provides the frozen decoder (its encoder is unused).
    Epoch k trains the user agent when k is even, the interface when odd.
    """
    out_dir = Path(out_dir)
    vae_ckpt = Path(vae_ckpt)
    if not vae_ckpt.exists():
        raise FileNotFoundError(f"VAE checkpoint not found: {vae_ckpt}")
    vae_ps = nk.load_params(vae_ckpt)
    vae_cfg = vae_cfg or vae_mod.VaeConfig()
    write_resolved_config(out_dir, {
        "kind": "train-marl", "marl": cfg.to_dict(), "env": vars(env_cfg).copy(),
        "vae_checkpoint": str(vae_ckpt),
    })
    user = init_agent(USER, 6, cfg.latent, cfg.user_hidden, rng,
                      cfg.user_actor_lr or cfg.actor_lr, cfg.critic_lr,
                      est_dim=cfg.iface_action_dim)
    iface = init_agent(IFACE, cfg.iface_state_dim, cfg.iface_action_dim,
                       cfg.iface_hidden, rng, cfg.actor_lr, cfg.critic_lr,
                       critic_state_dim=cfg.iface_state_dim + 6)
    user_replay = ReplayMemory(cfg.replay_capacity)
    iface_replay = ReplayMemory(cfg.replay_capacity)
    env_steps = 0
    converged_epoch = None
    best_steps = np.inf
    best_epoch = -1
    frozen_hashes = []
    summary = {"converged_epoch": None, "env_steps_at_convergence": None, "epochs": 0}
    t0 = time.time()
    first = USER if cfg.first_trained == USER else IFACE
    second = IFACE if first == USER else USER
    for epoch in range(cfg.max_epochs):
        # optional warm start: the interface learns to read the user model's
        # initial encoding before the protocol co-evolves under alternation
        if epoch < cfg.warmstart_epochs:
            trained = IFACE
        elif (epoch - cfg.warmstart_epochs) % 2 == 0:
            trained = first
        else:
            trained = second
        trained_nets = user if trained == USER else iface
        frozen_nets = iface if trained == USER else user
        frozen_before = agent_hash(frozen_nets)
        rewards, steps_l, succ = [], [], 0
        sigma = cfg.sigma_at(epoch)
        epoch_updates = 0
        for _ in range(cfg.cycles_per_epoch):
            stats = run_marl_episode(
                cfg, env_cfg, user, iface, vae_ps, vae_cfg, rng,
                explore_user=(trained == USER) or cfg.explore_frozen,
                explore_iface=(trained == IFACE) or cfg.explore_frozen,
                user_replay=user_replay, iface_replay=iface_replay, sigma=sigma)
            env_steps += stats["env_steps"]
            rewards.append(stats["reward"])
            steps_l.append(stats["env_steps"])
            succ += int(stats["success"])
            replay = user_replay if trained == USER else iface_replay
            if len(replay) >= cfg.warmup:
                for _ in range(cfg.updates_per_cycle):
                    # critic re-converges to the newly unfrozen peer before the
                    # actor starts moving each epoch
                    ddpg_update(trained_nets, replay.sample(cfg.batch, rng), cfg,
                                actor_enabled=epoch_updates >= cfg.epoch_actor_freeze)
                    epoch_updates += 1
        frozen_after = agent_hash(frozen_nets)
        if frozen_before != frozen_after:
            raise RuntimeError(f"frozen agent changed during epoch {epoch}")
        frozen_hashes.append((epoch, trained, frozen_before, frozen_after))
        mean_steps = float(np.mean(steps_l))
        append_metrics(out_dir, {
            "epoch": epoch, "env_steps": env_steps, "success_count": succ,
            "mean_reward": float(np.mean(rewards)), "mean_steps": mean_steps,
            "trained_agent": trained,
        })
        ck = out_dir / "ckpt" / f"epoch-{epoch}"
        save_agent(user, ck, "user")
        save_agent(iface, ck, "iface")
        summary["epochs"] = epoch + 1
        if log:
            log(f"[train-marl] epoch {epoch} ({trained}) env_steps {env_steps} "
                f"success {succ}/{cfg.cycles_per_epoch} mean_steps {mean_steps:.1f} "
                f"({time.time() - t0:.0f}s)")
        if succ == cfg.cycles_per_epoch:
            if converged_epoch is None:
                converged_epoch = epoch
                summary["converged_epoch"] = epoch
                summary["env_steps_at_convergence"] = env_steps
            if mean_steps < best_steps - 1e-9:
                best_steps = mean_steps
                best_epoch = epoch
            elif epoch - best_epoch >= cfg.convergence_patience:
                break
        if cfg.env_step_budget is not None and env_steps >= cfg.env_step_budget:
            break
    ck = out_dir / "ckpt" / "final"
    save_agent(user, ck, "user")
    save_agent(iface, ck, "iface")
    summary["env_steps"] = env_steps
    with open(out_dir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
    return {"summary": summary, "user": user, "iface": iface,
            "out_dir": out_dir, "frozen_hashes": frozen_hashes}


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def evaluate_2d(env_cfg: sim.Env2DConfig, episodes: int, rng: np.random.Generator,
                iface: AgentNets | None = None, cfg: MarlConfig | None = None) -> dict:
    """Metrics with exploration off; iface=None runs the closed-form solver."""
    rewards, steps_all, steps_ok = [], [], []
    succ = 0
    for _ in range(episodes):
        if iface is None:
            out = sim.run_episode_2d(env_cfg, rng, lambda s, fp: geo.solve_affine2d(fp))
        else:
            out = run_2d_episode(cfg, env_cfg, iface, rng, explore=False)
        rewards.append(out["reward"])
        steps_all.append(out["rl_steps"] if "rl_steps" in out else out["steps"])
        if out["success"]:
            succ += 1
            steps_ok.append(steps_all[-1])
    return {
        "episodes": episodes,
        "mean_reward": float(np.mean(rewards)),
        "mean_steps": float(np.mean(steps_ok)) if steps_ok else float("nan"),
        "mean_steps_all": float(np.mean(steps_all)),
        "success_rate": succ / episodes,
    }


def evaluate_3d(cfg: MarlConfig, env_cfg: sim.Env3DConfig, user: AgentNets,
                iface: AgentNets, vae_ps: nk.ParamSet, vae_cfg: vae_mod.VaeConfig,
                episodes: int, rng: np.random.Generator) -> dict:
    rewards, steps_all, steps_ok = [], [], []
    succ = 0
    for _ in range(episodes):
        out = run_marl_episode(cfg, env_cfg, user, iface, vae_ps, vae_cfg, rng,
                               explore_user=False, explore_iface=False)
        rewards.append(out["reward"])
        steps_all.append(out["env_steps"])
        if out["success"]:
            succ += 1
            steps_ok.append(out["env_steps"])
    return {
        "episodes": episodes,
        "mean_reward": float(np.mean(rewards)),
        "mean_steps": float(np.mean(steps_ok)) if steps_ok else float("nan"),
        "mean_steps_all": float(np.mean(steps_all)),
        "success_rate": succ / episodes,
    }
