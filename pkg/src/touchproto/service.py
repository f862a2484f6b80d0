"""Session service exposing trained protocols over a WebSocket JSON wire.

Wire format: one JSON text message per WebSocket frame, shaped
{"type": ..., "session": ..., "payload": {...}}. Every request produces
exactly one reply; malformed requests produce an "error" reply and leave
the session untouched. Message types:

  hello          declare env kind ("2d"/"3d"), mode, interface flavor;
                 replies with the session id and protocol version
  reset          start an episode (optional seed); replies pose_update
  gesture        human finger frames (rows [f1x,f1y,f2x,f2y], any length
                 >= 2); resampled to the interface's expected length (a
                 pass-through when the length already matches), fed to the
                 interface agent, environment stepped
  agent_gesture  the user model (3d: user agent + decoder; 2d: the oracle
                 user) produces one gesture, the step proceeds as above
  latent         {z, T}: decode a latent code without stepping

A 2d session with interface "analytic" runs the closed-form solver, no
checkpoints needed.
"""

from __future__ import annotations

import asyncio
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import geometry as geo
from . import gestures as ges
from . import numkit as nk
from . import sim
from . import vae as vae_mod
from .marl import (
    AgentNets,
    MarlConfig,
    act,
    load_agent,
    scale_action_2d,
    scale_action_3d,
)

PROTOCOL_VERSION = 1


class ServiceError(ValueError):
    """Request rejected; the message explains why. Session state unchanged."""


@dataclass
class ServiceArtifacts:
    """Checkpoints and configs shared read-only across sessions."""

    env2d: sim.Env2DConfig = field(default_factory=sim.Env2DConfig)
    env3d: sim.Env3DConfig = field(default_factory=sim.Env3DConfig)
    marl_cfg: MarlConfig = field(default_factory=MarlConfig)
    vae_cfg: vae_mod.VaeConfig = field(default_factory=vae_mod.VaeConfig)
    vae_ps: nk.ParamSet | None = None
    iface2d: AgentNets | None = None
    iface3d: AgentNets | None = None
    user3d: AgentNets | None = None

    @classmethod
    def load(cls, vae_ckpt=None, ckpt_2d=None, ckpt_3d=None, mode: str = "two_instant",
             env2d: sim.Env2DConfig | None = None, env3d: sim.Env3DConfig | None = None):
        cfg = MarlConfig(mode=mode)
        art = cls(env2d=env2d or sim.Env2DConfig(), env3d=env3d or sim.Env3DConfig(),
                  marl_cfg=cfg)
        if vae_ckpt:
            art.vae_ps = nk.load_params(Path(vae_ckpt))
        if ckpt_2d:
            art.iface2d = load_agent(Path(ckpt_2d), "iface", "interface", cfg, 8, 4,
                                     cfg.iface_hidden, critic_state_dim=8 + 4)
        if ckpt_3d:
            art.iface3d = load_agent(Path(ckpt_3d), "iface", "interface", cfg,
                                     cfg.iface_state_dim, cfg.iface_action_dim,
                                     cfg.iface_hidden,
                                     critic_state_dim=cfg.iface_state_dim + 6)
            art.user3d = load_agent(Path(ckpt_3d), "user", "user", cfg, 6, cfg.latent,
                                    cfg.user_hidden, est_dim=cfg.iface_action_dim)
        return art


class Session:
    """One client's episode state; messages are handled strictly in order."""

    _counter = 0

    def __init__(self, art: ServiceArtifacts):
        Session._counter += 1
        self.id = f"s{Session._counter:04d}"
        self.art = art
        self.env_kind = None
        self.interface = None
        self.state = None
        self.rng = np.random.default_rng(0)
        self.episode_reward = 0.0

    # -- message handling ---------------------------------------------------

    def handle(self, msg: dict) -> dict:
        try:
            mtype, payload = self._validate_envelope(msg)
            handler = {
                "hello": self._on_hello,
                "reset": self._on_reset,
                "gesture": self._on_gesture,
                "agent_gesture": self._on_agent_gesture,
                "latent": self._on_latent,
            }.get(mtype)
            if handler is None:
                raise ServiceError(f"unknown message type {mtype!r}")
            return handler(payload)
        except (ServiceError, ges.DegenerateGestureError, geo.SingularTransformError) as e:
            return self._reply("error", {"message": str(e)})

    def _validate_envelope(self, msg: dict):
        if not isinstance(msg, dict) or "type" not in msg:
            raise ServiceError("message must be an object with a 'type' field")
        mtype = msg["type"]
        payload = msg.get("payload") or {}
        if not isinstance(payload, dict):
            raise ServiceError("'payload' must be an object")
        if mtype != "hello":
            if self.env_kind is None:
                raise ServiceError("no session established; send 'hello' first")
            if msg.get("session") != self.id:
                raise ServiceError(f"unknown session {msg.get('session')!r}")
        return mtype, payload

    def _reply(self, mtype: str, payload: dict) -> dict:
        return {"type": mtype, "session": self.id, "payload": payload}

    # -- handlers -------------------------------------------------------------

    def _on_hello(self, payload: dict) -> dict:
        env = payload.get("env", "2d")
        if env not in ("2d", "3d"):
            raise ServiceError(f"env must be '2d' or '3d', got {env!r}")
        interface = payload.get("interface", "analytic" if env == "2d" else "checkpoint")
        if env == "2d":
            if interface == "checkpoint" and self.art.iface2d is None:
                raise ServiceError("no 2d interface checkpoint loaded")
            if interface not in ("analytic", "checkpoint"):
                raise ServiceError(f"interface must be 'analytic' or 'checkpoint', got {interface!r}")
        else:
            if self.art.iface3d is None:
                raise ServiceError("no 3d checkpoints loaded")
            interface = "checkpoint"
        self.env_kind = env
        self.interface = interface
        self.rng = np.random.default_rng(int(payload.get("seed", 0)))
        return self._reply("hello", {
            "session": self.id,
            "protocol": PROTOCOL_VERSION,
            "env": env,
            "interface": interface,
            "mode": self.art.marl_cfg.mode,
            "gesture_len": self._expected_len(),
        })

    def _expected_len(self) -> int:
        if self.env_kind == "2d":
            return 2
        return self.art.marl_cfg.gesture_steps

    def _on_reset(self, payload: dict) -> dict:
        if "seed" in payload:
            self.rng = np.random.default_rng(int(payload["seed"]))
        if self.env_kind == "2d":
            self.state = sim.reset_2d(self.art.env2d, self.rng)
        else:
            self.state = sim.reset_3d(self.art.env3d, self.rng)
        self.episode_reward = 0.0
        return self._pose_update(reward=0.0, done=False, success=False)

    def _require_episode(self):
        if self.state is None:
            raise ServiceError("no active episode; send 'reset' first")

    def _coerce_frames(self, payload: dict) -> np.ndarray:
        frames = payload.get("frames")
        if not isinstance(frames, list) or len(frames) < 2:
            raise ServiceError("'frames' must be a list of at least 2 rows")
        arr = np.asarray(frames, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] not in (4, 5):
            raise ServiceError("frame rows must be [f1x,f1y,f2x,f2y] or [t,f1x,f1y,f2x,f2y]")
        if arr.shape[1] == 5:
            arr = arr[:, 1:]
        if not np.all(np.isfinite(arr)):
            raise ServiceError("non-finite coordinate in frames")
        return arr

    def _resample_to_expected(self, frames: np.ndarray) -> np.ndarray:
        n = self._expected_len()
        if len(frames) == n:
            return frames        # pass-through keeps replayed rollouts bit-stable
        return ges.resample_dynamic(ges.to_raw(np.clip(frames, 0.0, 1.0)), n)

    def _on_gesture(self, payload: dict) -> dict:
        self._require_episode()
        frames = self._resample_to_expected(self._coerce_frames(payload))
        return self._step_with_gesture(frames, produced=None)

    def _on_agent_gesture(self, payload: dict) -> dict:
        self._require_episode()
        if self.env_kind == "2d":
            fingers = sim.oracle_user_2d(self.art.env2d, self.state, self.rng)
            frames = fingers.flat().reshape(2, 4)
        else:
            z, _ = act(self.art.user3d, self.state.pose, False, 0.0)
            frames = vae_mod.decode(z, self._expected_len(), self.art.vae_ps, self.art.vae_cfg) \
                if self.art.vae_ps is not None else None
            if frames is None:
                raise ServiceError("no VAE checkpoint loaded")
        return self._step_with_gesture(frames, produced=frames.tolist())

    def _step_with_gesture(self, frames: np.ndarray, produced) -> dict:
        if self.env_kind == "2d":
            if self.interface == "analytic":
                fp = geo.FingerPair(frames[0, 0:2], frames[0, 2:4], frames[-1, 0:2], frames[-1, 2:4])
                action_env = geo.solve_affine2d(fp)
            else:
                a, _ = act(self.art.iface2d, frames.reshape(-1), False, 0.0)
                action_env = scale_action_2d(a)
            self.state, reward, done = sim.step_2d(self.art.env2d, self.state, action_env)
            success = done and geo.summed_vertex_distance(
                self.state.object_vertices(), self.state.target_vertices) < self.art.env2d.success_eps
        else:
            a, _ = act(self.art.iface3d, frames.reshape(-1), False, 0.0)
            if self.art.marl_cfg.mode == "two_instant":
                self.state, reward, done = sim.step_3d(self.art.env3d, self.state,
                                                       scale_action_3d(a))
            else:
                deltas = scale_action_3d(a.reshape(9, 6))
                self.state, reward, done, _ = sim.apply_deltas_3d(self.art.env3d, self.state, deltas)
            success = done and geo.summed_vertex_distance(
                self.state.object_vertices(), self.state.target_vertices) < self.art.env3d.success_eps
        self.episode_reward += reward
        reply = self._pose_update(reward=reward, done=done, success=success)
        if produced is not None:
            reply["payload"]["gesture"] = produced
        if done:
            self.state = None
        return reply

    def _on_latent(self, payload: dict) -> dict:
        if self.art.vae_ps is None:
            raise ServiceError("no VAE checkpoint loaded")
        z = np.asarray(payload.get("z", []), dtype=np.float64)
        if z.shape != (self.art.vae_cfg.latent,):
            raise ServiceError(f"'z' must have length {self.art.vae_cfg.latent}")
        t_steps = int(payload.get("T", self.art.vae_cfg.gesture_len))
        if not 2 <= t_steps <= 100:
            raise ServiceError("'T' must be in [2, 100]")
        frames = vae_mod.decode(z, t_steps, self.art.vae_ps, self.art.vae_cfg)
        return self._reply("latent", {"gesture": frames.tolist(), "T": t_steps})

    def _pose_update(self, reward: float, done: bool, success: bool) -> dict:
        st = self.state
        if self.env_kind == "2d":
            pose = st.theta.tolist()
        else:
            pose = st.pose.tolist()
        return self._reply("pose_update", {
            "pose": pose,
            "object_vertices": st.object_vertices().tolist(),
            "target_vertices": st.target_vertices.tolist(),
            "reward": reward,
            "episode_reward": self.episode_reward,
            "done": bool(done),
            "success": bool(success),
            "steps": int(st.steps),
        })


async def serve(art: ServiceArtifacts, host: str = "127.0.0.1", port: int = 8765,
                ready_event: asyncio.Event | None = None):
    """Run the WebSocket server until cancelled. One session per connection."""
    import websockets

    async def handler(ws):
        session = Session(art)
        async for raw in ws:
            try:
                msg = json.loads(raw)
            except json.JSONDecodeError:
                await ws.send(json.dumps({"type": "error", "session": session.id,
                                          "payload": {"message": "invalid JSON"}}))
                continue
            await ws.send(json.dumps(session.handle(msg)))

    async with websockets.serve(handler, host, port):
        if ready_event is not None:
            ready_event.set()
        await asyncio.Future()
