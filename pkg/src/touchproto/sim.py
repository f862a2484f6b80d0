"""Manipulation environments: 2D surface alignment and 3D camera navigation.

2D: a surface carries a rectangle that must be superimposed on a fixed target
rectangle; actions are residual rotation+scale+translation transforms of the
surface. A handcrafted oracle user emits finger pairs that move the object
vertices straight toward their targets with a capped per-step velocity.

3D: the camera pose carries an arrow that must be superimposed on a fixed
target arrow at the origin; actions are residual 6-vectors added to the pose
with angle wrapping.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import geometry as geo
from .geometry import FingerPair

# Oracle velocity cap reproducing a ~40-step mean episode; found by
# calibrate_oracle on the default 2D episode distribution (300 episodes, seed 0).
DEFAULT_ORACLE_CAP = 0.010746


class CalibrationError(RuntimeError):
    """The oracle velocity search could not reach the target episode length."""


@dataclass
class Env2DConfig:
    success_eps: float = 0.1           # summed L2 vertex distance threshold
    max_steps: int = 200
    trans_range: float = 0.3           # init translation in [-r, r]^2
    scale_range: tuple = (0.5, 2.0)    # init scale factor range
    rot_range: float = np.pi           # init rotation in (-r, r]
    oracle_cap: float = DEFAULT_ORACLE_CAP
    target_center: tuple = (0.5, 0.5)
    half_size: tuple = (0.15, 0.10)
    finger_min_sep: float = 0.25       # min separation of oracle finger anchors (base coords)
    surface_scale_limits: tuple = (0.01, 5.0)  # zoom stops; the floor only guards
                                               # against full collapse (singular solves)
    pan_limits: tuple = (-0.75, 1.75)  # object center stays inside this box (pan stops)

    def target_vertices(self) -> np.ndarray:
        cx, cy = self.target_center
        hx, hy = self.half_size
        return np.array([
            [cx - hx, cy - hy],
            [cx + hx, cy - hy],
            [cx + hx, cy + hy],
            [cx - hx, cy + hy],
        ])


@dataclass
class Env3DConfig:
    success_eps: float = 0.1           # summed L2 distance over the 2 arrow vertices
    max_steps: int = 200
    tau_range: float = 2.0             # init translations in [-r, r]^3
    rho_range: float = np.pi           # init Euler angles in (-r, r]^3
    arrow_len: float = 1.0
    tau_limit: float | None = None     # camera stays inside +-limit (default 2x init range)

    def effective_tau_limit(self) -> float:
        return self.tau_limit if self.tau_limit is not None else 2.0 * self.tau_range

    def target_vertices(self) -> np.ndarray:
        return np.array([[0.0, 0.0, 0.0], [0.0, 0.0, self.arrow_len]])

    def arrow_offsets(self) -> np.ndarray:
        return np.array([[0.0, 0.0, 0.0], [0.0, 0.0, self.arrow_len]])


@dataclass
class Env2DState:
    theta: np.ndarray            # cumulative surface transform
    base_vertices: np.ndarray    # (4, 2), fixed
    target_vertices: np.ndarray  # (4, 2), fixed
    steps: int = 0

    def object_vertices(self) -> np.ndarray:
        return geo.apply_affine2d(self.theta, self.base_vertices)


@dataclass
class Env3DState:
    pose: np.ndarray             # (6,) wrapped
    arrow_offsets: np.ndarray    # (2, 3) in camera frame, fixed
    target_vertices: np.ndarray  # (2, 3), fixed
    steps: int = 0

    def object_vertices(self) -> np.ndarray:
        return geo.transform_points(self.pose, self.arrow_offsets)


def reset_2d(cfg: Env2DConfig, rng: np.random.Generator) -> Env2DState:
    """Sample an initial surface transform (about the object center) that is
    not already a success."""
    target = cfg.target_vertices()
    ctr = np.asarray(cfg.target_center, dtype=np.float64)
    while True:
        alpha = rng.uniform(-cfg.rot_range, cfg.rot_range)
        sigma = rng.uniform(*cfg.scale_range)
        trans = rng.uniform(-cfg.trans_range, cfg.trans_range, size=2)
        rot = np.array([sigma * np.cos(alpha), sigma * np.sin(alpha)])
        t_origin = ctr + trans - geo.rot_scale_matrix(rot) @ ctr
        theta = np.concatenate([rot, t_origin])
        state = Env2DState(theta=theta, base_vertices=target.copy(),
                           target_vertices=target.copy(), steps=0)
        if geo.summed_vertex_distance(state.object_vertices(), target) >= cfg.success_eps:
            return state


def step_2d(cfg: Env2DConfig, s: Env2DState, action) -> tuple[Env2DState, float, bool]:
    """Apply a residual surface transform; returns (state', reward, done)."""
    a = np.asarray(action, dtype=np.float64)
    if a.shape != (4,) or not np.all(np.isfinite(a)):
        raise ValueError(f"action must be a finite 4-vector, got {a}")
    theta = geo.compose_affine2d(a, s.theta)
    # hard zoom and pan stops: random policies otherwise shrink the surface
    # until the object degenerates to a point (singular solves) or drag it
    # far off screen (unrecoverable states)
    sigma = float(np.hypot(theta[0], theta[1]))
    lo, hi = cfg.surface_scale_limits
    if sigma < lo or sigma > hi:
        theta = theta.copy()
        theta[0:2] *= np.clip(sigma, lo, hi) / sigma
    center = geo.apply_affine2d(theta, np.mean(s.base_vertices, axis=0))
    clamped = np.clip(center, cfg.pan_limits[0], cfg.pan_limits[1])
    if not np.array_equal(clamped, center):
        theta = theta.copy()
        theta[2:4] += clamped - center
    s2 = Env2DState(theta=theta,
                    base_vertices=s.base_vertices,
                    target_vertices=s.target_vertices,
                    steps=s.steps + 1)
    dist = geo.summed_vertex_distance(s2.object_vertices(), s2.target_vertices)
    success = dist < cfg.success_eps
    done = success or s2.steps >= cfg.max_steps
    reward = geo.reward_shaped(s2.object_vertices(), s2.target_vertices, success)
    return s2, reward, done


def oracle_user_2d(cfg: Env2DConfig, s: Env2DState, rng: np.random.Generator) -> FingerPair:
    """Finger pair of a user who knows the protocol: two random on-object
    points transported by the capped straight-line vertex motion."""
    obj = s.object_vertices()
    v = np.array([obj[0], obj[2]])                      # diagonally opposed
    vt = np.array([s.target_vertices[0], s.target_vertices[2]])
    # One shared velocity fraction, capped by the faster vertex: the solved
    # transform is then (1-mu)*Id + mu*goal, so every vertex travels along its
    # straight segment and no per-vertex distance can grow.
    dmax = float(np.linalg.norm(vt - v, axis=1).max())
    mu = 1.0 if dmax < 1e-12 else min(1.0, cfg.oracle_cap / dmax)
    inter = (1.0 - mu) * v + mu * vt
    step_theta = geo.solve_affine2d(FingerPair(v[0], v[1], inter[0], inter[1]))
    ctr = np.asarray(cfg.target_center, dtype=np.float64)
    half = np.asarray(cfg.half_size, dtype=np.float64)
    while True:
        q1 = ctr + rng.uniform(-half, half)
        q2 = ctr + rng.uniform(-half, half)
        if np.linalg.norm(q1 - q2) >= cfg.finger_min_sep:
            break
    p1 = geo.apply_affine2d(s.theta, q1)
    p2 = geo.apply_affine2d(s.theta, q2)
    return FingerPair(p1, p2, geo.apply_affine2d(step_theta, p1), geo.apply_affine2d(step_theta, p2))


def reset_3d(cfg: Env3DConfig, rng: np.random.Generator) -> Env3DState:
    target = cfg.target_vertices()
    while True:
        tau = rng.uniform(-cfg.tau_range, cfg.tau_range, size=3)
        rho = rng.uniform(-cfg.rho_range, cfg.rho_range, size=3)
        state = Env3DState(pose=np.concatenate([tau, geo.wrap_angle(rho)]),
                           arrow_offsets=cfg.arrow_offsets(),
                           target_vertices=target.copy(), steps=0)
        if geo.summed_vertex_distance(state.object_vertices(), target) >= cfg.success_eps:
            return state


def step_3d(cfg: Env3DConfig, s: Env3DState, delta) -> tuple[Env3DState, float, bool]:
    """Add a residual 6-vector to the pose; returns (state', reward, done)."""
    d = np.asarray(delta, dtype=np.float64)
    if d.shape != (6,) or not np.all(np.isfinite(d)):
        raise ValueError(f"delta must be a finite 6-vector, got {d}")
    pose = geo.add_residual_pose(s.pose, d)
    # navigation volume is bounded, like a real scene: clamp translations
    lim = cfg.effective_tau_limit()
    pose[:3] = np.clip(pose[:3], -lim, lim)
    s2 = Env3DState(pose=pose,
                    arrow_offsets=s.arrow_offsets,
                    target_vertices=s.target_vertices,
                    steps=s.steps + 1)
    dist = geo.summed_vertex_distance(s2.object_vertices(), s2.target_vertices)
    success = dist < cfg.success_eps
    done = success or s2.steps >= cfg.max_steps
    reward = geo.reward_shaped(s2.object_vertices(), s2.target_vertices, success)
    return s2, reward, done


def apply_deltas_3d(cfg: Env3DConfig, s: Env3DState, deltas: np.ndarray):
    """Apply a sequence of residual deltas (stacked mode): rewards are summed,
    the stack truncates on episode end, the success bonus is granted once.

    Returns (state', summed reward, done, substeps used).
    """
    total = 0.0
    done = False
    used = 0
    for d in np.asarray(deltas, dtype=np.float64):
        s, r, done = step_3d(cfg, s, d)
        total += r
        used += 1
        if done:
            break
    return s, total, done, used


def run_episode_2d(cfg: Env2DConfig, rng: np.random.Generator, act_fn,
                   record: bool = False):
    """Roll one 2D episode: fingers from the oracle, actions from act_fn.

    act_fn(state, fingers) -> residual transform 4-vector. Returns a dict with
    steps, total reward, success flag and, when record is set, per-step rows.
    """
    s = reset_2d(cfg, rng)
    total = 0.0
    rows = []
    success = False
    done = False
    while not done:
        fingers = oracle_user_2d(cfg, s, rng)
        action = np.asarray(act_fn(s, fingers), dtype=np.float64)
        s2, r, done = step_2d(cfg, s, action)
        total += r
        dist = geo.summed_vertex_distance(s2.object_vertices(), s2.target_vertices)
        success = done and dist < cfg.success_eps
        if record:
            rows.append({
                "step": s2.steps,
                "fingers": fingers.flat().tolist(),
                "action": action.tolist(),
                "reward": r,
                "theta": s2.theta.tolist(),
                "object_vertices": s2.object_vertices().tolist(),
                "done": bool(done),
            })
        s = s2
    return {"steps": s.steps, "reward": total, "success": success,
            "rows": rows, "final_state": s}


def mean_oracle_steps(cfg: Env2DConfig, episodes: int, seed: int) -> float:
    """Mean episode length of the oracle user + closed-form interface."""
    rng = np.random.default_rng(seed)
    steps = [run_episode_2d(cfg, rng, lambda s, fp: geo.solve_affine2d(fp))["steps"]
             for _ in range(episodes)]
    return float(np.mean(steps))


def calibrate_oracle(cfg: Env2DConfig, target_mean: float = 40.0, tol: float = 3.0,
                     episodes: int = 100, seed: int = 0,
                     lo: float = 1e-3, hi: float = 0.5, iters: int = 40) -> float:
    """Binary-search the oracle velocity cap until the analytic pipeline's
    mean episode length hits target_mean (larger cap -> shorter episodes)."""
    def mean_at(c: float) -> float:
        return mean_oracle_steps(replace(cfg, oracle_cap=c), episodes, seed)

    if mean_at(hi) > target_mean or mean_at(lo) < target_mean:
        raise CalibrationError(f"target mean {target_mean} not bracketed by caps [{lo}, {hi}]")
    best_c, best_err = hi, abs(mean_at(hi) - target_mean)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        m = mean_at(mid)
        if abs(m - target_mean) < best_err:
            best_c, best_err = mid, abs(m - target_mean)
        if m > target_mean:
            lo = mid     # episodes too long -> need larger cap
        else:
            hi = mid
        if best_err <= 0.5:
            break
    if best_err > tol:
        raise CalibrationError(f"closest mean is {best_err:.1f} steps from {target_mean} (tol {tol})")
    return best_c


def greedy_policy_3d(pose: np.ndarray, amplitude: np.ndarray) -> np.ndarray:
    """Per-component capped move of the pose toward the identity pose."""
    err = -np.asarray(pose, dtype=np.float64).copy()
    err[3:6] = geo.wrap_angle(err[3:6])
    return np.clip(err, -amplitude, amplitude)


def theoretical_optimum_3d(cfg: Env3DConfig, amplitude, episodes: int,
                           rng: np.random.Generator):
    """Distance/amplitude bound: the greedy capped controller's mean reward and
    steps over random episodes."""
    amp = np.asarray(amplitude, dtype=np.float64)
    rewards, steps, succ = [], [], 0
    for _ in range(episodes):
        s = reset_3d(cfg, rng)
        total = 0.0
        done = False
        while not done:
            s, r, done = step_3d(cfg, s, greedy_policy_3d(s.pose, amp))
            total += r
        ok = geo.summed_vertex_distance(s.object_vertices(), s.target_vertices) < cfg.success_eps
        succ += int(ok)
        rewards.append(total)
        steps.append(s.steps)
    return {"mean_reward": float(np.mean(rewards)), "mean_steps": float(np.mean(steps)),
            "success_rate": succ / episodes, "episodes": episodes}
