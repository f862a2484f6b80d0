"""Command-line entry points for every pipeline stage.

All subcommands accept --seed, --config (JSON overrides) and --out. Each run
writes its fully resolved configuration next to its outputs. Exit code 0 on
success, 1 with a one-line diagnostic otherwise.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import exports, geometry as geo, gestures as ges, numkit as nk, sim
from . import vae as vae_mod
from .marl import (
    MarlConfig,
    evaluate_2d,
    evaluate_3d,
    load_agent,
    run_marl_episode,
    train_2d_interface,
    train_marl,
)
from .marl.config import tuned_2d_profile, tuned_3d_profile
from .marl.loops import write_resolved_config
from .service import ServiceArtifacts


class CliError(RuntimeError):
    pass


def _load_config_file(path) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise CliError(f"--config file not found: {p}")
    with open(p, encoding="utf-8") as fh:
        return json.load(fh)


def _apply_section(obj, section: dict):
    for key, value in section.items():
        if not hasattr(obj, key):
            raise CliError(f"unknown config key {key!r} for {type(obj).__name__}")
        setattr(obj, key, value)
    return obj


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _rng(args) -> np.random.Generator:
    return np.random.default_rng(args.seed)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_gen_gestures(args) -> int:
    out = _out_dir(args)
    rng = _rng(args)
    corpus = ges.generate_corpus(args.count, rng, noise_sigma=args.noise)
    path = out / "corpus.jsonl"
    ges.save_corpus(corpus, path)
    write_resolved_config(out, {"kind": "gen-gestures", "seed": args.seed,
                                "count_per_class": args.count, "noise": args.noise,
                                "classes": list(ges.GESTURE_CLASSES), "file": str(path)})
    print(f"wrote {len(corpus)} gestures to {path}")
    return 0


def _vae_config(args, overrides: dict) -> vae_mod.VaeConfig:
    cfg = vae_mod.VaeConfig()
    _apply_section(cfg, overrides.get("vae", {}))
    for name in ("epochs", "beta", "batch", "lr", "latent"):
        v = getattr(args, name.replace("-", "_"), None)
        if v is not None:
            setattr(cfg, name, v)
    return cfg


def cmd_train_vae(args) -> int:
    out = _out_dir(args)
    overrides = _load_config_file(args.config)
    cfg = _vae_config(args, overrides)
    rng = _rng(args)
    if not Path(args.corpus).exists():
        raise CliError(f"--corpus file not found: {args.corpus}")
    corpus = ges.load_corpus(args.corpus)
    xs = ges.resampled_matrix(corpus, cfg.gesture_len)
    params, curve, info = vae_mod.train_vae(xs, cfg, rng, log_every=args.log_every)
    ckpt = out / "vae.tpk"
    nk.save_params(params, ckpt)
    with open(out / "loss_curve.json", "w", encoding="utf-8") as fh:
        json.dump({"epoch_loss": curve, "info": info}, fh, indent=2)
    write_resolved_config(out, {"kind": "train-vae", "seed": args.seed,
                                "corpus": str(args.corpus), "checkpoint": str(ckpt),
                                "vae": dataclasses.asdict(cfg)})
    print(f"trained VAE: epoch1 {info['epoch1_loss']:.3f} final {info['final_loss']:.3f} -> {ckpt}")
    return 0


def cmd_traverse_vae(args) -> int:
    out = _out_dir(args)
    overrides = _load_config_file(args.config)
    cfg = _vae_config(args, overrides)
    params = nk.load_params(args.vae)
    dims = [int(d) for d in args.dims.split(",")] if args.dims else None
    values = [float(v) for v in args.values.split(",")] if args.values else None
    grid = vae_mod.latent_traversal(params, cfg, dims=dims, values=values, t_steps=args.T)
    dims = dims or list(range(cfg.latent))
    values = values or [-2.0, -1.0, 0.0, 1.0, 2.0]
    jpath, spath = exports.save_traversal(grid, dims, values, out)
    write_resolved_config(out, {"kind": "traverse-vae", "seed": args.seed,
                                "vae": str(args.vae), "dims": dims, "values": values,
                                "T": grid.shape[2]})
    print(f"wrote {jpath} and {spath}")
    return 0


def _env2d_config(overrides: dict) -> sim.Env2DConfig:
    return _apply_section(sim.Env2DConfig(), overrides.get("env2d", {}))


def _env3d_config(overrides: dict) -> sim.Env3DConfig:
    return _apply_section(sim.Env3DConfig(), overrides.get("env3d", {}))


def cmd_calibrate_oracle(args) -> int:
    out = _out_dir(args)
    overrides = _load_config_file(args.config)
    env_cfg = _env2d_config(overrides)
    cap = sim.calibrate_oracle(env_cfg, target_mean=args.target_mean, tol=args.tol,
                               episodes=args.episodes, seed=args.seed)
    check = sim.mean_oracle_steps(
        dataclasses.replace(env_cfg, oracle_cap=cap), args.episodes, seed=args.seed + 1)
    payload = {"kind": "calibrate-oracle", "seed": args.seed, "velocity_cap": cap,
               "target_mean": args.target_mean, "holdout_mean_steps": check,
               "env2d": dataclasses.asdict(env_cfg)}
    write_resolved_config(out, payload)
    with open(out / "oracle.json", "w", encoding="utf-8") as fh:
        json.dump({"velocity_cap": cap, "holdout_mean_steps": check}, fh, indent=2)
    print(f"velocity cap {cap:.6f} (holdout mean {check:.2f} steps)")
    return 0


def _marl_config(args, overrides: dict, profile) -> MarlConfig:
    cfg = profile()
    _apply_section(cfg, overrides.get("marl", {}))
    if getattr(args, "mode", None):
        cfg.mode = args.mode
    if getattr(args, "budget", None) is not None:
        cfg.env_step_budget = args.budget
    if getattr(args, "epochs", None) is not None:
        cfg.max_epochs = args.epochs
    if getattr(args, "batch", None) is not None:
        cfg.batch = args.batch
    cfg.seed = args.seed
    return cfg


def cmd_train_2d(args) -> int:
    out = _out_dir(args)
    overrides = _load_config_file(args.config)
    cfg = _marl_config(args, overrides, tuned_2d_profile)
    env_cfg = _env2d_config(overrides)
    rng = _rng(args)
    res = train_2d_interface(cfg, env_cfg, out, rng, target_ratio=args.target_ratio,
                             log=print if args.verbose else None)
    s = res["summary"]
    converged = s["converged_epoch"] is not None
    print(f"train-2d: converged={converged} epochs={s['epochs']} env_steps={s['env_steps']}")
    return 0 if converged else 2


def cmd_eval_2d(args) -> int:
    out = _out_dir(args)
    overrides = _load_config_file(args.config)
    env_cfg = _env2d_config(overrides)
    cfg = _marl_config(args, overrides, tuned_2d_profile)
    rng = _rng(args)
    if args.ckpt:
        iface = load_agent(Path(args.ckpt), "iface", "interface", cfg, 8, 4,
                           cfg.iface_hidden, critic_state_dim=12)
        res = evaluate_2d(env_cfg, args.episodes, rng, iface=iface, cfg=cfg)
        label = f"checkpoint {args.ckpt}"
    else:
        res = evaluate_2d(env_cfg, args.episodes, rng)
        label = "analytic interface + oracle user"
    write_resolved_config(out, {"kind": "eval-2d", "seed": args.seed, "which": label,
                                "env2d": dataclasses.asdict(env_cfg), "result": res})
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump({"which": label, **res}, fh, indent=2)
    print(f"eval-2d [{label}]: success {res['success_rate']*100:.0f}% "
          f"mean_steps {res['mean_steps']:.2f} mean_reward {res['mean_reward']:.2f}")
    return 0


def cmd_train_marl(args) -> int:
    out = _out_dir(args)
    overrides = _load_config_file(args.config)
    cfg = _marl_config(args, overrides, tuned_3d_profile)
    env_cfg = _env3d_config(overrides)
    if args.reduced:
        env_cfg.tau_range = 0.5
        env_cfg.rho_range = float(np.pi / 4)
        env_cfg.success_eps = 0.2
    rng = _rng(args)
    res = train_marl(cfg, env_cfg, args.vae, out, rng,
                     log=print if args.verbose else None)
    s = res["summary"]
    converged = s["converged_epoch"] is not None
    print(f"train-marl[{cfg.mode}]: converged={converged} epochs={s['epochs']} "
          f"env_steps={s['env_steps']}")
    return 0 if converged else 2


def _table1_report(rows) -> str:
    head = f"{'':24s} {'Mean reward/ep.':>18s} {'Mean #steps/ep.':>18s} {'Nb. env steps':>16s}"
    lines = [head, "-" * len(head)]
    for label, reward, steps, n in rows:
        r = "n/a" if reward is None else f"{reward:.2f}"
        st = "n/a" if steps is None or np.isnan(steps) else f"{steps:.1f}"
        n = "N/A" if n is None else f"{n}"
        lines.append(f"{label:24s} {r:>18s} {st:>18s} {n:>16s}")
    return "\n".join(lines)


def cmd_eval_marl(args) -> int:
    out = _out_dir(args)
    overrides = _load_config_file(args.config)
    cfg = _marl_config(args, overrides, tuned_3d_profile)
    env_cfg = _env3d_config(overrides)
    if args.reduced:
        env_cfg.tau_range = 0.5
        env_cfg.rho_range = float(np.pi / 4)
        env_cfg.success_eps = 0.2
    rng = _rng(args)
    rows = []
    result = None
    if args.ckpt:
        vae_ps = nk.load_params(args.vae)
        user = load_agent(Path(args.ckpt), "user", "user", cfg, 6, cfg.latent,
                          cfg.user_hidden, est_dim=cfg.iface_action_dim)
        iface = load_agent(Path(args.ckpt), "iface", "interface", cfg,
                           cfg.iface_state_dim, cfg.iface_action_dim, cfg.iface_hidden,
                           critic_state_dim=cfg.iface_state_dim + 6)
        env_steps = None
        summary = Path(args.ckpt).parent.parent / "summary.json"
        if summary.exists():
            env_steps = json.loads(summary.read_text()).get("env_steps")
        result = evaluate_3d(cfg, env_cfg, user, iface, vae_ps, vae_mod.VaeConfig(),
                             args.episodes, rng)
        label = "Stacking" if cfg.mode == "stacking" else "No Stacking"
        rows.append((label, result["mean_reward"], result["mean_steps"], env_steps))
    opt = sim.theoretical_optimum_3d(env_cfg, np.full(6, 0.05), args.episodes, rng)
    rows.append(("Theoretical Opt.", opt["mean_reward"], opt["mean_steps"], None))
    report = _table1_report(rows)
    print(report)
    payload = {"kind": "eval-marl", "seed": args.seed, "rows": rows,
               "optimum": opt, "env3d": dataclasses.asdict(env_cfg)}
    if result is not None:
        payload["checkpoint_eval"] = result
    write_resolved_config(out, payload)
    (out / "table1.txt").write_text(report + "\n", encoding="utf-8")
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, default=str)
    return 0


def cmd_rollout(args) -> int:
    out = _out_dir(args)
    overrides = _load_config_file(args.config)
    rng = _rng(args)
    if args.env == "2d":
        env_cfg = _env2d_config(overrides)
        trace = sim.run_episode_2d(env_cfg, rng, lambda s, fp: geo.solve_affine2d(fp),
                                   record=True)
        rows = trace["rows"]
        path = exports.write_rollout_trace(rows, out)
        for i, row in enumerate(rows[:: max(1, len(rows) // args.frames)][:args.frames]):
            svg = exports.frame_2d_svg(row["object_vertices"],
                                       env_cfg.target_vertices().tolist(),
                                       fingers=row["fingers"],
                                       label=f"step {row['step']}")
            (out / f"frame-{i:03d}.svg").write_text(svg, encoding="utf-8")
        print(f"2d analytic rollout: steps {trace['steps']} reward {trace['reward']:.2f} -> {path}")
    else:
        env_cfg = _env3d_config(overrides)
        cfg = _marl_config(args, overrides, tuned_3d_profile)
        vae_ps = nk.load_params(args.vae)
        user = load_agent(Path(args.ckpt), "user", "user", cfg, 6, cfg.latent,
                          cfg.user_hidden, est_dim=cfg.iface_action_dim)
        iface = load_agent(Path(args.ckpt), "iface", "interface", cfg,
                           cfg.iface_state_dim, cfg.iface_action_dim, cfg.iface_hidden,
                           critic_state_dim=cfg.iface_state_dim + 6)
        audit = []
        stats = run_marl_episode(cfg, env_cfg, user, iface, vae_ps, vae_mod.VaeConfig(),
                                 rng, explore_user=False, explore_iface=False, audit=audit)
        rows = []
        state = None
        for t, rec in enumerate(audit):
            rows.append({"step": t, "pose": rec.pose_after.tolist(),
                         "latent": rec.z.tolist(), "gesture": rec.a_u.tolist(),
                         "action": rec.a_i.tolist(), "reward": rec.r_i,
                         "done": bool(rec.done)})
        path = exports.write_rollout_trace(rows, out)
        st = sim.Env3DState(pose=np.array(rows[-1]["pose"]),
                            arrow_offsets=env_cfg.arrow_offsets(),
                            target_vertices=env_cfg.target_vertices(), steps=len(rows))
        for i, rec in enumerate(audit[:: max(1, len(audit) // args.frames)][:args.frames]):
            st_i = sim.Env3DState(pose=rec.pose_after, arrow_offsets=env_cfg.arrow_offsets(),
                                  target_vertices=env_cfg.target_vertices(), steps=i)
            svg = exports.frame_3d_svg(st_i, fingers=rec.a_u.reshape(-1, 4),
                                       label=f"rl step {i}")
            (out / f"frame-{i:03d}.svg").write_text(svg, encoding="utf-8")
        print(f"3d rollout: env_steps {stats['env_steps']} reward {stats['reward']:.2f} "
              f"success {stats['success']} -> {path}")
    write_resolved_config(out, {"kind": "rollout", "seed": args.seed, "env": args.env})
    return 0


def cmd_serve(args) -> int:
    import asyncio

    overrides = _load_config_file(args.config)
    art = ServiceArtifacts.load(vae_ckpt=args.vae, ckpt_2d=args.ckpt_2d,
                                ckpt_3d=args.ckpt_3d, mode=args.mode,
                                env2d=_env2d_config(overrides),
                                env3d=_env3d_config(overrides))
    addr = args.listen or os.environ.get("TOUCHPROTO_ADDR", "127.0.0.1:8765")
    host, _, port = addr.rpartition(":")
    print(f"serving on ws://{host}:{port}")
    from .service import serve
    asyncio.run(serve(art, host=host, port=int(port)))
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="touchproto",
                                description="gesture-protocol training and serving")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--config", help="JSON file with config overrides")
        if out_required:
            sp.add_argument("--out", required=True, help="output directory")

    sp = sub.add_parser("gen-gestures", help="synthesize a gesture corpus")
    common(sp)
    sp.add_argument("--count", type=int, default=1000, help="gestures per class")
    sp.add_argument("--noise", type=float, default=ges.DEFAULT_NOISE_SIGMA)
    sp.set_defaults(fn=cmd_gen_gestures)

    sp = sub.add_parser("train-vae", help="train the gesture VAE")
    common(sp)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--beta", type=float)
    sp.add_argument("--batch", type=int)
    sp.add_argument("--lr", type=float)
    sp.add_argument("--log-every", type=int, default=0)
    sp.set_defaults(fn=cmd_train_vae)

    sp = sub.add_parser("traverse-vae", help="export a latent traversal grid")
    common(sp)
    sp.add_argument("--vae", required=True, help="VAE checkpoint")
    sp.add_argument("--dims", help="comma-separated latent dims (default all)")
    sp.add_argument("--values", help="comma-separated values (default -2..2)")
    sp.add_argument("--T", type=int, default=None, help="decoded gesture length")
    sp.set_defaults(fn=cmd_traverse_vae)

    sp = sub.add_parser("calibrate-oracle", help="find the oracle velocity cap")
    common(sp)
    sp.add_argument("--episodes", type=int, default=100)
    sp.add_argument("--target-mean", type=float, default=40.0)
    sp.add_argument("--tol", type=float, default=3.0)
    sp.set_defaults(fn=cmd_calibrate_oracle)

    sp = sub.add_parser("train-2d", help="train the 2D interface against the oracle user")
    common(sp)
    sp.add_argument("--budget", type=int, help="environment step budget")
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--batch", type=int)
    sp.add_argument("--target-ratio", type=float, default=1.2)
    sp.add_argument("--verbose", action="store_true")
    sp.set_defaults(fn=cmd_train_2d)

    sp = sub.add_parser("eval-2d", help="evaluate a 2D interface (analytic if no --ckpt)")
    common(sp)
    sp.add_argument("--ckpt", help="checkpoint directory (e.g. run/ckpt/final)")
    sp.add_argument("--episodes", type=int, default=100)
    sp.set_defaults(fn=cmd_eval_2d)

    sp = sub.add_parser("train-marl", help="cooperative 3D training (user + interface)")
    common(sp)
    sp.add_argument("--vae", required=True, help="VAE checkpoint")
    sp.add_argument("--mode", choices=["two_instant", "stacking"])
    sp.add_argument("--budget", type=int)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--batch", type=int)
    sp.add_argument("--reduced", action="store_true",
                    help="reduced 3D task (small init ranges, eps 0.2)")
    sp.add_argument("--verbose", action="store_true")
    sp.set_defaults(fn=cmd_train_marl)

    sp = sub.add_parser("eval-marl", help="evaluate 3D agents; emits a results table")
    common(sp)
    sp.add_argument("--ckpt", help="checkpoint directory (e.g. run/ckpt/final)")
    sp.add_argument("--vae", help="VAE checkpoint (required with --ckpt)")
    sp.add_argument("--mode", choices=["two_instant", "stacking"])
    sp.add_argument("--episodes", type=int, default=100)
    sp.add_argument("--reduced", action="store_true")
    sp.set_defaults(fn=cmd_eval_marl)

    sp = sub.add_parser("rollout", help="export an episode trace and frames")
    common(sp)
    sp.add_argument("--env", choices=["2d", "3d"], default="2d")
    sp.add_argument("--ckpt", help="3d checkpoint directory")
    sp.add_argument("--vae", help="VAE checkpoint (3d)")
    sp.add_argument("--frames", type=int, default=8)
    sp.set_defaults(fn=cmd_rollout)

    sp = sub.add_parser("serve", help="serve trained protocols over WebSocket")
    common(sp, out_required=False)
    sp.add_argument("--listen", help="host:port (or TOUCHPROTO_ADDR env var)")
    sp.add_argument("--vae", help="VAE checkpoint")
    sp.add_argument("--ckpt-2d", help="2D interface checkpoint directory")
    sp.add_argument("--ckpt-3d", help="3D checkpoint directory")
    sp.add_argument("--mode", choices=["two_instant", "stacking"], default="two_instant")
    sp.set_defaults(fn=cmd_serve)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (CliError, FileNotFoundError, nk.CheckpointError, ges.CorpusFormatError,
            sim.CalibrationError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
