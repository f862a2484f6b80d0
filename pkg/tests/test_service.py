import asyncio
import json

import numpy as np
import pytest

from touchproto import geometry as geo
from touchproto import numkit as nk
from touchproto import sim, vae
from touchproto.service import PROTOCOL_VERSION, ServiceArtifacts, Session, serve


@pytest.fixture(scope="module")
def artifacts():
    vcfg = vae.VaeConfig(encoder_hidden=16, decoder_hidden=8)
    art = ServiceArtifacts(vae_cfg=vcfg,
                           vae_ps=vae.init_vae_params(vcfg, np.random.default_rng(0)))
    return art


def _hello(sess, env="2d", seed=0, interface=None):
    payload = {"env": env, "seed": seed}
    if interface:
        payload["interface"] = interface
    reply = sess.handle({"type": "hello", "payload": payload})
    assert reply["type"] == "hello", reply
    return reply


class TestSessionLifecycle:
    def test_hello_reports_protocol_and_session(self, artifacts):
        sess = Session(artifacts)
        reply = _hello(sess)
        assert reply["payload"]["protocol"] == PROTOCOL_VERSION
        assert reply["payload"]["session"] == sess.id
        assert reply["payload"]["gesture_len"] == 2

    def test_message_before_hello_is_error(self, artifacts):
        sess = Session(artifacts)
        reply = sess.handle({"type": "reset", "payload": {}})
        assert reply["type"] == "error"

    def test_wrong_session_id_is_error(self, artifacts):
        sess = Session(artifacts)
        _hello(sess)
        reply = sess.handle({"type": "reset", "session": "bogus", "payload": {}})
        assert reply["type"] == "error"
        assert "bogus" in reply["payload"]["message"]

    def test_reset_returns_full_scene(self, artifacts):
        sess = Session(artifacts)
        _hello(sess)
        reply = sess.handle({"type": "reset", "session": sess.id, "payload": {"seed": 5}})
        p = reply["payload"]
        assert reply["type"] == "pose_update"
        assert len(p["pose"]) == 4
        assert np.asarray(p["object_vertices"]).shape == (4, 2)
        assert np.asarray(p["target_vertices"]).shape == (4, 2)
        assert p["steps"] == 0 and p["done"] is False

    def test_unknown_type_is_error_without_state_change(self, artifacts):
        sess = Session(artifacts)
        _hello(sess)
        sess.handle({"type": "reset", "session": sess.id, "payload": {"seed": 5}})
        before = sess.state.theta.copy()
        reply = sess.handle({"type": "frobnicate", "session": sess.id, "payload": {}})
        assert reply["type"] == "error"
        np.testing.assert_array_equal(sess.state.theta, before)

    def test_missing_3d_checkpoints_rejected(self, artifacts):
        sess = Session(artifacts)
        reply = sess.handle({"type": "hello", "payload": {"env": "3d"}})
        assert reply["type"] == "error"


class TestGestureStepping:
    def test_zero_motion_gesture_keeps_pose_on_analytic_session(self, artifacts):
        sess = Session(artifacts)
        _hello(sess)
        sess.handle({"type": "reset", "session": sess.id, "payload": {"seed": 5}})
        before = sess.state.theta.copy()
        frames = [[0.4, 0.4, 0.6, 0.6], [0.4, 0.4, 0.6, 0.6]]
        reply = sess.handle({"type": "gesture", "session": sess.id,
                             "payload": {"frames": frames}})
        assert reply["type"] == "pose_update"
        assert reply["payload"]["reward"] <= -0.2
        np.testing.assert_allclose(reply["payload"]["pose"], before, atol=1e-12)

    def test_long_human_gesture_resampled(self, artifacts):
        sess = Session(artifacts)
        _hello(sess)
        sess.handle({"type": "reset", "session": sess.id, "payload": {"seed": 6}})
        t = np.linspace(0, 1, 30)
        frames = np.stack([0.3 + 0.2 * t, np.full(30, 0.4), 0.6 + 0.2 * t,
                           np.full(30, 0.6)], axis=1).tolist()
        reply = sess.handle({"type": "gesture", "session": sess.id,
                             "payload": {"frames": frames}})
        assert reply["type"] == "pose_update"
        assert reply["payload"]["steps"] == 1

    def test_single_frame_gesture_rejected(self, artifacts):
        sess = Session(artifacts)
        _hello(sess)
        sess.handle({"type": "reset", "session": sess.id, "payload": {"seed": 6}})
        reply = sess.handle({"type": "gesture", "session": sess.id,
                             "payload": {"frames": [[0.1, 0.1, 0.2, 0.2]]}})
        assert reply["type"] == "error"

    def test_agent_gesture_drives_episode_to_success(self, artifacts):
        # the 2d user model is the oracle: with the analytic interface the
        # episode must terminate with the bonus
        sess = Session(artifacts)
        _hello(sess)
        sess.handle({"type": "reset", "session": sess.id, "payload": {"seed": 7}})
        for k in range(sess.art.env2d.max_steps):
            reply = sess.handle({"type": "agent_gesture", "session": sess.id,
                                 "payload": {}})
            assert reply["type"] == "pose_update"
            assert np.asarray(reply["payload"]["gesture"]).shape == (2, 4)
            if reply["payload"]["done"]:
                break
        assert reply["payload"]["done"] is True
        assert reply["payload"]["success"] is True
        assert reply["payload"]["reward"] > 20.0


class TestLatent:
    def test_zero_code_matches_direct_decode(self, artifacts):
        sess = Session(artifacts)
        _hello(sess)
        reply = sess.handle({"type": "latent", "session": sess.id,
                             "payload": {"z": [0.0] * 8, "T": 10}})
        assert reply["type"] == "latent"
        got = np.asarray(reply["payload"]["gesture"])
        want = vae.decode(np.zeros(8), 10, artifacts.vae_ps, artifacts.vae_cfg)
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_variable_length(self, artifacts):
        sess = Session(artifacts)
        _hello(sess)
        for t_steps in (2, 10, 30):
            reply = sess.handle({"type": "latent", "session": sess.id,
                                 "payload": {"z": [0.1] * 8, "T": t_steps}})
            assert np.asarray(reply["payload"]["gesture"]).shape == (t_steps, 4)

    def test_bad_latent_rejected(self, artifacts):
        sess = Session(artifacts)
        _hello(sess)
        reply = sess.handle({"type": "latent", "session": sess.id,
                             "payload": {"z": [0.0] * 3}})
        assert reply["type"] == "error"


class TestReplayEquality:
    def test_service_path_reproduces_library_rollout(self, artifacts):
        # record an oracle + analytic episode with the library
        env_cfg = artifacts.env2d
        rng = np.random.default_rng(123)
        trace = sim.run_episode_2d(env_cfg, rng, lambda s, fp: geo.solve_affine2d(fp),
                                   record=True)
        # replay the recorded finger pairs through the service
        sess = Session(artifacts)
        _hello(sess)
        sess.handle({"type": "reset", "session": sess.id, "payload": {"seed": 123}})
        for row in trace["rows"]:
            f = row["fingers"]
            frames = [[f[0], f[1], f[2], f[3]], [f[4], f[5], f[6], f[7]]]
            reply = sess.handle({"type": "gesture", "session": sess.id,
                                 "payload": {"frames": frames}})
            assert reply["type"] == "pose_update"
            assert abs(reply["payload"]["reward"] - row["reward"]) < 1e-6
            if not reply["payload"]["done"]:
                np.testing.assert_allclose(reply["payload"]["pose"], row["theta"], atol=1e-6)
        assert reply["payload"]["done"] is True

    def test_session_isolation_under_interleaving(self, artifacts):
        rng = np.random.default_rng(9)
        a, b = Session(artifacts), Session(artifacts)
        _hello(a, seed=1)
        _hello(b, seed=2)
        a.handle({"type": "reset", "session": a.id, "payload": {"seed": 1}})
        b.handle({"type": "reset", "session": b.id, "payload": {"seed": 2}})

        def play(sess, moves):
            out = []
            for f in moves:
                r = sess.handle({"type": "gesture", "session": sess.id,
                                 "payload": {"frames": f}})
                out.append(r["payload"]["pose"])
            return out

        moves = [[[0.3, 0.3, 0.7, 0.7], [0.31, 0.3, 0.71, 0.7]] for _ in range(6)]
        # interleaved
        inter_a, inter_b = [], []
        for f in moves:
            inter_a.append(a.handle({"type": "gesture", "session": a.id,
                                     "payload": {"frames": f}})["payload"]["pose"])
            inter_b.append(b.handle({"type": "gesture", "session": b.id,
                                     "payload": {"frames": f}})["payload"]["pose"])
        # sequential replay with fresh sessions
        a2, b2 = Session(artifacts), Session(artifacts)
        _hello(a2, seed=1)
        _hello(b2, seed=2)
        a2.handle({"type": "reset", "session": a2.id, "payload": {"seed": 1}})
        b2.handle({"type": "reset", "session": b2.id, "payload": {"seed": 2}})
        np.testing.assert_allclose(play(a2, moves), inter_a)
        np.testing.assert_allclose(play(b2, moves), inter_b)


class TestWebSocketTransport:
    def test_round_trip_over_real_socket(self, artifacts):
        import websockets

        async def scenario():
            ready = asyncio.Event()
            server = asyncio.create_task(serve(artifacts, "127.0.0.1", 8977, ready))
            await asyncio.wait_for(ready.wait(), 5)
            try:
                async with websockets.connect("ws://127.0.0.1:8977") as ws:
                    await ws.send(json.dumps({"type": "hello",
                                              "payload": {"env": "2d", "seed": 3}}))
                    hello = json.loads(await ws.recv())
                    assert hello["type"] == "hello"
                    sid = hello["payload"]["session"]
                    await ws.send(json.dumps({"type": "reset", "session": sid,
                                              "payload": {"seed": 3}}))
                    ru = json.loads(await ws.recv())
                    assert ru["type"] == "pose_update"
                    await ws.send("this is not json")
                    err = json.loads(await ws.recv())
                    assert err["type"] == "error"
            finally:
                server.cancel()

        asyncio.run(scenario())
