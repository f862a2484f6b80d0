/**
 * Browser entry point: canvas panels, pointer capture, latent sliders.
 * Configuration is limited to the server address (?server=ws://host:port).
 */

import { GestureCapture } from "./capture.js";
import { initialLatentState, LATENT_DIM, setLength, setSlider } from "./latent.js";
import { renderScene, DrawCmd } from "./render.js";
import { ClientSession } from "./session.js";
import { EnvKind } from "./wire.js";

const PANEL = 360;

function drawAll(ctx: CanvasRenderingContext2D, cmds: DrawCmd[], w: number, h: number) {
  for (const c of cmds) {
    if (c.kind === "clear") {
      ctx.fillStyle = "#fff";
      ctx.fillRect(0, 0, w, h);
      ctx.strokeStyle = "#888";
      ctx.strokeRect(0, 0, Math.min(w, PANEL), h);
    } else if (c.kind === "poly" && c.pts && c.pts.length >= 2) {
      ctx.strokeStyle = c.color ?? "#000";
      ctx.lineWidth = c.width ?? 2;
      ctx.beginPath();
      ctx.moveTo(c.pts[0][0], c.pts[0][1]);
      for (const [x, y] of c.pts.slice(1)) ctx.lineTo(x, y);
      ctx.stroke();
    } else if (c.kind === "text" && c.at) {
      ctx.fillStyle = c.color ?? "#333";
      ctx.font = "13px sans-serif";
      ctx.fillText(c.text ?? "", c.at[0], c.at[1]);
    }
  }
}

async function start() {
  const params = new URLSearchParams(location.search);
  const server = params.get("server") ?? "ws://127.0.0.1:8765";
  const env = (params.get("env") ?? "2d") as EnvKind;

  const canvas = document.getElementById("scene") as HTMLCanvasElement;
  const gestureCanvas = document.getElementById("latent-view") as HTMLCanvasElement;
  const status = document.getElementById("status")!;
  const ctx = canvas.getContext("2d")!;
  const gctx = gestureCanvas.getContext("2d")!;

  const ws = new WebSocket(server);
  await new Promise((ok, bad) => {
    ws.addEventListener("open", ok);
    ws.addEventListener("error", bad);
  });
  const session = new ClientSession(ws as never);
  await session.hello(env, 0);
  await session.reset();

  const repaint = () => {
    if (session.scene) {
      drawAll(ctx, renderScene(env, session.scene, session.lastGesture, PANEL),
              canvas.width, canvas.height);
    }
  };
  repaint();

  // pointer capture (multi-touch, or mouse with Alt for the second finger)
  const capture = new GestureCapture(PANEL, PANEL);
  const toSample = (ev: PointerEvent, kind: "down" | "move" | "up") => {
    const r = canvas.getBoundingClientRect();
    return { id: ev.pointerId, kind, x: ev.clientX - r.left, y: ev.clientY - r.top,
             modifier: ev.altKey };
  };
  const maybeSend = async (frames: number[][] | null) => {
    if (!frames) {
      status.textContent = capture.hint;
      return;
    }
    try {
      const update = await session.sendGesture(frames);
      status.textContent = update.done
        ? (update.success ? "solved!" : "timeout") : "";
      repaint();
    } catch (e) {
      status.textContent = String(e);
    }
  };
  canvas.addEventListener("pointerdown", (ev) => {
    canvas.setPointerCapture(ev.pointerId);
    void maybeSend(capture.process(toSample(ev, "down")));
  });
  canvas.addEventListener("pointermove", (ev) => {
    if (capture.active()) void maybeSend(capture.process(toSample(ev, "move")));
  });
  canvas.addEventListener("pointerup", (ev) => {
    void maybeSend(capture.process(toSample(ev, "up")));
  });

  document.getElementById("reset")!.addEventListener("click", async () => {
    await session.reset();
    status.textContent = "";
    repaint();
  });
  document.getElementById("agent")!.addEventListener("click", async () => {
    await session.agentGesture();
    repaint();
  });

  // latent explorer
  let latent = initialLatentState();
  const sliders = document.getElementById("sliders")!;
  const redrawLatent = async () => {
    try {
      const g = await session.latent(latent.z, latent.T);
      gctx.fillStyle = "#fff";
      gctx.fillRect(0, 0, gestureCanvas.width, gestureCanvas.height);
      drawAll(gctx, renderScene("2d", {
        pose: [], object_vertices: [], target_vertices: [], reward: 0,
        episode_reward: 0, done: false, success: false, steps: 0,
      } as never, g, gestureCanvas.width).filter((c) => c.kind === "poly"),
        gestureCanvas.width, gestureCanvas.height);
    } catch (e) {
      status.textContent = String(e);
    }
  };
  for (let d = 0; d < LATENT_DIM; d++) {
    const row = document.createElement("label");
    row.textContent = `z${d} `;
    const input = document.createElement("input");
    Object.assign(input, { type: "range", min: -2, max: 2, step: 0.05, value: 0 });
    input.addEventListener("input", () => {
      latent = setSlider(latent, d, Number(input.value));
      void redrawLatent();
    });
    row.appendChild(input);
    sliders.appendChild(row);
  }
  const tRow = document.createElement("label");
  tRow.textContent = "T ";
  const tInput = document.createElement("input");
  Object.assign(tInput, { type: "range", min: 2, max: 30, step: 1, value: 10 });
  tInput.addEventListener("input", () => {
    latent = setLength(latent, Number(tInput.value));
    void redrawLatent();
  });
  tRow.appendChild(tInput);
  sliders.appendChild(tRow);
  if (params.get("latent") !== "off") void redrawLatent();
}

start().catch((e) => {
  document.getElementById("status")!.textContent = `connection failed: ${e}`;
});
