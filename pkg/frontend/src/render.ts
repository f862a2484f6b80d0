/**
 * Scene rendering as pure draw-command lists; the canvas adapter in main.ts
 * just replays them. Camera view on the left (the camera's own green arrow
 * fixed in view, the red target arrow projected), orthographic bird's-eye
 * view on the right, gesture overlay top left, reward/steps banner.
 */

import { PoseUpdate, EnvKind } from "./wire.js";

export interface DrawCmd {
  kind: "clear" | "poly" | "text";
  pts?: [number, number][];
  color?: string;
  width?: number;
  text?: string;
  at?: [number, number];
}

const GREEN = "#2ca02c";
const RED = "#d62728";
const BLUE = "#1f77b4";
const PURPLE = "#9467bd";

function rotFromEuler(rx: number, ry: number, rz: number): number[][] {
  const [ca, sa] = [Math.cos(rx), Math.sin(rx)];
  const [cb, sb] = [Math.cos(ry), Math.sin(ry)];
  const [cc, sc] = [Math.cos(rz), Math.sin(rz)];
  return [
    [cc * cb, cc * sb * sa - sc * ca, sc * sa + cc * sb * ca],
    [sc * cb, cc * ca + sc * sb * sa, sc * sb * ca - cc * sa],
    [-sb, cb * sa, cb * ca],
  ];
}

function projectToCamera(pose: number[], pts: number[][], size: number): [number, number][] {
  const r = rotFromEuler(pose[3], pose[4], pose[5]);
  const out: [number, number][] = [];
  for (const p of pts) {
    const d = [p[0] - pose[0], p[1] - pose[1], p[2] - pose[2]];
    // camera frame: R^T d
    const cx = r[0][0] * d[0] + r[1][0] * d[1] + r[2][0] * d[2];
    const cy = r[0][1] * d[0] + r[1][1] * d[1] + r[2][1] * d[2];
    const cz = r[0][2] * d[0] + r[1][2] * d[1] + r[2][2] * d[2];
    const zz = Math.max(0.2, cz + 3.0);
    out.push([(0.5 + 0.8 * (cx / zz)) * size, (0.5 + 0.8 * (cy / zz)) * size]);
  }
  return out;
}

function arrow(pts: [number, number][], color: string, width = 3): DrawCmd[] {
  const cmds: DrawCmd[] = [{ kind: "poly", pts, color, width }];
  if (pts.length >= 2) {
    const [x0, y0] = pts[pts.length - 2];
    const [x1, y1] = pts[pts.length - 1];
    const dx = x1 - x0;
    const dy = y1 - y0;
    const n = Math.hypot(dx, dy);
    if (n > 1e-9) {
      const ux = dx / n;
      const uy = dy / n;
      const s = 7;
      cmds.push({
        kind: "poly",
        color,
        width,
        pts: [
          [x1 - s * ux + 0.5 * s * -uy, y1 - s * uy + 0.5 * s * ux],
          [x1, y1],
          [x1 - s * ux - 0.5 * s * -uy, y1 - s * uy - 0.5 * s * ux],
        ],
      });
    }
  }
  return cmds;
}

export function renderScene(
  env: EnvKind,
  scene: PoseUpdate,
  gesture: number[][] | null,
  size: number,
): DrawCmd[] {
  const cmds: DrawCmd[] = [{ kind: "clear" }];
  if (env === "2d") {
    const toPx = (v: number[]): [number, number] => [v[0] * size, v[1] * size];
    const target = scene.target_vertices.map(toPx);
    const object = scene.object_vertices.map(toPx);
    cmds.push({ kind: "poly", pts: [...target, target[0]], color: "#000", width: 2 });
    cmds.push({ kind: "poly", pts: [...object, object[0]], color: RED, width: 2 });
  } else {
    // camera view: own arrow fixed, target projected by the current pose
    cmds.push(...arrow([[0.5 * size, 0.62 * size], [0.5 * size, 0.38 * size]], GREEN));
    cmds.push(...arrow(projectToCamera(scene.pose, scene.target_vertices, size), RED));
    // bird's eye (x-z plane), offset one panel to the right
    const ortho = (p: number[]): [number, number] => [
      size + 10 + ((p[0] + 4) / 8) * size,
      ((4 - p[2]) / 8) * size,
    ];
    cmds.push(...arrow(scene.target_vertices.map(ortho), RED));
    cmds.push(...arrow(scene.object_vertices.map(ortho), GREEN));
  }
  if (gesture) {
    for (const [i, color] of [[0, BLUE], [1, PURPLE]] as [number, string][]) {
      const pts = gesture.map(
        (row): [number, number] => [row[2 * i] * 0.3 * size, row[2 * i + 1] * 0.3 * size],
      );
      cmds.push(...arrow(pts, color, 2));
    }
  }
  const status = scene.done
    ? scene.success
      ? `SOLVED in ${scene.steps} steps — reset to go again`
      : `timeout at ${scene.steps} steps — reset to retry`
    : `step ${scene.steps}  reward ${scene.reward.toFixed(2)}  total ${scene.episode_reward.toFixed(2)}`;
  cmds.push({ kind: "text", text: status, at: [8, size - 10], color: "#333" });
  return cmds;
}
