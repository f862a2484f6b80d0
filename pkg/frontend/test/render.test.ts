import { describe, expect, it } from "vitest";

import { renderScene } from "../src/render.js";
import { PoseUpdate } from "../src/wire.js";

const SIZE = 300;

function scene2d(overrides: Partial<PoseUpdate> = {}): PoseUpdate {
  return {
    pose: [1, 0, 0, 0],
    object_vertices: [[0.3, 0.3], [0.7, 0.3], [0.7, 0.6], [0.3, 0.6]],
    target_vertices: [[0.35, 0.4], [0.65, 0.4], [0.65, 0.6], [0.35, 0.6]],
    reward: -0.8,
    episode_reward: -4.2,
    done: false,
    success: false,
    steps: 3,
    ...overrides,
  };
}

function scene3d(pose: number[]): PoseUpdate {
  return {
    pose,
    object_vertices: [[pose[0], pose[1], pose[2]], [pose[0], pose[1], pose[2] + 1]],
    target_vertices: [[0, 0, 0], [0, 0, 1]],
    reward: -1.5,
    episode_reward: -12,
    done: false,
    success: false,
    steps: 9,
    ...{},
  };
}

describe("scene rendering", () => {
  it("draws target and object polygons plus a status line", () => {
    const cmds = renderScene("2d", scene2d(), null, SIZE);
    const polys = cmds.filter((c) => c.kind === "poly");
    expect(polys.length).toBeGreaterThanOrEqual(2);
    const text = cmds.find((c) => c.kind === "text");
    expect(text?.text).toContain("step 3");
    expect(text?.text).toContain("-0.80");
  });

  it("success banner appears when done", () => {
    const cmds = renderScene("2d", scene2d({ done: true, success: true, steps: 41 }), null, SIZE);
    const text = cmds.find((c) => c.kind === "text");
    expect(text?.text).toContain("SOLVED in 41 steps");
    expect(text?.text).toContain("reset");
  });

  it("timeout banner when done without success", () => {
    const cmds = renderScene("2d", scene2d({ done: true, success: false, steps: 200 }), null, SIZE);
    expect(cmds.find((c) => c.kind === "text")?.text).toContain("timeout");
  });

  it("identity pose puts both 3d arrows at canonical positions", () => {
    const cmds = renderScene("3d", scene3d([0, 0, 0, 0, 0, 0]), null, SIZE);
    const polys = cmds.filter((c) => c.kind === "poly" && c.color === "#d62728");
    // target arrow projected: tail (0,0,0) -> screen center of the camera panel
    const tail = polys[0]!.pts![0];
    expect(tail[0]).toBeCloseTo(0.5 * SIZE, 5);
    expect(tail[1]).toBeCloseTo(0.5 * SIZE, 5);
    // green camera arrow is fixed in view
    const green = cmds.filter((c) => c.kind === "poly" && c.color === "#2ca02c");
    expect(green[0]!.pts![0][0]).toBeCloseTo(0.5 * SIZE, 5);
  });

  it("gesture overlay mirrors the sent frames", () => {
    const gesture = [
      [0.1, 0.1, 0.9, 0.9],
      [0.2, 0.1, 0.8, 0.9],
    ];
    const cmds = renderScene("2d", scene2d(), gesture, SIZE);
    const blue = cmds.find((c) => c.kind === "poly" && c.color === "#1f77b4");
    expect(blue).toBeDefined();
    expect(blue!.pts![0][0]).toBeCloseTo(0.1 * 0.3 * SIZE, 6);
    expect(blue!.pts![1][0]).toBeCloseTo(0.2 * 0.3 * SIZE, 6);
  });

  it("every frame starts with a clear command", () => {
    const cmds = renderScene("2d", scene2d(), null, SIZE);
    expect(cmds[0].kind).toBe("clear");
  });
});
