/**
 * Two-finger gesture capture from pointer events.
 *
 * Real multi-touch uses two pointer ids. With a mouse, holding the modifier
 * key anchors a virtual second finger at the press position while the
 * pointer moves the first. Coordinates are normalized to [0, 1] inside the
 * capture surface and clamped; frames are recorded per move and the gesture
 * is emitted on release when it holds at least two frames.
 */

export interface PointerSample {
  id: number;
  kind: "down" | "move" | "up";
  x: number; // surface coordinates in pixels
  y: number;
  modifier?: boolean;
}

export type GestureFrames = number[][]; // rows [f1x, f1y, f2x, f2y]

export class GestureCapture {
  private fingers = new Map<number, [number, number]>();
  private anchor: [number, number] | null = null;
  private frames: GestureFrames = [];
  private order: number[] = [];
  hint = "";

  constructor(
    private width: number,
    private height: number,
  ) {}

  private norm(x: number, y: number): [number, number] {
    const clamp = (v: number) => Math.min(1, Math.max(0, v));
    return [clamp(x / this.width), clamp(y / this.height)];
  }

  active(): boolean {
    return this.fingers.size > 0 || this.anchor !== null;
  }

  /** Feed one pointer event; returns the finished gesture on release. */
  process(s: PointerSample): GestureFrames | null {
    const p = this.norm(s.x, s.y);
    if (s.kind === "down") {
      if (s.modifier && this.fingers.size === 0) {
        this.anchor = p; // virtual second finger for mouse users
      }
      if (!this.fingers.has(s.id)) {
        this.order.push(s.id);
      }
      this.fingers.set(s.id, p);
      this.record();
      return null;
    }
    if (s.kind === "move") {
      if (!this.fingers.has(s.id)) return null;
      this.fingers.set(s.id, p);
      this.record();
      return null;
    }
    // up
    if (!this.fingers.has(s.id)) return null;
    this.fingers.set(s.id, p);
    this.record();
    this.fingers.delete(s.id);
    this.order = this.order.filter((i) => i !== s.id);
    if (this.fingers.size > 0) return null; // wait for the other finger
    const out = this.frames;
    this.frames = [];
    this.anchor = null;
    if (out.length < 2) {
      this.hint = "gesture too short: drag with two fingers (or hold the modifier key)";
      return null;
    }
    this.hint = "";
    return out;
  }

  private record() {
    const pair = this.currentPair();
    if (pair) this.frames.push(pair);
  }

  private currentPair(): number[] | null {
    const ids = this.order.filter((i) => this.fingers.has(i));
    if (ids.length >= 2) {
      const a = this.fingers.get(ids[0])!;
      const b = this.fingers.get(ids[1])!;
      return [a[0], a[1], b[0], b[1]];
    }
    if (ids.length === 1 && this.anchor) {
      const a = this.fingers.get(ids[0])!;
      return [a[0], a[1], this.anchor[0], this.anchor[1]];
    }
    return null;
  }
}
