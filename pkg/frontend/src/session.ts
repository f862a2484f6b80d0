/**
 * Client session: one socket, request/reply strictly serialized, and a scene
 * mirror that only ever holds server-confirmed state.
 */

import {
  Envelope,
  EnvKind,
  HelloPayload,
  PoseUpdate,
  decode,
  encode,
  gestureMsg,
  agentGestureMsg,
  helloMsg,
  latentMsg,
  resetMsg,
} from "./wire.js";

/** Minimal socket surface satisfied by both the browser WebSocket and `ws`. */
export interface WireSocket {
  send(data: string): void;
  addEventListener(type: "message", cb: (ev: { data: unknown }) => void): void;
  close(): void;
}

export class ServiceError extends Error {}

export class ClientSession {
  private socket: WireSocket;
  private queue: Array<{
    resolve: (env: Envelope) => void;
    reject: (err: Error) => void;
  }> = [];

  sessionId = "";
  env: EnvKind = "2d";
  gestureLen = 2;
  scene: PoseUpdate | null = null;
  lastGesture: number[][] | null = null;

  constructor(socket: WireSocket) {
    this.socket = socket;
    socket.addEventListener("message", (ev) => this.onMessage(String(ev.data)));
  }

  private onMessage(raw: string) {
    const pending = this.queue.shift();
    if (!pending) return; // unsolicited; servers never push, ignore defensively
    let env: Envelope;
    try {
      env = decode(raw);
    } catch (e) {
      pending.reject(e as Error);
      return;
    }
    pending.resolve(env);
  }

  private request(msg: Envelope): Promise<Envelope> {
    return new Promise((resolve, reject) => {
      this.queue.push({ resolve, reject });
      this.socket.send(encode(msg));
    });
  }

  private async expect<T>(msg: Envelope, type: string): Promise<T> {
    const reply = await this.request(msg);
    if (reply.type === "error") {
      throw new ServiceError(String((reply.payload as { message?: string }).message));
    }
    if (reply.type !== type) {
      throw new ServiceError(`expected ${type}, got ${reply.type}`);
    }
    return reply.payload as T;
  }

  async hello(env: EnvKind, seed: number, iface?: string): Promise<HelloPayload> {
    const p = await this.expect<HelloPayload>(helloMsg(env, seed, iface), "hello");
    this.sessionId = p.session;
    this.env = p.env;
    this.gestureLen = p.gesture_len;
    return p;
  }

  async reset(seed?: number): Promise<PoseUpdate> {
    const p = await this.expect<PoseUpdate>(resetMsg(this.sessionId, seed), "pose_update");
    this.scene = p;
    this.lastGesture = null;
    return p;
  }

  async sendGesture(frames: number[][]): Promise<PoseUpdate> {
    const p = await this.expect<PoseUpdate>(
      gestureMsg(this.sessionId, frames),
      "pose_update",
    );
    this.scene = p;
    this.lastGesture = frames;
    return p;
  }

  async agentGesture(): Promise<PoseUpdate> {
    const p = await this.expect<PoseUpdate>(agentGestureMsg(this.sessionId), "pose_update");
    this.scene = p;
    this.lastGesture = p.gesture ?? null;
    return p;
  }

  async latent(z: number[], T: number): Promise<number[][]> {
    const p = await this.expect<{ gesture: number[][] }>(
      latentMsg(this.sessionId, z, T),
      "latent",
    );
    return p.gesture;
  }

  close() {
    this.socket.close();
  }
}
